#include "fockcast/kernel.hpp"

#include "fockcast/errors.hpp"
#include "fockcast/parallel.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace fockcast {
namespace {

constexpr std::size_t kRowChunk = 64;
// exp(-x) is exactly zero in double precision beyond this argument.
constexpr double kExpCutoff = 746.0;

double squared_distance(const double* a, const double* b, Eigen::Index dim) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < dim; ++i) {
        const double t = a[i] - b[i];
        s += t * t;
    }
    return s;
}

}  // namespace

double rbf_kernel(const Eigen::VectorXd& y1, const Eigen::VectorXd& y2, double eps) {
    if (!(eps > 0.0)) throw ValidationError("kernel bandwidth must be positive");
    return std::exp(-(y1 - y2).squaredNorm() / (eps * eps));
}

double vb_kernel(const Eigen::VectorXd& y1, const Eigen::VectorXd& y2, double eps, double rho1,
                 double rho2) {
    if (!(eps > 0.0) || !(rho1 > 0.0) || !(rho2 > 0.0))
        throw ValidationError("kernel bandwidth and bandwidth function must be positive");
    return std::exp(-(y1 - y2).squaredNorm() / (eps * eps * rho1 * rho2));
}

std::vector<double> default_bandwidth_grid() {
    std::vector<double> grid;
    for (int k = -80; k <= 40; ++k) grid.push_back(std::exp2(k / 4.0));
    return grid;
}

BandwidthScan tune_bandwidth(const Eigen::MatrixXd& points, const std::vector<double>& grid,
                             const Eigen::VectorXd* rho) {
    if (grid.size() < 32) throw ValidationError("bandwidth grid needs at least 32 candidates");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0) || (i > 0 && !(grid[i] > grid[i - 1])))
            throw ValidationError("bandwidth grid must be positive and increasing");
    }
    const Eigen::Index n = points.rows();
    const Eigen::Index dim = points.cols();
    if (n < 2) throw NumericalError("tuning-failed", "need at least two samples");
    if (rho && rho->size() != n) throw ValidationError("bandwidth function has wrong length");
    const Eigen::MatrixXd pts = points.transpose();

    const std::size_t pairs = static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2;
    std::vector<double> u(pairs);
    parallel_for(static_cast<std::size_t>(n), kRowChunk, [&](std::size_t begin, std::size_t end) {
        for (std::size_t a = begin; a < end; ++a) {
            // Pairs (a, b) with b > a are stored contiguously starting at offset(a).
            std::size_t offset = a * static_cast<std::size_t>(n) - a * (a + 1) / 2;
            for (Eigen::Index b = static_cast<Eigen::Index>(a) + 1; b < n; ++b) {
                double d2 = squared_distance(pts.col(static_cast<Eigen::Index>(a)).data(), pts.col(b).data(), dim);
                if (rho) d2 /= (*rho)[static_cast<Eigen::Index>(a)] * (*rho)[b];
                u[offset++] = d2;
            }
        }
    });
    std::sort(u.begin(), u.end());

    BandwidthScan scan;
    scan.epsilons = grid;
    scan.sums.resize(grid.size());
    const double nn = static_cast<double>(n) * static_cast<double>(n);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double e2 = grid[i] * grid[i];
        const auto last = std::upper_bound(u.begin(), u.end(), kExpCutoff * e2);
        const auto count = static_cast<Eigen::Index>(last - u.begin());
        const Eigen::Map<const Eigen::ArrayXd> seg(u.data(), count);
        const double off = count > 0 ? (seg * (-1.0 / e2)).exp().sum() : 0.0;
        scan.sums[i] = (static_cast<double>(n) + 2.0 * off) / nn;
    }

    scan.slopes.assign(grid.size(), std::numeric_limits<double>::quiet_NaN());
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_i = 0;
    for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
        const double a = (std::log(scan.sums[i + 1]) - std::log(scan.sums[i - 1])) /
                         (2.0 * (std::log(grid[i + 1]) - std::log(grid[i - 1])));
        scan.slopes[i] = a;
        if (a > best) {
            best = a;
            best_i = i;
        }
    }
    if (!std::isfinite(best) || best < 1e-3)
        throw NumericalError("tuning-failed", "kernel sum shows no scaling regime (degenerate data?)");
    scan.epsilon = grid[best_i];
    scan.dim = 2.0 * best;
    return scan;
}

BandwidthFunction::BandwidthFunction(const Eigen::MatrixXd& points, double epsilon_tilde, double dim)
    : points_(points.transpose()), epsilon_tilde_(epsilon_tilde), dim_(dim), constant_(false) {
    if (!(epsilon_tilde > 0.0) || !(dim > 0.0))
        throw ValidationError("bandwidth function needs positive eps_tilde and dimension");
    if (points.rows() < 1) throw ValidationError("bandwidth function needs samples");
    const Eigen::Index n = points_.cols();
    values_.resize(n);
    parallel_for(static_cast<std::size_t>(n), kRowChunk, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            values_[static_cast<Eigen::Index>(i)] = (*this)(points_.col(static_cast<Eigen::Index>(i)));
    });
}

BandwidthFunction BandwidthFunction::constant(double value, Eigen::Index n) {
    if (!(value > 0.0)) throw ValidationError("constant bandwidth must be positive");
    BandwidthFunction f;
    f.constant_ = true;
    f.constant_value_ = value;
    f.values_ = Eigen::VectorXd::Constant(n, value);
    return f;
}

double BandwidthFunction::operator()(const Eigen::VectorXd& y) const {
    if (constant_) return constant_value_;
    const Eigen::Index n = points_.cols();
    const double inv = 1.0 / (epsilon_tilde_ * epsilon_tilde_);
    double s = 0.0;
    for (Eigen::Index m = 0; m < n; ++m)
        s += std::exp(-squared_distance(y.data(), points_.col(m).data(), y.size()) * inv);
    s /= static_cast<double>(n);
    if (!(s > 0.0)) throw NumericalError("invalid-kernel", "bandwidth density underflowed");
    return std::pow(s, -1.0 / dim_);
}

double BandwidthFunction::value_and_derivative(const Eigen::VectorXd& y, const Eigen::VectorXd& ydot,
                                               double& derivative) const {
    if (constant_) {
        derivative = 0.0;
        return constant_value_;
    }
    Eigen::VectorXd grad;
    const double value = value_and_gradient(y, grad);
    derivative = grad.dot(ydot);
    return value;
}

double BandwidthFunction::value_and_gradient(const Eigen::VectorXd& y, Eigen::VectorXd& gradient) const {
    gradient = Eigen::VectorXd::Zero(y.size());
    if (constant_) return constant_value_;
    const Eigen::Index n = points_.cols();
    const double inv = 1.0 / (epsilon_tilde_ * epsilon_tilde_);
    double s = 0.0;
    for (Eigen::Index m = 0; m < n; ++m) {
        const double k = std::exp(-squared_distance(y.data(), points_.col(m).data(), y.size()) * inv);
        s += k;
        gradient.noalias() += (-2.0 * inv * k) * (y - points_.col(m));
    }
    s /= static_cast<double>(n);
    gradient /= static_cast<double>(n);
    if (!(s > 0.0)) throw NumericalError("invalid-kernel", "bandwidth density underflowed");
    const double value = std::pow(s, -1.0 / dim_);
    gradient *= -value / (dim_ * s);
    return value;
}

Normalization bistochastic_normalize(const Eigen::MatrixXd& K) {
    const Eigen::Index n = K.rows();
    if (n < 1 || K.cols() != n) throw ValidationError("kernel matrix must be square and nonempty");
    for (Eigen::Index j = 0; j < n; ++j) {
        if (!(K(j, j) > 0.0)) throw NumericalError("invalid-kernel", "kernel diagonal must be positive");
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!(K(i, j) >= 0.0) || !std::isfinite(K(i, j)))
                throw NumericalError("invalid-kernel", "kernel entries must be finite and nonnegative");
        }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    Normalization out;
    out.d = K.rowwise().sum() * inv_n;
    if (out.d.minCoeff() < 1e-300) throw NumericalError("normalization-failed", "degree vector underflow");
    out.q = K * out.d.cwiseInverse() * inv_n;
    if (out.q.minCoeff() < 1e-300) throw NumericalError("normalization-failed", "q vector underflow");

    // B = D^-1 K Q^-1/2, P = B B^T / N.
    Eigen::MatrixXd B = out.d.cwiseInverse().asDiagonal() * K * out.q.cwiseSqrt().cwiseInverse().asDiagonal();
    out.P.resize(n, n);
    cblas_dsyrk(CblasColMajor, CblasLower, CblasNoTrans, static_cast<int>(n), static_cast<int>(n), inv_n,
                B.data(), static_cast<int>(n), 0.0, out.P.data(), static_cast<int>(n));
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = j + 1; i < n; ++i) out.P(j, i) = out.P(i, j);
    return out;
}

KernelModel::KernelModel(const TrajectoryDataset& dataset, double epsilon, BandwidthFunction rho)
    : system_(dataset.system),
      points_(dataset.data.transpose()),
      states_(dataset.states.transpose()),
      epsilon_(epsilon),
      rho_(std::move(rho)) {
    if (!(epsilon > 0.0)) throw ValidationError("kernel bandwidth must be positive");
    if (rho_.sample_values().size() != points_.cols())
        throw ValidationError("bandwidth function does not match dataset");
}

KernelModel KernelModel::build(const TrajectoryDataset& dataset, const KernelSettings& settings,
                               BandwidthScan* rbf_scan, BandwidthScan* vb_scan) {
    double eps_tilde = settings.epsilon_tilde;
    double dim = settings.dim;
    if (eps_tilde <= 0.0 || dim <= 0.0) {
        const BandwidthScan scan = tune_bandwidth(dataset.data, settings.grid);
        if (eps_tilde <= 0.0) eps_tilde = scan.epsilon;
        if (dim <= 0.0) dim = scan.dim;
        if (rbf_scan) *rbf_scan = scan;
    }
    if (!settings.variable_bandwidth) {
        const double eps = settings.epsilon > 0.0 ? settings.epsilon : eps_tilde;
        return KernelModel(dataset, eps, BandwidthFunction::constant(1.0, dataset.size()));
    }
    BandwidthFunction rho(dataset.data, eps_tilde, dim);
    double eps = settings.epsilon;
    if (eps <= 0.0) {
        const BandwidthScan scan = tune_bandwidth(dataset.data, settings.grid, &rho.sample_values());
        eps = scan.epsilon;
        if (vb_scan) *vb_scan = scan;
    }
    return KernelModel(dataset, eps, std::move(rho));
}

void KernelModel::set_normalization(Eigen::VectorXd d, Eigen::VectorXd q) {
    if (d.size() != size() || q.size() != size()) throw ValidationError("normalization vectors have wrong length");
    d_ = std::move(d);
    q_ = std::move(q);
}

double KernelModel::kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    const Eigen::VectorXd yx = system_.embed(x);
    const Eigen::VectorXd yy = system_.embed(y);
    return vb_kernel(yx, yy, epsilon_, rho_(yx), rho_(yy));
}

Eigen::VectorXd KernelModel::kernel_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    const Eigen::VectorXd yx = system_.embed(x);
    const Eigen::VectorXd yy = system_.embed(y);
    Eigen::VectorXd grad_rho;
    const double rx = rho_.value_and_gradient(yx, grad_rho);
    const double ry = rho_(yy);
    const double e2 = epsilon_ * epsilon_;
    const Eigen::VectorXd diff = yx - yy;
    const double d2 = diff.squaredNorm();
    const double k = std::exp(-d2 / (e2 * rx * ry));
    const Eigen::VectorXd g = k * ((-2.0 / (e2 * rx * ry)) * diff + (d2 / (e2 * rx * rx * ry)) * grad_rho);
    return system_.embed_jacobian(x).transpose() * g;
}

Eigen::MatrixXd KernelModel::kernel_matrix() const {
    const Eigen::Index n = size();
    const Eigen::Index dim = points_.rows();
    const Eigen::VectorXd& rho = rho_values();
    const double inv_e2 = 1.0 / (epsilon_ * epsilon_);
    Eigen::MatrixXd K(n, n);
    parallel_for(static_cast<std::size_t>(n), kRowChunk, [&](std::size_t begin, std::size_t end) {
        for (auto j = static_cast<Eigen::Index>(begin); j < static_cast<Eigen::Index>(end); ++j) {
            const double* pj = points_.col(j).data();
            for (Eigen::Index i = 0; i < n; ++i) {
                const double d2 = squared_distance(points_.col(i).data(), pj, dim);
                K(i, j) = std::exp(-d2 * inv_e2 / (rho[i] * rho[j]));
            }
        }
    });
    return K;
}

Eigen::MatrixXd KernelModel::kernel_derivative_matrix() const {
    const Eigen::Index n = size();
    const Eigen::Index dim = points_.rows();
    const Eigen::VectorXd& rho = rho_values();
    const double e2 = epsilon_ * epsilon_;
    // Velocity in data space and the derivative of rho along the flow at each sample.
    Eigen::MatrixXd ydot(dim, n);
    Eigen::VectorXd rho_dot(n);
    parallel_for(static_cast<std::size_t>(n), kRowChunk, [&](std::size_t begin, std::size_t end) {
        for (auto i = static_cast<Eigen::Index>(begin); i < static_cast<Eigen::Index>(end); ++i) {
            const Eigen::VectorXd x = states_.col(i);
            ydot.col(i) = system_.embed_jacobian(x) * system_.vector_field(x);
            double deriv = 0.0;
            rho_.value_and_derivative(points_.col(i), ydot.col(i), deriv);
            rho_dot[i] = deriv;
        }
    });
    Eigen::MatrixXd Kd(n, n);
    parallel_for(static_cast<std::size_t>(n), kRowChunk, [&](std::size_t begin, std::size_t end) {
        for (auto j = static_cast<Eigen::Index>(begin); j < static_cast<Eigen::Index>(end); ++j) {
            const double* pj = points_.col(j).data();
            for (Eigen::Index i = 0; i < n; ++i) {
                const double* pi = points_.col(i).data();
                double d2 = 0.0;
                double proj = 0.0;
                for (Eigen::Index c = 0; c < dim; ++c) {
                    const double t = pi[c] - pj[c];
                    d2 += t * t;
                    proj += ydot(c, i) * t;
                }
                const double scale = e2 * rho[i] * rho[j];
                const double k = std::exp(-d2 / scale);
                Kd(i, j) = k * (-2.0 * proj / scale + d2 * rho_dot[i] / (scale * rho[i]));
            }
        }
    });
    return Kd;
}

Eigen::VectorXd KernelModel::kernel_row(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd y = system_.embed(x);
    const double rx = rho_(y);
    const Eigen::VectorXd& rho = rho_values();
    const double inv_e2 = 1.0 / (epsilon_ * epsilon_);
    const Eigen::Index n = size();
    Eigen::VectorXd k(n);
    for (Eigen::Index m = 0; m < n; ++m)
        k[m] = std::exp(-squared_distance(y.data(), points_.col(m).data(), y.size()) * inv_e2 / (rx * rho[m]));
    return k;
}

void KernelModel::kernel_row_with_derivative(const Eigen::VectorXd& x, Eigen::VectorXd& k,
                                             Eigen::VectorXd& kdot) const {
    const Eigen::VectorXd y = system_.embed(x);
    const Eigen::VectorXd ydot = system_.embed_jacobian(x) * system_.vector_field(x);
    double rx_dot = 0.0;
    const double rx = rho_.value_and_derivative(y, ydot, rx_dot);
    const Eigen::VectorXd& rho = rho_values();
    const double e2 = epsilon_ * epsilon_;
    const Eigen::Index n = size();
    k.resize(n);
    kdot.resize(n);
    for (Eigen::Index m = 0; m < n; ++m) {
        const Eigen::VectorXd diff = y - points_.col(m);
        const double d2 = diff.squaredNorm();
        const double scale = e2 * rx * rho[m];
        k[m] = std::exp(-d2 / scale);
        kdot[m] = k[m] * (-2.0 * ydot.dot(diff) / scale + d2 * rx_dot / (scale * rx));
    }
}

}  // namespace fockcast
