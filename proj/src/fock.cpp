#include "fockcast/fock.hpp"

#include "fockcast/errors.hpp"
#include "fockcast/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace fockcast {
namespace {

using cd = std::complex<double>;

constexpr std::size_t kMomentBlock = 1024;
constexpr std::size_t kRowChunk = 64;

double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

}  // namespace

double WeightFamily::log_weight(int n) const {
    if (n < 0) throw ValidationError("weight index must be nonnegative");
    return n == 0 ? 0.0 : sigma_w * std::pow(static_cast<double>(n), p);
}

double WeightFamily::operator()(int n) const { return std::exp(log_weight(n)); }

double WeightFamily::inv_sq(int n) const { return std::exp(-2.0 * log_weight(n)); }

double check_subconvolutive(const std::function<double(int)>& log_weight, int n_max) {
    if (n_max < 0) throw ValidationError("n_max must be nonnegative");
    double worst = 0.0;
    for (int n = 0; n <= n_max; ++n) {
        const double ln = log_weight(n);
        double s = 0.0;
        for (int k = 0; k <= n; ++k) s += std::exp(-2.0 * (log_weight(k) + log_weight(n - k) - ln));
        worst = std::max(worst, s);
    }
    return worst;
}

double check_subconvolutive(const WeightFamily& weights, int n_max) {
    return check_subconvolutive([&](int n) { return weights.log_weight(n); }, n_max);
}

std::complex<double> fock_inner_product_small(const std::vector<Eigen::VectorXcd>& f,
                                              const std::vector<Eigen::VectorXcd>& g, const WeightFamily& weights) {
    const std::size_t n = f.size();
    if (g.size() != n) throw ValidationError("inner product needs equal numbers of factors");
    if (n > 4) throw ValidationError("permutation oracle supports at most 4 factors");
    std::vector<int> s(n);
    std::vector<int> t(n);
    std::iota(s.begin(), s.end(), 0);
    cd total = 0.0;
    do {
        std::iota(t.begin(), t.end(), 0);
        do {
            cd prod = 1.0;
            for (std::size_t i = 0; i < n; ++i) prod *= f[static_cast<std::size_t>(s[i])].dot(g[static_cast<std::size_t>(t[i])]);
            total += prod;
        } while (std::next_permutation(t.begin(), t.end()));
    } while (std::next_permutation(s.begin(), s.end()));
    const double w = weights(static_cast<int>(n));
    const double nf = factorial(static_cast<int>(n));
    return total * (w * w / (nf * nf));
}

std::complex<double> fock_inner_product_small(std::complex<double> a, std::complex<double> b,
                                              const WeightFamily& weights) {
    const double w = weights(0);
    return w * w * std::conj(a) * b;
}

std::complex<double> permanent(const Eigen::MatrixXcd& a) {
    const Eigen::Index n = a.rows();
    if (a.cols() != n) throw ValidationError("permanent needs a square matrix");
    if (n == 0) return 1.0;
    if (n > 30) throw ValidationError("permanent size too large");
    cd total = 0.0;
    const std::uint64_t subsets = std::uint64_t{1} << n;
    for (std::uint64_t mask = 1; mask < subsets; ++mask) {
        cd prod = 1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            cd row = 0.0;
            for (Eigen::Index j = 0; j < n; ++j)
                if (mask & (std::uint64_t{1} << j)) row += a(i, j);
            prod *= row;
        }
        const int bits = std::popcount(mask);
        total += ((n - bits) % 2 == 0) ? prod : -prod;
    }
    return total;
}

std::complex<double> fock_inner_product(const std::vector<Eigen::VectorXcd>& f, const std::vector<Eigen::VectorXcd>& g,
                                        const WeightFamily& weights) {
    const std::size_t n = f.size();
    if (g.size() != n) throw ValidationError("inner product needs equal numbers of factors");
    Eigen::MatrixXcd gram(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) gram(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = f[a].dot(g[b]);
    const double w = weights(static_cast<int>(n));
    return permanent(gram) * (w * w / factorial(static_cast<int>(n)));
}

std::uint64_t multi_index_count(int d, int m) {
    if (d < 1 || m < 0) throw ValidationError("multi-index table needs d >= 1 and m >= 0");
    // binom(m + 2d, m) built up one factor at a time; each partial value is an integer.
    unsigned __int128 c = 1;
    const unsigned __int128 limit = static_cast<unsigned __int128>(1) << 63;
    const auto slots = static_cast<unsigned __int128>(2 * d);
    for (int k = 1; k <= m; ++k) {
        c = c * (slots + static_cast<unsigned>(k)) / static_cast<unsigned>(k);
        if (c > limit) throw ValidationError("size error: multi-index count exceeds 2^63");
    }
    return static_cast<std::uint64_t>(c);
}

MultiIndexTable::MultiIndexTable(int d, int m) : d_(d), m_(m) {
    const std::uint64_t count = multi_index_count(d, m);
    if (2 * d + 1 > 65535 || m > 255) throw ValidationError("size error: table dimensions out of range");
    const auto total = static_cast<std::size_t>(count);
    positions_.resize(total * static_cast<std::size_t>(m));
    prefix_.resize(total);
    multinomials_.resize(total);
    const int top = 2 * d;
    std::vector<std::uint16_t> seq(static_cast<std::size_t>(m), 0);
    for (std::size_t k = 0; k < total; ++k) {
        if (k > 0) {
            int p = m - 1;
            while (p >= 0 && seq[static_cast<std::size_t>(p)] == top) --p;
            const auto v = static_cast<std::uint16_t>(seq[static_cast<std::size_t>(p)] + 1);
            for (int s = p; s < m; ++s) seq[static_cast<std::size_t>(s)] = v;
            prefix_[k] = static_cast<std::uint8_t>(p);
        } else {
            prefix_[k] = 0;
        }
        std::copy(seq.begin(), seq.end(), positions_.begin() + static_cast<std::ptrdiff_t>(k * static_cast<std::size_t>(m)));
        // m! / prod j_i! as a product of binomials over runs of equal slots.
        unsigned __int128 mult = 1;
        int placed = 0;
        int run = 1;
        for (int s = 1; s <= m; ++s) {
            if (s < m && seq[static_cast<std::size_t>(s)] == seq[static_cast<std::size_t>(s - 1)]) {
                ++run;
                continue;
            }
            placed += run;
            unsigned __int128 c = 1;
            for (int i = 1; i <= run; ++i) c = c * static_cast<unsigned>(placed - run + i) / static_cast<unsigned>(i);
            mult *= c;
            if (mult > (static_cast<unsigned __int128>(1) << 63)) throw ValidationError("size error: multinomial overflow");
            run = 1;
        }
        multinomials_[k] = static_cast<std::uint64_t>(mult);
    }
}

std::vector<int> MultiIndexTable::exponents(std::size_t k) const {
    std::vector<int> j(static_cast<std::size_t>(slots()), 0);
    const std::uint16_t* pos = positions(k);
    for (int s = 0; s < m_; ++s) ++j[pos[s]];
    return j;
}

std::size_t MultiIndexTable::index_of(const std::vector<int>& exponents) const {
    if (static_cast<int>(exponents.size()) != slots()) throw ValidationError("tuple has wrong length");
    std::vector<std::uint16_t> seq;
    for (int s = 0; s < slots(); ++s) {
        if (exponents[static_cast<std::size_t>(s)] < 0) throw ValidationError("tuple entries must be nonnegative");
        seq.insert(seq.end(), static_cast<std::size_t>(exponents[static_cast<std::size_t>(s)]), static_cast<std::uint16_t>(s));
    }
    if (static_cast<int>(seq.size()) != m_) throw ValidationError("tuple does not sum to m");
    std::size_t lo = 0;
    std::size_t hi = size();
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (std::lexicographical_compare(positions(mid), positions(mid) + m_, seq.begin(), seq.end())) lo = mid + 1;
        else hi = mid;
    }
    return lo;
}

std::size_t MultiIndexTable::mirror(std::size_t k) const {
    std::vector<int> j = exponents(k);
    std::reverse(j.begin(), j.end());
    return index_of(j);
}

std::vector<Eigen::Index> select_modes(const KoopmanEigensystem& eigensystem, const Eigen::VectorXd& f, int d) {
    const Eigen::Index pairs = eigensystem.pairs();
    const Eigen::Index n = eigensystem.xi.rows();
    if (f.size() != n) throw ValidationError("observable does not match eigensystem samples");
    if (d < 0) throw ValidationError("number of modes must be nonnegative");
    if (d > pairs)
        throw NumericalError("insufficient-spectrum", "requested " + std::to_string(d) + " modes of " +
                                                          std::to_string(pairs) + " pairs");
    const Eigen::VectorXcd fc = f.cast<cd>();
    const double tol = 1e-12 * std::sqrt(f.squaredNorm() / static_cast<double>(n));
    std::vector<double> amp(static_cast<std::size_t>(pairs + 1), 0.0);
    for (Eigen::Index j = 1; j <= pairs; ++j) {
        const double a = std::abs(eigensystem.xi.col(eigensystem.column(j)).dot(fc)) / static_cast<double>(n);
        amp[static_cast<std::size_t>(j)] = a < tol ? 0.0 : a;
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(pairs));
    std::iota(order.begin(), order.end(), Eigen::Index{1});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        const double aa = amp[static_cast<std::size_t>(a)];
        const double ab = amp[static_cast<std::size_t>(b)];
        if (aa != ab) return aa > ab;
        if (eigensystem.energies[a] != eigensystem.energies[b]) return eigensystem.energies[a] < eigensystem.energies[b];
        return a < b;
    });
    std::vector<Eigen::Index> modes{0};
    modes.insert(modes.end(), order.begin(), order.begin() + d);
    return modes;
}

std::vector<Eigen::Index> slot_columns(const KoopmanEigensystem& eigensystem, const std::vector<Eigen::Index>& modes) {
    if (modes.empty() || modes[0] != 0) throw ValidationError("mode list must start with the constant mode");
    const auto d = static_cast<Eigen::Index>(modes.size()) - 1;
    std::vector<Eigen::Index> cols(static_cast<std::size_t>(2 * d + 1));
    for (Eigen::Index i = 0; i <= d; ++i) {
        const Eigen::Index j = modes[static_cast<std::size_t>(i)];
        if (j < 0 || j > eigensystem.pairs()) throw ValidationError("mode index out of range");
        cols[static_cast<std::size_t>(d + i)] = eigensystem.column(j);
        cols[static_cast<std::size_t>(d - i)] = eigensystem.column(-j);
    }
    return cols;
}

Eigen::MatrixXcd smoothed_eigenfunction_products(const KoopmanEigensystem& eigensystem, const Eigen::MatrixXd& data,
                                                 double eps, const std::vector<Eigen::Index>& modes) {
    if (!(eps > 0.0)) throw ValidationError("smoothing bandwidth must be positive");
    const Eigen::Index n = data.rows();
    if (eigensystem.xi.rows() != n) throw ValidationError("data does not match eigensystem samples");
    const std::vector<Eigen::Index> cols = slot_columns(eigensystem, modes);
    const auto d = static_cast<Eigen::Index>(modes.size()) - 1;
    Eigen::MatrixXcd xi(n, d + 1);
    for (Eigen::Index i = 0; i <= d; ++i) xi.col(i) = eigensystem.xi.col(cols[static_cast<std::size_t>(d + i)]);
    const Eigen::MatrixXd pts = data.transpose();
    const double inv_e2 = 1.0 / (eps * eps);
    const double inv_n = 1.0 / static_cast<double>(n);
    Eigen::MatrixXcd rho(n, 2 * d + 1);
    parallel_for(static_cast<std::size_t>(n), kRowChunk, [&](std::size_t begin, std::size_t end) {
        Eigen::VectorXd kappa(n);
        for (auto r = static_cast<Eigen::Index>(begin); r < static_cast<Eigen::Index>(end); ++r) {
            for (Eigen::Index c = 0; c < n; ++c) kappa[c] = std::exp(-(pts.col(r) - pts.col(c)).squaredNorm() * inv_e2);
            const Eigen::RowVectorXcd row = (kappa.transpose().cast<cd>() * xi) * inv_n;
            rho(r, d) = row[0].real();
            for (Eigen::Index i = 1; i <= d; ++i) {
                rho(r, d + i) = row[i];
                rho(r, d - i) = std::conj(row[i]);
            }
        }
    });
    return rho;
}

Eigen::VectorXd kernel_power_average(const Eigen::MatrixXd& data, const Eigen::VectorXd& f, double eps, int power) {
    if (!(eps > 0.0)) throw ValidationError("smoothing bandwidth must be positive");
    if (power < 1) throw ValidationError("kernel power must be at least 1");
    const Eigen::Index n = data.rows();
    if (f.size() != n) throw ValidationError("observable does not match data");
    const Eigen::MatrixXd pts = data.transpose();
    const double scale = static_cast<double>(power) / (eps * eps);
    Eigen::VectorXd out(n);
    parallel_for(static_cast<std::size_t>(n), kRowChunk, [&](std::size_t begin, std::size_t end) {
        Eigen::VectorXd kappa(n);
        for (auto r = static_cast<Eigen::Index>(begin); r < static_cast<Eigen::Index>(end); ++r) {
            for (Eigen::Index c = 0; c < n; ++c) kappa[c] = std::exp(-(pts.col(r) - pts.col(c)).squaredNorm() * scale);
            out[r] = kappa.dot(f) / kappa.sum();
        }
    });
    return out;
}

Moments compute_moments(const Eigen::VectorXd& f, const Eigen::MatrixXcd& rho, const MultiIndexTable& table) {
    const Eigen::Index n = rho.rows();
    if (f.size() != n) throw ValidationError("observable does not match smoothed eigenfunctions");
    if (rho.cols() != table.slots()) throw ValidationError("smoothed eigenfunctions do not match table");
    const int m = table.m();
    const Eigen::MatrixXcd rows = rho.transpose();
    Moments out;
    out.g.resize(static_cast<Eigen::Index>(table.size()));
    out.h.resize(static_cast<Eigen::Index>(table.size()));
    const double inv_n = 1.0 / static_cast<double>(n);
    parallel_for(table.size(), kMomentBlock, [&](std::size_t begin, std::size_t end) {
        std::vector<cd> acc_g(end - begin, 0.0);
        std::vector<cd> acc_h(end - begin, 0.0);
        std::vector<cd> stack(static_cast<std::size_t>(m) + 1, 1.0);
        for (Eigen::Index s = 0; s < n; ++s) {
            const cd* r = rows.col(s).data();
            const double fs = f[s];
            for (std::size_t k = begin; k < end; ++k) {
                const int start = k == begin ? 0 : table.shared_prefix(k);
                const std::uint16_t* pos = table.positions(k);
                for (int p = start; p < m; ++p)
                    stack[static_cast<std::size_t>(p) + 1] = stack[static_cast<std::size_t>(p)] * r[pos[p]];
                const cd prod = stack[static_cast<std::size_t>(m)];
                acc_h[k - begin] += prod;
                acc_g[k - begin] += fs * prod;
            }
        }
        for (std::size_t k = begin; k < end; ++k) {
            out.g[static_cast<Eigen::Index>(k)] = acc_g[k - begin] * inv_n;
            out.h[static_cast<Eigen::Index>(k)] = acc_h[k - begin] * inv_n;
        }
    });
    return out;
}

GammaEvaluator::GammaEvaluator(const KoopmanEigensystem& eigensystem, const SemigroupBasis& basis, double sigma,
                               double tau, const std::vector<Eigen::Index>& modes) {
    if (!(sigma > 0.0)) throw ValidationError("smoothing time sigma must be positive");
    if (eigensystem.zeta_coeffs.rows() != basis.size()) throw ValidationError("eigensystem does not match basis");
    const std::vector<Eigen::Index> cols = slot_columns(eigensystem, modes);
    const auto d = static_cast<Eigen::Index>(modes.size()) - 1;
    const Eigen::VectorXcd mult = heat_multipliers(basis, sigma + 0.5 * tau).cast<cd>();
    coeffs_.resize(basis.size(), d + 1);
    for (Eigen::Index i = 0; i <= d; ++i)
        coeffs_.col(i) = mult.cwiseProduct(eigensystem.zeta_coeffs.col(cols[static_cast<std::size_t>(d + i)]));
}

Eigen::VectorXcd GammaEvaluator::operator()(const Eigen::VectorXd& phi) const {
    if (phi.size() != coeffs_.rows()) throw ValidationError("basis values have wrong length");
    const Eigen::Index d = coeffs_.cols() - 1;
    const Eigen::VectorXcd smoothed = coeffs_.transpose() * phi.cast<cd>();
    Eigen::VectorXcd gamma(2 * d + 1);
    gamma[d] = 1.0;
    for (Eigen::Index i = 1; i <= d; ++i) {
        gamma[d + i] = std::conj(smoothed[i]);
        gamma[d - i] = smoothed[i];
    }
    return gamma;
}

Eigen::MatrixXcd GammaEvaluator::at(const Eigen::MatrixXd& phi) const {
    if (phi.cols() != coeffs_.rows()) throw ValidationError("basis values have wrong width");
    const Eigen::Index d = coeffs_.cols() - 1;
    const Eigen::MatrixXcd smoothed = phi.cast<cd>() * coeffs_;
    Eigen::MatrixXcd gamma(phi.rows(), 2 * d + 1);
    gamma.col(d).setOnes();
    for (Eigen::Index i = 1; i <= d; ++i) {
        gamma.col(d + i) = smoothed.col(i).conjugate();
        gamma.col(d - i) = smoothed.col(i);
    }
    return gamma;
}

Eigen::MatrixXcd gamma_values(const KoopmanEigensystem& eigensystem, const SemigroupBasis& basis, double sigma,
                              double tau, const std::vector<Eigen::Index>& modes) {
    return GammaEvaluator(eigensystem, basis, sigma, tau, modes).at(basis.phi);
}

FockPredictor::FockPredictor(MultiIndexTable table, std::vector<Eigen::Index> modes, Eigen::VectorXd omegas,
                             Moments moments, Eigen::MatrixXcd rho, Eigen::VectorXd f, GammaEvaluator gamma,
                             WeightFamily weights)
    : table_(std::move(table)),
      modes_(std::move(modes)),
      omegas_(std::move(omegas)),
      moments_(std::move(moments)),
      rho_(std::move(rho)),
      f_(std::move(f)),
      gamma_(std::move(gamma)),
      weights_(weights) {
    const Eigen::Index slots = table_.slots();
    if (static_cast<Eigen::Index>(modes_.size()) != table_.d() + 1) throw ValidationError("mode list does not match table");
    if (omegas_.size() != slots || rho_.cols() != slots || gamma_.d() != table_.d())
        throw ValidationError("predictor parts disagree in torus dimension");
    if (moments_.g.size() != static_cast<Eigen::Index>(table_.size()) || moments_.h.size() != moments_.g.size())
        throw ValidationError("moments do not match table");
    if (f_.size() != rho_.rows()) throw ValidationError("observable does not match smoothed eigenfunctions");
}

void FockPredictor::calibrate_floor(const Eigen::MatrixXcd& gammas) {
    floor_ = 0.0;
    double worst = 0.0;
    for (Eigen::Index r = 0; r < gammas.rows(); ++r) {
        const Value v = evaluate_collapsed(gammas.row(r).transpose(), 0.0);
        worst = std::max(worst, std::abs(v.den));
    }
    floor_ = 1e-12 * worst;
}

Eigen::VectorXcd FockPredictor::lifted_weights(const Eigen::VectorXcd& gamma, double t) const {
    if (gamma.size() != table_.slots()) throw ValidationError("gamma has wrong length");
    Eigen::VectorXcd w(gamma.size());
    for (Eigen::Index i = 0; i < gamma.size(); ++i) w[i] = gamma[i] * std::polar(1.0, -omegas_[i] * t);
    return w;
}

FockPredictor::Value FockPredictor::finish(std::complex<double> num, std::complex<double> den) const {
    if (!(std::abs(den) >= floor_) || std::abs(den) == 0.0)
        throw NumericalError("denominator-underflow", "|h| below the denominator floor");
    Value v;
    v.num = num;
    v.den = den;
    const double s = weights_.inv_sq(table_.m());
    v.g = s * num;
    v.h = s * den;
    v.value = (num / den).real();
    return v;
}

FockPredictor::Value FockPredictor::evaluate_moments(const Eigen::VectorXcd& gamma, double t) const {
    const Eigen::VectorXcd w = lifted_weights(gamma, t);
    const int m = table_.m();
    std::vector<cd> stack(static_cast<std::size_t>(m) + 1, 1.0);
    cd num = 0.0;
    cd den = 0.0;
    for (std::size_t k = 0; k < table_.size(); ++k) {
        const std::uint16_t* pos = table_.positions(k);
        for (int p = table_.shared_prefix(k); p < m; ++p)
            stack[static_cast<std::size_t>(p) + 1] = stack[static_cast<std::size_t>(p)] * w[pos[p]];
        const cd term = static_cast<double>(table_.multinomial(k)) * stack[static_cast<std::size_t>(m)];
        num += moments_.g[static_cast<Eigen::Index>(k)] * term;
        den += moments_.h[static_cast<Eigen::Index>(k)] * term;
    }
    return finish(num, den);
}

FockPredictor::Value FockPredictor::evaluate_collapsed(const Eigen::VectorXcd& gamma, double t) const {
    const Eigen::VectorXcd w = lifted_weights(gamma, t);
    const Eigen::VectorXcd S = rho_ * w;
    const int m = table_.m();
    cd num = 0.0;
    cd den = 0.0;
    for (Eigen::Index s = 0; s < S.size(); ++s) {
        cd power = 1.0;
        for (int p = 0; p < m; ++p) power *= S[s];
        num += f_[s] * power;
        den += power;
    }
    const double inv_n = 1.0 / static_cast<double>(S.size());
    return finish(num * inv_n, den * inv_n);
}

FockPredictor::Value FockPredictor::evaluate(const Eigen::VectorXcd& gamma, double t, PredictorPath path) const {
    return path == PredictorPath::moments ? evaluate_moments(gamma, t) : evaluate_collapsed(gamma, t);
}

double predict_fock(const FockPredictor& predictor, const NystromExtension& nystrom, const Eigen::VectorXd& x,
                    double t) {
    return predictor.evaluate_moments(predictor.gamma()(nystrom.phi(x)), t).value;
}

double predict_fock_collapsed(const FockPredictor& predictor, const NystromExtension& nystrom,
                              const Eigen::VectorXd& x, double t) {
    return predictor.evaluate_collapsed(predictor.gamma()(nystrom.phi(x)), t).value;
}

}  // namespace fockcast
