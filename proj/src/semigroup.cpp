#include "fockcast/semigroup.hpp"

#include "blas.hpp"
#include "fockcast/errors.hpp"

#include <lapacke.h>

#include <cmath>
#include <string>

namespace fockcast {
namespace {

constexpr double kMinEigenvalue = 1e-12;

}  // namespace

Eigen::VectorXd laplacian_eigenvalues(const Eigen::VectorXd& lambdas) {
    Eigen::VectorXd etas = Eigen::VectorXd::Zero(lambdas.size());
    if (lambdas.size() < 2) return etas;
    const double gap = 1.0 / lambdas[1] - 1.0;
    if (!(gap > 1e-14)) throw NumericalError("normalization-failed", "eigenvalue 1 is not simple");
    for (Eigen::Index j = 1; j < lambdas.size(); ++j) etas[j] = (1.0 / lambdas[j] - 1.0) / gap;
    etas[1] = 1.0;
    return etas;
}

SemigroupBasis eig_markov(const Eigen::MatrixXd& P, Eigen::Index l, bool full) {
    const Eigen::Index n = P.rows();
    if (n < 1 || P.cols() != n) throw ValidationError("Markov matrix must be square and nonempty");
    if (l < 1 || l > n) throw ValidationError("basis size must lie in [1, N]");

    Eigen::MatrixXd G = P / static_cast<double>(n);
    const Eigen::Index want = full ? n : l;
    Eigen::VectorXd w(n);
    Eigen::MatrixXd Z(n, want);
    std::vector<lapack_int> support(2 * static_cast<std::size_t>(want));
    lapack_int found = 0;
    const lapack_int info = LAPACKE_dsyevr(
        LAPACK_COL_MAJOR, 'V', full ? 'A' : 'I', 'L', static_cast<lapack_int>(n), G.data(),
        static_cast<lapack_int>(n), 0.0, 0.0, static_cast<lapack_int>(n - want + 1), static_cast<lapack_int>(n), 0.0,
        &found, w.data(), Z.data(), static_cast<lapack_int>(n), support.data());
    if (info != 0 || found != want)
        throw NumericalError("normalization-failed", "symmetric eigensolver failed (info " + std::to_string(info) + ")");

    // dsyevr returns ascending order; take the largest l.
    Eigen::VectorXd lambdas(l);
    Eigen::MatrixXd vecs(n, l);
    for (Eigen::Index j = 0; j < l; ++j) {
        lambdas[j] = w[want - 1 - j];
        vecs.col(j) = Z.col(want - 1 - j);
    }
    if (std::abs(lambdas[0] - 1.0) > 1e-8)
        throw NumericalError("normalization-failed",
                             "top Markov eigenvalue " + std::to_string(lambdas[0]) + " differs from 1");

    Eigen::Index kept = l;
    for (Eigen::Index j = 0; j < l; ++j) {
        if (lambdas[j] < kMinEigenvalue) {
            kept = j;
            break;
        }
    }
    if (kept < l)
        log_warning("dropped " + std::to_string(l - kept) + " Markov modes with eigenvalue below 1e-12");

    SemigroupBasis basis;
    basis.lambdas = lambdas.head(kept);
    basis.phi = vecs.leftCols(kept) * std::sqrt(static_cast<double>(n));
    for (Eigen::Index j = 0; j < kept; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (std::abs(basis.phi(i, j)) > 1e-8) {
                if (basis.phi(i, j) < 0.0) basis.phi.col(j) *= -1.0;
                break;
            }
        }
    }
    if ((basis.phi.col(0).array() - 1.0).abs().maxCoeff() > 1e-6)
        throw NumericalError("normalization-failed", "leading eigenvector is not constant");
    basis.phi.col(0).setOnes();
    basis.lambdas[0] = 1.0;
    basis.etas = laplacian_eigenvalues(basis.lambdas);
    return basis;
}

Eigen::VectorXd heat_multipliers(const SemigroupBasis& basis, double tau) {
    if (!(tau >= 0.0)) throw ValidationError("heat time must be nonnegative");
    return (-tau * basis.etas.array()).exp().matrix();
}

double dirichlet_energy(const Eigen::VectorXcd& c, const SemigroupBasis& basis) {
    if (c.size() > basis.size()) throw ValidationError("coefficient vector longer than basis");
    double e = 0.0;
    for (Eigen::Index j = 0; j < c.size(); ++j) e += std::norm(c[j]) / basis.lambdas[j];
    return e - 1.0;
}

Eigen::VectorXcd apply_smoother(const SemigroupBasis& basis, double tau, const Eigen::VectorXcd& c) {
    if (c.size() != basis.size()) throw ValidationError("coefficient vector does not match basis");
    return heat_multipliers(basis, tau).cast<std::complex<double>>().cwiseProduct(c);
}

NystromExtension::NystromExtension(const KernelModel& model, const SemigroupBasis& basis, const Eigen::MatrixXd& K)
    : model_(&model), lambdas_(basis.lambdas) {
    const Eigen::Index n = model.size();
    if (basis.phi.rows() != n) throw ValidationError("basis does not match kernel model");
    if (model.d_values().size() != n) throw ValidationError("kernel model has no normalization");
    const Eigen::MatrixXd scaled = model.d_values().cwiseInverse().asDiagonal() * basis.phi;
    R_ = K.size() == 0 ? detail::gemm(model.kernel_matrix(), scaled) : detail::gemm(K, scaled);
    R_ = (model.q_values() * static_cast<double>(n)).cwiseInverse().asDiagonal() * R_;
}

Eigen::VectorXd NystromExtension::phi(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd k = model_->kernel_row(x);
    const double n = static_cast<double>(k.size());
    const double dx = k.sum() / n;
    if (!(dx > 1e-300)) throw NumericalError("invalid-kernel", "point is outside the kernel support");
    Eigen::VectorXd out = (R_.transpose() * k).cwiseQuotient(lambdas_) / (n * dx);
    out[0] = 1.0;
    return out;
}

void NystromExtension::phi_and_derivative(const Eigen::VectorXd& x, Eigen::VectorXd& phi,
                                          Eigen::VectorXd& dphi) const {
    Eigen::VectorXd k;
    Eigen::VectorXd kdot;
    model_->kernel_row_with_derivative(x, k, kdot);
    const double n = static_cast<double>(k.size());
    const double dx = k.sum() / n;
    const double ddx = kdot.sum() / n;
    if (!(dx > 1e-300)) throw NumericalError("invalid-kernel", "point is outside the kernel support");
    phi = (R_.transpose() * k).cwiseQuotient(lambdas_) / (n * dx);
    phi[0] = 1.0;
    dphi = (R_.transpose() * kdot).cwiseQuotient(lambdas_) / (n * dx) - phi * (ddx / dx);
    dphi[0] = 0.0;
}

Eigen::VectorXd rkhs_basis_eval(const NystromExtension& nystrom, const SemigroupBasis& basis, double tau,
                                const Eigen::VectorXd& x) {
    return heat_multipliers(basis, tau).cwiseSqrt().cwiseProduct(nystrom.phi(x));
}

}  // namespace fockcast
