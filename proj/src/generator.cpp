#include "fockcast/generator.hpp"

#include "blas.hpp"
#include "fockcast/errors.hpp"

#include <Eigen/Cholesky>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>

namespace fockcast {

Eigen::MatrixXd generator_matrix(const SemigroupBasis& basis, const KernelModel& model,
                                 const NystromExtension& nystrom, Eigen::MatrixXd* raw) {
    const Eigen::Index n = model.size();
    const Eigen::Index l = basis.size();
    if (basis.phi.rows() != n || nystrom.R().rows() != n || nystrom.R().cols() != l)
        throw ValidationError("basis, kernel model and extension disagree in size");
    const double nd = static_cast<double>(n);
    const Eigen::MatrixXd Kd = model.kernel_derivative_matrix();
    const Eigen::VectorXd ddot = Kd.rowwise().sum() / nd;
    const Eigen::VectorXd& d = model.d_values();

    // (V phi_j)(x_n) = (K' R)_nj / (lambda_j N d_n) - phi_j(x_n) d'_n / d_n.
    Eigen::MatrixXd vphi = detail::gemm(Kd, nystrom.R());
    for (Eigen::Index j = 0; j < l; ++j) {
        const double scale = 1.0 / (basis.lambdas[j] * nd);
        for (Eigen::Index i = 0; i < n; ++i)
            vphi(i, j) = vphi(i, j) * scale / d[i] - basis.phi(i, j) * ddot[i] / d[i];
    }
    Eigen::MatrixXd vhat = detail::gemm(basis.phi, vphi, true, false) / nd;
    if (raw) *raw = vhat;
    Eigen::MatrixXd vmat = 0.5 * (vhat - vhat.transpose());
    vmat.row(0).setZero();
    vmat.col(0).setZero();
    return vmat;
}

Eigen::MatrixXd assemble_A(const Eigen::MatrixXd& vmat, const SemigroupBasis& basis, double tau) {
    if (vmat.rows() != basis.size() || vmat.cols() != basis.size())
        throw ValidationError("generator matrix does not match basis");
    const Eigen::VectorXd half = heat_multipliers(basis, 0.5 * tau);
    // Elementwise with a symmetric weight keeps A exactly antisymmetric.
    return vmat.cwiseProduct(half * half.transpose());
}

Eigen::MatrixXd assemble_B(const Eigen::MatrixXd& vmat, double z) {
    if (!(z > 0.0)) throw ValidationError("resolvent parameter z must be positive");
    Eigen::MatrixXd B = vmat.transpose() * vmat;
    B.diagonal().array() += z * z;
    return 0.5 * (B + B.transpose());
}

GeneratorMatrices assemble_generator(const Eigen::MatrixXd& vmat, const SemigroupBasis& basis, double tau,
                                     double z) {
    GeneratorMatrices g;
    g.vmat = vmat;
    g.amat = assemble_A(vmat, basis, tau);
    g.bmat = assemble_B(vmat, z);
    g.z = z;
    g.tau = tau;
    return g;
}

GevpSolution solve_gevp(const Eigen::MatrixXd& amat, const Eigen::MatrixXd& bmat) {
    const Eigen::Index l = amat.rows();
    if (amat.cols() != l || bmat.rows() != l || bmat.cols() != l)
        throw ValidationError("GEVP matrices must be square and of equal size");
    const Eigen::LLT<Eigen::MatrixXd> llt(bmat);
    if (llt.info() != Eigen::Success) throw NumericalError("B-not-SPD", "Cholesky factorization of B failed");
    const auto L = llt.matrixL();

    // M = L^-1 A L^-T, real antisymmetric.
    Eigen::MatrixXd X = L.solve(amat);
    Eigen::MatrixXd M = L.solve(X.transpose()).transpose();
    M = 0.5 * (M - M.transpose());

    // H = -i M is Hermitian with eigenvalues b.
    Eigen::MatrixXcd H = std::complex<double>(0.0, -1.0) * M.cast<std::complex<double>>();
    Eigen::VectorXd w(l);
    Eigen::MatrixXcd Y(l, l);
    std::vector<lapack_int> support(2 * static_cast<std::size_t>(std::max<Eigen::Index>(l, 1)));
    lapack_int found = 0;
    if (l > 0) {
        const lapack_int info = LAPACKE_zheevr(
            LAPACK_COL_MAJOR, 'V', 'A', 'L', static_cast<lapack_int>(l),
            reinterpret_cast<lapack_complex_double*>(H.data()), static_cast<lapack_int>(l), 0.0, 0.0, 0, 0, 0.0,
            &found, w.data(), reinterpret_cast<lapack_complex_double*>(Y.data()), static_cast<lapack_int>(l),
            support.data());
        if (info != 0) throw NumericalError("gevp-failed", "Hermitian eigensolver failed (info " + std::to_string(info) + ")");
    }

    GevpSolution sol;
    sol.all = w;
    sol.tolerance = 1e-10 * amat.norm();
    std::vector<Eigen::Index> keep;
    std::vector<double> zeros;
    for (Eigen::Index i = l - 1; i >= 0; --i) {
        if (w[i] > sol.tolerance) keep.push_back(i);
        else if (w[i] >= -sol.tolerance) zeros.push_back(w[i]);
    }
    sol.zero_cluster = Eigen::Map<Eigen::VectorXd>(zeros.data(), static_cast<Eigen::Index>(zeros.size()));
    sol.b.resize(static_cast<Eigen::Index>(keep.size()));
    sol.c.resize(l, static_cast<Eigen::Index>(keep.size()));
    const Eigen::MatrixXcd Uc = Eigen::MatrixXd(llt.matrixU()).cast<std::complex<double>>();
    for (std::size_t k = 0; k < keep.size(); ++k) {
        const auto col = static_cast<Eigen::Index>(k);
        sol.b[col] = w[keep[k]];
        // c = L^-T y; c* B c = y* y = 1.
        sol.c.col(col) = Uc.triangularView<Eigen::Upper>().solve(Y.col(keep[k]));
    }
    return sol;
}

double frequency_from_beta(double b, double z) {
    if (b == 0.0) throw NumericalError("undefined-frequency", "b = 0 has no frequency");
    const double disc = std::max(0.0, 1.0 - 4.0 * z * z * b * b);
    return (1.0 + std::sqrt(disc)) / (2.0 * b);
}

double beta_from_frequency(double omega, double z) { return omega / (z * z + omega * omega); }

KoopmanEigensystem assemble_eigensystem(const GevpSolution& gevp, const SemigroupBasis& basis,
                                        const Eigen::MatrixXd& vmat, double tau, double z, Eigen::Index pairs) {
    const Eigen::Index l = basis.size();
    const Eigen::Index n = basis.phi.rows();
    const Eigen::Index available = gevp.b.size();
    if (pairs < 0) throw ValidationError("number of pairs must be nonnegative");
    if (available < pairs)
        throw NumericalError("insufficient-spectrum", "only " + std::to_string(available) +
                                                          " nonzero pairs, " + std::to_string(pairs) + " requested");
    using cd = std::complex<double>;
    const Eigen::MatrixXcd vc = vmat.cast<cd>();
    const Eigen::MatrixXcd phic = basis.phi.cast<cd>();

    Eigen::MatrixXcd coeffs(l, available);
    Eigen::VectorXd energy(available);
    for (Eigen::Index k = 0; k < available; ++k) {
        Eigen::VectorXcd bc = z * gevp.c.col(k) - vc * gevp.c.col(k);
        Eigen::VectorXcd samples = phic * bc;
        const double norm = std::sqrt(samples.squaredNorm() / static_cast<double>(n));
        if (!(norm > 0.0)) throw NumericalError("insufficient-spectrum", "vanishing eigenfunction");
        Eigen::Index at = 0;
        double best = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double a = std::abs(samples[i]);
            if (a > best) {
                best = a;
                at = i;
            }
        }
        const cd phase = std::conj(samples[at]) / best;
        bc *= phase / norm;
        coeffs.col(k) = bc;
        energy[k] = dirichlet_energy(bc / bc.norm(), basis);
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(available));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return energy[a] < energy[b]; });

    KoopmanEigensystem es;
    es.tau = tau;
    es.z = z;
    const Eigen::Index cols = 2 * pairs + 1;
    es.omegas.resize(cols);
    es.xi.resize(n, cols);
    es.zeta_coeffs.resize(l, cols);
    es.energies.resize(pairs + 1);
    es.betas.resize(pairs + 1);
    es.pair_map.resize(static_cast<std::size_t>(cols));
    es.gevp_index.assign(static_cast<std::size_t>(pairs + 1), -1);
    es.omegas[pairs] = 0.0;
    es.zeta_coeffs.col(pairs).setZero();
    es.zeta_coeffs(0, pairs) = 1.0;
    es.xi.col(pairs).setOnes();
    es.energies[0] = 0.0;
    es.betas[0] = 0.0;
    for (Eigen::Index j = 1; j <= pairs; ++j) {
        const Eigen::Index k = order[static_cast<std::size_t>(j - 1)];
        const double omega = frequency_from_beta(gevp.b[k], z);
        es.omegas[pairs + j] = omega;
        es.omegas[pairs - j] = -omega;
        es.zeta_coeffs.col(pairs + j) = coeffs.col(k);
        es.zeta_coeffs.col(pairs - j) = coeffs.col(k).conjugate();
        es.energies[j] = energy[k];
        es.betas[j] = gevp.b[k];
        es.gevp_index[static_cast<std::size_t>(j)] = k;
    }
    es.xi = phic * es.zeta_coeffs;
    es.xi.col(pairs).setOnes();
    for (Eigen::Index j = 1; j <= pairs; ++j) es.xi.col(pairs - j) = es.xi.col(pairs + j).conjugate();
    for (Eigen::Index c = 0; c < cols; ++c) es.pair_map[static_cast<std::size_t>(c)] = cols - 1 - c;
    return es;
}

}  // namespace fockcast
