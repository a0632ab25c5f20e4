#pragma once

#include "fockcast/kernel.hpp"
#include "fockcast/semigroup.hpp"

#include <Eigen/Dense>

#include <vector>

namespace fockcast {

/// Galerkin matrices of the regularized generator problem.
struct GeneratorMatrices {
    /// <phi_i, V phi_j>, antisymmetric, constant row and column zero.
    Eigen::MatrixXd vmat;
    /// Lambda vmat Lambda with Lambda = diag(lambda_{i,tau/2}).
    Eigen::MatrixXd amat;
    /// z^2 I + vmat^T vmat.
    Eigen::MatrixXd bmat;
    double z = 0.0;
    double tau = 0.0;
};

/// Generator matrix in the basis. The raw matrix (1/N) Phi^T (V Phi) is
/// returned through `raw` if requested. The result is antisymmetrized and
/// restricted to zero-mean functions.
Eigen::MatrixXd generator_matrix(const SemigroupBasis& basis, const KernelModel& model,
                                 const NystromExtension& nystrom, Eigen::MatrixXd* raw = nullptr);

Eigen::MatrixXd assemble_A(const Eigen::MatrixXd& vmat, const SemigroupBasis& basis, double tau);
Eigen::MatrixXd assemble_B(const Eigen::MatrixXd& vmat, double z);
GeneratorMatrices assemble_generator(const Eigen::MatrixXd& vmat, const SemigroupBasis& basis, double tau,
                                     double z);

/// Solution of A c = i b B c for real antisymmetric A and SPD B.
struct GevpSolution {
    /// Retained b > tolerance, descending. The partner -b has vector conj(c).
    Eigen::VectorXd b;
    /// l x pairs, B-normalized.
    Eigen::MatrixXcd c;
    /// Every eigenvalue b of the reduced problem, ascending.
    Eigen::VectorXd all;
    /// Eigenvalues with |b| <= tolerance.
    Eigen::VectorXd zero_cluster;
    double tolerance = 0.0;
};

/// Throws NumericalError "B-not-SPD" if the Cholesky factorization fails.
GevpSolution solve_gevp(const Eigen::MatrixXd& amat, const Eigen::MatrixXd& bmat);

/// omega = (1 + sqrt(max(0, 1 - 4 z^2 b^2))) / (2 b).
/// Throws NumericalError "undefined-frequency" for b = 0.
double frequency_from_beta(double b, double z);
/// b = omega / (z^2 + omega^2).
double beta_from_frequency(double omega, double z);

/// Approximate Koopman eigenfunctions in conjugate pairs.
///
/// Columns are indexed by j = -pairs..pairs at position j + pairs. Column
/// pairs (j = 0) is the constant function.
struct KoopmanEigensystem {
    Eigen::VectorXd omegas;
    /// N x (2 pairs + 1), unit norm under the sampling measure.
    Eigen::MatrixXcd xi;
    /// l x (2 pairs + 1), coefficients of xi in the phi basis.
    Eigen::MatrixXcd zeta_coeffs;
    /// Dirichlet energy per pair, index 0 for the constant.
    Eigen::VectorXd energies;
    /// GEVP eigenvalue b per pair, 0 for the constant.
    Eigen::VectorXd betas;
    /// Column of the GEVP solution behind each pair, -1 for the constant.
    std::vector<Eigen::Index> gevp_index;
    /// Column of the conjugate partner of each column.
    std::vector<Eigen::Index> pair_map;
    double tau = 0.0;
    double z = 0.0;

    Eigen::Index pairs() const { return (omegas.size() - 1) / 2; }
    Eigen::Index column(Eigen::Index j) const { return j + pairs(); }
};

/// Forms xi = (z - V) v for each GEVP vector, normalizes and phase-fixes it,
/// sorts pairs by Dirichlet energy and keeps the first `pairs`.
/// Throws NumericalError "insufficient-spectrum" if too few pairs exist.
KoopmanEigensystem assemble_eigensystem(const GevpSolution& gevp, const SemigroupBasis& basis,
                                        const Eigen::MatrixXd& vmat, double tau, double z, Eigen::Index pairs);

}  // namespace fockcast
