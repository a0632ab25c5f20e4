#pragma once

#include "fockcast/kernel.hpp"

#include <Eigen/Dense>

namespace fockcast {

/// Leading eigenpairs of the Markov operator G = P / N.
struct SemigroupBasis {
    /// 1 = lambda_0 > lambda_1 >= ... > 0.
    Eigen::VectorXd lambdas;
    /// eta_j = (1/lambda_j - 1) / (1/lambda_1 - 1).
    Eigen::VectorXd etas;
    /// N x l, columns orthonormal under the sampling measure, column 0 all ones.
    Eigen::MatrixXd phi;

    Eigen::Index size() const { return lambdas.size(); }
};

/// Top-l eigendecomposition of P / N. Modes with eigenvalue below 1e-12 are
/// dropped with a warning. `full` solves the whole spectrum before truncating.
/// Throws NumericalError "normalization-failed" if the top eigenvalue is not 1.
SemigroupBasis eig_markov(const Eigen::MatrixXd& P, Eigen::Index l, bool full = false);

/// Laplacian eigenvalues from Markov eigenvalues (eta_0 = 0, eta_1 = 1).
Eigen::VectorXd laplacian_eigenvalues(const Eigen::VectorXd& lambdas);

/// lambda_{j,tau} = exp(-tau eta_j).
Eigen::VectorXd heat_multipliers(const SemigroupBasis& basis, double tau);

/// sum_j |c_j|^2 / lambda_j - 1 for unit coefficient vectors.
double dirichlet_energy(const Eigen::VectorXcd& c, const SemigroupBasis& basis);

/// Multiplies coefficient j by lambda_{j,tau}.
Eigen::VectorXcd apply_smoother(const SemigroupBasis& basis, double tau, const Eigen::VectorXcd& c);

/// Off-sample evaluation of the basis through the normalized kernel.
///
/// phi_j(x) = (1 / (lambda_j N d(x))) sum_l k(x, x_l) R_lj with
/// R = diag(1/(N q)) K diag(1/d) Phi, so that at a sample point the stored
/// eigenvector entry is reproduced.
class NystromExtension {
public:
    NystromExtension() = default;
    /// `K` may be empty, in which case it is rebuilt from the model.
    NystromExtension(const KernelModel& model, const SemigroupBasis& basis, const Eigen::MatrixXd& K = {});

    /// N x l.
    const Eigen::MatrixXd& R() const { return R_; }

    /// phi_j(x) for all j.
    Eigen::VectorXd phi(const Eigen::VectorXd& x) const;
    /// phi_j(x) and its derivative along the vector field at x.
    void phi_and_derivative(const Eigen::VectorXd& x, Eigen::VectorXd& phi, Eigen::VectorXd& dphi) const;

private:
    const KernelModel* model_ = nullptr;
    Eigen::VectorXd lambdas_;
    Eigen::MatrixXd R_;
};

/// psi_{j,tau}(x) = lambda_{j,tau}^{1/2} phi_j(x) for all j.
Eigen::VectorXd rkhs_basis_eval(const NystromExtension& nystrom, const SemigroupBasis& basis, double tau,
                                const Eigen::VectorXd& x);

}  // namespace fockcast
