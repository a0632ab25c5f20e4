#pragma once

#include "fockcast/dynamics.hpp"

#include <Eigen/Dense>

#include <vector>

namespace fockcast {

/// exp(-|y1 - y2|^2 / eps^2) on embedded data points.
double rbf_kernel(const Eigen::VectorXd& y1, const Eigen::VectorXd& y2, double eps);

/// exp(-|y1 - y2|^2 / (eps^2 rho1 rho2)).
double vb_kernel(const Eigen::VectorXd& y1, const Eigen::VectorXd& y2, double eps, double rho1,
                 double rho2);

/// eps = 2^k for k in [-20, 10], four values per octave.
std::vector<double> default_bandwidth_grid();

/// Result of a bandwidth scan.
struct BandwidthScan {
    std::vector<double> epsilons;
    /// S(eps) = sum_{n,m} k(x_n, x_m) / N^2.
    std::vector<double> sums;
    /// d log S / d log eps^2 at interior grid points, NaN at the ends.
    std::vector<double> slopes;
    double epsilon = 0.0;
    double dim = 0.0;
};

/// Scans S(eps) over `grid` for the kernel exp(-|y_n - y_m|^2 / (eps^2 rho_n rho_m)).
/// Rows of `points` are samples. With `rho` null the plain Gaussian is used.
/// Throws NumericalError "tuning-failed" when the scan shows no scaling regime.
BandwidthScan tune_bandwidth(const Eigen::MatrixXd& points, const std::vector<double>& grid,
                             const Eigen::VectorXd* rho = nullptr);

/// rho(y) = (mean_n exp(-|y - y_n|^2 / eps_tilde^2))^(-1/dim).
class BandwidthFunction {
public:
    BandwidthFunction() = default;
    /// Rows of `points` are samples.
    BandwidthFunction(const Eigen::MatrixXd& points, double epsilon_tilde, double dim);
    /// rho identically equal to `value`.
    static BandwidthFunction constant(double value, Eigen::Index n);

    bool is_constant() const { return constant_; }
    double epsilon_tilde() const { return epsilon_tilde_; }
    double dim() const { return dim_; }
    const Eigen::VectorXd& sample_values() const { return values_; }

    double operator()(const Eigen::VectorXd& y) const;
    /// Value of rho at y and its derivative along the data-space velocity ydot.
    double value_and_derivative(const Eigen::VectorXd& y, const Eigen::VectorXd& ydot,
                                double& derivative) const;
    /// Value of rho at y and its data-space gradient.
    double value_and_gradient(const Eigen::VectorXd& y, Eigen::VectorXd& gradient) const;

private:
    Eigen::MatrixXd points_;  // data_dim x N
    double epsilon_tilde_ = 0.0;
    double dim_ = 1.0;
    bool constant_ = true;
    double constant_value_ = 1.0;
    Eigen::VectorXd values_;
};

/// Tuning options for KernelModel::build. Nonpositive overrides mean "tune".
struct KernelSettings {
    std::vector<double> grid = default_bandwidth_grid();
    bool variable_bandwidth = true;
    double epsilon = 0.0;
    double epsilon_tilde = 0.0;
    double dim = 0.0;
};

/// Bistochastic normalization of a symmetric kernel matrix.
struct Normalization {
    Eigen::MatrixXd P;
    Eigen::VectorXd d;
    Eigen::VectorXd q;
};

/// d = K 1 / N, q = K (1/d) / N, P = (1/N) D^-1 K Q^-1 K D^-1, symmetrized.
/// Gaussian tails may underflow to exact zeros, so entries must be nonnegative
/// with a positive diagonal. Throws NumericalError "invalid-kernel" otherwise.
Normalization bistochastic_normalize(const Eigen::MatrixXd& K);

/// Variable-bandwidth kernel over a dataset with exact derivatives.
///
/// The kernel is evaluated on embedded points; derivatives with respect to
/// the state go through the embedding Jacobian. The derivative along the
/// vector field is k'(x, y) = V(x) . grad_x k(x, y), where rho(x) is
/// differentiated as well.
class KernelModel {
public:
    KernelModel() = default;
    KernelModel(const TrajectoryDataset& dataset, double epsilon, BandwidthFunction rho);

    /// Tunes eps_tilde and dim on the plain Gaussian, then eps on the
    /// variable-bandwidth kernel.
    static KernelModel build(const TrajectoryDataset& dataset, const KernelSettings& settings,
                             BandwidthScan* rbf_scan = nullptr, BandwidthScan* vb_scan = nullptr);

    double epsilon() const { return epsilon_; }
    double epsilon_tilde() const { return rho_.epsilon_tilde(); }
    double dim_estimate() const { return rho_.dim(); }
    const BandwidthFunction& bandwidth() const { return rho_; }
    const Eigen::VectorXd& rho_values() const { return rho_.sample_values(); }
    const FlowSystem& system() const { return system_; }
    Eigen::Index size() const { return points_.cols(); }
    /// data_dim x N.
    const Eigen::MatrixXd& points() const { return points_; }
    const Eigen::MatrixXd& states() const { return states_; }

    void set_normalization(Eigen::VectorXd d, Eigen::VectorXd q);
    const Eigen::VectorXd& d_values() const { return d_; }
    const Eigen::VectorXd& q_values() const { return q_; }

    /// k(x, y) for two states.
    double kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;
    /// grad_x k(x, y) in state coordinates.
    Eigen::VectorXd kernel_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;

    /// N x N matrix k(x_n, x_m).
    Eigen::MatrixXd kernel_matrix() const;
    /// N x N matrix k'(x_n, x_m).
    Eigen::MatrixXd kernel_derivative_matrix() const;

    /// Row k(x, x_m) for an arbitrary state x.
    Eigen::VectorXd kernel_row(const Eigen::VectorXd& x) const;
    /// Rows k(x, x_m) and k'(x, x_m) for an arbitrary state x.
    void kernel_row_with_derivative(const Eigen::VectorXd& x, Eigen::VectorXd& k,
                                    Eigen::VectorXd& kdot) const;

private:
    FlowSystem system_;
    Eigen::MatrixXd points_;  // data_dim x N
    Eigen::MatrixXd states_;  // state_dim x N
    double epsilon_ = 0.0;
    BandwidthFunction rho_;
    Eigen::VectorXd d_;
    Eigen::VectorXd q_;
};

}  // namespace fockcast
