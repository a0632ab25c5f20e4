#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace fockcast {

enum class SystemKind { stepanoff, lorenz63 };

std::string to_string(SystemKind kind);
SystemKind system_kind_from_string(const std::string& name);

/// One of the two benchmark flows together with its data-space embedding.
///
/// Stepanoff states live on [0, 2pi)^2 and are embedded in R^4 as
/// (cos x1, sin x1, cos x2, sin x2). Lorenz-63 states are used as is.
struct FlowSystem {
    SystemKind kind = SystemKind::stepanoff;
    /// Stepanoff: {alpha}. Lorenz-63: {beta, rho, sigma}.
    std::vector<double> params;

    static FlowSystem stepanoff(double alpha);
    static FlowSystem lorenz63(double beta = 8.0 / 3.0, double rho = 28.0, double sigma = 10.0);

    int state_dim() const;
    int data_dim() const;

    Eigen::VectorXd vector_field(const Eigen::VectorXd& x) const;
    Eigen::VectorXd embed(const Eigen::VectorXd& x) const;
    /// data_dim x state_dim Jacobian of the embedding.
    Eigen::MatrixXd embed_jacobian(const Eigen::VectorXd& x) const;
    /// Maps a state back into the canonical domain (wraps angles).
    Eigen::VectorXd canonical(const Eigen::VectorXd& x) const;
};

Eigen::Vector2d stepanoff_vector_field(const Eigen::Vector2d& x, double alpha);
Eigen::Vector3d lorenz63_vector_field(const Eigen::Vector3d& x, double beta, double rho, double sigma);

/// Classical RK4 over ceil(t/h) equal steps ending exactly at t.
/// Throws NumericalError "integration-diverged" on a non-finite state.
Eigen::VectorXd integrate_flow(const FlowSystem& system, const Eigen::VectorXd& x0, double t,
                               double h = 1e-3);

enum class ObservableKind { von_mises, coordinate };

/// Prediction target f.
struct Observable {
    ObservableKind kind = ObservableKind::von_mises;
    double gamma = 1.0;

    double operator()(const Eigen::VectorXd& x) const;
};

/// Modified Bessel function I0 by its power series.
double bessel_i0(double x);
double von_mises_observable(const Eigen::Vector2d& x, double gamma);
double coordinate_observable(const Eigen::Vector3d& x);

/// Samples x_n, embedded points y_n = F(x_n) and observable values f(x_n).
/// Rows are samples. Immutable after construction.
struct TrajectoryDataset {
    FlowSystem system;
    Observable observable;
    Eigen::MatrixXd states;
    Eigen::MatrixXd data;
    Eigen::VectorXd observable_values;
    /// Sampling interval; 0 for grid sampling.
    double dt = 0.0;
    bool grid = false;

    Eigen::Index size() const { return states.rows(); }
    Eigen::VectorXd state(Eigen::Index n) const { return states.row(n).transpose(); }
};

/// Builds the dataset from states, computing data and observable values.
TrajectoryDataset make_dataset(const FlowSystem& system, const Observable& observable,
                               Eigen::MatrixXd states, double dt, bool grid);

TrajectoryDataset sample_grid_stepanoff(int n_side, double alpha = 4.47213595499957939282,
                                        double gamma = 1.0);

TrajectoryDataset sample_trajectory_l63(const Eigen::Vector3d& x0, int n, double dt,
                                        double spinup = 50.0, double h = 1e-3,
                                        const FlowSystem& system = FlowSystem::lorenz63());

}  // namespace fockcast
