#include "fockcast/dynamics.hpp"

#include "fockcast/errors.hpp"

#include <cmath>
#include <numbers>

namespace fockcast {

std::string to_string(SystemKind kind) {
    return kind == SystemKind::stepanoff ? "stepanoff" : "lorenz63";
}

SystemKind system_kind_from_string(const std::string& name) {
    if (name == "stepanoff") return SystemKind::stepanoff;
    if (name == "lorenz63" || name == "l63") return SystemKind::lorenz63;
    throw ValidationError("unknown system '" + name + "'");
}

FlowSystem FlowSystem::stepanoff(double alpha) { return {SystemKind::stepanoff, {alpha}}; }

FlowSystem FlowSystem::lorenz63(double beta, double rho, double sigma) {
    return {SystemKind::lorenz63, {beta, rho, sigma}};
}

int FlowSystem::state_dim() const { return kind == SystemKind::stepanoff ? 2 : 3; }

int FlowSystem::data_dim() const { return kind == SystemKind::stepanoff ? 4 : 3; }

Eigen::VectorXd FlowSystem::vector_field(const Eigen::VectorXd& x) const {
    if (kind == SystemKind::stepanoff) return stepanoff_vector_field(x, params.at(0));
    return lorenz63_vector_field(x, params.at(0), params.at(1), params.at(2));
}

Eigen::VectorXd FlowSystem::embed(const Eigen::VectorXd& x) const {
    if (kind == SystemKind::lorenz63) return x;
    Eigen::VectorXd y(4);
    y << std::cos(x[0]), std::sin(x[0]), std::cos(x[1]), std::sin(x[1]);
    return y;
}

Eigen::MatrixXd FlowSystem::embed_jacobian(const Eigen::VectorXd& x) const {
    if (kind == SystemKind::lorenz63) return Eigen::MatrixXd::Identity(3, 3);
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(4, 2);
    j(0, 0) = -std::sin(x[0]);
    j(1, 0) = std::cos(x[0]);
    j(2, 1) = -std::sin(x[1]);
    j(3, 1) = std::cos(x[1]);
    return j;
}

Eigen::VectorXd FlowSystem::canonical(const Eigen::VectorXd& x) const {
    if (kind == SystemKind::lorenz63) return x;
    constexpr double two_pi = 2.0 * std::numbers::pi;
    Eigen::VectorXd w(2);
    for (int i = 0; i < 2; ++i) {
        w[i] = std::fmod(x[i], two_pi);
        if (w[i] < 0.0) w[i] += two_pi;
        if (w[i] >= two_pi) w[i] = 0.0;
    }
    return w;
}

Eigen::Vector2d stepanoff_vector_field(const Eigen::Vector2d& x, double alpha) {
    const double v2 = alpha * (1.0 - std::cos(x[0] - x[1]));
    const double v1 = v2 + (1.0 - alpha) * (1.0 - std::cos(x[1]));
    return {v1, v2};
}

Eigen::Vector3d lorenz63_vector_field(const Eigen::Vector3d& x, double beta, double rho, double sigma) {
    return {sigma * (x[1] - x[0]), x[0] * (rho - x[2]) - x[1], x[0] * x[1] - beta * x[2]};
}

namespace {

template <int D, class Field>
Eigen::Matrix<double, D, 1> rk4(const Field& field, Eigen::Matrix<double, D, 1> x, double dt, long steps) {
    for (long s = 0; s < steps; ++s) {
        const Eigen::Matrix<double, D, 1> k1 = field(x);
        const Eigen::Matrix<double, D, 1> k2 = field(x + 0.5 * dt * k1);
        const Eigen::Matrix<double, D, 1> k3 = field(x + 0.5 * dt * k2);
        const Eigen::Matrix<double, D, 1> k4 = field(x + dt * k3);
        x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!x.allFinite()) throw NumericalError("integration-diverged", "non-finite state during RK4");
    }
    return x;
}

}  // namespace

Eigen::VectorXd integrate_flow(const FlowSystem& system, const Eigen::VectorXd& x0, double t, double h) {
    if (!(h > 0.0)) throw ValidationError("integration step must be positive");
    if (!(t >= 0.0)) throw ValidationError("integration time must be nonnegative");
    if (x0.size() != system.state_dim()) throw ValidationError("initial state has wrong dimension");
    if (!x0.allFinite()) throw NumericalError("integration-diverged", "non-finite initial state");
    const auto steps = static_cast<long>(std::ceil(t / h - 1e-12));
    if (steps == 0) return system.canonical(x0);
    const double dt = t / static_cast<double>(steps);
    if (system.kind == SystemKind::stepanoff) {
        const double alpha = system.params.at(0);
        const auto field = [alpha](const Eigen::Vector2d& x) { return stepanoff_vector_field(x, alpha); };
        return system.canonical(rk4<2>(field, Eigen::Vector2d(x0), dt, steps));
    }
    const double beta = system.params.at(0);
    const double rho = system.params.at(1);
    const double sigma = system.params.at(2);
    const auto field = [=](const Eigen::Vector3d& x) { return lorenz63_vector_field(x, beta, rho, sigma); };
    return rk4<3>(field, Eigen::Vector3d(x0), dt, steps);
}

double Observable::operator()(const Eigen::VectorXd& x) const {
    if (kind == ObservableKind::von_mises) return von_mises_observable(x.head<2>(), gamma);
    return coordinate_observable(x.head<3>());
}

double bessel_i0(double x) {
    const double q = 0.25 * x * x;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 500; ++k) {
        term *= q / (static_cast<double>(k) * static_cast<double>(k));
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return sum;
}

double von_mises_observable(const Eigen::Vector2d& x, double gamma) {
    if (!(gamma > 0.0)) throw ValidationError("von Mises concentration must be positive");
    const double i0 = bessel_i0(gamma);
    return std::exp(-gamma * (std::cos(x[0]) + std::cos(x[1]))) / (i0 * i0);
}

double coordinate_observable(const Eigen::Vector3d& x) { return x[0]; }

TrajectoryDataset make_dataset(const FlowSystem& system, const Observable& observable,
                               Eigen::MatrixXd states, double dt, bool grid) {
    if (states.rows() < 2) throw ValidationError("dataset needs at least two samples");
    if (states.cols() != system.state_dim()) throw ValidationError("state matrix has wrong width");
    if (!states.allFinite()) throw ValidationError("dataset contains non-finite states");
    TrajectoryDataset ds;
    ds.system = system;
    ds.observable = observable;
    ds.dt = dt;
    ds.grid = grid;
    const Eigen::Index n = states.rows();
    ds.data.resize(n, system.data_dim());
    ds.observable_values.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd x = states.row(i).transpose();
        ds.data.row(i) = system.embed(x).transpose();
        ds.observable_values[i] = observable(x);
    }
    ds.states = std::move(states);
    return ds;
}

TrajectoryDataset sample_grid_stepanoff(int n_side, double alpha, double gamma) {
    if (n_side < 2) throw ValidationError("grid needs n_side >= 2");
    const Eigen::Index n = static_cast<Eigen::Index>(n_side) * n_side;
    Eigen::MatrixXd states(n, 2);
    const double step = 2.0 * std::numbers::pi / n_side;
    for (int i = 0; i < n_side; ++i) {
        for (int j = 0; j < n_side; ++j) {
            states(static_cast<Eigen::Index>(i) * n_side + j, 0) = step * i;
            states(static_cast<Eigen::Index>(i) * n_side + j, 1) = step * j;
        }
    }
    return make_dataset(FlowSystem::stepanoff(alpha), {ObservableKind::von_mises, gamma},
                        std::move(states), 0.0, true);
}

TrajectoryDataset sample_trajectory_l63(const Eigen::Vector3d& x0, int n, double dt, double spinup,
                                        double h, const FlowSystem& system) {
    if (system.kind != SystemKind::lorenz63) throw ValidationError("trajectory sampling expects Lorenz-63");
    if (n < 2) throw ValidationError("trajectory needs at least two samples");
    if (!(dt > 0.0)) throw ValidationError("sampling interval must be positive");
    if (!(spinup >= 0.0)) throw ValidationError("spin-up must be nonnegative");
    Eigen::MatrixXd states(n, 3);
    Eigen::VectorXd x = integrate_flow(system, x0, spinup, h);
    for (int i = 0; i < n; ++i) {
        if (i > 0) x = integrate_flow(system, x, dt, h);
        states.row(i) = x.transpose();
    }
    return make_dataset(system, {ObservableKind::coordinate, 0.0}, std::move(states), dt, false);
}

}  // namespace fockcast
