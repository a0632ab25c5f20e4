#include "fockcast/dynamics.hpp"
#include "fockcast/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace fockcast;

namespace {

const double kAlpha = std::sqrt(20.0);

double stepanoff_divergence(const Eigen::Vector2d& x, double h) {
    const Eigen::Vector2d e1(h, 0.0);
    const Eigen::Vector2d e2(0.0, h);
    const double d1 = (stepanoff_vector_field(x + e1, kAlpha)[0] - stepanoff_vector_field(x - e1, kAlpha)[0]) / (2 * h);
    const double d2 = (stepanoff_vector_field(x + e2, kAlpha)[1] - stepanoff_vector_field(x - e2, kAlpha)[1]) / (2 * h);
    return d1 + d2;
}

}  // namespace

TEST_CASE("stepanoff vector field values") {
    CHECK(stepanoff_vector_field({0.0, 0.0}, kAlpha).norm() == 0.0);
    const Eigen::Vector2d v = stepanoff_vector_field({std::numbers::pi, std::numbers::pi}, kAlpha);
    CHECK(v[0] == doctest::Approx(2.0 * (1.0 - kAlpha)).epsilon(1e-14));
    CHECK(v[0] == doctest::Approx(-6.9443).epsilon(1e-4));
    CHECK(std::abs(v[1]) < 1e-15);
}

TEST_CASE("stepanoff field is divergence free") {
    CHECK(std::abs(stepanoff_divergence({1.3, 2.1}, 1e-4)) < 1e-6);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) worst = std::max(worst, std::abs(stepanoff_divergence({u(rng), u(rng)}, 1e-4)));
    CHECK(worst < 1e-6);
}

TEST_CASE("lorenz63 vector field values") {
    const double beta = 8.0 / 3.0;
    CHECK(lorenz63_vector_field({0, 0, 0}, beta, 28, 10).norm() == 0.0);
    const double c = std::sqrt(beta * 27.0);
    CHECK(std::abs(c - std::sqrt(72.0)) < 1e-14);
    CHECK(lorenz63_vector_field({c, c, 27.0}, beta, 28, 10).norm() < 1e-12);
    const Eigen::Vector3d v = lorenz63_vector_field({1, 1, 1}, beta, 28, 10);
    CHECK(v[0] == 0.0);
    CHECK(v[1] == 26.0);
    CHECK(v[2] == doctest::Approx(-5.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("integrate_flow basics") {
    const FlowSystem l63 = FlowSystem::lorenz63();
    const Eigen::VectorXd x0 = Eigen::Vector3d(1, 1, 1);
    CHECK(integrate_flow(l63, x0, 0.0) == x0);
    const FlowSystem st = FlowSystem::stepanoff(kAlpha);
    CHECK(integrate_flow(st, Eigen::Vector2d::Zero(), 3.7).norm() == 0.0);
    CHECK_THROWS_AS(integrate_flow(l63, x0, 1.0, 0.0), ValidationError);
    CHECK_THROWS_AS(integrate_flow(l63, x0, -1.0), ValidationError);
}

TEST_CASE("integrate_flow step halving on lorenz63") {
    const FlowSystem l63 = FlowSystem::lorenz63();
    const Eigen::VectorXd x0 = Eigen::Vector3d(1, 1, 1);
    const Eigen::VectorXd a = integrate_flow(l63, x0, 1.0, 1e-3);
    const Eigen::VectorXd b = integrate_flow(l63, x0, 1.0, 5e-4);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("rk4 one-step error ratio is fourth order") {
    const FlowSystem l63 = FlowSystem::lorenz63();
    const Eigen::VectorXd x0 = Eigen::Vector3d(1, 1, 1);
    const Eigen::VectorXd ref = integrate_flow(l63, x0, 0.02, 1e-5);
    const double e1 = (integrate_flow(l63, x0, 0.02, 0.02) - ref).norm();
    const double e2 = (integrate_flow(l63, x0, 0.01, 0.01) - integrate_flow(l63, x0, 0.01, 1e-5)).norm();
    const double ratio = e1 / e2;
    CHECK(ratio >= 8.0);
    CHECK(ratio <= 64.0);
}

TEST_CASE("integrate_flow wraps stepanoff angles") {
    const FlowSystem st = FlowSystem::stepanoff(kAlpha);
    const Eigen::VectorXd x = integrate_flow(st, Eigen::Vector2d(1.0, 2.0), 5.0);
    CHECK(x.minCoeff() >= 0.0);
    CHECK(x.maxCoeff() < 2.0 * std::numbers::pi);
}

TEST_CASE("grid sampling") {
    const TrajectoryDataset small = sample_grid_stepanoff(2);
    REQUIRE(small.size() == 4);
    CHECK(small.states(3, 0) == doctest::Approx(std::numbers::pi));
    CHECK(small.states(3, 1) == doctest::Approx(std::numbers::pi));
    CHECK(small.grid);
    const TrajectoryDataset ds = sample_grid_stepanoff(16);
    CHECK(ds.size() == 256);
    CHECK(ds.data.cols() == 4);
    for (Eigen::Index n = 0; n < ds.size(); ++n) {
        CHECK(std::hypot(ds.data(n, 0), ds.data(n, 1)) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(std::hypot(ds.data(n, 2), ds.data(n, 3)) == doctest::Approx(1.0).epsilon(1e-15));
    }
    CHECK(ds.states.maxCoeff() < 2.0 * std::numbers::pi);
    CHECK_THROWS_AS(sample_grid_stepanoff(1), ValidationError);
}

TEST_CASE("lorenz63 trajectory sampling") {
    const TrajectoryDataset ds = sample_trajectory_l63(Eigen::Vector3d(1, 1, 1), 200, 0.5, 20.0);
    CHECK(ds.size() == 200);
    CHECK(ds.dt == 0.5);
    CHECK(ds.data == ds.states);
    CHECK(ds.states.rowwise().norm().maxCoeff() < 100.0);
    CHECK(ds.observable_values == ds.states.col(0));
    const Eigen::VectorXd next = integrate_flow(ds.system, ds.state(0), 0.5);
    CHECK((next - ds.state(1)).norm() < 1e-9);
    CHECK_THROWS_AS(sample_trajectory_l63(Eigen::Vector3d(1, 1, 1), 10, 0.0), ValidationError);
    CHECK_THROWS_AS(sample_trajectory_l63(Eigen::Vector3d(1, 1, 1), 1, 1.0), ValidationError);
}

TEST_CASE("von mises observable") {
    const double i0 = std::cyl_bessel_i(0.0, 1.0);
    CHECK(bessel_i0(1.0) == doctest::Approx(i0).epsilon(1e-14));
    CHECK(bessel_i0(7.5) == doctest::Approx(std::cyl_bessel_i(0.0, 7.5)).epsilon(1e-14));
    const double v = von_mises_observable({std::numbers::pi, std::numbers::pi}, 1.0);
    CHECK(v == doctest::Approx(std::exp(2.0) / (i0 * i0)).epsilon(1e-14));
    CHECK(v == doctest::Approx(4.6093).epsilon(1e-4));
    CHECK_THROWS_AS(von_mises_observable({0, 0}, 0.0), ValidationError);
}

TEST_CASE("von mises grid mean is one") {
    const TrajectoryDataset ds = sample_grid_stepanoff(128);
    CHECK(ds.observable_values.minCoeff() > 0.0);
    CHECK(std::abs(ds.observable_values.mean() - 1.0) < 1e-3);
}

TEST_CASE("coordinate observable") {
    CHECK(coordinate_observable({0, 0, 0}) == 0.0);
    CHECK(coordinate_observable({1, 2, 3}) == 1.0);
    CHECK(coordinate_observable({-8.5, 1, 27}) == -8.5);
}

TEST_CASE("embedding jacobian matches finite differences") {
    const FlowSystem st = FlowSystem::stepanoff(kAlpha);
    const Eigen::Vector2d x(0.4, 5.1);
    const Eigen::MatrixXd j = st.embed_jacobian(x);
    for (int c = 0; c < 2; ++c) {
        Eigen::Vector2d h = Eigen::Vector2d::Zero();
        h[c] = 1e-6;
        const Eigen::VectorXd fd = (st.embed(x + h) - st.embed(x - h)) / 2e-6;
        CHECK((fd - j.col(c)).norm() < 1e-8);
    }
}
