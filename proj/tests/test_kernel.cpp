#include "fockcast/dynamics.hpp"
#include "fockcast/errors.hpp"
#include "fockcast/kernel.hpp"
#include "fockcast/parallel.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace fockcast;

namespace {

Eigen::MatrixXd circle_points(int n) {
    Eigen::MatrixXd p(n, 2);
    for (int i = 0; i < n; ++i) {
        const double a = 2.0 * std::numbers::pi * i / n;
        p(i, 0) = std::cos(a);
        p(i, 1) = std::sin(a);
    }
    return p;
}

// Direct triple sum, independent of the library's BLAS path.
Eigen::MatrixXd naive_bistochastic(const Eigen::MatrixXd& K) {
    const Eigen::Index n = K.rows();
    Eigen::VectorXd d = K.rowwise().sum() / static_cast<double>(n);
    Eigen::VectorXd q(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double s = 0.0;
        for (Eigen::Index l = 0; l < n; ++l) s += K(i, l) / d[l];
        q[i] = s / static_cast<double>(n);
    }
    Eigen::MatrixXd P(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            double s = 0.0;
            for (Eigen::Index l = 0; l < n; ++l) s += K(i, l) * K(l, j) / (d[i] * q[l] * d[j]);
            P(i, j) = s / static_cast<double>(n);
        }
    return P;
}

KernelModel small_torus_model(int n_side, bool variable) {
    const TrajectoryDataset ds = sample_grid_stepanoff(n_side);
    BandwidthFunction rho = variable ? BandwidthFunction(ds.data, 0.8, 2.0) : BandwidthFunction::constant(1.0, ds.size());
    return KernelModel(ds, 0.4, std::move(rho));
}

}  // namespace

TEST_CASE("rbf kernel") {
    const Eigen::Vector2d x(0.3, -1.0);
    const Eigen::Vector2d y(1.1, 0.5);
    CHECK(rbf_kernel(x, x, 0.7) == 1.0);
    CHECK(rbf_kernel(x, y, 0.7) == rbf_kernel(y, x, 0.7));
    const double eps = (x - y).norm();
    CHECK(rbf_kernel(x, y, eps) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
}

TEST_CASE("variable bandwidth kernel") {
    const Eigen::Vector2d x(0.3, -1.0);
    const Eigen::Vector2d y(1.1, 0.5);
    CHECK(vb_kernel(x, y, 0.7, 1.0, 1.0) == rbf_kernel(x, y, 0.7));
    CHECK(vb_kernel(x, x, 0.7, 1.3, 0.2) == 1.0);
    CHECK(vb_kernel(x, y, 0.7, 2.6, 2.0) == doctest::Approx(vb_kernel(x, y, 1.4, 1.3, 1.0)).epsilon(1e-15));
}

TEST_CASE("default bandwidth grid") {
    const std::vector<double> g = default_bandwidth_grid();
    REQUIRE(g.size() == 121);
    CHECK(g.front() == std::ldexp(1.0, -20));
    CHECK(g.back() == std::ldexp(1.0, 10));
    CHECK(g[4] / g[0] == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("bandwidth tuning recovers manifold dimension") {
    const BandwidthScan circle = tune_bandwidth(circle_points(256), default_bandwidth_grid());
    CHECK(circle.dim >= 0.8);
    CHECK(circle.dim <= 1.2);
    CHECK(circle.epsilon > 0.0);

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd square(1024, 2);
    for (Eigen::Index i = 0; i < square.rows(); ++i) square.row(i) << u(rng), u(rng);
    const BandwidthScan sq = tune_bandwidth(square, default_bandwidth_grid());
    CHECK(sq.dim >= 1.7);
    CHECK(sq.dim <= 2.3);
    CHECK(sq.slopes.size() == sq.epsilons.size());
    CHECK(std::isnan(sq.slopes.front()));
}

TEST_CASE("bandwidth tuning rejects degenerate data") {
    const Eigen::MatrixXd same = Eigen::MatrixXd::Constant(20, 3, 0.5);
    try {
        tune_bandwidth(same, default_bandwidth_grid());
        FAIL("expected tuning failure");
    } catch (const NumericalError& e) {
        CHECK(e.code() == "tuning-failed");
    }
}

TEST_CASE("bandwidth function") {
    const Eigen::MatrixXd one = Eigen::MatrixXd::Constant(1, 2, 0.25);
    const BandwidthFunction single(one, 0.3, 2.0);
    CHECK(single.sample_values()[0] == doctest::Approx(1.0).epsilon(1e-15));

    // Mean kernel value c = (1 + e^{-1}) / 2 at both points.
    Eigen::MatrixXd pair(2, 1);
    pair << 0.0, 1.0;
    const BandwidthFunction two(pair, 1.0, 2.0);
    const double c = 0.5 * (1.0 + std::exp(-1.0));
    CHECK(two.sample_values()[0] == doctest::Approx(std::pow(c, -0.5)).epsilon(1e-14));
    CHECK(two.sample_values()[1] == doctest::Approx(std::pow(c, -0.5)).epsilon(1e-14));

    Eigen::MatrixXd clusters(60, 1);
    for (int i = 0; i < 50; ++i) clusters(i, 0) = 0.01 * i;
    for (int i = 0; i < 10; ++i) clusters(50 + i, 0) = 10.0 + 0.1 * i;
    const BandwidthFunction rho(clusters, 0.3, 1.0);
    CHECK(rho.sample_values().tail(10).minCoeff() > rho.sample_values().head(50).maxCoeff());

    const Eigen::VectorXd y = Eigen::VectorXd::Constant(1, 0.137);
    Eigen::VectorXd grad;
    const double v = rho.value_and_gradient(y, grad);
    CHECK(v == doctest::Approx(rho(y)).epsilon(1e-15));
    const Eigen::VectorXd h = Eigen::VectorXd::Constant(1, 1e-6);
    const double fd = (rho(y + h) - rho(y - h)) / 2e-6;
    CHECK(grad[0] == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("bistochastic normalization examples") {
    const Normalization single = bistochastic_normalize(Eigen::MatrixXd::Constant(1, 1, 0.3));
    CHECK(single.P(0, 0) == doctest::Approx(1.0).epsilon(1e-15));

    const Normalization flat = bistochastic_normalize(Eigen::MatrixXd::Constant(5, 5, 0.7));
    CHECK((flat.P.array() - 1.0).abs().maxCoeff() < 1e-14);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    Eigen::MatrixXd a(8, 8);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = u(rng);
    const Eigen::MatrixXd K = a * a.transpose();
    const Normalization norm = bistochastic_normalize(K);
    const Eigen::VectorXd rows = norm.P.rowwise().sum() / 8.0;
    CHECK((rows.array() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK((norm.P - naive_bistochastic(K)).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((norm.P - norm.P.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("bistochastic normalization rejects invalid kernels") {
    Eigen::MatrixXd K = Eigen::MatrixXd::Constant(3, 3, 0.5);
    K(0, 1) = K(1, 0) = -0.1;
    CHECK_THROWS_AS(bistochastic_normalize(K), NumericalError);
    Eigen::MatrixXd Z = Eigen::MatrixXd::Identity(3, 3);
    Z(2, 2) = 0.0;
    CHECK_THROWS_AS(bistochastic_normalize(Z), NumericalError);
}

TEST_CASE("markov property on the torus") {
    const KernelModel model = small_torus_model(24, true);
    const Normalization norm = bistochastic_normalize(model.kernel_matrix());
    const double n = static_cast<double>(model.size());
    CHECK(((norm.P.rowwise().sum() / n).array() - 1.0).abs().maxCoeff() < 1e-10);
    CHECK((norm.P - norm.P.transpose()).cwiseAbs().maxCoeff() < 1e-13);
    CHECK(norm.d.minCoeff() > 0.0);
    CHECK(norm.q.minCoeff() > 0.0);
}

TEST_CASE("kernel gradient matches finite differences") {
    const KernelModel model = small_torus_model(16, true);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Vector2d x(u(rng), u(rng));
        const Eigen::Vector2d y(u(rng), u(rng));
        const Eigen::VectorXd g = model.kernel_gradient(x, y);
        const Eigen::Vector2d dir(u(rng) - 3.0, u(rng) - 3.0);
        const double h = 1e-6;
        const double fd = (model.kernel(x + h * dir, y) - model.kernel(x - h * dir, y)) / (2 * h);
        const double an = g.dot(dir);
        const double scale = std::max(std::abs(fd), 1e-3 * model.kernel(x, y) * dir.norm());
        if (model.kernel(x, y) > 1e-8) worst = std::max(worst, std::abs(an - fd) / scale);
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("kernel derivative special cases") {
    const KernelModel flat = small_torus_model(8, false);
    const Eigen::Vector2d x(2.0 * std::numbers::pi * 3 / 8, 2.0 * std::numbers::pi * 5 / 8);
    CHECK(flat.kernel_gradient(x, x).norm() < 1e-15);

    const KernelModel model = small_torus_model(8, true);
    Eigen::VectorXd k;
    Eigen::VectorXd kdot;
    model.kernel_row_with_derivative(Eigen::Vector2d::Zero(), k, kdot);
    CHECK(kdot.cwiseAbs().maxCoeff() < 1e-15);
    CHECK((k - model.kernel_row(Eigen::Vector2d::Zero())).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("kernel derivative matrix agrees with rows") {
    const KernelModel model = small_torus_model(8, true);
    const Eigen::MatrixXd K = model.kernel_matrix();
    const Eigen::MatrixXd Kd = model.kernel_derivative_matrix();
    Eigen::VectorXd k;
    Eigen::VectorXd kdot;
    model.kernel_row_with_derivative(model.states().col(9), k, kdot);
    CHECK((K.row(9).transpose() - k).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((Kd.row(9).transpose() - kdot).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("kernel assembly is independent of the thread count") {
    const KernelModel model = small_torus_model(16, true);
    set_thread_count(1);
    const Eigen::MatrixXd a = model.kernel_matrix();
    const Normalization na = bistochastic_normalize(a);
    set_thread_count(4);
    const Eigen::MatrixXd b = model.kernel_matrix();
    const Normalization nb = bistochastic_normalize(b);
    set_thread_count(1);
    CHECK(a == b);
    CHECK(na.d == nb.d);
    CHECK(na.q == nb.q);
}

TEST_CASE("kernel model build on the torus") {
    const TrajectoryDataset ds = sample_grid_stepanoff(24);
    BandwidthScan rbf;
    BandwidthScan vb;
    const KernelModel model = KernelModel::build(ds, KernelSettings{}, &rbf, &vb);
    CHECK(model.epsilon() > 0.0);
    CHECK(model.epsilon_tilde() > 0.0);
    CHECK(model.dim_estimate() > 1.5);
    CHECK(model.dim_estimate() < 3.0);
    CHECK(model.rho_values().minCoeff() > 0.0);
    CHECK(!rbf.epsilons.empty());
    CHECK(!vb.epsilons.empty());

    KernelSettings fixed;
    fixed.epsilon = 0.1;
    const KernelModel overridden = KernelModel::build(ds, fixed);
    CHECK(overridden.epsilon() == 0.1);
}
