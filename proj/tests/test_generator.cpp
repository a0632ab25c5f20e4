#include "fixtures.hpp"

#include "fockcast/errors.hpp"
#include "fockcast/generator.hpp"

#include <doctest.h>

#include <cmath>
#include <complex>

using namespace fockcast;
using fockcast::testing::torus;
using fockcast::testing::TorusFixture;
using cd = std::complex<double>;

TEST_CASE("generator matrix structure") {
    const auto& f = torus();
    Eigen::MatrixXd raw;
    const Eigen::MatrixXd v = generator_matrix(f.basis, f.model, f.nystrom, &raw);
    CHECK(v == f.vmat);
    CHECK((v + v.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(v.row(0).cwiseAbs().maxCoeff() == 0.0);
    CHECK(v.col(0).cwiseAbs().maxCoeff() == 0.0);
    CHECK(raw.col(0).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("generator matrix matches flow finite differences") {
    const auto& f = torus();
    Eigen::MatrixXd raw;
    generator_matrix(f.basis, f.model, f.nystrom, &raw);
    const Eigen::Index n = f.ds.size();
    const Eigen::Index l = f.basis.size();
    const double delta = 1e-3;
    Eigen::MatrixXd vphi(n, l);
    for (Eigen::Index s = 0; s < n; ++s) {
        const Eigen::VectorXd x = f.ds.state(s);
        const Eigen::VectorXd fwd = integrate_flow(f.ds.system, x, delta, delta / 8);
        // Backward flow: integrate the reversed field with the same scheme.
        Eigen::VectorXd bwd = x;
        for (int k = 0; k < 8; ++k) {
            const double h = -delta / 8;
            const Eigen::VectorXd k1 = f.ds.system.vector_field(bwd);
            const Eigen::VectorXd k2 = f.ds.system.vector_field(bwd + 0.5 * h * k1);
            const Eigen::VectorXd k3 = f.ds.system.vector_field(bwd + 0.5 * h * k2);
            const Eigen::VectorXd k4 = f.ds.system.vector_field(bwd + h * k3);
            bwd += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        }
        vphi.row(s) = ((f.nystrom.phi(fwd) - f.nystrom.phi(bwd)) / (2 * delta)).transpose();
    }
    const Eigen::MatrixXd oracle = f.basis.phi.transpose() * vphi / static_cast<double>(n);
    const double top = raw.topLeftCorner(12, 12).cwiseAbs().maxCoeff();
    int compared = 0;
    for (Eigen::Index i = 0; i < 12; ++i)
        for (Eigen::Index j = 0; j < 12; ++j)
            if (std::abs(raw(i, j)) > 0.1 * top) {
                CHECK(std::abs(raw(i, j) - oracle(i, j)) < 1e-3 * std::abs(raw(i, j)));
                ++compared;
            }
    CHECK(compared > 0);
}

TEST_CASE("assemble A") {
    const auto& f = torus();
    CHECK(assemble_A(f.vmat, f.basis, 0.0) == f.vmat);
    const Eigen::MatrixXd a = assemble_A(f.vmat, f.basis, TorusFixture::kTau);
    CHECK((a + a.transpose()).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::MatrixXd far = assemble_A(f.vmat, f.basis, 1e3);
    CHECK(far.cwiseAbs().maxCoeff() < 1e-100 * f.vmat.cwiseAbs().maxCoeff() + 1e-300);
    const Eigen::VectorXd lam = heat_multipliers(f.basis, TorusFixture::kTau / 2);
    CHECK(a(3, 5) == doctest::Approx(lam[3] * f.vmat(3, 5) * lam[5]).epsilon(1e-14));
}

TEST_CASE("assemble B") {
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(4, 4);
    CHECK(assemble_B(zero, 0.3) == 0.09 * Eigen::MatrixXd::Identity(4, 4));
    Eigen::MatrixXd v(2, 2);
    v << 0.0, 1.7, -1.7, 0.0;
    const Eigen::MatrixXd b = assemble_B(v, 0.2);
    CHECK((b - (0.04 + 1.7 * 1.7) * Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15);
    const auto& f = torus();
    const Eigen::VectorXd eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(f.gen.bmat).eigenvalues();
    CHECK(eig.minCoeff() >= TorusFixture::kZ * TorusFixture::kZ - 1e-8);
    CHECK(f.gen.bmat == f.gen.bmat.transpose());
}

TEST_CASE("gevp hand examples") {
    Eigen::MatrixXd a(2, 2);
    a << 0.0, 2.5, -2.5, 0.0;
    const GevpSolution sol = solve_gevp(a, Eigen::MatrixXd::Identity(2, 2));
    REQUIRE(sol.b.size() == 1);
    CHECK(sol.b[0] == doctest::Approx(2.5).epsilon(1e-14));
    REQUIRE(sol.all.size() == 2);
    CHECK(sol.all[0] == doctest::Approx(-2.5).epsilon(1e-14));
    const Eigen::VectorXcd c = sol.c.col(0);
    CHECK((a.cast<cd>() * c - cd(0.0, 2.5) * c).norm() < 1e-14);
    CHECK(std::abs(c.squaredNorm() - 1.0) < 1e-14);

    const GevpSolution none = solve_gevp(Eigen::MatrixXd::Zero(3, 3), Eigen::MatrixXd::Identity(3, 3));
    CHECK(none.b.size() == 0);
    CHECK(none.zero_cluster.size() == 3);

    Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(2, 2);
    bad(1, 1) = -1.0;
    try {
        solve_gevp(a, bad);
        FAIL("expected Cholesky failure");
    } catch (const NumericalError& e) {
        CHECK(e.code() == "B-not-SPD");
    }
}

TEST_CASE("gevp residuals on the torus") {
    const auto& f = torus();
    const Eigen::MatrixXcd a = f.gen.amat.cast<cd>();
    const Eigen::MatrixXcd b = f.gen.bmat.cast<cd>();
    // Retained pairs are those kept in the eigensystem.
    for (Eigen::Index j = 1; j <= f.es.pairs(); ++j) {
        const Eigen::Index k = f.es.gevp_index[static_cast<std::size_t>(j)];
        const Eigen::VectorXcd bc = b * f.gevp.c.col(k);
        const double res = (a * f.gevp.c.col(k) - cd(0.0, f.gevp.b[k]) * bc).norm();
        CHECK(res < 1e-10 * bc.norm());
        CHECK(std::abs(f.gevp.c.col(k).dot(bc) - 1.0) < 1e-10);
    }
    for (Eigen::Index k = 1; k < f.gevp.b.size(); ++k) CHECK(f.gevp.b[k] <= f.gevp.b[k - 1]);
    CHECK(f.gevp.tolerance == doctest::Approx(1e-10 * f.gen.amat.norm()));
}

TEST_CASE("frequency map") {
    CHECK(frequency_from_beta(5.0, 0.1) == doctest::Approx(0.1).epsilon(1e-15));
    const double b = beta_from_frequency(2.0, 0.1);
    CHECK(b == doctest::Approx(2.0 / 4.01).epsilon(1e-15));
    CHECK(std::abs(frequency_from_beta(b, 0.1) - 2.0) < 1e-12);
    CHECK(frequency_from_beta(-b, 0.1) == -frequency_from_beta(b, 0.1));
    // Beyond the range of beta_from_frequency the discriminant is clamped.
    CHECK(frequency_from_beta(7.0, 0.1) == doctest::Approx(1.0 / 14.0).epsilon(1e-15));
    try {
        frequency_from_beta(0.0, 0.1);
        FAIL("expected failure");
    } catch (const NumericalError& e) {
        CHECK(e.code() == "undefined-frequency");
    }
    for (double omega : {0.001, 0.01, 0.5, 3.0, 40.0, 1e3, -7.5}) {
        const double z = 1e-3;
        CHECK(std::abs(frequency_from_beta(beta_from_frequency(omega, z), z) - omega) <= 1e-12 * std::abs(omega));
    }
}

TEST_CASE("eigensystem structure") {
    const auto& f = torus();
    const KoopmanEigensystem& es = f.es;
    const Eigen::Index p = es.pairs();
    REQUIRE(p == 16);
    const double n = static_cast<double>(f.ds.size());
    CHECK(es.omegas[p] == 0.0);
    CHECK((es.xi.col(p).array() - cd(1.0)).abs().maxCoeff() < 1e-12);
    CHECK(es.energies[0] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(es.gevp_index[0] == -1);
    for (Eigen::Index j = 1; j <= p; ++j) {
        CHECK(es.omegas[p + j] + es.omegas[p - j] == 0.0);
        CHECK((es.xi.col(p - j) - es.xi.col(p + j).conjugate()).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(es.xi.col(p + j).squaredNorm() / n == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(std::abs(es.xi.col(p + j).mean()) < 1e-6);
        CHECK(es.energies[j] >= es.energies[j - 1]);
        CHECK(es.pair_map[static_cast<std::size_t>(p + j)] == p - j);
        const Eigen::Index k = es.gevp_index[static_cast<std::size_t>(j)];
        CHECK(es.betas[j] == f.gevp.b[k]);
        CHECK(es.omegas[p + j] == frequency_from_beta(es.betas[j], TorusFixture::kZ));
        // Zeta coefficients reproduce the eigenfunction samples.
        const Eigen::VectorXcd back = f.basis.phi.cast<cd>() * es.zeta_coeffs.col(p + j);
        CHECK((back - es.xi.col(p + j)).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("phase rotation preserves coefficient norms") {
    const auto& f = torus();
    const KoopmanEigensystem& es = f.es;
    const Eigen::VectorXcd c = Eigen::VectorXcd::Random(es.omegas.size());
    for (double t : {0.1, 1.0, 17.0}) {
        Eigen::VectorXcd rotated(c.size());
        for (Eigen::Index j = 0; j < c.size(); ++j) rotated[j] = c[j] * std::exp(cd(0.0, es.omegas[j] * t));
        CHECK(rotated.norm() == doctest::Approx(c.norm()).epsilon(1e-14));
    }
}

TEST_CASE("too many pairs requested") {
    const auto& f = torus();
    try {
        assemble_eigensystem(f.gevp, f.basis, f.vmat, TorusFixture::kTau, TorusFixture::kZ, f.gevp.b.size() + 1);
        FAIL("expected failure");
    } catch (const NumericalError& e) {
        CHECK(e.code() == "insufficient-spectrum");
    }
}
