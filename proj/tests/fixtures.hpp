#pragma once

#include "fockcast/dynamics.hpp"
#include "fockcast/generator.hpp"
#include "fockcast/kernel.hpp"
#include "fockcast/semigroup.hpp"

#include <cmath>

namespace fockcast::testing {

/// Small Stepanoff problem shared across test files: 24^2 grid, fixed
/// variable-bandwidth kernel, 96 basis functions, 16 retained pairs.
struct TorusFixture {
    static constexpr double kTau = 1e-3;
    static constexpr double kZ = 1e-3;

    TrajectoryDataset ds;
    KernelModel model;
    Eigen::MatrixXd K;
    Normalization norm;
    SemigroupBasis basis;
    NystromExtension nystrom;
    Eigen::MatrixXd vmat;
    GeneratorMatrices gen;
    GevpSolution gevp;
    KoopmanEigensystem es;

    TorusFixture() {
        ds = sample_grid_stepanoff(24);
        model = KernelModel(ds, 0.2, BandwidthFunction(ds.data, 0.8, 2.0));
        K = model.kernel_matrix();
        norm = bistochastic_normalize(K);
        model.set_normalization(norm.d, norm.q);
        basis = eig_markov(norm.P, 96);
        nystrom = NystromExtension(model, basis, K);
        vmat = generator_matrix(basis, model, nystrom);
        gen = assemble_generator(vmat, basis, kTau, kZ);
        gevp = solve_gevp(gen.amat, gen.bmat);
        es = assemble_eigensystem(gevp, basis, vmat, kTau, kZ, 16);
    }
    TorusFixture(const TorusFixture&) = delete;
    TorusFixture& operator=(const TorusFixture&) = delete;
};

inline const TorusFixture& torus() {
    static const TorusFixture fixture;
    return fixture;
}

}  // namespace fockcast::testing
