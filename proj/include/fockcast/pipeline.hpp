#pragma once

#include "fockcast/config.hpp"
#include "fockcast/dynamics.hpp"
#include "fockcast/fock.hpp"
#include "fockcast/forecast.hpp"
#include "fockcast/generator.hpp"
#include "fockcast/kernel.hpp"
#include "fockcast/semigroup.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace fockcast {

enum class Stage { sample, kernel, basis, eigs, moments, predict, evaluate, report };

const std::vector<Stage>& all_stages();
std::string to_string(Stage stage);
/// Throws ValidationError for an unknown name.
Stage stage_from_string(const std::string& name);

/// The part of the config a stage reads directly, excluding upstream stages.
nlohmann::json stage_inputs(const ExperimentConfig& config, Stage stage);

/// Predictor path for "auto": the moment expansion when the table is no
/// larger than the N (2d + 1) products of the collapsed sum.
PredictorPath resolve_path(PathChoice choice, const MultiIndexTable& table, Eigen::Index samples);

struct StageOutcome {
    Stage stage = Stage::sample;
    std::string hash;
    bool cached = false;
    double seconds = 0.0;
};

/// Moment stage artifacts.
struct MomentArtifacts {
    std::vector<Eigen::Index> modes;
    Eigen::MatrixXcd rho;
    Moments moments;
};

/// Everything needed to forecast at arbitrary states, rebuilt from artifacts.
/// Not copyable: the extension refers to the kernel model.
struct Forecaster {
    TrajectoryDataset dataset;
    KernelModel model;
    SemigroupBasis basis;
    NystromExtension nystrom;
    KoopmanEigensystem eigensystem;
    FockPredictor fock;
    ClassicalPredictor classical;
    PredictorPath path = PredictorPath::moments;

    Forecaster() = default;
    Forecaster(const Forecaster&) = delete;
    Forecaster& operator=(const Forecaster&) = delete;
};

/// Staged runner: sample -> kernel -> basis -> eigs -> moments -> predict ->
/// evaluate -> report.
///
/// Each stage writes into <root>/<stage>/ and finishes with stage.json,
/// which records a content hash of the stage inputs chained with the
/// upstream hash. A stage whose recorded hash matches is not recomputed.
class Pipeline {
public:
    Pipeline(ExperimentConfig config, std::filesystem::path root);

    const ExperimentConfig& config() const { return config_; }
    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path stage_dir(Stage stage) const;

    std::string expected_hash(Stage stage) const;
    /// True if the stage directory holds artifacts for the current config.
    bool is_current(Stage stage) const;

    /// Runs one stage. Upstream stages must be current; otherwise throws
    /// ArtifactError naming the stage to run first.
    StageOutcome run(Stage stage);
    /// Runs every stage in order, reusing current ones.
    std::vector<StageOutcome> run_all();

    // Artifact readers. Each throws ArtifactError unless its stage is current.
    TrajectoryDataset dataset() const;
    /// Kernel model with its normalization restored.
    KernelModel kernel_model(const TrajectoryDataset& dataset) const;
    SemigroupBasis basis() const;
    KoopmanEigensystem eigensystem() const;
    GevpSolution gevp() const;
    GeneratorMatrices generator() const;
    MomentArtifacts moment_artifacts() const;
    /// States the predictions are scored on: the training samples, or the
    /// held-out set when forecast.held_out is set.
    TrajectoryDataset evaluation_set() const;
    SamplePredictions predictions() const;
    Eigen::MatrixXd truth() const;
    ForecastReport scores() const;
    /// Contents of report.csv.
    std::string report_text() const;
    nlohmann::json stage_record(Stage stage) const;

    /// Rebuilds the predictors from the moments stage artifacts.
    std::unique_ptr<Forecaster> forecaster() const;

private:
    void require_current(Stage stage) const;
    nlohmann::json run_sample();
    nlohmann::json run_kernel();
    nlohmann::json run_basis();
    nlohmann::json run_eigs();
    nlohmann::json run_moments();
    nlohmann::json run_predict();
    nlohmann::json run_evaluate();
    nlohmann::json run_report();

    ExperimentConfig config_;
    std::filesystem::path root_;
};

}  // namespace fockcast
