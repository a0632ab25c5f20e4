#pragma once

#include "fockcast/dynamics.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace fockcast {

enum class PathChoice { automatic, moments, collapsed };

std::string to_string(PathChoice choice);
PathChoice path_choice_from_string(const std::string& name);

/// Every parameter of one experiment.
///
/// Nonpositive kernel bandwidths and dimension mean "tune automatically".
struct ExperimentConfig {
    std::string name = "custom";
    SystemKind system = SystemKind::stepanoff;

    // Stepanoff grid.
    double alpha = 4.47213595499957939282;
    double gamma = 1.0;
    int n_side = 64;

    // Lorenz-63 trajectory.
    double beta = 8.0 / 3.0;
    double rho = 28.0;
    double sigma_l = 10.0;
    int n_samples = 4000;
    double dt = 5.0;
    double spinup = 50.0;
    std::array<double, 3> x0{1.0, 1.0, 1.0};

    /// RK4 step for sampling and for the truth integration.
    double step = 1e-3;

    // Markov kernel.
    bool variable_bandwidth = true;
    double kernel_epsilon = 0.0;
    double kernel_epsilon_tilde = 0.0;
    double kernel_dim = 0.0;
    int grid_min_log2 = -20;
    int grid_max_log2 = 10;
    int grid_per_octave = 4;

    // Spectral approximation.
    int l = 512;
    double tau = 1e-3;
    double z = 1e-3;
    int pairs = 128;

    // Fock predictor.
    int d = 10;
    int m = 2;
    double smoothing_epsilon = 0.05;
    double sigma = 2e-3;
    double sigma_w = 1.0;
    double p = 0.5;
    PathChoice path = PathChoice::automatic;

    std::vector<double> times{0.0, 0.25, 0.5, 1.0, 2.0};
    /// Score on fresh states (half-cell shifted grid, or the trajectory
    /// continued past the training window) instead of the training samples.
    bool held_out = false;

    FlowSystem flow() const;
    Observable observable() const;
    /// Bandwidth candidates 2^(k / per_octave) for k over the configured range.
    std::vector<double> bandwidth_grid() const;
};

/// Names accepted by preset().
std::vector<std::string> preset_names();
/// Bundled configurations. Throws ValidationError for an unknown name.
ExperimentConfig preset(const std::string& name);

/// Parses INI-style text: "[section]" headers and "key = value" lines.
/// Lists are comma separated and may be wrapped in brackets. An optional
/// "preset" key in [experiment] selects the base configuration. Unknown keys
/// and sections are rejected. The result is validated.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Throws ValidationError unless all dimensions are positive,
/// 0 < tau <= sigma / 2, d <= pairs <= l and the time grid is nonnegative.
void validate(const ExperimentConfig& config);

/// Canonical JSON with every field, used for hashing and metadata.
nlohmann::json to_json(const ExperimentConfig& config);

}  // namespace fockcast
