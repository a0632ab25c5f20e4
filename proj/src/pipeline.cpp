#include "fockcast/pipeline.hpp"

#include "fockcast/errors.hpp"
#include "fockcast/io.hpp"
#include "fockcast/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <numbers>

namespace fockcast {
namespace fs = std::filesystem;
namespace {

constexpr int kFormatVersion = 1;
constexpr const char* kRecord = "stage.json";

Eigen::VectorXd column(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

nlohmann::json scan_json(const BandwidthScan& scan) {
    nlohmann::json slopes = nlohmann::json::array();
    for (double s : scan.slopes) slopes.push_back(std::isfinite(s) ? nlohmann::json(s) : nlohmann::json());
    return {{"epsilons", scan.epsilons}, {"sums", scan.sums}, {"slopes", slopes}, {"epsilon", scan.epsilon},
            {"dim", scan.dim}};
}

// Fresh states disjoint from the training samples: the grid shifted by half a
// cell, or the trajectory continued one interval past its last sample.
Eigen::MatrixXd held_out_states(const TrajectoryDataset& ds, const ExperimentConfig& config) {
    if (ds.grid) return ds.states.array() + std::numbers::pi / config.n_side;
    const Eigen::Index n = ds.size();
    return sample_trajectory_l63(ds.state(n - 1), static_cast<int>(n), ds.dt, ds.dt, config.step, ds.system).states;
}

Eigen::MatrixXd nystrom_rows(const NystromExtension& nystrom, const Eigen::MatrixXd& states) {
    Eigen::MatrixXd phi(states.rows(), nystrom.R().cols());
    parallel_for(static_cast<std::size_t>(states.rows()), 32, [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            const auto i = static_cast<Eigen::Index>(r);
            phi.row(i) = nystrom.phi(states.row(i).transpose()).transpose();
        }
    });
    return phi;
}

double worst_residual(const GeneratorMatrices& g, const GevpSolution& sol, const KoopmanEigensystem& es) {
    using cd = std::complex<double>;
    const Eigen::MatrixXcd a = g.amat.cast<cd>();
    const Eigen::MatrixXcd b = g.bmat.cast<cd>();
    double worst = 0.0;
    for (Eigen::Index j = 1; j <= es.pairs(); ++j) {
        const Eigen::Index k = es.gevp_index[static_cast<std::size_t>(j)];
        const Eigen::VectorXcd bc = b * sol.c.col(k);
        const Eigen::VectorXcd r = a * sol.c.col(k) - cd(0.0, sol.b[k]) * bc;
        worst = std::max(worst, r.norm() / bc.norm());
    }
    return worst;
}

}  // namespace

const std::vector<Stage>& all_stages() {
    static const std::vector<Stage> stages = {Stage::sample,  Stage::kernel,  Stage::basis,    Stage::eigs,
                                              Stage::moments, Stage::predict, Stage::evaluate, Stage::report};
    return stages;
}

std::string to_string(Stage stage) {
    switch (stage) {
        case Stage::sample: return "sample";
        case Stage::kernel: return "kernel";
        case Stage::basis: return "basis";
        case Stage::eigs: return "eigs";
        case Stage::moments: return "moments";
        case Stage::predict: return "predict";
        case Stage::evaluate: return "evaluate";
        case Stage::report: return "report";
    }
    return "unknown";
}

Stage stage_from_string(const std::string& name) {
    for (Stage s : all_stages())
        if (to_string(s) == name) return s;
    throw ValidationError("unknown stage '" + name + "'");
}

nlohmann::json stage_inputs(const ExperimentConfig& config, Stage stage) {
    const nlohmann::json all = to_json(config);
    switch (stage) {
        case Stage::sample: {
            nlohmann::json s = all.at("system");
            if (config.system == SystemKind::stepanoff) {
                for (const char* key : {"beta", "rho", "sigma", "n_samples", "dt", "spinup", "x0"}) s.erase(key);
            } else {
                for (const char* key : {"alpha", "gamma", "n_side"}) s.erase(key);
            }
            return s;
        }
        case Stage::kernel: return all.at("kernel");
        case Stage::basis: return {{"l", config.l}};
        case Stage::eigs: return {{"tau", config.tau}, {"z", config.z}, {"pairs", config.pairs}};
        case Stage::moments: return {{"d", config.d}, {"m", config.m}, {"epsilon", config.smoothing_epsilon}};
        case Stage::predict:
            return {{"sigma", config.sigma},
                    {"sigma_w", config.sigma_w},
                    {"p", config.p},
                    {"predictor_path", to_string(config.path)},
                    {"times", config.times},
                    {"held_out", config.held_out}};
        case Stage::evaluate: return {{"times", config.times}, {"held_out", config.held_out}};
        case Stage::report: return nlohmann::json::object();
    }
    return nlohmann::json::object();
}

PredictorPath resolve_path(PathChoice choice, const MultiIndexTable& table, Eigen::Index samples) {
    if (choice == PathChoice::moments) return PredictorPath::moments;
    if (choice == PathChoice::collapsed) return PredictorPath::collapsed;
    const double collapsed_cost = static_cast<double>(samples) * table.slots();
    return static_cast<double>(table.size()) <= collapsed_cost ? PredictorPath::moments : PredictorPath::collapsed;
}

Pipeline::Pipeline(ExperimentConfig config, fs::path root) : config_(std::move(config)), root_(std::move(root)) {
    validate(config_);
}

fs::path Pipeline::stage_dir(Stage stage) const { return root_ / to_string(stage); }

std::string Pipeline::expected_hash(Stage stage) const {
    const auto it = std::find(all_stages().begin(), all_stages().end(), stage);
    const std::string upstream = it == all_stages().begin() ? "" : expected_hash(*(it - 1));
    const nlohmann::json key = {{"format", kFormatVersion},
                                {"stage", to_string(stage)},
                                {"upstream", upstream},
                                {"inputs", stage_inputs(config_, stage)}};
    return sha256_hex(key.dump());
}

bool Pipeline::is_current(Stage stage) const {
    const fs::path record = stage_dir(stage) / kRecord;
    if (!fs::exists(record)) return false;
    try {
        return read_json(record).value("hash", "") == expected_hash(stage);
    } catch (const ArtifactError&) {
        return false;
    }
}

void Pipeline::require_current(Stage stage) const {
    if (!is_current(stage))
        throw ArtifactError("artifacts of stage '" + to_string(stage) + "' in " + root_.string() +
                            " are missing or stale; run `fockcast " + to_string(stage) + "` first");
}

nlohmann::json Pipeline::stage_record(Stage stage) const {
    require_current(stage);
    return read_json(stage_dir(stage) / kRecord);
}

StageOutcome Pipeline::run(Stage stage) {
    StageOutcome outcome;
    outcome.stage = stage;
    outcome.hash = expected_hash(stage);
    if (is_current(stage)) {
        outcome.cached = true;
        return outcome;
    }
    const auto it = std::find(all_stages().begin(), all_stages().end(), stage);
    if (it != all_stages().begin()) require_current(*(it - 1));

    const auto start = std::chrono::steady_clock::now();
    const fs::path dir = stage_dir(stage);
    fs::remove_all(dir);
    fs::create_directories(dir);
    nlohmann::json meta;
    switch (stage) {
        case Stage::sample: meta = run_sample(); break;
        case Stage::kernel: meta = run_kernel(); break;
        case Stage::basis: meta = run_basis(); break;
        case Stage::eigs: meta = run_eigs(); break;
        case Stage::moments: meta = run_moments(); break;
        case Stage::predict: meta = run_predict(); break;
        case Stage::evaluate: meta = run_evaluate(); break;
        case Stage::report: meta = run_report(); break;
    }
    const nlohmann::json record = {{"stage", to_string(stage)},
                                   {"hash", outcome.hash},
                                   {"format", kFormatVersion},
                                   {"inputs", stage_inputs(config_, stage)},
                                   {"metadata", meta}};
    write_json(dir / kRecord, record);
    outcome.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return outcome;
}

std::vector<StageOutcome> Pipeline::run_all() {
    std::vector<StageOutcome> out;
    for (Stage s : all_stages()) out.push_back(run(s));
    return out;
}

nlohmann::json Pipeline::run_sample() {
    const TrajectoryDataset ds =
        config_.system == SystemKind::stepanoff
            ? sample_grid_stepanoff(config_.n_side, config_.alpha, config_.gamma)
            : sample_trajectory_l63(Eigen::Vector3d(config_.x0[0], config_.x0[1], config_.x0[2]), config_.n_samples,
                                    config_.dt, config_.spinup, config_.step, config_.flow());
    const fs::path dir = stage_dir(Stage::sample);
    save_real(dir / "states.bin", ds.states);
    save_real(dir / "data.bin", ds.data);
    save_real(dir / "observable.bin", ds.observable_values);
    const nlohmann::json sidecar = {{"system", to_string(ds.system.kind)},
                                    {"params", ds.system.params},
                                    {"N", ds.size()},
                                    {"dt", ds.dt},
                                    {"state_dim", ds.system.state_dim()},
                                    {"data_dim", ds.system.data_dim()},
                                    {"checksum", sha256_file(dir / "states.bin")}};
    write_json(dir / "dataset.json", sidecar);
    return sidecar;
}

TrajectoryDataset Pipeline::dataset() const {
    require_current(Stage::sample);
    const fs::path dir = stage_dir(Stage::sample);
    const nlohmann::json sidecar = read_json(dir / "dataset.json");
    TrajectoryDataset ds = make_dataset(config_.flow(), config_.observable(), load_real(dir / "states.bin"),
                                        sidecar.at("dt").get<double>(), config_.system == SystemKind::stepanoff);
    if (ds.observable_values != load_real(dir / "observable.bin").col(0))
        throw ArtifactError("stored observable values disagree with the dataset");
    return ds;
}

nlohmann::json Pipeline::run_kernel() {
    const TrajectoryDataset ds = dataset();
    KernelSettings settings;
    settings.grid = config_.bandwidth_grid();
    settings.variable_bandwidth = config_.variable_bandwidth;
    settings.epsilon = config_.kernel_epsilon;
    settings.epsilon_tilde = config_.kernel_epsilon_tilde;
    settings.dim = config_.kernel_dim;
    BandwidthScan rbf_scan;
    BandwidthScan vb_scan;
    KernelModel model = KernelModel::build(ds, settings, &rbf_scan, &vb_scan);
    const Normalization norm = bistochastic_normalize(model.kernel_matrix());
    const double row_error =
        ((norm.P.rowwise().sum() / static_cast<double>(ds.size())).array() - 1.0).abs().maxCoeff();

    const fs::path dir = stage_dir(Stage::kernel);
    save_real(dir / "rho.bin", model.rho_values());
    save_real(dir / "d.bin", norm.d);
    save_real(dir / "q.bin", norm.q);
    nlohmann::json meta = {{"epsilon", model.epsilon()},
                           {"epsilon_tilde", model.epsilon_tilde()},
                           {"dim", model.dim_estimate()},
                           {"variable_bandwidth", config_.variable_bandwidth},
                           {"N", ds.size()},
                           {"row_sum_error", row_error},
                           {"checksum", sha256_file(dir / "d.bin")}};
    if (!rbf_scan.epsilons.empty()) meta["rbf_scan"] = scan_json(rbf_scan);
    if (!vb_scan.epsilons.empty()) meta["vb_scan"] = scan_json(vb_scan);
    return meta;
}

KernelModel Pipeline::kernel_model(const TrajectoryDataset& ds) const {
    const nlohmann::json meta = stage_record(Stage::kernel).at("metadata");
    const fs::path dir = stage_dir(Stage::kernel);
    BandwidthFunction rho = meta.at("variable_bandwidth").get<bool>()
                                ? BandwidthFunction(ds.data, meta.at("epsilon_tilde").get<double>(),
                                                    meta.at("dim").get<double>())
                                : BandwidthFunction::constant(1.0, ds.size());
    if (rho.sample_values() != load_real(dir / "rho.bin").col(0))
        throw ArtifactError("stored bandwidth function disagrees with the dataset");
    KernelModel model(ds, meta.at("epsilon").get<double>(), std::move(rho));
    model.set_normalization(load_real(dir / "d.bin").col(0), load_real(dir / "q.bin").col(0));
    return model;
}

nlohmann::json Pipeline::run_basis() {
    const TrajectoryDataset ds = dataset();
    const KernelModel model = kernel_model(ds);
    const Normalization norm = bistochastic_normalize(model.kernel_matrix());
    const SemigroupBasis basis = eig_markov(norm.P, config_.l);
    const fs::path dir = stage_dir(Stage::basis);
    save_real(dir / "lambdas.bin", basis.lambdas);
    save_real(dir / "etas.bin", basis.etas);
    save_real(dir / "phi.bin", basis.phi);
    return {{"l", basis.size()}, {"requested_l", config_.l}, {"N", ds.size()}, {"lambda_1", basis.lambdas[1]}};
}

SemigroupBasis Pipeline::basis() const {
    require_current(Stage::basis);
    const fs::path dir = stage_dir(Stage::basis);
    SemigroupBasis basis;
    basis.lambdas = load_real(dir / "lambdas.bin").col(0);
    basis.etas = load_real(dir / "etas.bin").col(0);
    basis.phi = load_real(dir / "phi.bin");
    return basis;
}

nlohmann::json Pipeline::run_eigs() {
    const TrajectoryDataset ds = dataset();
    const KernelModel model = kernel_model(ds);
    const SemigroupBasis b = basis();
    const NystromExtension nystrom(model, b);
    const Eigen::MatrixXd vmat = generator_matrix(b, model, nystrom);
    const GeneratorMatrices g = assemble_generator(vmat, b, config_.tau, config_.z);
    const GevpSolution sol = solve_gevp(g.amat, g.bmat);
    const KoopmanEigensystem es = assemble_eigensystem(sol, b, vmat, config_.tau, config_.z, config_.pairs);

    const fs::path dir = stage_dir(Stage::eigs);
    save_real(dir / "vmat.bin", vmat);
    save_real(dir / "gevp_b.bin", sol.b);
    save_complex(dir / "gevp_c.bin", sol.c);
    save_real(dir / "gevp_all.bin", sol.all);
    save_real(dir / "omegas.bin", es.omegas);
    save_complex(dir / "xi.bin", es.xi);
    save_complex(dir / "zeta_coeffs.bin", es.zeta_coeffs);
    save_real(dir / "energies.bin", es.energies);
    save_real(dir / "betas.bin", es.betas);
    return {{"tau", config_.tau},
            {"z", config_.z},
            {"l", b.size()},
            {"pairs", es.pairs()},
            {"nonzero_pairs", sol.b.size()},
            {"zero_cluster", sol.zero_cluster.size()},
            {"gevp_tolerance", sol.tolerance},
            {"max_residual", worst_residual(g, sol, es)},
            {"pair_map", es.pair_map},
            {"gevp_index", es.gevp_index}};
}

KoopmanEigensystem Pipeline::eigensystem() const {
    const nlohmann::json meta = stage_record(Stage::eigs).at("metadata");
    const fs::path dir = stage_dir(Stage::eigs);
    KoopmanEigensystem es;
    es.omegas = load_real(dir / "omegas.bin").col(0);
    es.xi = load_complex(dir / "xi.bin");
    es.zeta_coeffs = load_complex(dir / "zeta_coeffs.bin");
    es.energies = load_real(dir / "energies.bin").col(0);
    es.betas = load_real(dir / "betas.bin").col(0);
    es.pair_map = meta.at("pair_map").get<std::vector<Eigen::Index>>();
    es.gevp_index = meta.at("gevp_index").get<std::vector<Eigen::Index>>();
    es.tau = meta.at("tau").get<double>();
    es.z = meta.at("z").get<double>();
    return es;
}

GevpSolution Pipeline::gevp() const {
    require_current(Stage::eigs);
    const fs::path dir = stage_dir(Stage::eigs);
    GevpSolution sol;
    sol.b = load_real(dir / "gevp_b.bin").col(0);
    sol.c = load_complex(dir / "gevp_c.bin");
    sol.all = load_real(dir / "gevp_all.bin").col(0);
    const nlohmann::json meta = stage_record(Stage::eigs).at("metadata");
    sol.tolerance = meta.at("gevp_tolerance").get<double>();
    std::vector<double> zeros;
    for (double w : to_vector(sol.all))
        if (std::abs(w) <= sol.tolerance) zeros.push_back(w);
    sol.zero_cluster = column(zeros);
    return sol;
}

GeneratorMatrices Pipeline::generator() const {
    require_current(Stage::eigs);
    return assemble_generator(load_real(stage_dir(Stage::eigs) / "vmat.bin"), basis(), config_.tau, config_.z);
}

nlohmann::json Pipeline::run_moments() {
    const TrajectoryDataset ds = dataset();
    const KoopmanEigensystem es = eigensystem();
    const std::vector<Eigen::Index> modes = select_modes(es, ds.observable_values, config_.d);
    const MultiIndexTable table(config_.d, config_.m);
    const Eigen::MatrixXcd rho = smoothed_eigenfunction_products(es, ds.data, config_.smoothing_epsilon, modes);
    const Moments mom = compute_moments(ds.observable_values, rho, table);
    const fs::path dir = stage_dir(Stage::moments);
    save_complex(dir / "rho.bin", rho);
    const nlohmann::json meta = {{"d", config_.d},
                                 {"m", config_.m},
                                 {"epsilon", config_.smoothing_epsilon},
                                 {"modes", modes},
                                 {"table_size", table.size()},
                                 {"config_hash", expected_hash(Stage::moments)}};
    save_complex(dir / "moments_g.bin", mom.g, meta);
    save_complex(dir / "moments_h.bin", mom.h, meta);
    return meta;
}

MomentArtifacts Pipeline::moment_artifacts() const {
    const nlohmann::json meta = stage_record(Stage::moments).at("metadata");
    const fs::path dir = stage_dir(Stage::moments);
    MomentArtifacts out;
    out.modes = meta.at("modes").get<std::vector<Eigen::Index>>();
    out.rho = load_complex(dir / "rho.bin");
    out.moments.g = load_complex(dir / "moments_g.bin").col(0);
    out.moments.h = load_complex(dir / "moments_h.bin").col(0);
    return out;
}

std::unique_ptr<Forecaster> Pipeline::forecaster() const {
    auto f = std::make_unique<Forecaster>();
    f->dataset = dataset();
    f->model = kernel_model(f->dataset);
    f->basis = basis();
    f->nystrom = NystromExtension(f->model, f->basis);
    f->eigensystem = eigensystem();
    MomentArtifacts art = moment_artifacts();
    MultiIndexTable table(config_.d, config_.m);
    f->path = resolve_path(config_.path, table, f->dataset.size());
    const std::vector<Eigen::Index> cols = slot_columns(f->eigensystem, art.modes);
    Eigen::VectorXd omegas(static_cast<Eigen::Index>(cols.size()));
    for (std::size_t s = 0; s < cols.size(); ++s) omegas[static_cast<Eigen::Index>(s)] = f->eigensystem.omegas[cols[s]];
    GammaEvaluator gamma(f->eigensystem, f->basis, config_.sigma, config_.tau, art.modes);
    f->fock = FockPredictor(std::move(table), art.modes, std::move(omegas), std::move(art.moments), std::move(art.rho),
                            f->dataset.observable_values, std::move(gamma), WeightFamily{config_.sigma_w, config_.p});
    f->fock.calibrate_floor(f->fock.gamma().at(f->basis.phi));
    f->classical = ClassicalPredictor(f->eigensystem, f->basis, config_.tau, f->dataset.observable_values, art.modes);
    return f;
}

nlohmann::json Pipeline::run_predict() {
    const std::unique_ptr<Forecaster> f = forecaster();
    const fs::path dir = stage_dir(Stage::predict);
    Eigen::MatrixXd held_phi;
    if (config_.held_out) {
        const Eigen::MatrixXd states = held_out_states(f->dataset, config_);
        save_real(dir / "eval_states.bin", states);
        held_phi = nystrom_rows(f->nystrom, states);
    }
    const Eigen::MatrixXd& phi = config_.held_out ? held_phi : f->basis.phi;
    const SamplePredictions p = predict_samples(f->fock, f->classical, phi, config_.times, f->path);
    const nlohmann::json columns = {{"times", config_.times}};
    save_real(dir / "pred_fock.bin", p.fock, columns);
    save_real(dir / "pred_classical.bin", p.classical, columns);
    return {{"path", f->path == PredictorPath::moments ? "moments" : "collapsed"},
            {"denominator_floor", f->fock.denominator_floor()},
            {"max_imag_fock", p.max_imag_fock},
            {"max_imag_classical", p.max_imag_classical},
            {"min_fock", p.fock.minCoeff()},
            {"min_classical", p.classical.minCoeff()}};
}

SamplePredictions Pipeline::predictions() const {
    const nlohmann::json meta = stage_record(Stage::predict).at("metadata");
    const fs::path dir = stage_dir(Stage::predict);
    SamplePredictions p;
    p.fock = load_real(dir / "pred_fock.bin");
    p.classical = load_real(dir / "pred_classical.bin");
    p.max_imag_fock = meta.at("max_imag_fock").get<double>();
    p.max_imag_classical = meta.at("max_imag_classical").get<double>();
    return p;
}

TrajectoryDataset Pipeline::evaluation_set() const {
    if (!config_.held_out) return dataset();
    require_current(Stage::predict);
    const TrajectoryDataset train = dataset();
    return make_dataset(train.system, train.observable, load_real(stage_dir(Stage::predict) / "eval_states.bin"),
                        train.dt, train.grid);
}

nlohmann::json Pipeline::run_evaluate() {
    const TrajectoryDataset ds = evaluation_set();
    const SamplePredictions p = predictions();
    const Eigen::MatrixXd truth = truth_values(ds, config_.times, config_.step);
    const ForecastReport r = score(p.fock, p.classical, truth, config_.times);
    save_real(stage_dir(Stage::evaluate) / "truth.bin", truth, {{"times", config_.times}, {"step", config_.step}});
    return {{"times", r.times},
            {"rmse_fock", r.rmse_fock},
            {"rmse_cl", r.rmse_classical},
            {"ac_fock", r.ac_fock},
            {"ac_cl", r.ac_classical}};
}

Eigen::MatrixXd Pipeline::truth() const {
    require_current(Stage::evaluate);
    return load_real(stage_dir(Stage::evaluate) / "truth.bin");
}

ForecastReport Pipeline::scores() const {
    const nlohmann::json meta = stage_record(Stage::evaluate).at("metadata");
    ForecastReport r;
    r.times = meta.at("times").get<std::vector<double>>();
    r.rmse_fock = meta.at("rmse_fock").get<std::vector<double>>();
    r.rmse_classical = meta.at("rmse_cl").get<std::vector<double>>();
    r.ac_fock = meta.at("ac_fock").get<std::vector<double>>();
    r.ac_classical = meta.at("ac_cl").get<std::vector<double>>();
    const SamplePredictions p = predictions();
    r.pred_fock = p.fock;
    r.pred_classical = p.classical;
    return r;
}

nlohmann::json Pipeline::run_report() {
    const ForecastReport r = scores();
    const fs::path dir = stage_dir(Stage::report);
    write_text(dir / "report.csv", report_csv(r));
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t k = 0; k < r.times.size(); ++k)
        rows.push_back({{"t", r.times[k]},
                        {"rmse_fock", r.rmse_fock[k]},
                        {"rmse_cl", r.rmse_classical[k]},
                        {"ac_fock", r.ac_fock[k]},
                        {"ac_cl", r.ac_classical[k]}});
    write_json(dir / "report.json", {{"experiment", config_.name}, {"rows", rows}});
    return {{"rows", r.times.size()}, {"checksum", sha256_file(dir / "report.csv")}};
}

std::string Pipeline::report_text() const {
    require_current(Stage::report);
    return read_text(stage_dir(Stage::report) / "report.csv");
}

}  // namespace fockcast
