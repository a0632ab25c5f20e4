#include "fockcast/config.hpp"
#include "fockcast/errors.hpp"
#include "fockcast/io.hpp"
#include "fockcast/pipeline.hpp"

#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>

using namespace fockcast;
namespace fs = std::filesystem;

namespace {

const char* kSmallConfig = R"(
[experiment]
name = tiny

[system]
kind = stepanoff
n_side = 16

[kernel]
epsilon = 0.25
epsilon_tilde = 0.8
dim = 2

[spectral]
l = 40
pairs = 10
tau = 1e-3
z = 1e-3

[fock]
d = 3
m = 2
epsilon = 0.3
sigma = 2e-3

[forecast]
times = [0, 0.1]
)";

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                ("fockcast-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

ExperimentConfig small_config() { return parse_config(kSmallConfig); }

int run_cli(const std::string& args) {
    const char* bin = std::getenv("FOCKCAST_BIN");
    REQUIRE(bin != nullptr);
    const int status = std::system((std::string(bin) + " " + args + " > /dev/null 2>&1").c_str());
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

}  // namespace

TEST_CASE("presets validate") {
    for (const std::string& name : preset_names()) CHECK_NOTHROW(validate(preset(name)));
    const ExperimentConfig s = preset("stepanoff_desk");
    CHECK(s.n_side == 64);
    CHECK(s.l == 512);
    CHECK(s.pairs == 128);
    CHECK(s.d == 10);
    CHECK(s.m == 2);
    CHECK(s.tau == 1e-3);
    CHECK(s.sigma == 2e-3);
    CHECK(s.smoothing_epsilon == 0.05);
    const ExperimentConfig l = preset("l63_desk");
    CHECK(l.system == SystemKind::lorenz63);
    CHECK(l.n_samples == 4000);
    CHECK(l.dt == 5.0);
    CHECK(l.l == 256);
    CHECK(l.pairs == 64);
    CHECK(l.m == 2);
    CHECK_THROWS_AS(preset("nope"), ValidationError);
}

TEST_CASE("config parsing") {
    const ExperimentConfig c = small_config();
    CHECK(c.name == "tiny");
    CHECK(c.n_side == 16);
    CHECK(c.times == std::vector<double>{0.0, 0.1});
    CHECK(c.kernel_epsilon == 0.25);

    const ExperimentConfig based = parse_config("[experiment]\npreset = l63_desk\n[fock]\nm = 4\n");
    CHECK(based.system == SystemKind::lorenz63);
    CHECK(based.m == 4);

    CHECK_THROWS_AS(parse_config(""), ValidationError);
    CHECK_THROWS_AS(parse_config("[fock]\nbogus = 1\n"), ValidationError);
    CHECK_THROWS_AS(parse_config("[fock]\nd = ten\n"), ValidationError);
    CHECK_THROWS_AS(parse_config("[spectral]\ntau = 0.01\n[fock]\nsigma = 0.01\n"), ValidationError);
    CHECK_THROWS_AS(parse_config("[fock]\nd = 200\n"), ValidationError);
    CHECK_THROWS_AS(parse_config("[forecast]\ntimes = 0, -1\n"), ValidationError);
    try {
        parse_config("[fock]\nm = 1.5\n");
        FAIL("expected failure");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("fock.m") != std::string::npos);
    }
}

TEST_CASE("stage hashes follow the dependency graph") {
    const ExperimentConfig base = small_config();
    ExperimentConfig changed = base;
    changed.smoothing_epsilon = 0.4;
    const Pipeline a(base, "unused");
    const Pipeline b(changed, "unused");
    for (Stage s : {Stage::sample, Stage::kernel, Stage::basis, Stage::eigs})
        CHECK(a.expected_hash(s) == b.expected_hash(s));
    for (Stage s : {Stage::moments, Stage::predict, Stage::evaluate, Stage::report})
        CHECK(a.expected_hash(s) != b.expected_hash(s));

    ExperimentConfig weights = base;
    weights.sigma_w = 2.0;
    const Pipeline c(weights, "unused");
    CHECK(a.expected_hash(Stage::moments) == c.expected_hash(Stage::moments));
    CHECK(a.expected_hash(Stage::predict) != c.expected_hash(Stage::predict));

    CHECK(stage_from_string("eigs") == Stage::eigs);
    CHECK_THROWS_AS(stage_from_string("bogus"), ValidationError);
}

TEST_CASE("stages require current upstream artifacts") {
    TempDir dir;
    Pipeline p(small_config(), dir.path());
    try {
        p.run(Stage::kernel);
        FAIL("expected failure");
    } catch (const ArtifactError& e) {
        CHECK(std::string(e.what()).find("fockcast sample") != std::string::npos);
    }
    CHECK_FALSE(p.run(Stage::sample).cached);
    CHECK(p.run(Stage::sample).cached);
    CHECK_THROWS_AS(p.basis(), ArtifactError);
}

TEST_CASE("full run, caching and invalidation") {
    TempDir dir;
    Pipeline p(small_config(), dir.path());
    for (const StageOutcome& o : p.run_all()) CHECK_FALSE(o.cached);
    for (const StageOutcome& o : p.run_all()) CHECK(o.cached);
    const std::string report = p.report_text();
    CHECK(report.rfind("t,rmse_fock,rmse_cl,ac_fock,ac_cl\n", 0) == 0);
    CHECK(std::count(report.begin(), report.end(), '\n') == 3);

    const nlohmann::json eigs = p.stage_record(Stage::eigs);
    CHECK(eigs.at("metadata").at("max_residual").get<double>() < 1e-10);
    CHECK(p.eigensystem().pairs() == 10);

    // Reloaded artifacts rebuild a predictor that reproduces the stored predictions.
    const std::unique_ptr<Forecaster> f = p.forecaster();
    const SamplePredictions stored = p.predictions();
    const Eigen::VectorXcd g = f->fock.gamma()(f->basis.phi.row(5).transpose());
    CHECK(f->fock.evaluate(g, 0.1, f->path).value == doctest::Approx(stored.fock(5, 1)).epsilon(1e-12));

    // Changing the smoothing bandwidth reruns only moments onward.
    ExperimentConfig changed = small_config();
    changed.smoothing_epsilon = 0.35;
    Pipeline q(changed, dir.path());
    for (Stage s : {Stage::sample, Stage::kernel, Stage::basis, Stage::eigs}) CHECK(q.is_current(s));
    for (Stage s : {Stage::moments, Stage::predict, Stage::evaluate, Stage::report}) CHECK_FALSE(q.is_current(s));
    CHECK_THROWS_AS(q.run(Stage::predict), ArtifactError);
    const std::vector<StageOutcome> outcomes = q.run_all();
    CHECK(outcomes[3].cached);
    CHECK_FALSE(outcomes[4].cached);
    CHECK_FALSE(p.is_current(Stage::moments));
}

TEST_CASE("cache reuse matches a cold run byte for byte") {
    TempDir warm;
    TempDir cold;
    ExperimentConfig config = small_config();
    Pipeline a(config, warm.path());
    a.run_all();
    config.smoothing_epsilon = 0.35;
    Pipeline a2(config, warm.path());
    a2.run_all();
    config.smoothing_epsilon = 0.3;
    Pipeline a3(config, warm.path());
    a3.run_all();
    Pipeline b(config, cold.path());
    b.run_all();
    CHECK(a3.report_text() == b.report_text());
    CHECK(read_text(warm.path() / "report" / "report.json") == read_text(cold.path() / "report" / "report.json"));
}

TEST_CASE("weight family does not change the report") {
    TempDir one;
    TempDir two;
    ExperimentConfig config = small_config();
    Pipeline a(config, one.path());
    a.run_all();
    config.sigma_w = 2.5;
    config.p = 0.3;
    Pipeline b(config, two.path());
    b.run_all();
    CHECK(a.report_text() == b.report_text());
}

TEST_CASE("held-out evaluation") {
    TempDir dir;
    ExperimentConfig config = small_config();
    config.held_out = true;
    Pipeline p(config, dir.path());
    p.run_all();
    const TrajectoryDataset train = p.dataset();
    const TrajectoryDataset held = p.evaluation_set();
    REQUIRE(held.size() == train.size());
    CHECK(held.state(0)[0] == doctest::Approx(std::numbers::pi / 16).epsilon(1e-15));
    CHECK(p.truth().col(0) == held.observable_values);

    const std::unique_ptr<Forecaster> f = p.forecaster();
    const SamplePredictions s = p.predictions();
    CHECK(s.fock(7, 1) == doctest::Approx(predict_fock(f->fock, f->nystrom, held.state(7), 0.1)).epsilon(1e-12));
    CHECK(s.classical(7, 1) ==
          doctest::Approx(predict_classical(f->classical, f->nystrom, held.state(7), 0.1)).epsilon(1e-12));

    // Toggling the flag reruns only predict onward.
    config.held_out = false;
    Pipeline q(config, dir.path());
    CHECK(q.is_current(Stage::moments));
    CHECK_FALSE(q.is_current(Stage::predict));
    CHECK(parse_config("[forecast]\nheld_out = true\n").held_out);
}

TEST_CASE("corrupted artifacts are detected") {
    TempDir dir;
    Pipeline p(small_config(), dir.path());
    p.run(Stage::sample);
    {
        std::fstream f(dir.path() / "sample" / "states.bin", std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(3);
        f.put('\x7f');
    }
    CHECK_THROWS_AS(p.dataset(), ArtifactError);
}

TEST_CASE("artifact io round trip") {
    TempDir dir;
    const Eigen::MatrixXd a = Eigen::MatrixXd::Random(3, 5);
    const Eigen::MatrixXcd c = Eigen::MatrixXcd::Random(4, 2);
    save_real(dir.path() / "a.bin", a, {{"note", "x"}});
    save_complex(dir.path() / "c.bin", c);
    CHECK(load_real(dir.path() / "a.bin") == a);
    CHECK(load_complex(dir.path() / "c.bin") == c);
    CHECK(read_json(dir.path() / "a.bin.json").at("note") == "x");
    CHECK_THROWS_AS(load_complex(dir.path() / "a.bin"), ArtifactError);
    CHECK_THROWS_AS(load_real(dir.path() / "missing.bin"), ArtifactError);
    // Row-major little-endian layout.
    const std::string bytes = read_text(dir.path() / "a.bin");
    double second = 0.0;
    std::memcpy(&second, bytes.data() + sizeof(double), sizeof(double));
    CHECK(second == a(0, 1));
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("cli exit codes") {
    TempDir dir;
    const fs::path good = dir.path() / "tiny.ini";
    write_file(good, kSmallConfig);
    const std::string stage_dir = " --stage-dir " + (dir.path() / "run").string();
    CHECK(run_cli("sample") == 2);
    CHECK(run_cli("bogus --config " + good.string()) == 2);
    CHECK(run_cli("kernel --config " + good.string() + stage_dir) == 2);

    const fs::path empty = dir.path() / "empty.ini";
    write_file(empty, "");
    CHECK(run_cli("sample --config " + empty.string() + stage_dir) == 2);
    const fs::path bad = dir.path() / "bad.ini";
    write_file(bad, "[spectral]\ntau = 0.01\n[fock]\nsigma = 0.01\n");
    CHECK(run_cli("sample --config " + bad.string() + stage_dir) == 2);

    CHECK(run_cli("all --config " + good.string() + stage_dir + " --threads 2") == 0);
    CHECK(run_cli("report --config " + good.string() + stage_dir) == 0);
    CHECK(fs::exists(dir.path() / "run" / "report" / "report.csv"));

    // Far more pairs than a very smooth kernel supports.
    const fs::path smooth = dir.path() / "smooth.ini";
    std::string text = kSmallConfig;
    text.replace(text.find("epsilon = 0.25"), 14, "epsilon = 4.0");
    text.replace(text.find("l = 40"), 6, "l = 200");
    text.replace(text.find("pairs = 10"), 10, "pairs = 90");
    write_file(smooth, text);
    const std::string smooth_dir = " --stage-dir " + (dir.path() / "smooth").string();
    CHECK(run_cli("all --config " + smooth.string() + smooth_dir) == 3);
}
