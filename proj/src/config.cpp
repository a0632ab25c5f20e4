#include "fockcast/config.hpp"

#include "fockcast/errors.hpp"
#include "fockcast/io.hpp"

#include <boost/algorithm/string/trim.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <type_traits>

namespace fockcast {
namespace {

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

std::string unquote(std::string value) {
    boost::algorithm::trim(value);
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front())
        value = value.substr(1, value.size() - 2);
    return value;
}

double parse_double(const std::string& text) {
    const std::string value = unquote(text);
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size() || value.empty() || !std::isfinite(out))
        throw ValidationError("expected a number, got '" + value + "'");
    return out;
}

int parse_int(const std::string& text) {
    const std::string value = unquote(text);
    int out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size() || value.empty())
        throw ValidationError("expected an integer, got '" + value + "'");
    return out;
}

bool parse_bool(const std::string& text) {
    const std::string value = unquote(text);
    if (value == "true") return true;
    if (value == "false") return false;
    throw ValidationError("expected true or false, got '" + value + "'");
}

std::vector<double> parse_list(const std::string& text) {
    std::string value = unquote(text);
    if (!value.empty() && value.front() == '[') {
        if (value.back() != ']') throw ValidationError("unterminated list");
        value = value.substr(1, value.size() - 2);
    }
    std::vector<double> out;
    std::stringstream stream(value);
    std::string item;
    while (std::getline(stream, item, ',')) {
        boost::algorithm::trim(item);
        if (item.empty()) continue;
        out.push_back(parse_double(item));
    }
    return out;
}

template <class T>
Setter number(T ExperimentConfig::*field) {
    return [field](ExperimentConfig& c, const std::string& v) {
        if constexpr (std::is_same_v<T, int>) c.*field = parse_int(v);
        else c.*field = parse_double(v);
    };
}

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"experiment.name", [](ExperimentConfig& c, const std::string& v) { c.name = unquote(v); }},
        {"system.kind", [](ExperimentConfig& c, const std::string& v) { c.system = system_kind_from_string(unquote(v)); }},
        {"system.alpha", number(&ExperimentConfig::alpha)},
        {"system.gamma", number(&ExperimentConfig::gamma)},
        {"system.n_side", number(&ExperimentConfig::n_side)},
        {"system.beta", number(&ExperimentConfig::beta)},
        {"system.rho", number(&ExperimentConfig::rho)},
        {"system.sigma", number(&ExperimentConfig::sigma_l)},
        {"system.n_samples", number(&ExperimentConfig::n_samples)},
        {"system.dt", number(&ExperimentConfig::dt)},
        {"system.spinup", number(&ExperimentConfig::spinup)},
        {"system.step", number(&ExperimentConfig::step)},
        {"system.x0",
         [](ExperimentConfig& c, const std::string& v) {
             const std::vector<double> x = parse_list(v);
             if (x.size() != 3) throw ValidationError("needs three components");
             c.x0 = {x[0], x[1], x[2]};
         }},
        {"kernel.variable_bandwidth",
         [](ExperimentConfig& c, const std::string& v) { c.variable_bandwidth = parse_bool(v); }},
        {"kernel.epsilon", number(&ExperimentConfig::kernel_epsilon)},
        {"kernel.epsilon_tilde", number(&ExperimentConfig::kernel_epsilon_tilde)},
        {"kernel.dim", number(&ExperimentConfig::kernel_dim)},
        {"kernel.grid_min_log2", number(&ExperimentConfig::grid_min_log2)},
        {"kernel.grid_max_log2", number(&ExperimentConfig::grid_max_log2)},
        {"kernel.grid_per_octave", number(&ExperimentConfig::grid_per_octave)},
        {"spectral.l", number(&ExperimentConfig::l)},
        {"spectral.tau", number(&ExperimentConfig::tau)},
        {"spectral.z", number(&ExperimentConfig::z)},
        {"spectral.pairs", number(&ExperimentConfig::pairs)},
        {"fock.d", number(&ExperimentConfig::d)},
        {"fock.m", number(&ExperimentConfig::m)},
        {"fock.epsilon", number(&ExperimentConfig::smoothing_epsilon)},
        {"fock.sigma", number(&ExperimentConfig::sigma)},
        {"fock.sigma_w", number(&ExperimentConfig::sigma_w)},
        {"fock.p", number(&ExperimentConfig::p)},
        {"fock.predictor_path",
         [](ExperimentConfig& c, const std::string& v) { c.path = path_choice_from_string(unquote(v)); }},
        {"forecast.times", [](ExperimentConfig& c, const std::string& v) { c.times = parse_list(v); }},
        {"forecast.held_out", [](ExperimentConfig& c, const std::string& v) { c.held_out = parse_bool(v); }},
    };
    return table;
}

ExperimentConfig stepanoff_desk() {
    ExperimentConfig c;
    c.name = "stepanoff_desk";
    c.system = SystemKind::stepanoff;
    c.n_side = 64;
    c.kernel_epsilon = 0.1;
    c.l = 512;
    c.pairs = 128;
    c.tau = 1e-3;
    c.z = 1e-3;
    c.d = 10;
    c.m = 2;
    c.smoothing_epsilon = 0.05;
    c.sigma = 2e-3;
    return c;
}

ExperimentConfig l63_desk() {
    ExperimentConfig c;
    c.name = "l63_desk";
    c.system = SystemKind::lorenz63;
    c.n_samples = 4000;
    c.dt = 5.0;
    c.l = 256;
    c.pairs = 64;
    c.tau = 1e-3;
    c.z = 1e-3;
    c.d = 10;
    c.m = 2;
    c.smoothing_epsilon = 0.1;
    c.sigma = 2e-3;
    return c;
}

ExperimentConfig stepanoff_paper() {
    ExperimentConfig c = stepanoff_desk();
    c.name = "stepanoff_paper";
    c.n_side = 256;
    c.kernel_epsilon = 0.0;
    c.l = 4096;
    c.pairs = 512;
    c.tau = 1e-4;
    c.sigma = 2e-4;
    c.d = 50;
    c.m = 4;
    return c;
}

ExperimentConfig l63_paper() {
    ExperimentConfig c = l63_desk();
    c.name = "l63_paper";
    c.n_samples = 80000;
    c.l = 2048;
    c.pairs = 512;
    c.tau = 5e-7;
    c.sigma = 2e-6;
    c.d = 50;
    c.m = 4;
    return c;
}

}  // namespace

std::string to_string(PathChoice choice) {
    switch (choice) {
        case PathChoice::moments: return "moments";
        case PathChoice::collapsed: return "collapsed";
        default: return "auto";
    }
}

PathChoice path_choice_from_string(const std::string& name) {
    if (name == "auto") return PathChoice::automatic;
    if (name == "moments") return PathChoice::moments;
    if (name == "collapsed") return PathChoice::collapsed;
    throw ValidationError("unknown predictor path '" + name + "'");
}

FlowSystem ExperimentConfig::flow() const {
    return system == SystemKind::stepanoff ? FlowSystem::stepanoff(alpha) : FlowSystem::lorenz63(beta, rho, sigma_l);
}

Observable ExperimentConfig::observable() const {
    return system == SystemKind::stepanoff ? Observable{ObservableKind::von_mises, gamma}
                                           : Observable{ObservableKind::coordinate, 1.0};
}

std::vector<double> ExperimentConfig::bandwidth_grid() const {
    std::vector<double> grid;
    for (int k = grid_min_log2 * grid_per_octave; k <= grid_max_log2 * grid_per_octave; ++k)
        grid.push_back(std::exp2(static_cast<double>(k) / grid_per_octave));
    return grid;
}

std::vector<std::string> preset_names() { return {"stepanoff_desk", "l63_desk", "stepanoff_paper", "l63_paper"}; }

ExperimentConfig preset(const std::string& name) {
    if (name == "stepanoff_desk") return stepanoff_desk();
    if (name == "l63_desk") return l63_desk();
    if (name == "stepanoff_paper") return stepanoff_paper();
    if (name == "l63_paper") return l63_paper();
    throw ValidationError("unknown preset '" + name + "'");
}

ExperimentConfig parse_config(const std::string& text) {
    boost::property_tree::ptree tree;
    std::istringstream in(text);
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ValidationError(std::string("malformed config: ") + e.what());
    }
    if (tree.empty()) throw ValidationError("config is empty");

    ExperimentConfig config;
    if (const auto base = tree.get_optional<std::string>("experiment.preset")) config = preset(unquote(*base));
    for (const auto& [section, entries] : tree) {
        if (entries.empty() && !entries.data().empty())
            throw ValidationError("key '" + section + "' must be inside a section");
        for (const auto& [key, value] : entries) {
            const std::string full = section + "." + key;
            if (full == "experiment.preset") continue;
            const auto it = setters().find(full);
            if (it == setters().end()) throw ValidationError("unknown config key '" + full + "'");
            try {
                it->second(config, value.data());
            } catch (const ValidationError& e) {
                throw ValidationError("'" + full + "': " + e.what());
            }
        }
    }
    validate(config);
    return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_text(path);
    } catch (const ArtifactError&) {
        throw ValidationError("cannot read config " + path.string());
    }
    return parse_config(text);
}

void validate(const ExperimentConfig& c) {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw ValidationError(what);
    };
    if (c.system == SystemKind::stepanoff) {
        require(c.n_side >= 2, "n_side must be at least 2");
        require(c.gamma > 0.0, "von Mises concentration must be positive");
    } else {
        require(c.n_samples >= 2, "n_samples must be at least 2");
        require(c.dt > 0.0, "dt must be positive");
        require(c.spinup >= 0.0, "spinup must be nonnegative");
    }
    require(c.step > 0.0, "integration step must be positive");
    require(c.grid_per_octave > 0 && c.grid_min_log2 < c.grid_max_log2, "bandwidth grid range is empty");
    require(c.l >= 2, "l must be at least 2");
    require(c.pairs >= 1, "pairs must be positive");
    require(2 * c.pairs < c.l, "pairs must satisfy 2 pairs < l");
    require(c.d >= 1, "d must be positive");
    require(c.d <= c.pairs, "d must not exceed the retained pairs");
    require(c.m >= 0, "m must be nonnegative");
    require(c.smoothing_epsilon > 0.0, "smoothing bandwidth must be positive");
    require(c.z > 0.0, "z must be positive");
    require(c.sigma > 0.0, "sigma must be positive");
    require(c.tau > 0.0 && c.tau <= 0.5 * c.sigma, "tau must lie in (0, sigma/2]");
    require(c.sigma_w > 0.0 && c.p > 0.0 && c.p < 1.0, "weight family needs sigma_w > 0 and 0 < p < 1");
    require(!c.times.empty(), "time grid is empty");
    for (double t : c.times) require(t >= 0.0, "prediction times must be nonnegative");
}

nlohmann::json to_json(const ExperimentConfig& c) {
    return {
        {"name", c.name},
        {"system", {{"kind", to_string(c.system)},
                    {"alpha", c.alpha},
                    {"gamma", c.gamma},
                    {"n_side", c.n_side},
                    {"beta", c.beta},
                    {"rho", c.rho},
                    {"sigma", c.sigma_l},
                    {"n_samples", c.n_samples},
                    {"dt", c.dt},
                    {"spinup", c.spinup},
                    {"x0", c.x0},
                    {"step", c.step}}},
        {"kernel", {{"variable_bandwidth", c.variable_bandwidth},
                    {"epsilon", c.kernel_epsilon},
                    {"epsilon_tilde", c.kernel_epsilon_tilde},
                    {"dim", c.kernel_dim},
                    {"grid_min_log2", c.grid_min_log2},
                    {"grid_max_log2", c.grid_max_log2},
                    {"grid_per_octave", c.grid_per_octave}}},
        {"spectral", {{"l", c.l}, {"tau", c.tau}, {"z", c.z}, {"pairs", c.pairs}}},
        {"fock", {{"d", c.d},
                  {"m", c.m},
                  {"epsilon", c.smoothing_epsilon},
                  {"sigma", c.sigma},
                  {"sigma_w", c.sigma_w},
                  {"p", c.p},
                  {"predictor_path", to_string(c.path)}}},
        {"forecast", {{"times", c.times}, {"held_out", c.held_out}}},
    };
}

}  // namespace fockcast
