#include "fockcast/config.hpp"
#include "fockcast/errors.hpp"
#include "fockcast/parallel.hpp"
#include "fockcast/pipeline.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

namespace {

struct Options {
    std::string config_path;
    std::string preset_name;
    std::string stage_dir;
    int threads = 0;
};

fockcast::ExperimentConfig resolve_config(const Options& o) {
    if (!o.config_path.empty() && !o.preset_name.empty())
        throw fockcast::ValidationError("--config and --preset are mutually exclusive");
    if (!o.config_path.empty()) return fockcast::load_config(o.config_path);
    if (!o.preset_name.empty()) return fockcast::preset(o.preset_name);
    throw fockcast::ValidationError("no configuration given; pass --config <path> or --preset <name>");
}

void print_outcome(const fockcast::StageOutcome& outcome) {
    std::printf("%-9s %s %s", fockcast::to_string(outcome.stage).c_str(), outcome.hash.substr(0, 12).c_str(),
                outcome.cached ? "cached" : "computed");
    if (!outcome.cached) std::printf(" in %.2f s", outcome.seconds);
    std::printf("\n");
}

int run(const std::string& verb, const Options& o) {
    const fockcast::ExperimentConfig config = resolve_config(o);
    fockcast::set_thread_count(o.threads > 0 ? o.threads
                                             : static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
    const std::string root = o.stage_dir.empty() ? "runs/" + config.name : o.stage_dir;
    fockcast::Pipeline pipeline(config, root);
    if (verb == "all") {
        for (const fockcast::Stage stage : fockcast::all_stages()) print_outcome(pipeline.run(stage));
    } else {
        print_outcome(pipeline.run(fockcast::stage_from_string(verb)));
    }
    if (verb == "all" || verb == "report") std::cout << pipeline.report_text();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Koopman and Fock-space forecasting of ergodic flows"};
    app.require_subcommand(1, 1);
    Options options;
    std::string verb;

    std::vector<std::string> verbs;
    for (const fockcast::Stage stage : fockcast::all_stages()) verbs.push_back(fockcast::to_string(stage));
    verbs.push_back("all");
    for (const std::string& name : verbs) {
        CLI::App* sub = app.add_subcommand(name, name == "all" ? "Run every stage, reusing current artifacts"
                                                               : "Run the " + name + " stage");
        sub->add_option("--config", options.config_path, "Experiment config file")->check(CLI::ExistingFile);
        sub->add_option("--preset", options.preset_name, "Bundled configuration name");
        sub->add_option("--stage-dir", options.stage_dir, "Artifact root (default runs/<experiment name>)");
        sub->add_option("--threads", options.threads, "Worker threads (default: all cores)")
            ->check(CLI::NonNegativeNumber);
        sub->callback([&verb, name] { verb = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        return run(verb, options);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return fockcast::exit_code_for(e);
    }
}
