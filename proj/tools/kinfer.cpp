#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "kinfer/kernels.hpp"

using namespace kinfer;
using namespace kinfer::cli;

namespace {

struct Flags {
    std::string config_file;
    std::string system;
    std::uint64_t seed = 0;
    std::string output;
    std::size_t threads = 0;
    std::size_t samples = 0;
    double noise = 0.0;
    std::string method;
    std::string dataset;
    std::size_t max_iterations = 0;
    bool no_simulator = false;
    std::string study;
    std::vector<double> variances;
    std::vector<std::size_t> sizes;
    double variance = 0.0;
    double std_dev = 0.0;
};

void common_options(CLI::App* cmd, Flags& f)
{
    cmd->add_option("--config", f.config_file, "JSON run config");
    cmd->add_option("--seed", f.seed, "Master seed");
    cmd->add_option("-o,--output", f.output, "Output directory (default: $KINFER_OUT or ./kinfer-out)");
    cmd->add_option("--threads", f.threads, "Worker thread cap; results do not depend on it");
}

bool given(const CLI::App* cmd, const std::string& name)
{
    const auto* opt = cmd->get_option_no_throw(name);
    return opt && opt->count() > 0;
}

Json resolve(const CLI::App* cmd, const Flags& f)
{
    Json config = default_config();
    if (given(cmd, "--config"))
        merge_config(config, load_json(f.config_file));
    Json flags = Json::object();
    if (given(cmd, "--system"))
        flags["system"] = f.system;
    if (given(cmd, "--seed"))
        flags["seed"] = f.seed;
    if (given(cmd, "--output"))
        flags["output"] = f.output;
    if (given(cmd, "--threads"))
        flags["threads"] = f.threads;
    if (cmd->get_name() == "simulate") {
        if (given(cmd, "--samples"))
            flags["samples_per_experiment"] = f.samples;
        if (given(cmd, "--noise"))
            flags["noise_std_dev"] = f.noise;
    }
    if (cmd->get_name() == "discover") {
        if (given(cmd, "--method"))
            flags["method"] = f.method;
        if (given(cmd, "--dataset"))
            flags["dataset"] = f.dataset;
        if (given(cmd, "--max-iterations"))
            flags["loop"]["max_iterations"] = f.max_iterations;
        if (f.no_simulator)
            flags["simulator"] = false;
    }
    if (cmd->get_name() == "study") {
        if (given(cmd, "--variances"))
            flags["study"]["variances"] = f.variances;
        if (given(cmd, "--sizes"))
            flags["study"]["sizes"] = f.sizes;
        if (given(cmd, "--variance"))
            flags["study"]["variance"] = f.variance;
        if (given(cmd, "--std-dev"))
            flags["study"]["std_dev"] = f.std_dev;
    }
    merge_config(config, flags);
    return config;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Symbolic kinetic model discovery from concentration time series"};
    app.set_version_flag("--version", version());
    app.require_subcommand(1);
    Flags f;

    auto* simulate = app.add_subcommand("simulate", "Generate a noisy in-silico dataset");
    common_options(simulate, f);
    simulate->add_option("--system", f.system, "Case study name or custom system file");
    simulate->add_option("--samples", f.samples, "Samples per experiment");
    simulate->add_option("--noise", f.noise, "Noise standard deviation (M)");

    auto* discover = app.add_subcommand("discover", "Discover a rate model, designing experiments in the loop");
    common_options(discover, f);
    discover->add_option("--system", f.system, "Case study name or custom system file (the in-loop simulator)");
    discover->add_option("--method", f.method, "adok-s or adok-w");
    discover->add_option("--dataset", f.dataset, "Dataset directory written by simulate");
    discover->add_option("--max-iterations", f.max_iterations, "Discovery iterations");
    discover->add_flag("--no-simulator", f.no_simulator, "Do not simulate designed experiments");

    auto* study = app.add_subcommand("study", "Information-criterion studies on the isomerization rivals");
    common_options(study, f);
    study->add_option("kind", f.study, "ic-noise or ic-samples")->required();
    study->add_option("--variances", f.variances, "Noise variances for ic-noise")->delimiter(',');
    study->add_option("--sizes", f.sizes, "Samples per experiment for ic-samples")->delimiter(',');
    study->add_option("--variance", f.variance, "Noise variance for ic-samples (default 0.2)");
    study->add_option("--std-dev", f.std_dev, "Noise standard deviation for ic-samples");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    try {
        CLI::App* cmd = app.get_subcommands().front();
        const Json config = resolve(cmd, f);
        if (const std::size_t threads = config["threads"]; threads > 0)
            set_thread_count(threads);
        if (cmd == simulate)
            cmd_simulate(config);
        else if (cmd == discover)
            cmd_discover(config);
        else
            cmd_study(f.study, config);
    } catch (const MissingInput& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kMissingInput;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumerical;
    }
    return kOk;
}
