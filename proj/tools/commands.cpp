#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "kinfer/csv.hpp"
#include "kinfer/dataset_io.hpp"
#include "kinfer/rng.hpp"
#include "kinfer/studies.hpp"

namespace kinfer::cli {

namespace fs = std::filesystem;

namespace {

Json gp_json(const GpConfig& g)
{
    Json j;
    j["population"] = g.population;
    j["generations"] = g.generations;
    j["tournament_size"] = g.tournament_size;
    j["p_crossover"] = g.p_crossover;
    j["p_subtree_mutation"] = g.p_subtree_mutation;
    j["p_point_mutation"] = g.p_point_mutation;
    j["p_constant_jitter"] = g.p_constant_jitter;
    j["jitter_scale"] = g.jitter_scale;
    j["complexity_cap"] = g.complexity_cap;
    j["init_min_depth"] = g.init_min_depth;
    j["init_max_depth"] = g.init_max_depth;
    j["polish_evals"] = g.polish_evals;
    j["hall_elitism"] = g.hall_elitism;
    return j;
}

GpConfig gp_from(const Json& j, GpConfig g)
{
    g.population = j["population"];
    g.generations = j["generations"];
    g.tournament_size = j["tournament_size"];
    g.p_crossover = j["p_crossover"];
    g.p_subtree_mutation = j["p_subtree_mutation"];
    g.p_point_mutation = j["p_point_mutation"];
    g.p_constant_jitter = j["p_constant_jitter"];
    g.jitter_scale = j["jitter_scale"];
    g.complexity_cap = j["complexity_cap"];
    g.init_min_depth = j["init_min_depth"];
    g.init_max_depth = j["init_max_depth"];
    g.polish_evals = j["polish_evals"];
    g.hall_elitism = j["hall_elitism"];
    g.validate();
    return g;
}

Json fit_json(const FitBudget& b)
{
    Json j;
    j["global_evals"] = b.global_evals;
    j["local_max_iters"] = b.local_max_iters;
    j["restarts"] = b.restarts;
    j["min_colony"] = b.min_colony;
    j["fd_rel_step"] = b.fd_rel_step;
    return j;
}

FitBudget fit_from(const Json& j)
{
    FitBudget b;
    b.global_evals = j["global_evals"];
    b.local_max_iters = j["local_max_iters"];
    b.restarts = j["restarts"];
    b.min_colony = j["min_colony"];
    b.fd_rel_step = j["fd_rel_step"];
    b.validate();
    return b;
}

Json integrator_json(const IntegratorSettings& s)
{
    Json j;
    j["rel_tol"] = s.rel_tol;
    j["abs_tol"] = s.abs_tol;
    j["max_steps"] = s.max_steps;
    return j;
}

IntegratorSettings integrator_from(const Json& j)
{
    IntegratorSettings s;
    s.rel_tol = j["rel_tol"];
    s.abs_tol = j["abs_tol"];
    s.max_steps = j["max_steps"];
    if (!(s.rel_tol > 0.0) || !(s.abs_tol > 0.0) || s.max_steps == 0)
        throw UsageError("integrator tolerances and max_steps must be positive");
    return s;
}

bool is_unsigned(const Json& v) { return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0); }

std::string describe(const Json& v)
{
    switch (v.type()) {
    case Json::value_t::object: return "an object";
    case Json::value_t::array: return "an array";
    case Json::value_t::string: return "a string";
    case Json::value_t::boolean: return "a boolean";
    case Json::value_t::null: return "null";
    case Json::value_t::number_float: return "a number";
    default: return "an integer";
    }
}

void check_type(const Json& slot, const Json& value, const std::string& path)
{
    bool ok = false;
    if (slot.is_number_unsigned())
        ok = is_unsigned(value);
    else if (slot.is_number())
        ok = value.is_number();
    else
        ok = slot.type() == value.type();
    if (!ok) {
        const std::string want = slot.is_number_unsigned() ? "a non-negative integer" : describe(slot);
        throw UsageError("config key '" + path + "' must be " + want + ", got " + describe(value));
    }
}

fs::path output_dir(const Json& config)
{
    if (!config["output"].is_null())
        return config["output"].get<std::string>();
    if (const char* env = std::getenv("KINFER_OUT"); env && *env)
        return env;
    return "kinfer-out";
}

/// The config as embedded in reports: where outputs go and how many workers
/// ran do not change results, so they are left out.
Json embedded(const Json& config)
{
    Json j = config;
    j.erase("output");
    j.erase("threads");
    return j;
}

template <class T>
std::vector<T> array_of(const Json& j, const std::string& path)
{
    if (!j.is_array())
        throw UsageError("config key '" + path + "' must be an array");
    std::vector<T> out;
    for (const auto& v : j) {
        if constexpr (std::is_same_v<T, std::size_t>) {
            if (!is_unsigned(v))
                throw UsageError("config key '" + path + "' must hold non-negative integers");
        } else if (!v.is_number()) {
            throw UsageError("config key '" + path + "' must hold numbers");
        }
        out.push_back(v.get<T>());
    }
    return out;
}

CaseStudy custom_system(const Json& file, const fs::path& source)
{
    Json spec = Json::parse(R"({"name": "", "species": [], "stoich": [], "rate": "", "params": [],
                                "experiments": [], "noise_std_dev": 0.2})");
    merge_config(spec, file, "system");
    CaseStudy cs;
    cs.system.name = spec["name"].get<std::string>().empty() ? source.stem().string() : spec["name"].get<std::string>();
    for (const auto& s : spec["species"]) {
        if (!s.is_string())
            throw UsageError("config key 'system.species' must hold strings");
        cs.system.species.push_back(s.get<std::string>());
    }
    cs.system.stoich = array_of<double>(spec["stoich"], "system.stoich");
    cs.system.rate_params = array_of<double>(spec["params"], "system.params");
    try {
        cs.system.rate = as_template(parse(spec["rate"].get<std::string>(), Grammar::rate(cs.system.species)));
    } catch (const ParseError& e) {
        throw UsageError("system rate: " + std::string(e.what()));
    }
    if (cs.system.rate.dimension != cs.system.rate_params.size())
        throw UsageError("system rate has " + std::to_string(cs.system.rate.dimension) + " parameter slots but " +
                         std::to_string(cs.system.rate_params.size()) + " values were given");
    cs.system.validate();
    for (const auto& e : spec["experiments"]) {
        Json x = Json::parse(R"({"initial": [], "t0": 0.0, "tf": 10.0, "samples": 30})");
        merge_config(x, e, "system.experiments[]");
        Experiment ex;
        ex.initial = array_of<double>(x["initial"], "system.experiments[].initial");
        ex.t0 = x["t0"];
        ex.tf = x["tf"];
        ex.n_samples = x["samples"];
        ex.validate(cs.system.species.size());
        cs.experiments.push_back(std::move(ex));
    }
    if (cs.experiments.empty())
        throw UsageError("a custom system needs at least one experiment");
    cs.noise.std_dev = spec["noise_std_dev"];
    return cs;
}

DiscoveryBudgets budgets_from(const Json& config)
{
    const Json& d = config["discover"];
    DiscoveryBudgets b;
    b.profile_gp = gp_from(d["profile_gp"], GpConfig::profile());
    b.rate_gp = gp_from(d["rate_gp"], GpConfig::strong());
    b.weak_gp = gp_from(d["weak_gp"], GpConfig::weak());
    b.profile_fit = fit_from(d["profile_fit"]);
    b.rate_fit = fit_from(d["rate_fit"]);
    b.weak_fit = fit_from(d["weak_fit"]);
    b.weak_gp_integrator = integrator_from(d["weak_gp_integrator"]);
    b.weak_fit_integrator = integrator_from(d["weak_fit_integrator"]);
    b.rate_policy.pooled = d["rate_policy"]["pooled"];
    b.rate_policy.reference = d["rate_policy"]["reference"];
    b.seed = derive_seed(config["seed"].get<std::uint64_t>(), {0x5eed});
    return b;
}

LoopConfig loop_from(const Json& config, std::size_t n_species)
{
    const Json& l = config["loop"];
    LoopConfig c;
    c.max_iterations = l["max_iterations"];
    if (!l["accept_rmse"].is_null()) {
        if (!l["accept_rmse"].is_number())
            throw UsageError("config key 'loop.accept_rmse' must be a number");
        c.accept_rmse = l["accept_rmse"].get<double>();
    }
    if (!l["design_space"].is_null()) {
        Json s = Json::parse(R"({"bounds": [], "t0": 0.0, "tf": 10.0, "quadrature_points": 101})");
        merge_config(s, l["design_space"], "loop.design_space");
        DesignSpace space;
        for (const auto& b : s["bounds"]) {
            const auto pair = array_of<double>(b, "loop.design_space.bounds[]");
            if (pair.size() != 2)
                throw UsageError("each design bound must be [lower, upper]");
            space.bounds.push_back(Interval{pair[0], pair[1]});
        }
        space.t0 = s["t0"];
        space.tf = s["tf"];
        space.quadrature_points = s["quadrature_points"];
        space.validate(n_species);
        c.space = std::move(space);
    }
    c.proposal.starts = l["design_starts"];
    c.proposal.max_evals_per_start = l["design_evals_per_start"];
    c.validate();
    return c;
}

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char ch) { return std::tolower(ch); });
    return out;
}

}  // namespace

Json default_config()
{
    const DiscoveryBudgets b;
    Json c;
    c["system"] = nullptr;
    c["method"] = "adok-w";
    c["seed"] = std::uint64_t{0};
    c["output"] = nullptr;
    c["threads"] = std::size_t{0};
    c["dataset"] = nullptr;
    c["simulator"] = true;
    c["noise_std_dev"] = nullptr;
    c["samples_per_experiment"] = nullptr;
    Json d;
    d["profile_gp"] = gp_json(b.profile_gp);
    d["rate_gp"] = gp_json(b.rate_gp);
    d["weak_gp"] = gp_json(b.weak_gp);
    d["profile_fit"] = fit_json(b.profile_fit);
    d["rate_fit"] = fit_json(b.rate_fit);
    d["weak_fit"] = fit_json(b.weak_fit);
    d["weak_gp_integrator"] = integrator_json(b.weak_gp_integrator);
    d["weak_fit_integrator"] = integrator_json(b.weak_fit_integrator);
    d["rate_policy"] = Json{{"pooled", b.rate_policy.pooled}, {"reference", b.rate_policy.reference}};
    c["discover"] = std::move(d);
    const LoopConfig l;
    Json loop;
    loop["max_iterations"] = l.max_iterations;
    loop["accept_rmse"] = nullptr;
    loop["design_space"] = nullptr;
    loop["design_starts"] = l.proposal.starts;
    loop["design_evals_per_start"] = l.proposal.max_evals_per_start;
    c["loop"] = std::move(loop);
    const StudyOptions s;
    Json study;
    study["variances"] = nullptr;
    study["sizes"] = nullptr;
    study["variance"] = nullptr;
    study["std_dev"] = nullptr;
    study["fit"] = fit_json(s.fit);
    study["integrator"] = integrator_json(s.integrator);
    c["study"] = std::move(study);
    return c;
}

void merge_config(Json& base, const Json& overlay, const std::string& path)
{
    if (!overlay.is_object())
        throw UsageError((path.empty() ? std::string("config") : "config key '" + path + "'") + " must be an object");
    for (const auto& [key, value] : overlay.items()) {
        const std::string where = path.empty() ? key : path + "." + key;
        if (!base.contains(key))
            throw UsageError("unknown config key '" + where + "'");
        Json& slot = base[key];
        if (slot.is_null() || value.is_null()) {
            // optional entries take any value here; their readers check the shape
            if (value.is_null() && !slot.is_null())
                throw UsageError("config key '" + where + "' cannot be null");
            slot = value;
        } else if (slot.is_object()) {
            merge_config(slot, value, where);
        } else {
            check_type(slot, value, where);
            slot = value;
        }
    }
}

Json load_json(const fs::path& path)
{
    if (!fs::exists(path))
        throw MissingInput("no such file: " + path.string());
    try {
        return Json::parse(csv::read_file(path));
    } catch (const Json::parse_error& e) {
        throw UsageError(path.string() + ": " + e.what());
    }
}

CaseStudy resolve_system(const Json& config)
{
    if (config["system"].is_null())
        throw UsageError("no system given");
    if (!config["system"].is_string())
        throw UsageError("config key 'system' must be a string");
    const std::string name = config["system"];
    const auto names = case_study_names();
    CaseStudy cs;
    if (std::find(names.begin(), names.end(), name) != names.end()) {
        cs = make_case_study(name);
    } else if (name.ends_with(".json") || fs::exists(name)) {
        cs = custom_system(load_json(name), name);
    } else {
        std::string known;
        for (const auto& n : names)
            known += (known.empty() ? "" : ", ") + n;
        throw UsageError("unknown system '" + name + "' (expected one of " + known + ", or a system file)");
    }
    if (!config["noise_std_dev"].is_null()) {
        if (!config["noise_std_dev"].is_number() || !(config["noise_std_dev"].get<double>() >= 0.0))
            throw UsageError("noise_std_dev must be a non-negative number");
        cs.noise.std_dev = config["noise_std_dev"];
    }
    if (!config["samples_per_experiment"].is_null()) {
        if (!is_unsigned(config["samples_per_experiment"]))
            throw UsageError("samples_per_experiment must be a non-negative integer");
        for (auto& e : cs.experiments)
            e.n_samples = config["samples_per_experiment"];
    }
    for (const auto& e : cs.experiments)
        e.validate(cs.system.species.size());
    cs.noise.seed = config["seed"];
    return cs;
}

void cmd_simulate(const Json& config)
{
    const CaseStudy cs = resolve_system(config);
    const Dataset data = generate_dataset(cs.system, cs.experiments, cs.noise);
    write_dataset(output_dir(config), data);
}

void cmd_discover(const Json& config)
{
    if (!config["method"].is_string())
        throw UsageError("config key 'method' must be a string");
    const Method method = parse_method(config["method"].get<std::string>());
    const DiscoveryBudgets budgets = budgets_from(config);
    const bool simulator = config["simulator"];

    std::optional<CaseStudy> truth;
    Dataset data;
    if (!config["dataset"].is_null()) {
        if (!config["dataset"].is_string())
            throw UsageError("config key 'dataset' must be a path");
        const fs::path dir = config["dataset"].get<std::string>();
        if (!fs::exists(dir / "manifest.json"))
            throw MissingInput("no dataset at " + dir.string());
        try {
            data = read_dataset(dir);
        } catch (const std::runtime_error& e) {
            throw UsageError("invalid dataset: " + std::string(e.what()));
        }
        if (simulator) {
            Json c = config;
            if (c["system"].is_null()) {
                const auto names = case_study_names();
                if (std::find(names.begin(), names.end(), data.system) != names.end())
                    c["system"] = data.system;
            }
            if (!c["system"].is_null()) {
                truth = resolve_system(c);
                if (truth->system.species != data.species)
                    throw UsageError("dataset species do not match system '" + truth->system.name + "'");
            }
        }
    } else {
        if (!simulator || config["system"].is_null())
            throw MissingInput("no dataset given and no system to simulate one");
        truth = resolve_system(config);
        data = generate_dataset(truth->system, truth->experiments, truth->noise);
    }
    if (truth)
        data.noise.seed = truth->noise.seed;

    LoopConfig loop = loop_from(config, data.species.size());
    const auto out = output_dir(config);
    const auto history = run_loop(truth ? &truth->system : nullptr, data, method, loop, budgets,
                                  [&](const LoopStep& step) {
                                      std::cerr << "iteration " << step.result.iteration + 1 << ": "
                                                << format(step.result.best.expr(), data.species)
                                                << "  rmse " << step.result.diagnostics.rmse << '\n';
                                  });

    fs::create_directories(out);
    write_dataset(out / "dataset", history.data);
    const Json resolved = embedded(config);
    Json iterations = Json::array();
    for (const auto& step : history.steps) {
        const auto& r = step.result;
        const Dataset seen = dataset_prefix(history.data, r.dataset_size);
        const auto dir = out / ("iteration_" + std::to_string(r.iteration + 1));
        fs::create_directories(dir);
        write_iteration(dir, step, seen, truth ? &truth->system : nullptr, resolved, budgets.weak_fit_integrator);
        Json brief;
        brief["iteration"] = r.iteration + 1;
        brief["experiments"] = r.dataset_size;
        brief["selected"] = format(r.best.expr(), data.species);
        brief["rmse"] = r.diagnostics.rmse;
        brief["accepted"] = step.accepted;
        iterations.push_back(std::move(brief));
    }
    const auto& last = history.steps.back().result;
    Json summary;
    summary["version"] = version();
    summary["config"] = resolved;
    summary["iterations"] = std::move(iterations);
    summary["stop_reason"] = history.stop_reason;
    summary["final_model"] = format(last.best.expr(), data.species);
    summary["final_template"] = format(last.best.tmpl.skeleton, data.species);
    summary["final_theta"] = last.best.theta;
    csv::write_file(out / "summary.json", summary.dump(2) + "\n");
    csv::write_file(out / "final_model.txt", format(last.best.expr(), data.species) + "\n");
}

void cmd_study(const std::string& kind, const Json& config)
{
    const Json& s = config["study"];
    StudyOptions options;
    options.fit = fit_from(s["fit"]);
    options.integrator = integrator_from(s["integrator"]);
    const std::uint64_t seed = config["seed"];

    StudyResult result;
    Json params;
    if (kind == "ic-noise") {
        const auto variances =
            s["variances"].is_null() ? default_variance_grid() : array_of<double>(s["variances"], "study.variances");
        if (variances.empty())
            throw UsageError("the variance grid is empty");
        for (double v : variances)
            if (!(v > 0.0) || !std::isfinite(v))
                throw UsageError("variances must be positive and finite");
        params["variances"] = variances;
        result = ic_noise_study(variances, seed, options);
    } else if (kind == "ic-samples") {
        const auto sizes =
            s["sizes"].is_null() ? default_sample_sizes() : array_of<std::size_t>(s["sizes"], "study.sizes");
        if (sizes.empty())
            throw UsageError("the sample-size list is empty");
        for (auto n : sizes)
            if (n < 2)
                throw UsageError("each experiment needs at least two samples");
        if (!s["variance"].is_null() && !s["std_dev"].is_null())
            throw UsageError("give either study.variance or study.std_dev, not both");
        double variance = 0.2;
        if (!s["variance"].is_null())
            variance = s["variance"].get<double>();
        else if (!s["std_dev"].is_null())
            variance = std::pow(s["std_dev"].get<double>(), 2);
        if (!(variance >= 0.0) || !std::isfinite(variance))
            throw UsageError("the study variance must be non-negative and finite");
        params["sizes"] = sizes;
        params["variance"] = variance;
        result = ic_sample_study(sizes, variance, seed, options);
    } else {
        throw UsageError("unknown study '" + kind + "' (expected ic-noise or ic-samples)");
    }

    const auto out = output_dir(config);
    fs::create_directories(out);
    Json summary;
    summary["version"] = version();
    summary["config"] = embedded(config);
    summary["study"] = kind;
    summary["grid"] = params;
    Json crossings;
    for (Criterion c : kAllCriteria) {
        const std::string name = lower(criterion_name(c));
        csv::write_file(out / (kind + "_" + name + ".csv"), study_csv(result, c));
        const auto x = first_crossing(result, c);
        crossings[name] = x ? Json(*x) : Json(nullptr);
    }
    summary["first_crossing"] = std::move(crossings);
    csv::write_file(out / (kind + ".json"), summary.dump(2) + "\n");
}

}  // namespace kinfer::cli
