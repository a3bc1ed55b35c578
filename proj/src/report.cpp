#include "kinfer/report.hpp"

#include <cmath>

#include "kinfer/csv.hpp"

namespace kinfer {

namespace {

Json number(double v)
{
    return std::isfinite(v) ? Json(v) : Json(nullptr);
}

}  // namespace

std::string version()
{
#ifdef KINFER_VERSION
    return KINFER_VERSION;
#else
    return "0.0.0";
#endif
}

Json fitted_model_json(const FittedModel& m, std::span<const std::string> names)
{
    Json j;
    j["expression"] = format(m.expr(), names);
    j["template"] = format(m.tmpl.skeleton, names);
    j["theta"] = m.theta;
    j["d"] = m.dimension();
    j["complexity"] = m.complexity();
    j["rss"] = number(m.rss);
    j["nll"] = number(m.nll);
    j["n"] = m.n;
    j["aic"] = number(m.criteria.aic);
    j["aicc"] = number(m.criteria.aicc);
    j["hqc"] = number(m.criteria.hqc);
    j["bic"] = number(m.criteria.bic);
    j["fit"] = std::string(fit_kind_name(m.kind));
    return j;
}

Json proposal_to_json(const DesignProposal& p) { return Json::parse(proposal_json(p)); }

std::string criteria_table_csv(std::span<const FittedModel> models, std::span<const std::string> names)
{
    csv::Table t;
    t.header = {"model", "expression", "d", "nll", "aic", "aicc", "hqc", "bic"};
    for (std::size_t i = 0; i < models.size(); ++i) {
        const auto& m = models[i];
        t.add({"m" + std::to_string(i + 1), format(m.expr(), names), std::to_string(m.dimension()),
               csv::number(m.nll, 12), csv::number(m.criteria.aic, 12), csv::number(m.criteria.aicc, 12),
               csv::number(m.criteria.hqc, 12), csv::number(m.criteria.bic, 12)});
    }
    return t.str();
}

std::string profiles_csv(const IterationResult& r, const Dataset& data)
{
    csv::Table t;
    t.header = {"experiment", "species", "t", "measured", "fitted", "derivative"};
    for (const auto& p : r.profiles) {
        const auto& e = data.experiments.at(p.experiment);
        for (std::size_t i = 0; i < e.times.size(); ++i)
            t.add({std::to_string(p.experiment + 1), data.species[p.species], csv::number(e.times[i]),
                   csv::number(e.conc(i, p.species)), csv::number(p.fitted[i]), csv::number(p.derivative[i])});
    }
    return t.str();
}

std::string rates_csv(const IterationResult& r, const ReactionSystem* truth)
{
    csv::Table t;
    t.header = {"experiment", "t", "estimated", "true"};
    const Expr rate = truth ? truth->rate_expr() : Expr();
    for (std::size_t k = 0; k < r.rates.rates.size(); ++k) {
        std::string exact;
        if (truth)
            exact = csv::number(evaluate(rate, r.rates.states.row(k)));
        t.add({std::to_string(r.rates.experiment[k] + 1), csv::number(r.rates.times[k]),
               csv::number(r.rates.rates[k]), exact});
    }
    return t.str();
}

std::string response_csv(const Expr& rate, const Dataset& data, const IntegratorSettings& settings)
{
    csv::Table t;
    t.header = {"experiment", "t"};
    for (const auto& s : data.species) {
        t.header.push_back(s + "_measured");
        t.header.push_back(s + "_predicted");
    }
    const auto predicted = predict_weak(rate, data, settings);
    for (std::size_t e = 0; e < data.experiments.size(); ++e) {
        const auto& exp = data.experiments[e];
        for (std::size_t i = 0; i < exp.times.size(); ++i) {
            std::vector<std::string> row{std::to_string(e + 1), csv::number(exp.times[i])};
            for (std::size_t s = 0; s < data.species.size(); ++s) {
                row.push_back(csv::number(exp.conc(i, s)));
                row.push_back(csv::number(predicted[e](i, s)));
            }
            t.add(std::move(row));
        }
    }
    return t.str();
}

Json iteration_json(const IterationResult& r, const Dataset& data, const DesignProposal* proposal, bool accepted)
{
    const auto& names = data.species;
    Json j;
    j["iteration"] = r.iteration + 1;
    j["method"] = std::string(method_name(r.method));
    j["experiments"] = r.dataset_size;
    j["experiments_used"] = r.experiments_used;
    j["selected"] = fitted_model_json(r.best, names);
    j["runner_up"] = r.runner_up ? fitted_model_json(*r.runner_up, names) : Json(nullptr);
    auto table = Json::array();
    for (const auto& m : r.finalists)
        table.push_back(fitted_model_json(m, names));
    j["finalists"] = std::move(table);
    Json d;
    d["rss"] = number(r.diagnostics.rss);
    d["rmse"] = number(r.diagnostics.rmse);
    d["rows"] = r.diagnostics.rows;
    d["integration_ok"] = r.diagnostics.integration_ok;
    auto per = Json::array();
    for (double v : r.diagnostics.experiment_rmse)
        per.push_back(number(v));
    d["experiment_rmse"] = std::move(per);
    j["diagnostics"] = std::move(d);
    j["accepted"] = accepted;
    if (r.method == Method::Strong) {
        auto profiles = Json::array();
        for (const auto& p : r.profiles) {
            Json pj;
            pj["experiment"] = p.experiment + 1;
            pj["species"] = names[p.species];
            const std::string t_name[1] = {"t"};
            pj["expression"] = format(p.model.expr(), t_name);
            pj["aic"] = number(p.model.criteria.aic);
            profiles.push_back(std::move(pj));
        }
        j["profiles"] = std::move(profiles);
        auto excluded = Json::array();
        for (auto e : r.excluded_experiments)
            excluded.push_back(e + 1);
        j["excluded_experiments"] = std::move(excluded);
    }
    j["proposal"] = proposal ? proposal_to_json(*proposal) : Json(nullptr);
    j["warnings"] = r.warnings;
    return j;
}

void write_iteration(const std::filesystem::path& dir, const LoopStep& step, const Dataset& data,
                     const ReactionSystem* truth, const Json& config, const IntegratorSettings& settings)
{
    const auto& r = step.result;
    const DesignProposal* proposal = step.proposal ? &*step.proposal : nullptr;
    Json report;
    report["version"] = version();
    report["config"] = config;
    report["result"] = iteration_json(r, data, proposal, step.accepted);
    csv::write_file(dir / "report.json", report.dump(2) + "\n");
    csv::write_file(dir / "criteria.csv", criteria_table_csv(r.finalists, data.species));
    csv::write_file(dir / "hall_of_fame.json", hall_of_fame_json(r.hall, data.species) + "\n");
    csv::Table log;
    log.header = {"generation", "complexity", "best_rss"};
    for (const auto& row : r.evolution_log)
        log.add({std::to_string(row.generation), std::to_string(row.complexity), csv::number(row.best, 12)});
    csv::write_file(dir / "evolution_log.csv", log.str());
    csv::write_file(dir / "response.csv", response_csv(r.best.expr(), data, settings));
    if (proposal)
        csv::write_file(dir / "proposal.json", proposal_json(*proposal) + "\n");
    if (r.method == Method::Strong) {
        csv::write_file(dir / "profiles.csv", profiles_csv(r, data));
        csv::write_file(dir / "rates.csv", rates_csv(r, truth));
    }
}

Dataset dataset_prefix(const Dataset& data, std::size_t count)
{
    Dataset out = data;
    if (count < out.experiments.size())
        out.experiments.resize(count);
    return out;
}

}  // namespace kinfer
