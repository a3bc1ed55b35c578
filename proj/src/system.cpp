#include "kinfer/system.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kinfer/rng.hpp"

namespace kinfer {

void ReactionSystem::validate() const
{
    if (species.empty())
        throw std::invalid_argument("reaction system has no species");
    if (stoich.size() != species.size())
        throw std::invalid_argument("stoichiometric vector length differs from species count");
    const bool has_reactant = std::any_of(stoich.begin(), stoich.end(), [](double v) { return v < 0; });
    const bool has_product = std::any_of(stoich.begin(), stoich.end(), [](double v) { return v > 0; });
    if (!has_reactant || !has_product)
        throw std::invalid_argument("stoichiometry needs at least one reactant and one product");
    if (rate_params.size() != rate.dimension)
        throw std::invalid_argument("rate parameter count does not match rate template");
    for (const auto& n : rate.skeleton.nodes())
        if (n.op == Op::Var && n.index >= species.size())
            throw std::invalid_argument("rate expression refers to an unknown species");
}

void Experiment::validate(std::size_t n_species) const
{
    if (initial.size() != n_species)
        throw std::invalid_argument("initial condition length differs from species count");
    for (double v : initial)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument("initial concentrations must be finite and non-negative");
    if (!(t0 < tf))
        throw std::invalid_argument("experiment window must satisfy t0 < tf");
    if (n_samples < 2)
        throw std::invalid_argument("experiment needs at least two samples");
}

std::vector<double> Experiment::sampling_times() const
{
    std::vector<double> t(n_samples);
    const double dt = (tf - t0) / static_cast<double>(n_samples - 1);
    for (std::size_t i = 0; i < n_samples; ++i)
        t[i] = t0 + dt * static_cast<double>(i);
    t.back() = tf;
    return t;
}

void Dataset::validate() const
{
    if (stoich.size() != species.size())
        throw std::invalid_argument("dataset stoichiometry length differs from species count");
    for (const auto& e : experiments) {
        if (e.conc.rows() != e.times.size() || e.conc.cols() != species.size())
            throw std::invalid_argument("experiment matrix shape does not match times x species");
        for (std::size_t i = 1; i < e.times.size(); ++i)
            if (!(e.times[i] > e.times[i - 1]))
                throw std::invalid_argument("sampling times must be strictly increasing");
    }
}

std::size_t Dataset::total_samples() const noexcept
{
    std::size_t n = 0;
    for (const auto& e : experiments)
        n += e.times.size();
    return n;
}

std::vector<std::string> case_study_names() { return {"isomerization", "n2o", "toluene"}; }

namespace {

ReactionSystem make_system(std::string name, std::vector<std::string> species, std::vector<double> stoich,
                           std::string_view rate_text, std::vector<double> params)
{
    ReactionSystem s;
    s.name = std::move(name);
    s.species = std::move(species);
    s.stoich = std::move(stoich);
    s.rate = as_template(parse(rate_text, std::span<const std::string>(s.species)));
    s.rate_params = std::move(params);
    s.validate();
    return s;
}

std::vector<Experiment> make_experiments(std::initializer_list<std::vector<double>> ics)
{
    std::vector<Experiment> out;
    for (const auto& ic : ics) {
        Experiment e;
        e.initial = ic;
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace

CaseStudy make_case_study(std::string_view name)
{
    CaseStudy cs;
    cs.noise = NoiseSpec{0.2, 0};
    if (name == "isomerization") {
        cs.system = make_system("isomerization", {"C_A", "C_B"}, {-1.0, 1.0},
                                "(p[0]*C_A-p[1]*C_B)/(p[2]*C_A+p[3]*C_B+p[4])", {7, 3, 4, 2, 6});
        cs.experiments = make_experiments({{2, 0}, {10, 2}, {2, 2}, {10, 2}, {10, 1}});
    } else if (name == "n2o") {
        cs.system = make_system("n2o", {"C_N2O", "C_N2", "C_O2"}, {-0.5, 0.5, 1.0},
                                "p[0]*C_N2O*C_N2O/(1+p[1]*C_N2O)", {2, 5});
        cs.experiments = make_experiments({{5, 0, 0}, {10, 0, 0}, {5, 2, 0}, {5, 0, 3}, {0, 2, 3}});
    } else if (name == "toluene") {
        cs.system = make_system("toluene", {"C_T", "C_H", "C_B", "C_M"}, {-1.0, -1.0, 1.0, 1.0},
                                "p[0]*C_T*C_H/(1+p[1]*C_B+p[2]*C_T)", {2, 9, 5});
        cs.experiments = make_experiments({{1, 8, 2, 3}, {5, 8, 0, 0.5}, {5, 3, 0, 0.5}, {1, 3, 0, 3}, {1, 8, 2, 0.5}});
    } else {
        throw std::invalid_argument("unknown case study '" + std::string(name) + "'");
    }
    return cs;
}

Trajectory simulate_experiment(const ReactionSystem& system, const Experiment& experiment,
                               const IntegratorSettings& settings)
{
    experiment.validate(system.species.size());
    const Expr rate = system.rate.skeleton;
    const auto times = experiment.sampling_times();
    RateOde ode{&rate, system.stoich, system.rate_params};
    return integrate(ode, experiment.initial, experiment.t0, times, settings);
}

ExperimentData generate_experiment(const ReactionSystem& system, const Experiment& experiment,
                                   const NoiseSpec& noise, std::size_t experiment_index,
                                   const IntegratorSettings& settings)
{
    if (!(noise.std_dev >= 0.0))
        throw std::invalid_argument("noise standard deviation must be non-negative");
    const Trajectory traj = simulate_experiment(system, experiment, settings);
    if (!traj.ok())
        throw std::runtime_error("integration of the ground-truth system failed at t=" +
                                 std::to_string(traj.last_time));
    ExperimentData data;
    data.design = experiment;
    data.times = experiment.sampling_times();
    const std::size_t ns = system.species.size();
    data.conc = Matrix(data.times.size(), ns);
    for (std::size_t s = 0; s < ns; ++s) {
        Rng rng(noise.seed, {experiment_index, s});
        for (std::size_t i = 0; i < data.times.size(); ++i) {
            const double eps = noise.std_dev > 0.0 ? noise.std_dev * rng.normal() : 0.0;
            data.conc(i, s) = traj.at(i, s) + eps;
        }
    }
    return data;
}

Dataset generate_dataset(const ReactionSystem& system, std::span<const Experiment> experiments,
                         const NoiseSpec& noise, const IntegratorSettings& settings)
{
    system.validate();
    Dataset ds;
    ds.system = system.name;
    ds.species = system.species;
    ds.stoich = system.stoich;
    ds.noise = noise;
    for (std::size_t e = 0; e < experiments.size(); ++e)
        ds.experiments.push_back(generate_experiment(system, experiments[e], noise, e, settings));
    return ds;
}

}  // namespace kinfer
