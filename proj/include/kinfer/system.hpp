#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kinfer/expr.hpp"
#include "kinfer/matrix.hpp"
#include "kinfer/ode.hpp"

namespace kinfer {

/// Single-reaction batch system: dC_s/dt = stoich[s] * r(C).
struct ReactionSystem {
    std::string name;
    std::vector<std::string> species;
    std::vector<double> stoich;
    ParamTemplate rate;               // over species concentrations
    std::vector<double> rate_params;

    void validate() const;
    Expr rate_expr() const { return rate.substitute(rate_params); }
};

struct Experiment {
    std::vector<double> initial;  // M
    double t0 = 0.0;               // h
    double tf = 10.0;              // h
    std::size_t n_samples = 30;

    void validate(std::size_t n_species) const;
    /// Evenly spaced instants including both ends of the window.
    std::vector<double> sampling_times() const;
};

struct NoiseSpec {
    double std_dev = 0.2;  // M, applied to every species
    std::uint64_t seed = 0;
};

struct ExperimentData {
    Experiment design;
    std::vector<double> times;
    Matrix conc;  // n_samples x species
};

struct Dataset {
    std::string system;
    std::vector<std::string> species;
    std::vector<double> stoich;
    NoiseSpec noise;
    std::vector<ExperimentData> experiments;

    void validate() const;
    std::size_t total_samples() const noexcept;
    bool empty() const noexcept { return experiments.empty(); }
};

struct CaseStudy {
    ReactionSystem system;
    std::vector<Experiment> experiments;
    NoiseSpec noise;
};

std::vector<std::string> case_study_names();
/// Throws std::invalid_argument for an unknown name.
CaseStudy make_case_study(std::string_view name);

/// dC/dt = stoich * rate(C) for any rate expression over the species.
struct RateOde {
    const Expr* rate;
    std::span<const double> stoich;
    std::span<const double> params;

    bool operator()(double, std::span<const double> c, std::span<double> dc) const
    {
        const double r = evaluate(*rate, c, params);
        for (std::size_t s = 0; s < dc.size(); ++s)
            dc[s] = stoich[s] * r;
        return true;
    }
};

inline IntegratorSettings data_generation_settings() { return IntegratorSettings{1e-8, 1e-10, 200000, 0.0}; }

/// Noise-free trajectory of one experiment at its sampling instants.
Trajectory simulate_experiment(const ReactionSystem& system, const Experiment& experiment,
                               const IntegratorSettings& settings = data_generation_settings());

/// Integrates each experiment and adds iid N(0, std_dev^2) noise. The noise
/// for (experiment e, species s) comes from the substream (seed, e, s).
/// Throws std::runtime_error when an experiment fails to integrate.
Dataset generate_dataset(const ReactionSystem& system, std::span<const Experiment> experiments,
                         const NoiseSpec& noise, const IntegratorSettings& settings = data_generation_settings());

/// Generates one more experiment for an existing dataset; `experiment_index`
/// selects the noise substream.
ExperimentData generate_experiment(const ReactionSystem& system, const Experiment& experiment,
                                   const NoiseSpec& noise, std::size_t experiment_index,
                                   const IntegratorSettings& settings = data_generation_settings());

}  // namespace kinfer
