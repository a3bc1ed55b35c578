#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kinfer/estimate.hpp"
#include "kinfer/gp.hpp"
#include "kinfer/mbdoe.hpp"
#include "kinfer/system.hpp"

namespace kinfer {

enum class Method { Strong, Weak };
std::string_view method_name(Method m);  // "adok-s" / "adok-w"
/// Throws std::invalid_argument for anything but "adok-s" or "adok-w".
Method parse_method(std::string_view text);

/// How species derivatives become reaction-rate estimates r = (dC_s/dt) / nu_s.
struct RatePolicy {
    bool pooled = true;           // median over every species with a profile
    std::size_t reference = 0;    // species used when pooled is false
};

struct DiscoveryBudgets {
    GpConfig profile_gp = GpConfig::profile();
    GpConfig rate_gp = GpConfig::strong();
    GpConfig weak_gp = GpConfig::weak();
    FitBudget profile_fit;
    FitBudget rate_fit;
    FitBudget weak_fit;
    IntegratorSettings weak_gp_integrator{1e-6, 1e-8, 500, 0.0};
    IntegratorSettings weak_fit_integrator = weak_fit_settings();
    RatePolicy rate_policy;
    std::uint64_t seed = 0;
    Exec exec = Exec::Parallel;
};

struct ProfileFit {
    std::size_t experiment = 0;
    std::size_t species = 0;
    FittedModel model;
    std::vector<double> fitted;      // profile at the sampling instants
    std::vector<double> derivative;  // symbolic time derivative at the sampling instants
};

/// Pooled rate estimates; row k of `states` pairs with rates[k].
struct RateEstimates {
    Matrix states;
    std::vector<double> rates;
    std::vector<std::size_t> experiment;
    std::vector<double> times;
};

struct Diagnostics {
    double rss = 0.0;
    double rmse = 0.0;               // sqrt(rss / (rows * species))
    std::size_t rows = 0;
    bool integration_ok = true;
    std::vector<double> experiment_rmse;
};

struct IterationResult {
    Method method = Method::Weak;
    std::size_t iteration = 0;
    std::size_t dataset_size = 0;       // experiments in the dataset this iteration saw
    std::size_t experiments_used = 0;   // after exclusions
    FittedModel best;
    std::optional<FittedModel> runner_up;
    std::vector<FittedModel> finalists;  // ascending AIC
    std::vector<ProfileFit> profiles;    // ADoK-S only
    RateEstimates rates;                 // ADoK-S only
    std::vector<std::size_t> excluded_experiments;
    Diagnostics diagnostics;
    std::vector<EvolutionLogRow> evolution_log;
    HallOfFame hall;
    std::vector<std::string> warnings;
};

/// Profiles per experiment and species, symbolic rate estimates, strong-form
/// rate search, AIC selection. Throws std::invalid_argument on an empty
/// dataset and std::runtime_error when nothing can be fitted.
IterationResult strong_iteration(const Dataset& data, const DiscoveryBudgets& budgets, std::size_t iteration = 0);

/// Weak-form rate search with embedded integration, AIC selection.
IterationResult weak_iteration(const Dataset& data, const DiscoveryBudgets& budgets, std::size_t iteration = 0);

IterationResult run_iteration(Method method, const Dataset& data, const DiscoveryBudgets& budgets,
                              std::size_t iteration = 0);

/// Integrated response of `rate` against the data, from each first row.
Diagnostics trajectory_diagnostics(const Expr& rate, const Dataset& data,
                                   const IntegratorSettings& settings = weak_fit_settings());

/// Rate estimates from one set of profiles, without any search.
RateEstimates estimate_rates(const Dataset& data, std::span<const ProfileFit> profiles, const RatePolicy& policy,
                             std::vector<std::size_t>* excluded = nullptr);

struct LoopConfig {
    std::size_t max_iterations = 3;
    /// Stop once the best model's trajectory RMSE (M) is at or below this.
    /// Unset means 1.5 times the dataset's noise standard deviation.
    std::optional<double> accept_rmse;
    std::optional<DesignSpace> space;  // default: DesignSpace::around(initial ICs)
    ProposalOptions proposal;

    void validate() const;
};

struct LoopStep {
    IterationResult result;
    bool accepted = false;
    std::optional<DesignProposal> proposal;
};

struct LoopHistory {
    std::vector<LoopStep> steps;
    Dataset data;              // initial data plus every designed experiment
    std::string stop_reason;
};

/// Alternates discovery iterations with designed experiments simulated from
/// `truth` until the acceptance threshold or the iteration budget is reached.
/// Without a simulator the loop stops after the first proposal.
LoopHistory run_loop(const ReactionSystem* truth, const Dataset& initial, Method method, const LoopConfig& config,
                     const DiscoveryBudgets& budgets,
                     const std::function<void(const LoopStep&)>& on_step = {});

/// Result of refitting a reference template to a candidate expression.
struct FamilyMatch {
    bool matches = false;
    double relative_rms = 0.0;  // residual RMS over candidate RMS on the grid
    std::vector<double> theta;
};

/// Decides whether `candidate` belongs to the family spanned by `family` by
/// fitting the family to the candidate's values at `points` (rows are
/// concentration vectors). Zeroing any fitted parameter must change the
/// values by more than ten times `tolerance`, so degenerate members of the
/// family do not count.
FamilyMatch match_family(const Expr& candidate, const ParamTemplate& family, const Matrix& points,
                         double tolerance = 1e-3, std::uint64_t seed = 0);

/// Seeded uniform points in [lower, upper] per species.
Matrix sample_points(std::span<const Interval> box, std::size_t count, std::uint64_t seed);

}  // namespace kinfer
