#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kinfer/estimate.hpp"
#include "kinfer/kernels.hpp"
#include "kinfer/ode.hpp"
#include "kinfer/optimize.hpp"

namespace kinfer {

/// Feasible initial conditions and the prediction window of a new experiment.
struct DesignSpace {
    std::vector<Interval> bounds;  // one per species, M
    double t0 = 0.0;
    double tf = 10.0;
    std::size_t quadrature_points = 101;

    void validate(std::size_t n_species) const;

    /// [0, factor * max_k ics[k][s]] per species; an all-zero species gets [0, 1].
    static DesignSpace around(std::span<const std::vector<double>> ics, double factor = 1.25);
};

struct Discrepancy {
    double value = 0.0;
    bool failed = false;  // some prediction stopped early; later points count as zero
    bool valid = true;    // false when either model fails before the second grid point
};

/// Trapezoidal integral over a uniform grid of sum_s (x_a - x_b)^2, where x_a
/// and x_b integrate dC/dt = stoich * rate from x0.
Discrepancy discrepancy(const Expr& rate_a, const Expr& rate_b, std::span<const double> stoich,
                        std::span<const double> x0, double t0, double tf, std::size_t points,
                        const IntegratorSettings& settings = data_generation_settings());

struct ProposalOptions {
    std::size_t starts = 32;                      // Latin hypercube starts
    std::uint64_t seed = 0;
    std::size_t max_evals_per_start = 300;
    double initial_step = 0.25;                   // fraction of each box width
    double min_step = 1e-4;
    std::vector<std::vector<double>> extra_starts;  // e.g. the current dataset's ICs
    Exec exec = Exec::Parallel;
    IntegratorSettings settings = data_generation_settings();
};

struct DesignStart {
    std::vector<double> start;
    double start_objective = 0.0;
    std::vector<double> x0;
    double objective = 0.0;
};

struct DesignProposal {
    std::vector<double> x0;
    double objective = 0.0;
    bool degenerate = false;          // no start separated the models
    bool integration_failed = false;  // the returned point needed the failure rule
    std::vector<DesignStart> trace;
};

class NoProposal : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Multistart maximisation of the discrepancy: Latin hypercube starts plus
/// `extra_starts`, each refined by a compass search. Throws NoProposal when
/// no candidate point can be integrated by both models.
DesignProposal propose_experiment(const Expr& rate_a, const Expr& rate_b, std::span<const double> stoich,
                                  const DesignSpace& space, const ProposalOptions& options = {});
inline DesignProposal propose_experiment(const FittedModel& a, const FittedModel& b, std::span<const double> stoich,
                                         const DesignSpace& space, const ProposalOptions& options = {})
{
    return propose_experiment(a.expr(), b.expr(), stoich, space, options);
}

/// {"x0": [...], "objective": v, "degenerate": b, "trace": [...]}
std::string proposal_json(const DesignProposal& proposal);

}  // namespace kinfer
