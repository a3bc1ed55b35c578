#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "kinfer/kernels.hpp"

namespace kinfer {

struct Interval {
    double lower = -10.0;
    double upper = 10.0;
};

/// Scalar objective; +inf (or NaN) marks an invalid parameter vector.
using Objective = std::function<double(std::span<const double>)>;

/// Residual function; returns false when the model cannot be evaluated.
using Residuals = std::function<bool(std::span<const double> theta, std::span<double> out)>;

struct FitBudget {
    std::size_t global_evals = 5000;
    std::size_t local_max_iters = 200;
    std::size_t restarts = 3;
    std::uint64_t seed = 0;
    std::size_t min_colony = 40;
    double fd_rel_step = 1e-7;  // central-difference step, scaled by (1 + |theta_i|)
    Exec exec = Exec::Parallel;
    bool record_trace = false;

    void validate() const;
};

struct FitTraceEntry {
    std::size_t evaluation = 0;
    double best = 0.0;
};

struct OptimumResult {
    std::vector<double> theta;
    double value = 0.0;
    bool fittable = false;  // false when every evaluation was non-finite
    std::size_t evaluations = 0;
    std::vector<FitTraceEntry> trace;
};

struct LocalResult {
    std::vector<double> theta;
    double value = 0.0;
    std::size_t iterations = 0;
    std::size_t evaluations = 0;
};

/// Artificial bee colony search over `box`. The colony holds
/// max(min_colony, 10 * dim) food sources, capped at global_evals / 2.
/// Proposals are drawn serially from one seeded stream and evaluated in
/// batches, so the result does not depend on the execution policy.
/// `guesses` replace the first colony members when given.
struct ColonyResult {
    OptimumResult best;
    std::vector<std::vector<double>> elites;  // finite colony members, best first
    std::vector<double> elite_values;
};
ColonyResult abc_search(const Objective& objective, std::span<const Interval> box, const FitBudget& budget,
                        std::span<const std::vector<double>> guesses = {});

/// Quasi-Newton (BFGS) minimisation with central finite-difference
/// gradients and backtracking line search. Never returns a point worse than
/// `start`.
LocalResult bfgs_minimize(const Objective& objective, std::span<const double> start, double start_value,
                          std::size_t max_iters, double fd_rel_step = 1e-7);

/// Two-stage fit: ABC over `box` (default [-10, 10] per slot) followed by
/// BFGS from the best point and from `restarts` further colony elites.
/// dim == 0 evaluates the objective once.
OptimumResult fit(const Objective& objective, std::size_t dim, const FitBudget& budget,
                  std::span<const Interval> box = {}, std::span<const std::vector<double>> guesses = {});

/// Levenberg-Marquardt polish of a least-squares problem with forward
/// difference Jacobians, using at most `max_evals` residual evaluations.
/// Returns the better of the start and the polished point.
LocalResult polish_least_squares(const Residuals& residuals, std::size_t residual_count,
                                 std::span<const double> start, std::size_t max_evals);

}  // namespace kinfer
