#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kinfer/estimate.hpp"
#include "kinfer/expr.hpp"
#include "kinfer/kernels.hpp"
#include "kinfer/rng.hpp"

namespace kinfer {

struct GpConfig {
    std::size_t population = 500;
    std::size_t generations = 100;
    std::size_t tournament_size = 5;
    double p_crossover = 0.7;
    double p_subtree_mutation = 0.15;
    double p_point_mutation = 0.1;
    double p_constant_jitter = 0.05;  // remaining probability copies the parent
    double jitter_scale = 0.1;        // relative standard deviation
    std::size_t complexity_cap = 25;
    std::size_t init_min_depth = 2;
    std::size_t init_max_depth = 6;
    std::size_t polish_evals = 50;    // inline constant tune per individual
    bool hall_elitism = true;         // carry every hall-of-fame entry into the next generation
    std::uint64_t seed = 0;
    Exec exec = Exec::Parallel;
    /// Individuals placed at the front of the initial population.
    std::vector<Expr> injected;

    void validate() const;

    static GpConfig profile();  // 500 x 100, cap 15
    static GpConfig strong();   // 500 x 100, cap 25
    static GpConfig weak();     // 200 x 40, cap 25
};

struct HallOfFameEntry {
    Expr expr;
    double fitness = 0.0;      // RSS after the inline constant tune
    std::size_t generation = 0;
};

/// Best expression seen at each complexity 1..cap.
class HallOfFame {
public:
    explicit HallOfFame(std::size_t cap = 25) : slots_(cap) {}

    /// Records `e` when it is finite and beats the entry at its complexity.
    bool offer(const Expr& e, double fitness, std::size_t generation);

    std::size_t cap() const noexcept { return slots_.size(); }
    const std::optional<HallOfFameEntry>& at(std::size_t complexity) const { return slots_.at(complexity - 1); }
    /// Filled entries in ascending complexity.
    std::vector<HallOfFameEntry> entries() const;
    bool empty() const noexcept;

private:
    std::vector<std::optional<HallOfFameEntry>> slots_;
};

struct EvolutionLogRow {
    std::size_t generation = 0;
    std::size_t complexity = 0;
    double best = 0.0;
};

struct GpResult {
    HallOfFame hall;
    std::vector<EvolutionLogRow> log;
    std::size_t evaluations = 0;  // distinct individuals scored
};

/// Generational GP over `grammar` with fitness taken from `problem`
/// (residual sum of squares after a short Levenberg-Marquardt tune of the
/// individual's constants, which is written back into the individual).
GpResult evolve(const Grammar& grammar, const Problem& problem, const GpConfig& config);

struct DroppedFinalist {
    std::string expression;
    std::string reason;
};

/// Full parameter estimation for every hall-of-fame entry, starting the
/// colony from the entry's own constants. Unfittable entries are dropped.
std::vector<FittedModel> finalists(const HallOfFame& hall, const Problem& problem, const FitBudget& budget,
                                   std::vector<DroppedFinalist>* dropped = nullptr);

/// Random expression of at most `max_depth` levels drawn from the grammar.
Expr random_expr(const Grammar& grammar, std::size_t max_depth, bool full, Rng& rng);

void write_evolution_log(const std::filesystem::path& path, const std::vector<EvolutionLogRow>& log);
/// [{"complexity": k, "expression": text, "fitness": v}, ...]
std::string hall_of_fame_json(const HallOfFame& hall, std::span<const std::string> names);

}  // namespace kinfer
