#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kinfer/criteria.hpp"
#include "kinfer/estimate.hpp"

namespace kinfer {

/// Seven competing isomerization rate templates over (C_A, C_B) with
/// 1..7 parameters; index 4 is the data-generating structure.
std::vector<ParamTemplate> rival_templates();
inline constexpr std::size_t kTrueRival = 4;

struct StudyOptions {
    FitBudget fit;
    IntegratorSettings integrator = weak_fit_settings();
};

struct StudyLevel {
    double x = 0.0;                 // variance or per-experiment sample count
    std::size_t n = 0;              // total sampling instants
    std::vector<std::optional<FittedModel>> fits;  // one per rival, nullopt when unfittable
    std::array<double, 4> delta{};  // IC(m1) - IC(true rival), NaN when undefined
    std::array<std::size_t, 4> m1{};  // rival index of m1, npos when none

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

struct StudyResult {
    std::string kind;  // "ic-noise" or "ic-samples"
    std::vector<StudyLevel> levels;
};

/// 13 equally spaced variances over [0.04, 0.25].
std::vector<double> default_variance_grid();
/// 2..10, 12, 15, 20, 25, 30, 40, 50, 75, 100 samples per experiment.
std::vector<std::size_t> default_sample_sizes();

/// Fits every rival to `data` and fills the per-criterion deltas.
StudyLevel evaluate_level(const Dataset& data, double x, const StudyOptions& options, std::uint64_t fit_seed);

/// Isomerization data at each variance (std dev = sqrt(variance)).
StudyResult ic_noise_study(std::span<const double> variances, std::uint64_t seed, const StudyOptions& options = {});
/// Isomerization data with each per-experiment sample count at `variance`.
StudyResult ic_sample_study(std::span<const std::size_t> sizes, double variance, std::uint64_t seed,
                            const StudyOptions& options = {});

/// First x (in study order) where delta < 0 for `c`; nullopt when it never
/// drops below zero.
std::optional<double> first_crossing(const StudyResult& study, Criterion c);

/// x, delta, m1, nll_r1..nll_r7 for one criterion.
std::string study_csv(const StudyResult& study, Criterion c);

}  // namespace kinfer
