#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "kinfer/criteria.hpp"
#include "kinfer/expr.hpp"
#include "kinfer/matrix.hpp"
#include "kinfer/ode.hpp"
#include "kinfer/optimize.hpp"
#include "kinfer/system.hpp"

namespace kinfer {

enum class FitKind { Profile, Strong, Weak };
std::string_view fit_kind_name(FitKind kind);

/// Sum of squared differences; +inf when any prediction is non-finite.
/// Throws std::invalid_argument on a shape mismatch.
double rss(const Matrix& predicted, const Matrix& observed);
double rss(std::span<const double> predicted, std::span<const double> observed);

/// Concentrated Gaussian negative log-likelihood, one variance per group:
/// sum_s n/2 * ln(2 pi v_s) + n/2 with v_s = max(rss_s / n, 1e-12).
double nll(std::span<const double> group_rss, std::size_t n);

inline constexpr double kVarianceFloor = 1e-12;

/// Least-squares problem for one parametric model. Residuals are laid out so
/// that entry i belongs to likelihood group i % group_count().
class Problem {
public:
    virtual ~Problem() = default;

    virtual FitKind kind() const noexcept = 0;
    virtual std::size_t residual_count() const noexcept = 0;
    virtual std::size_t group_count() const noexcept = 0;
    /// Sample count used by the likelihood and the criteria.
    virtual std::size_t sample_count() const noexcept = 0;
    /// Writes prediction - observation. Returns false when the model cannot be
    /// evaluated (non-finite output, failed integration).
    virtual bool residuals(const Expr& model, std::span<const double> theta, std::span<double> out) const = 0;

    /// Sum of squares of the residuals, +inf on failure.
    double objective(const Expr& model, std::span<const double> theta) const;
    /// Per-group sums of squares; empty on failure.
    std::vector<double> group_rss(const Expr& model, std::span<const double> theta) const;
};

/// Concentration-versus-time series of one species. The model variable is t.
class ProfileProblem final : public Problem {
public:
    ProfileProblem(std::vector<double> times, std::vector<double> values);

    FitKind kind() const noexcept override { return FitKind::Profile; }
    std::size_t residual_count() const noexcept override { return values_.size(); }
    std::size_t group_count() const noexcept override { return 1; }
    std::size_t sample_count() const noexcept override { return values_.size(); }
    bool residuals(const Expr& model, std::span<const double> theta, std::span<double> out) const override;

    std::span<const double> times() const noexcept { return times_; }
    std::span<const double> values() const noexcept { return values_; }

private:
    std::vector<double> times_;
    std::vector<double> values_;
};

/// Rate targets against state samples; model variables are the species.
class StrongProblem final : public Problem {
public:
    StrongProblem(const Matrix& states, std::vector<double> rates);

    FitKind kind() const noexcept override { return FitKind::Strong; }
    std::size_t residual_count() const noexcept override { return rates_.size(); }
    std::size_t group_count() const noexcept override { return 1; }
    std::size_t sample_count() const noexcept override { return rates_.size(); }
    bool residuals(const Expr& model, std::span<const double> theta, std::span<double> out) const override;

    std::size_t species_count() const noexcept { return columns_.size(); }
    std::span<const double> rates() const noexcept { return rates_; }
    std::span<const double> column(std::size_t s) const { return columns_[s]; }

private:
    std::vector<std::vector<double>> columns_;
    std::vector<std::span<const double>> views_;
    std::vector<double> rates_;
};

/// Integrates dC/dt = stoich * model(C) from each experiment's first
/// measured row and compares every sampled concentration.
class WeakProblem final : public Problem {
public:
    WeakProblem(const Dataset& data, IntegratorSettings settings);

    FitKind kind() const noexcept override { return FitKind::Weak; }
    std::size_t residual_count() const noexcept override { return residuals_; }
    std::size_t group_count() const noexcept override { return stoich_.size(); }
    std::size_t sample_count() const noexcept override { return samples_; }
    bool residuals(const Expr& model, std::span<const double> theta, std::span<double> out) const override;

    const Dataset& data() const noexcept { return *data_; }
    const IntegratorSettings& settings() const noexcept { return settings_; }

private:
    const Dataset* data_;
    std::vector<double> stoich_;
    IntegratorSettings settings_;
    std::size_t residuals_ = 0;
    std::size_t samples_ = 0;
};

/// Integrator settings used for weak-form parameter estimation.
inline IntegratorSettings weak_fit_settings() { return IntegratorSettings{1e-7, 1e-9, 2000, 0.0}; }

struct FittedModel {
    ParamTemplate tmpl;
    std::vector<double> theta;
    double rss = 0.0;
    double nll = 0.0;
    CriteriaValues criteria;
    FitKind kind = FitKind::Strong;
    std::size_t n = 0;
    std::vector<double> group_rss;

    std::size_t dimension() const noexcept { return tmpl.dimension; }
    std::size_t complexity() const noexcept { return kinfer::complexity(tmpl.skeleton); }
    /// Template with theta substituted.
    Expr expr() const { return tmpl.substitute(theta); }
};

/// Fills rss, nll and criteria for `model` at `theta`; nullopt when the
/// model cannot be evaluated there.
std::optional<FittedModel> score(const Problem& problem, const ParamTemplate& tmpl, std::span<const double> theta);

/// Global search plus local refinement of the template's parameters.
/// `guesses` seed the colony. nullopt when no parameter vector evaluates.
std::optional<FittedModel> fit_template(const Problem& problem, const ParamTemplate& tmpl, const FitBudget& budget,
                                        std::span<const std::vector<double>> guesses = {},
                                        OptimumResult* trace = nullptr);

std::optional<FittedModel> fit_profile(const ParamTemplate& tmpl, std::span<const double> times,
                                       std::span<const double> values, const FitBudget& budget);
std::optional<FittedModel> fit_rate_strong(const ParamTemplate& tmpl, const Matrix& states,
                                           std::span<const double> rates, const FitBudget& budget);
std::optional<FittedModel> fit_rate_weak(const ParamTemplate& tmpl, const Dataset& data,
                                         const IntegratorSettings& settings, const FitBudget& budget,
                                         std::span<const std::vector<double>> guesses = {});

/// Ascending by criterion value, then fewer parameters, then lower
/// complexity, then input order. Undefined values sort last.
/// Throws std::invalid_argument for an empty list.
std::vector<FittedModel> rank(std::span<const FittedModel> models, const CriterionKind& kind);

/// Integrated response of a rate model for every experiment of `data`,
/// started from the first measured row. Rows after a failure stay NaN.
std::vector<Matrix> predict_weak(const Expr& rate, const Dataset& data,
                                 const IntegratorSettings& settings = weak_fit_settings());

/// Writes "evaluation,best" rows.
void write_fit_trace(const std::filesystem::path& path, const OptimumResult& result);

}  // namespace kinfer
