#include "kinfer/studies.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "kinfer/csv.hpp"
#include "kinfer/rng.hpp"
#include "kinfer/system.hpp"

namespace kinfer {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::vector<std::string>& rival_species()
{
    static const std::vector<std::string> names{"C_A", "C_B"};
    return names;
}

Dataset isomerization_data(double std_dev, std::size_t samples, std::uint64_t seed)
{
    CaseStudy cs = make_case_study("isomerization");
    for (auto& e : cs.experiments)
        e.n_samples = samples;
    return generate_dataset(cs.system, cs.experiments, NoiseSpec{std_dev, seed});
}

}  // namespace

std::vector<ParamTemplate> rival_templates()
{
    static const char* const texts[] = {
        "p[0]*C_A",
        "p[0]*C_A-p[1]*C_B",
        "(p[0]*C_A-p[1]*C_B)/(p[2]*C_A)",
        "(p[0]*C_A-p[1]*C_B)/(p[2]*C_A+p[3]*C_B)",
        "(p[0]*C_A-p[1]*C_B)/(p[2]*C_A+p[3]*C_B+p[4])",
        "(p[0]*C_A*C_A-p[1]*C_B-p[2]*C_A)/(p[3]*C_A+p[4]*C_B+p[5])",
        "(p[0]*C_A*C_A-p[1]*C_B*C_B-p[2]*C_A-p[3]*C_B)/(p[4]*C_A+p[5]*C_B+p[6])",
    };
    std::vector<ParamTemplate> out;
    for (const char* t : texts)
        out.push_back(as_template(parse(t, std::span<const std::string>(rival_species()))));
    return out;
}

std::vector<double> default_variance_grid()
{
    std::vector<double> v(13);
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = 0.04 + (0.25 - 0.04) * static_cast<double>(i) / 12.0;
    return v;
}

std::vector<std::size_t> default_sample_sizes()
{
    return {2, 3, 4, 5, 6, 7, 8, 9, 10, 12, 15, 20, 25, 30, 40, 50, 75, 100};
}

StudyLevel evaluate_level(const Dataset& data, double x, const StudyOptions& options, std::uint64_t fit_seed)
{
    const auto rivals = rival_templates();
    StudyLevel level;
    level.x = x;
    level.n = data.total_samples();
    for (std::size_t r = 0; r < rivals.size(); ++r) {
        FitBudget budget = options.fit;
        budget.seed = derive_seed(fit_seed, {r});
        level.fits.push_back(fit_rate_weak(rivals[r], data, options.integrator, budget));
    }
    for (std::size_t k = 0; k < kAllCriteria.size(); ++k) {
        const Criterion c = kAllCriteria[k];
        level.delta[k] = kNaN;
        level.m1[k] = StudyLevel::npos;
        const auto& truth = level.fits[kTrueRival];
        if (!truth || !std::isfinite(truth->criteria.get(c)))
            continue;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < level.fits.size(); ++r) {
            if (r == kTrueRival || !level.fits[r])
                continue;
            const double v = level.fits[r]->criteria.get(c);
            if (std::isfinite(v) && v < best) {
                best = v;
                level.m1[k] = r;
            }
        }
        if (level.m1[k] != StudyLevel::npos)
            level.delta[k] = best - truth->criteria.get(c);
    }
    return level;
}

StudyResult ic_noise_study(std::span<const double> variances, std::uint64_t seed, const StudyOptions& options)
{
    for (double v : variances)
        if (!(v > 0.0) || !std::isfinite(v))
            throw std::invalid_argument("variances must be positive and finite");
    StudyResult out;
    out.kind = "ic-noise";
    for (std::size_t i = 0; i < variances.size(); ++i) {
        const Dataset data = isomerization_data(std::sqrt(variances[i]), 30, derive_seed(seed, {i}));
        out.levels.push_back(evaluate_level(data, variances[i], options, derive_seed(seed, {i, 1})));
    }
    return out;
}

StudyResult ic_sample_study(std::span<const std::size_t> sizes, double variance, std::uint64_t seed,
                            const StudyOptions& options)
{
    if (!(variance >= 0.0) || !std::isfinite(variance))
        throw std::invalid_argument("variance must be non-negative and finite");
    for (auto s : sizes)
        if (s < 2)
            throw std::invalid_argument("each experiment needs at least two samples");
    StudyResult out;
    out.kind = "ic-samples";
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        const Dataset data = isomerization_data(std::sqrt(variance), sizes[i], derive_seed(seed, {i}));
        out.levels.push_back(
            evaluate_level(data, static_cast<double>(sizes[i]), options, derive_seed(seed, {i, 1})));
    }
    return out;
}

std::optional<double> first_crossing(const StudyResult& study, Criterion c)
{
    const auto k = static_cast<std::size_t>(c);
    for (const auto& level : study.levels)
        if (level.delta[k] < 0.0)
            return level.x;
    return std::nullopt;
}

std::string study_csv(const StudyResult& study, Criterion c)
{
    const auto k = static_cast<std::size_t>(c);
    csv::Table t;
    t.header = {study.kind == "ic-noise" ? "variance" : "samples_per_experiment", "n", "delta", "m1"};
    for (std::size_t r = 0; r < 7; ++r)
        t.header.push_back("nll_r" + std::to_string(r + 1));
    for (const auto& level : study.levels) {
        std::vector<std::string> row{csv::number(level.x, 9), std::to_string(level.n), csv::number(level.delta[k], 9),
                                     level.m1[k] == StudyLevel::npos ? "" : "r" + std::to_string(level.m1[k] + 1)};
        for (const auto& f : level.fits)
            row.push_back(f ? csv::number(f->nll, 9) : "");
        t.add(std::move(row));
    }
    return t.str();
}

}  // namespace kinfer
