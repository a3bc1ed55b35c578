#include "kinfer/criteria.hpp"

#include <cmath>
#include <limits>

namespace kinfer {

std::string_view criterion_name(Criterion c)
{
    switch (c) {
    case Criterion::AIC: return "aic";
    case Criterion::AICc: return "aicc";
    case Criterion::HQC: return "hqc";
    case Criterion::BIC: return "bic";
    }
    return "?";
}

double penalty(const CriterionKind& kind, std::size_t d, std::size_t n)
{
    kind.validate();
    if (n < 1)
        throw UndefinedCriterion("criteria need at least one sample");
    const double dd = static_cast<double>(d);
    const double nn = static_cast<double>(n);
    switch (kind.kind) {
    case Criterion::AIC:
        return 2.0 * dd;
    case Criterion::AICc:
        if (kind.aicc_form == AiccForm::Eta) {
            if (n <= d + 1)
                throw UndefinedCriterion("AICc undefined for n <= d + 1");
            return 2.0 * nn / (nn - dd - 1.0) * dd;
        }
        if (n <= d + 2)
            throw UndefinedCriterion("AICc undefined for n <= d + 2");
        return 2.0 * dd + 2.0 * (dd + 1.0) * (dd + 2.0) / (nn - dd - 2.0);
    case Criterion::HQC:
        if (n < 3)
            throw UndefinedCriterion("HQC needs ln(ln n) > 0, i.e. n >= 3");
        return 2.0 * kind.hqc_c * dd * std::log(std::log(nn));
    case Criterion::BIC:
        return dd * std::log(nn);
    }
    throw std::logic_error("unknown criterion");
}

double criterion(const CriterionKind& kind, double nll, std::size_t d, std::size_t n)
{
    return 2.0 * nll + penalty(kind, d, n);
}

double penalty_delta(const CriterionKind& kind, std::size_t d1, std::size_t d2, std::size_t n)
{
    return penalty(kind, d1, n) - penalty(kind, d2, n);
}

double CriteriaValues::get(Criterion c) const noexcept
{
    switch (c) {
    case Criterion::AIC: return aic;
    case Criterion::AICc: return aicc;
    case Criterion::HQC: return hqc;
    case Criterion::BIC: return bic;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

CriteriaValues all_criteria(double nll, std::size_t d, std::size_t n, double hqc_c)
{
    auto safe = [&](Criterion c) {
        try {
            return criterion(CriterionKind{c, hqc_c}, nll, d, n);
        } catch (const UndefinedCriterion&) {
            return std::numeric_limits<double>::quiet_NaN();
        }
    };
    return CriteriaValues{safe(Criterion::AIC), safe(Criterion::AICc), safe(Criterion::HQC), safe(Criterion::BIC)};
}

}  // namespace kinfer
