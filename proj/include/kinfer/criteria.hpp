#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string_view>

namespace kinfer {

enum class Criterion { AIC, AICc, HQC, BIC };

inline constexpr std::array<Criterion, 4> kAllCriteria{Criterion::AIC, Criterion::AICc, Criterion::HQC, Criterion::BIC};

std::string_view criterion_name(Criterion c);

/// Small-sample correction used for AICc.
enum class AiccForm {
    /// Penalty coefficient 2n/(n-d-1) per parameter. Reproduces the reported
    /// penalty differences (k_AICc = -2.14 at d = 4 vs 5, n = 150).
    Eta,
    /// AIC + 2(d+1)(d+2)/(n-d-2).
    SampleCorrection,
};

struct CriterionKind {
    Criterion kind = Criterion::AIC;
    double hqc_c = 1.0;  // HQC constant, >= 1
    AiccForm aicc_form = AiccForm::Eta;

    void validate() const
    {
        if (!(hqc_c >= 1.0))
            throw std::invalid_argument("HQC constant must be >= 1");
    }
};

/// Raised when a criterion is undefined for (d, n), e.g. AICc with n <= d+1.
class UndefinedCriterion : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Complexity penalty term alone (criterion minus 2*nll).
double penalty(const CriterionKind& kind, std::size_t d, std::size_t n);
/// 2*nll + penalty.
double criterion(const CriterionKind& kind, double nll, std::size_t d, std::size_t n);
/// penalty(d1, n) - penalty(d2, n).
double penalty_delta(const CriterionKind& kind, std::size_t d1, std::size_t d2, std::size_t n);

inline double criterion(Criterion c, double nll, std::size_t d, std::size_t n)
{
    return criterion(CriterionKind{c}, nll, d, n);
}
inline double penalty_delta(Criterion c, std::size_t d1, std::size_t d2, std::size_t n)
{
    return penalty_delta(CriterionKind{c}, d1, d2, n);
}

/// All four criteria; an undefined value is stored as NaN.
struct CriteriaValues {
    double aic = 0.0;
    double aicc = 0.0;
    double hqc = 0.0;
    double bic = 0.0;

    double get(Criterion c) const noexcept;
};

CriteriaValues all_criteria(double nll, std::size_t d, std::size_t n, double hqc_c = 1.0);

}  // namespace kinfer
