#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace kinfer {

struct IntegratorSettings {
    double rel_tol = 1e-8;
    double abs_tol = 1e-10;
    std::size_t max_steps = 100000;
    double initial_step = 0.0;  // 0 selects the step automatically
};

enum class IntegrationStatus { Ok, NonFiniteDerivative, StepUnderflow, TooManySteps };

struct Trajectory {
    IntegrationStatus status = IntegrationStatus::Ok;
    double last_time = 0.0;        // last time reached with a valid state
    std::size_t valid_rows = 0;    // output rows written before any failure
    std::size_t dimension = 0;
    std::vector<double> states;    // row-major, output_times.size() x dimension
    std::size_t accepted_steps = 0;
    std::size_t rejected_steps = 0;

    bool ok() const noexcept { return status == IntegrationStatus::Ok; }
    std::span<const double> row(std::size_t i) const { return {states.data() + i * dimension, dimension}; }
    double at(std::size_t i, std::size_t s) const { return states[i * dimension + s]; }
};

namespace dopri {
// Dormand-Prince 5(4) tableau and Hairer's dense output coefficients.
inline constexpr double c2 = 0.2, c3 = 0.3, c4 = 0.8, c5 = 8.0 / 9.0;
inline constexpr double a21 = 0.2;
inline constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
inline constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
inline constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                        a54 = -212.0 / 729.0;
inline constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                        a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
inline constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                        a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
inline constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                        e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
}  // namespace dopri

namespace detail {

template <class Rhs>
bool eval_rhs(Rhs& rhs, double t, std::span<const double> y, std::span<double> dy)
{
    if (!rhs(t, y, dy))
        return false;
    for (double v : dy)
        if (!std::isfinite(v))
            return false;
    return true;
}

inline double error_norm(std::span<const double> err, std::span<const double> y0, std::span<const double> y1,
                         const IntegratorSettings& s)
{
    double acc = 0.0;
    for (std::size_t i = 0; i < err.size(); ++i) {
        const double sc = s.abs_tol + s.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        const double q = err[i] / sc;
        acc += q * q;
    }
    return std::sqrt(acc / static_cast<double>(err.size()));
}

}  // namespace detail

/// Adaptive Dormand-Prince 5(4) integration of dy/dt = rhs(t, y) from
/// (t0, y0), reporting states at the requested non-decreasing output times
/// (all >= t0) through the method's continuous extension.
///
/// `rhs(t, y, dydt)` returns false to signal an invalid state. Non-finite
/// derivatives, step-size underflow or exceeding max_steps end the
/// integration with a failure status; rows before the failure stay valid.
template <class Rhs>
Trajectory integrate(Rhs&& rhs, std::span<const double> y0, double t0, std::span<const double> output_times,
                     const IntegratorSettings& settings = {})
{
    using namespace dopri;
    const std::size_t n = y0.size();
    Trajectory out;
    out.dimension = n;
    out.states.assign(output_times.size() * n, std::numeric_limits<double>::quiet_NaN());
    out.last_time = t0;

    std::vector<double> buf(n * 12);
    std::span<double> y(buf.data(), n), y1(buf.data() + n, n), ytmp(buf.data() + 2 * n, n);
    std::span<double> k1(buf.data() + 3 * n, n), k2(buf.data() + 4 * n, n), k3(buf.data() + 5 * n, n),
        k4(buf.data() + 6 * n, n), k5(buf.data() + 7 * n, n), k6(buf.data() + 8 * n, n),
        k7(buf.data() + 9 * n, n), err(buf.data() + 10 * n, n), cont5(buf.data() + 11 * n, n);
    std::copy(y0.begin(), y0.end(), y.begin());

    std::size_t next_out = 0;
    auto emit_exact = [&](double t) {
        while (next_out < output_times.size() && output_times[next_out] <= t) {
            std::copy(y.begin(), y.end(), out.states.begin() + static_cast<std::ptrdiff_t>(next_out * n));
            ++next_out;
        }
    };

    for (double v : y0) {
        if (!std::isfinite(v)) {
            out.status = IntegrationStatus::NonFiniteDerivative;
            return out;
        }
    }
    if (output_times.empty())
        return out;
    const double tf = output_times.back();
    emit_exact(t0);
    out.valid_rows = next_out;
    if (next_out == output_times.size())
        return out;

    if (!detail::eval_rhs(rhs, t0, y, k1)) {
        out.status = IntegrationStatus::NonFiniteDerivative;
        return out;
    }

    // Initial step (Hairer & Wanner, II.4).
    double h = settings.initial_step;
    const double span = tf - t0;
    if (h <= 0.0) {
        double d0 = 0.0, d1n = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double sc = settings.abs_tol + settings.rel_tol * std::abs(y[i]);
            d0 += (y[i] / sc) * (y[i] / sc);
            d1n += (k1[i] / sc) * (k1[i] / sc);
        }
        d0 = std::sqrt(d0 / static_cast<double>(n));
        d1n = std::sqrt(d1n / static_cast<double>(n));
        double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
        h0 = std::min(h0, span);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h0 * k1[i];
        double d2 = 0.0;
        if (detail::eval_rhs(rhs, t0 + h0, ytmp, k2)) {
            for (std::size_t i = 0; i < n; ++i) {
                const double sc = settings.abs_tol + settings.rel_tol * std::abs(y[i]);
                const double q = (k2[i] - k1[i]) / sc;
                d2 += q * q;
            }
            d2 = std::sqrt(d2 / static_cast<double>(n)) / h0;
        } else {
            d2 = 1e6;
        }
        const double dmax = std::max(d1n, d2);
        const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
        h = std::min(100.0 * h0, h1);
    }
    h = std::min(h, span);

    constexpr double safety = 0.9, fac_min = 0.2, fac_max = 10.0;
    double t = t0;
    double err_old = 1e-4;
    std::size_t steps = 0;

    while (next_out < output_times.size()) {
        if (steps++ >= settings.max_steps) {
            out.status = IntegrationStatus::TooManySteps;
            break;
        }
        const double h_min = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
        if (h < h_min) {
            out.status = IntegrationStatus::StepUnderflow;
            break;
        }
        // Stretch the final step rather than leave a remainder below h_min.
        const bool last = t + 1.01 * h >= tf;
        if (last)
            h = tf - t;

        bool stages_ok = true;
        auto stage = [&](std::span<double> k, double c, auto&& combine) {
            if (!stages_ok)
                return;
            for (std::size_t i = 0; i < n; ++i)
                ytmp[i] = y[i] + h * combine(i);
            stages_ok = detail::eval_rhs(rhs, t + c * h, ytmp, k);
        };
        stage(k2, c2, [&](std::size_t i) { return a21 * k1[i]; });
        stage(k3, c3, [&](std::size_t i) { return a31 * k1[i] + a32 * k2[i]; });
        stage(k4, c4, [&](std::size_t i) { return a41 * k1[i] + a42 * k2[i] + a43 * k3[i]; });
        stage(k5, c5, [&](std::size_t i) { return a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]; });
        stage(k6, 1.0, [&](std::size_t i) {
            return a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i];
        });
        if (stages_ok) {
            for (std::size_t i = 0; i < n; ++i)
                y1[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
            stages_ok = detail::eval_rhs(rhs, t + h, y1, k7);
        }
        if (!stages_ok) {
            h *= 0.25;
            ++out.rejected_steps;
            continue;
        }
        for (std::size_t i = 0; i < n; ++i)
            err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        const double en = detail::error_norm(err, y, y1, settings);
        if (!std::isfinite(en)) {
            h *= 0.25;
            ++out.rejected_steps;
            continue;
        }
        if (en > 1.0) {
            h *= std::max(fac_min, safety * std::pow(en, -0.2));
            ++out.rejected_steps;
            continue;
        }

        // Accepted: emit dense output for every requested time inside (t, t+h].
        const double t_new = last ? tf : t + h;
        if (next_out < output_times.size() && output_times[next_out] <= t_new) {
            for (std::size_t i = 0; i < n; ++i)
                cont5[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
            while (next_out < output_times.size() && output_times[next_out] <= t_new) {
                const double to = output_times[next_out];
                double* row = out.states.data() + next_out * n;
                if (to == t_new) {
                    std::copy(y1.begin(), y1.end(), row);
                } else {
                    const double th = (to - t) / h, th1 = 1.0 - th;
                    for (std::size_t i = 0; i < n; ++i) {
                        const double ydiff = y1[i] - y[i];
                        const double bspl = h * k1[i] - ydiff;
                        const double r4 = ydiff - h * k7[i] - bspl;
                        row[i] = y[i] + th * (ydiff + th1 * (bspl + th * (r4 + th1 * cont5[i])));
                    }
                }
                ++next_out;
            }
        }
        std::copy(y1.begin(), y1.end(), y.begin());
        std::copy(k7.begin(), k7.end(), k1.begin());
        t = t_new;
        out.last_time = t;
        out.valid_rows = next_out;
        ++out.accepted_steps;

        // PI step-size control with Lund stabilisation.
        const double e = std::max(en, 1e-10);
        double fac = safety * std::pow(e, -0.7 / 5.0) * std::pow(err_old, 0.4 / 5.0);
        fac = std::clamp(fac, fac_min, fac_max);
        err_old = e;
        h *= fac;
    }
    out.valid_rows = next_out;
    return out;
}

}  // namespace kinfer
