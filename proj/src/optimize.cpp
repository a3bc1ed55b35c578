#include "kinfer/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

#include "kinfer/rng.hpp"

namespace kinfer {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sanitize(double v) { return std::isnan(v) ? kInf : v; }

double call(const Objective& f, std::span<const double> x) { return sanitize(f(x)); }

}  // namespace

void FitBudget::validate() const
{
    if (global_evals == 0 || local_max_iters == 0 || min_colony == 0)
        throw std::invalid_argument("fit budget counts must be positive");
    if (!(fd_rel_step > 0.0))
        throw std::invalid_argument("finite-difference step must be positive");
}

// ---------------------------------------------------------------------------
// Artificial bee colony

ColonyResult abc_search(const Objective& objective, std::span<const Interval> box, const FitBudget& budget,
                        std::span<const std::vector<double>> guesses)
{
    budget.validate();
    const std::size_t dim = box.size();
    ColonyResult out;
    if (dim == 0)
        throw std::invalid_argument("abc_search needs at least one dimension");

    const std::size_t cap = std::max<std::size_t>(2, budget.global_evals / 2);
    const std::size_t sources = std::clamp<std::size_t>(std::max(budget.min_colony, 10 * dim), 2, cap);
    const std::size_t limit = std::max<std::size_t>(1, sources * dim);

    Rng rng(budget.seed, {0xabcULL});
    std::vector<std::vector<double>> food(sources, std::vector<double>(dim));
    std::vector<double> value(sources, kInf);
    std::vector<std::size_t> trials(sources, 0);

    auto random_point = [&](std::vector<double>& x) {
        for (std::size_t j = 0; j < dim; ++j)
            x[j] = rng.uniform(box[j].lower, box[j].upper);
    };
    for (std::size_t i = 0; i < sources; ++i) {
        if (i < guesses.size() && guesses[i].size() == dim)
            food[i] = guesses[i];
        else
            random_point(food[i]);
    }

    OptimumResult& best = out.best;
    best.value = kInf;
    std::size_t evals = 0;

    auto note = [&](const std::vector<double>& x, double v) {
        ++evals;
        if (v < best.value) {
            best.value = v;
            best.theta = x;
        }
        if (budget.record_trace)
            best.trace.push_back({evals, best.value});
    };

    auto evaluate_batch = [&](const std::vector<std::vector<double>>& xs, std::vector<double>& vs) {
        vs.assign(xs.size(), kInf);
        kernels::for_each_index(budget.exec, xs.size(), [&](std::size_t i) { vs[i] = call(objective, xs[i]); });
        for (std::size_t i = 0; i < xs.size(); ++i)
            note(xs[i], vs[i]);
    };

    std::vector<double> batch_values;
    evaluate_batch(food, batch_values);
    value = batch_values;

    auto neighbour = [&](std::size_t i) {
        std::vector<double> v = food[i];
        std::size_t k = static_cast<std::size_t>(rng.below(sources - 1));
        if (k >= i)
            ++k;
        const auto j = static_cast<std::size_t>(rng.below(dim));
        const double phi = rng.uniform(-1.0, 1.0);
        v[j] = std::clamp(food[i][j] + phi * (food[i][j] - food[k][j]), box[j].lower, box[j].upper);
        return v;
    };

    auto greedy = [&](std::size_t i, std::vector<double>&& x, double v) {
        if (v < value[i]) {
            food[i] = std::move(x);
            value[i] = v;
            trials[i] = 0;
        } else {
            ++trials[i];
        }
    };

    std::vector<std::vector<double>> proposals;
    std::vector<std::size_t> targets;
    while (evals < budget.global_evals) {
        // Employed bees: one neighbour proposal per source.
        std::size_t room = budget.global_evals - evals;
        proposals.clear();
        targets.clear();
        for (std::size_t i = 0; i < sources && proposals.size() < room; ++i) {
            proposals.push_back(neighbour(i));
            targets.push_back(i);
        }
        evaluate_batch(proposals, batch_values);
        for (std::size_t m = 0; m < proposals.size(); ++m)
            greedy(targets[m], std::move(proposals[m]), batch_values[m]);
        if (evals >= budget.global_evals)
            break;

        // Onlooker bees: sources chosen in proportion to fitness.
        std::vector<double> weight(sources);
        double total = 0.0;
        for (std::size_t i = 0; i < sources; ++i) {
            const double f = value[i];
            weight[i] = !std::isfinite(f) ? 0.0 : (f >= 0.0 ? 1.0 / (1.0 + f) : 1.0 + std::abs(f));
            total += weight[i];
        }
        room = budget.global_evals - evals;
        proposals.clear();
        targets.clear();
        for (std::size_t m = 0; m < sources && proposals.size() < room; ++m) {
            std::size_t pick = sources - 1;
            if (total > 0.0) {
                double u = rng.uniform() * total;
                for (std::size_t i = 0; i < sources; ++i) {
                    u -= weight[i];
                    if (u < 0.0) {
                        pick = i;
                        break;
                    }
                }
            } else {
                pick = static_cast<std::size_t>(rng.below(sources));
            }
            proposals.push_back(neighbour(pick));
            targets.push_back(pick);
        }
        evaluate_batch(proposals, batch_values);
        for (std::size_t m = 0; m < proposals.size(); ++m)
            greedy(targets[m], std::move(proposals[m]), batch_values[m]);
        if (evals >= budget.global_evals)
            break;

        // Scout: abandon the most exhausted source.
        const auto worn = static_cast<std::size_t>(
            std::max_element(trials.begin(), trials.end()) - trials.begin());
        if (trials[worn] > limit) {
            random_point(food[worn]);
            value[worn] = call(objective, food[worn]);
            note(food[worn], value[worn]);
            trials[worn] = 0;
        }
    }

    best.evaluations = evals;
    best.fittable = std::isfinite(best.value);

    std::vector<std::size_t> order(sources);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return value[a] < value[b]; });
    for (auto i : order) {
        if (!std::isfinite(value[i]))
            break;
        out.elites.push_back(food[i]);
        out.elite_values.push_back(value[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// BFGS

namespace {

struct GradientEval {
    Eigen::VectorXd g;
    std::size_t evals = 0;
};

GradientEval central_gradient(const Objective& f, const Eigen::VectorXd& x, double fx, double rel)
{
    const auto n = x.size();
    GradientEval out;
    out.g = Eigen::VectorXd::Zero(n);
    std::vector<double> p(x.data(), x.data() + n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double h = rel * (1.0 + std::abs(x[i]));
        p[i] = x[i] + h;
        const double fp = call(f, p);
        p[i] = x[i] - h;
        const double fm = call(f, p);
        p[i] = x[i];
        out.evals += 2;
        if (std::isfinite(fp) && std::isfinite(fm))
            out.g[i] = (fp - fm) / (2.0 * h);
        else if (std::isfinite(fp))
            out.g[i] = (fp - fx) / h;
        else if (std::isfinite(fm))
            out.g[i] = (fx - fm) / h;
    }
    return out;
}

}  // namespace

LocalResult bfgs_minimize(const Objective& objective, std::span<const double> start, double start_value,
                          std::size_t max_iters, double fd_rel_step)
{
    LocalResult res;
    res.theta.assign(start.begin(), start.end());
    res.value = sanitize(start_value);
    const auto n = static_cast<Eigen::Index>(start.size());
    if (n == 0 || !std::isfinite(res.value))
        return res;

    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(start.data(), n);
    double fx = res.value;
    auto grad = central_gradient(objective, x, fx, fd_rel_step);
    res.evaluations += grad.evals;
    Eigen::VectorXd g = grad.g;
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
    bool identity = true;
    std::size_t stalls = 0;
    std::vector<double> trial(static_cast<std::size_t>(n));

    for (std::size_t it = 0; it < max_iters; ++it) {
        res.iterations = it + 1;
        if (g.lpNorm<Eigen::Infinity>() == 0.0)
            break;
        Eigen::VectorXd p = -H * g;
        double slope = g.dot(p);
        if (!(slope < 0.0)) {
            H.setIdentity();
            identity = true;
            p = -g;
            slope = -g.squaredNorm();
        }
        // Backtracking line search with Armijo condition.
        double alpha = 1.0, f_new = kInf;
        bool accepted = false;
        Eigen::VectorXd x_new(n);
        for (int ls = 0; ls < 40; ++ls) {
            x_new = x + alpha * p;
            std::copy(x_new.data(), x_new.data() + n, trial.begin());
            f_new = call(objective, trial);
            ++res.evaluations;
            if (std::isfinite(f_new) && f_new <= fx + 1e-4 * alpha * slope) {
                accepted = true;
                break;
            }
            alpha *= std::isfinite(f_new) ? 0.5 : 0.1;
        }
        if (!accepted) {
            if (identity)
                break;
            H.setIdentity();
            identity = true;
            continue;
        }
        const double decrease = fx - f_new;
        auto gnew = central_gradient(objective, x_new, f_new, fd_rel_step);
        res.evaluations += gnew.evals;
        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd y = gnew.g - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm() && sy > 0.0) {
            if (identity) {
                H *= sy / y.squaredNorm();
                identity = false;
            }
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
            H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
        }
        x = x_new;
        fx = f_new;
        g = gnew.g;
        if (fx < res.value) {
            res.value = fx;
            res.theta.assign(x.data(), x.data() + n);
        }
        if (decrease <= 1e-13 * std::max(std::abs(fx), 1e-300))
            ++stalls;
        else
            stalls = 0;
        if (stalls >= 3)
            break;
    }
    return res;
}

// ---------------------------------------------------------------------------
// Two-stage fit

OptimumResult fit(const Objective& objective, std::size_t dim, const FitBudget& budget, std::span<const Interval> box,
                  std::span<const std::vector<double>> guesses)
{
    budget.validate();
    if (dim == 0) {
        OptimumResult r;
        r.value = call(objective, {});
        r.fittable = std::isfinite(r.value);
        r.evaluations = 1;
        if (budget.record_trace)
            r.trace.push_back({1, r.value});
        return r;
    }
    std::vector<Interval> default_box;
    if (box.empty()) {
        default_box.assign(dim, Interval{});
        box = default_box;
    }
    if (box.size() != dim)
        throw std::invalid_argument("search box dimension mismatch");

    ColonyResult colony = abc_search(objective, box, budget, guesses);
    OptimumResult out = std::move(colony.best);
    if (!out.fittable)
        return out;

    std::vector<std::vector<double>> starts{out.theta};
    std::vector<double> start_values{out.value};
    for (std::size_t i = 0; i < colony.elites.size() && starts.size() < budget.restarts + 1; ++i) {
        if (colony.elites[i] == out.theta)
            continue;
        starts.push_back(colony.elites[i]);
        start_values.push_back(colony.elite_values[i]);
    }
    std::vector<LocalResult> locals(starts.size());
    kernels::for_each_index(budget.exec, starts.size(), [&](std::size_t i) {
        locals[i] = bfgs_minimize(objective, starts[i], start_values[i], budget.local_max_iters, budget.fd_rel_step);
    });
    for (const auto& l : locals) {
        out.evaluations += l.evaluations;
        if (l.value < out.value) {
            out.value = l.value;
            out.theta = l.theta;
        }
        if (budget.record_trace)
            out.trace.push_back({out.evaluations, out.value});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Levenberg-Marquardt polish

LocalResult polish_least_squares(const Residuals& residuals, std::size_t residual_count,
                                 std::span<const double> start, std::size_t max_evals)
{
    LocalResult res;
    res.theta.assign(start.begin(), start.end());
    res.value = kInf;
    const std::size_t d = start.size();
    const auto m = static_cast<Eigen::Index>(residual_count);
    Eigen::VectorXd r(m);
    auto eval = [&](const std::vector<double>& th, Eigen::VectorXd& out) -> double {
        ++res.evaluations;
        if (!residuals(th, std::span<double>(out.data(), static_cast<std::size_t>(m))))
            return kInf;
        const double c = out.squaredNorm();
        return std::isfinite(c) ? c : kInf;
    };
    double cost = eval(res.theta, r);
    res.value = cost;
    if (d == 0 || !std::isfinite(cost) || max_evals <= 1)
        return res;

    std::vector<double> theta = res.theta;
    Eigen::MatrixXd J(m, static_cast<Eigen::Index>(d));
    Eigen::VectorXd rp(m);
    double lambda = 1e-3;
    while (res.evaluations + d + 1 <= max_evals) {
        bool jac_ok = true;
        for (std::size_t j = 0; j < d; ++j) {
            const double h = 1.5e-8 * (1.0 + std::abs(theta[j]));
            std::vector<double> tp = theta;
            tp[j] += h;
            if (!std::isfinite(eval(tp, rp))) {
                tp[j] = theta[j] - h;
                if (!std::isfinite(eval(tp, rp))) {
                    jac_ok = false;
                    break;
                }
                J.col(static_cast<Eigen::Index>(j)) = (r - rp) / h;
            } else {
                J.col(static_cast<Eigen::Index>(j)) = (rp - r) / h;
            }
        }
        if (!jac_ok)
            break;
        const Eigen::MatrixXd JtJ = J.transpose() * J;
        const Eigen::VectorXd Jtr = J.transpose() * r;
        bool improved = false;
        while (res.evaluations < max_evals) {
            Eigen::MatrixXd A = JtJ;
            for (Eigen::Index k = 0; k < A.rows(); ++k)
                A(k, k) += lambda * std::max(JtJ(k, k), 1e-12);
            const Eigen::VectorXd step = A.ldlt().solve(-Jtr);
            if (!step.allFinite())
                break;
            std::vector<double> cand = theta;
            for (std::size_t j = 0; j < d; ++j)
                cand[j] += step[static_cast<Eigen::Index>(j)];
            const double c = eval(cand, rp);
            if (c < cost) {
                theta = std::move(cand);
                cost = c;
                r = rp;
                lambda = std::max(lambda / 3.0, 1e-12);
                improved = true;
                break;
            }
            lambda *= 4.0;
            if (lambda > 1e12)
                break;
        }
        if (!improved)
            break;
    }
    if (cost < res.value) {
        res.value = cost;
        res.theta = std::move(theta);
    }
    return res;
}

}  // namespace kinfer
