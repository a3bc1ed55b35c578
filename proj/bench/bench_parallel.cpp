// Serial reference vs OpenMP kernels.

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "kinfer/estimate.hpp"
#include "kinfer/gp.hpp"
#include "kinfer/kernels.hpp"
#include "kinfer/rng.hpp"
#include "kinfer/system.hpp"

using namespace kinfer;

namespace {

struct Columns {
    std::vector<std::vector<double>> data;
    std::vector<std::span<const double>> views;
};

Columns random_columns(std::size_t rows)
{
    Columns c;
    Rng rng(3);
    c.data.assign(4, std::vector<double>(rows));
    for (auto& col : c.data)
        for (auto& v : col)
            v = rng.uniform(0.1, 5.0);
    c.views.assign(c.data.begin(), c.data.end());
    return c;
}

template <bool Parallel>
void BM_EvaluateRows(benchmark::State& state)
{
    const std::vector<std::string> names{"C_T", "C_H", "C_B", "C_M"};
    const Expr e = parse("2*C_T*C_H/(1+9*C_B+5*C_T)-0.1*C_M*C_M/(C_H+2)", names);
    const auto rows = static_cast<std::size_t>(state.range(0));
    const Columns cols = random_columns(rows);
    std::vector<double> out(rows);
    for (auto _ : state) {
        if constexpr (Parallel)
            kernels::evaluate_rows_parallel(e, cols.views, {}, out);
        else
            kernels::evaluate_rows_serial(e, cols.views, {}, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows));
}
BENCHMARK(BM_EvaluateRows<false>)->Name("evaluate_rows/serial")->Arg(1 << 12)->Arg(1 << 18);
BENCHMARK(BM_EvaluateRows<true>)->Name("evaluate_rows/parallel")->Arg(1 << 12)->Arg(1 << 18);

void BM_WeakFit(benchmark::State& state)
{
    const CaseStudy cs = make_case_study("isomerization");
    const Dataset data = generate_dataset(cs.system, cs.experiments, NoiseSpec{0.2, 1});
    FitBudget budget;
    budget.global_evals = 1000;
    budget.restarts = 1;
    budget.exec = state.range(0) ? Exec::Parallel : Exec::Serial;
    for (auto _ : state)
        benchmark::DoNotOptimize(fit_rate_weak(cs.system.rate, data, weak_fit_settings(), budget));
}
BENCHMARK(BM_WeakFit)->Name("weak_fit")->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Evolve(benchmark::State& state)
{
    std::vector<double> t, v;
    for (int i = 0; i < 30; ++i) {
        t.push_back(i / 3.0);
        v.push_back(10 / (1 + t.back()));
    }
    const ProfileProblem problem(t, v);
    GpConfig config = GpConfig::profile();
    config.population = 200;
    config.generations = 10;
    config.seed = 1;
    config.exec = state.range(0) ? Exec::Parallel : Exec::Serial;
    for (auto _ : state)
        benchmark::DoNotOptimize(evolve(Grammar::profile(15), problem, config));
}
BENCHMARK(BM_Evolve)->Name("evolve")->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
