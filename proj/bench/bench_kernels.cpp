// Serial reference loops against the OpenMP kernels. Both backends produce
// bit-identical results, so only the wall time differs.

#include "ctrlrand/backward_scheme.hpp"
#include "ctrlrand/fd_oracle.hpp"
#include "ctrlrand/forward_sim.hpp"
#include "ctrlrand/policy_eval.hpp"
#include "ctrlrand/problems.hpp"
#include "ctrlrand/regression.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace ctrlrand;

namespace {

/// Range argument 0: serial, otherwise the OpenMP thread count.
Execution backend(const benchmark::State& state)
{
    const auto t = static_cast<int>(state.range(0));
    return t == 0 ? Execution::serial() : Execution::parallel(t);
}

const Problem& lq()
{
    static const Problem p = make_lq_problem(LqParams{}, 21);
    return p;
}

void simulate(benchmark::State& state)
{
    const TimeGrid grid = make_uniform_grid(40, 1.0);
    const IntensityMeasure im = IntensityMeasure::uniform(lq().grid(), 100.0);
    const auto n = static_cast<std::size_t>(state.range(1));
    for (auto _ : state) {
        benchmark::DoNotOptimize(simulate_forward(lq(), grid, im, n, 1, {InitialRegime::from_mark_law, backend(state)}));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * 40));
}

void regression_fit(benchmark::State& state)
{
    const ControlGrid& g = lq().grid();
    const auto n = static_cast<std::size_t>(state.range(1));
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    std::vector<double> xs(n), ys(n);
    std::vector<std::uint32_t> reg(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = nd(rng);
        reg[i] = static_cast<std::uint32_t>(i % g.size());
        ys[i] = xs[i] * xs[i] + g.point(reg[i])[0] + nd(rng);
    }
    const BasisSpec spec{BasisKind::poly_xa, 2, 2};
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit_indexed(spec, g, xs, 1, reg, ys, backend(state)));
    }
}

void scheme(benchmark::State& state)
{
    const TimeGrid grid = make_uniform_grid(20, 1.0);
    const IntensityMeasure im = IntensityMeasure::uniform(lq().grid(), 100.0);
    SchemeOptions o{BasisSpec{BasisKind::poly_xa, 2, 2}};
    o.brownian_control_variates = true;
    o.exec = backend(state);
    const auto n = static_cast<std::size_t>(state.range(1));
    for (auto _ : state) {
        benchmark::DoNotOptimize(run_scheme(lq(), grid, im, n, 1, o).value0);
    }
}

void policy(benchmark::State& state)
{
    const TimeGrid grid = make_uniform_grid(20, 1.0);
    const IntensityMeasure im = IntensityMeasure::uniform(lq().grid(), 100.0);
    const SchemeOutput out = run_scheme(lq(), grid, im, 20000, 1, {BasisSpec{BasisKind::poly_xa, 2, 2}});
    const FeedbackPolicy pol = extract_policy(out);
    const auto n = static_cast<std::size_t>(state.range(1));
    for (auto _ : state) {
        benchmark::DoNotOptimize(evaluate_policy(lq(), pol, n, 2, backend(state)).mean);
    }
}

void fd(benchmark::State& state)
{
    FdConfig cfg = default_fd_config(lq(), static_cast<int>(state.range(1)));
    cfg.exec = backend(state);
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_hjb_fd(lq(), cfg)(1.0));
    }
}

void backends(benchmark::internal::Benchmark* b, std::int64_t size)
{
    const int hw = available_threads();
    b->Args({0, size});
    for (int t = 1; t <= hw; t *= 2) {
        b->Args({t, size});
    }
    b->ArgNames({"threads", "size"})->Unit(benchmark::kMillisecond)->UseRealTime();
}

} // namespace

BENCHMARK(simulate)->Apply([](auto* b) { backends(b, 50000); });
BENCHMARK(regression_fit)->Apply([](auto* b) { backends(b, 100000); });
BENCHMARK(scheme)->Apply([](auto* b) { backends(b, 20000); });
BENCHMARK(policy)->Apply([](auto* b) { backends(b, 50000); });
BENCHMARK(fd)->Apply([](auto* b) { backends(b, 400); });

BENCHMARK_MAIN();
