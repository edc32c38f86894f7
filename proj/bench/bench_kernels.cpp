#include <benchmark/benchmark.h>

#include <cmath>

#include "fnpar/kernels.hpp"

using namespace fnpar;

namespace {

Grid grid_for(int dim) {
    switch (dim) {
        case 1: return Grid(1, 12.0, 48001);
        case 2: return Grid(2, 6.0, 241);
        default: return Grid(3, 3.0, 61);
    }
}

GridField bump(const Grid& g) {
    GridField f = GridField::sample(g, [](std::span<const double> x) {
        double r2 = 0.0;
        for (double v : x) r2 += v * v;
        return std::exp(-0.25 * r2);
    });
    f.apply_dirichlet();
    return f;
}

// Rescaled-flow step of a Pucci operator: the hottest loop of the eigenpair solver.
template <bool Parallel>
void step(benchmark::State& state) {
    const int dim = static_cast<int>(state.range(0));
    const Grid g = grid_for(dim);
    const GridField f = bump(g);
    GridField out(g);
    const EllipticOperator op = EllipticOperator::pucci_plus(dim, 1.0, 2.0);
    const kernels::StepTerms terms{.dt = 1e-5, .drift_scale = 0.5, .drift_centered_diffusion = 1.0};
    for (auto _ : state) {
        if constexpr (Parallel) {
            kernels::explicit_step(op, f, terms, out);
        } else {
            kernels::reference::explicit_step(op, f, terms, out);
        }
        benchmark::DoNotOptimize(out.values.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.size()));
}

}  // namespace

BENCHMARK(step<true>)->Name("explicit_step/parallel")->DenseRange(1, 3)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(step<false>)->Name("explicit_step/reference")->DenseRange(1, 3)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
