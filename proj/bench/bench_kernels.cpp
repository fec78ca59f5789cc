// Parallel kernels against their serial references.
// Thread count follows OMP_NUM_THREADS.

#include "memctl/control.hpp"

#include <benchmark/benchmark.h>

#include <map>

using namespace memctl;

namespace {

const CoefficientFunctions& coeffs() {
    static const CoefficientFunctions c = CoefficientFunctions::heat_default();
    return c;
}

const ResolventTable& shared_table(int modes) {
    static std::map<int, ResolventTable> cache;
    auto it = cache.find(modes);
    if (it == cache.end())
        it = cache.emplace(modes, build_resolvent_table(TimeGrid::make(1.0, 200), BasisSpec::with_modes(modes), coeffs()))
                 .first;
    return it->second;
}

void BM_ResolventParallel(benchmark::State& state) {
    const int modes = static_cast<int>(state.range(0));
    for (auto _ : state)
        benchmark::DoNotOptimize(build_resolvent_table(TimeGrid::make(1.0, 200), BasisSpec::with_modes(modes), coeffs()));
}

void BM_ResolventSerial(benchmark::State& state) {
    const int modes = static_cast<int>(state.range(0));
    for (auto _ : state)
        benchmark::DoNotOptimize(
            serial::build_resolvent_table(TimeGrid::make(1.0, 200), BasisSpec::with_modes(modes), coeffs()));
}

void BM_GramianParallel(benchmark::State& state) {
    const int modes = static_cast<int>(state.range(0));
    const auto& t = shared_table(modes);
    const Eigen::MatrixXd b = control_matrix(0.7853981633974483, 2.356194490192345, modes);
    for (auto _ : state) benchmark::DoNotOptimize(assemble_gramian(t, b));
}

void BM_GramianSerial(benchmark::State& state) {
    const int modes = static_cast<int>(state.range(0));
    const auto& t = shared_table(modes);
    const Eigen::MatrixXd b = control_matrix(0.7853981633974483, 2.356194490192345, modes);
    for (auto _ : state) benchmark::DoNotOptimize(serial::assemble_gramian(t, b));
}

std::vector<ModeVector> forcing(int modes) {
    std::vector<ModeVector> f;
    for (int j = 0; j <= 200; ++j) f.push_back(ModeVector::Constant(modes, 0.01 * j));
    return f;
}

void BM_AffineParallel(benchmark::State& state) {
    const int modes = static_cast<int>(state.range(0));
    const auto& t = shared_table(modes);
    const auto f = forcing(modes);
    for (auto _ : state) benchmark::DoNotOptimize(affine_mild_solve(t, ModeVector::Ones(modes), f));
}

void BM_AffineSerial(benchmark::State& state) {
    const int modes = static_cast<int>(state.range(0));
    const auto& t = shared_table(modes);
    const auto f = forcing(modes);
    for (auto _ : state) benchmark::DoNotOptimize(serial::affine_mild_solve(t, ModeVector::Ones(modes), f));
}

}  // namespace

BENCHMARK(BM_ResolventParallel)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ResolventSerial)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GramianParallel)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GramianSerial)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AffineParallel)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AffineSerial)->Arg(32)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
