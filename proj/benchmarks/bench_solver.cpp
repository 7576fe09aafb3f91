#include <benchmark/benchmark.h>

#include <fstream>
#include <sstream>

#include "triflow/feasibility.hpp"
#include "triflow/ingest.hpp"
#include "triflow/residuals.hpp"
#include "triflow/sdpexport.hpp"
#include "triflow/solver.hpp"

using namespace triflow;

namespace {

Network load(const std::string& name) {
    std::ifstream in(std::string(TRIFLOW_FIXTURE_DIR) + "/" + name, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    ParseResult r = parse_native(os.str());
    return std::move(*r.network);
}

void bm_solve_newton(benchmark::State& state, const char* name) {
    const Network net = load(name);
    for (auto _ : state) benchmark::DoNotOptimize(solve_newton(net));
}
BENCHMARK_CAPTURE(bm_solve_newton, case2_bal, "case2_bal.net");
BENCHMARK_CAPTURE(bm_solve_newton, case3_unbal, "case3_unbal.net");
BENCHMARK_CAPTURE(bm_solve_newton, case4_mesh, "case4_mesh.net");

void bm_solve_sweep(benchmark::State& state, const char* name) {
    const Network net = load(name);
    for (auto _ : state) benchmark::DoNotOptimize(solve_sweep(net));
}
BENCHMARK_CAPTURE(bm_solve_sweep, case3_unbal, "case3_unbal.net");

void bm_cross_validate(benchmark::State& state) {
    const Network net = load("case3_unbal.net");
    const SolveResult sol = solve_newton(net);
    for (auto _ : state) benchmark::DoNotOptimize(cross_validate(net, sol.state));
}
BENCHMARK(bm_cross_validate);

void bm_lift(benchmark::State& state) {
    const Network net = load("case3_unbal.net");
    const SolveResult sol = solve_newton(net);
    for (auto _ : state) benchmark::DoNotOptimize(lift(net, sol.state));
}
BENCHMARK(bm_lift);

void bm_residual_bfm_lifted(benchmark::State& state) {
    const Network net = to_per_unit(load("case3_unbal.net"));
    const SolveResult sol = solve_newton(net);
    const LiftedState lifted = lift(net, sol.state);
    for (auto _ : state) benchmark::DoNotOptimize(residual_bfm_lifted(net, lifted));
}
BENCHMARK(bm_residual_bfm_lifted);

void bm_build_bfm_sdp(benchmark::State& state) {
    const Network net = load("case3_unbal.net");
    for (auto _ : state)
        benchmark::DoNotOptimize(build_bfm_sdp(net, SdpObjective::min_total_injection));
}
BENCHMARK(bm_build_bfm_sdp);

void bm_write_sdpa(benchmark::State& state) {
    const Network net = load("case3_unbal.net");
    const ConicProblem p = build_bfm_sdp(net, SdpObjective::min_total_injection);
    for (auto _ : state) benchmark::DoNotOptimize(write_sdpa(p));
}
BENCHMARK(bm_write_sdpa);

void bm_parse_native(benchmark::State& state) {
    std::ifstream in(std::string(TRIFLOW_FIXTURE_DIR) + "/case3_unbal.net", std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    const std::string text = os.str();
    for (auto _ : state) benchmark::DoNotOptimize(parse_native(text));
}
BENCHMARK(bm_parse_native);

}  // namespace
