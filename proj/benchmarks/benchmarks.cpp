#include <benchmark/benchmark.h>

#include <array>
#include <cmath>
#include <vector>

#include "gtf/backstepping.hpp"
#include "gtf/certification.hpp"
#include "gtf/expr.hpp"
#include "gtf/obstruction.hpp"
#include "gtf/simulation.hpp"
#include "gtf/system.hpp"

using namespace gtf;

static void BM_ExprEval(benchmark::State& state) {
    auto e = parse_dynamics("x2^3 - (1 - x1^2)*x2 + sinT*x1");
    std::vector<double> x{0.4, -1.3};
    EvalContext ctx{.state = x, .control = 0.0, .sin_t = 0.6, .cos_t = 0.8};
    for (auto _ : state) benchmark::DoNotOptimize(e->eval(ctx));
}
BENCHMARK(BM_ExprEval);

static void BM_Rk4Step(benchmark::State& state) {
    OdeRhs rhs = [](double, std::span<const double> x) {
        return std::vector<double>{x[1], -x[0] - 0.1 * x[1]};
    };
    std::vector<double> x0{1.0, 0.0};
    for (auto _ : state)
        benchmark::DoNotOptimize(integrate_ode(rhs, x0, 0.0, 0.01, 0.01).states.back()[0]);
}
BENCHMARK(BM_Rk4Step);

static void BM_ComparisonEval(benchmark::State& state) {
    auto g = default_gamma1();
    double s = 0.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(g(s));
        s = s < 4.0 ? s + 1e-3 : 0.0;
    }
}
BENCHMARK(BM_ComparisonEval);

static void BM_Winding(benchmark::State& state) {
    auto ident = [](double x1, double x2) { return std::array<double, 2>{x1, x2}; };
    for (auto _ : state) benchmark::DoNotOptimize(winding_number(ident, 720));
}
BENCHMARK(BM_Winding);

static void BM_DissipationGrid(benchmark::State& state) {
    ExtendedSubsystem ext;
    ext.k = 0;
    ext.N_k = 0;
    ext.N_k1 = 1;
    ext.T = 6.0;
    ext.g = [](double, std::span<const double>, double) { return std::vector<double>{}; };
    ext.g_k1 = [](double, std::span<const double>, double, double v) { return v; };
    ext.phi_top = [](double, std::span<const double>) { return std::vector<double>{}; };
    ext.phi_bot = [](double, std::span<const double>) { return std::vector<double>{1.0}; };
    StageLaw law = [](double, std::span<const double> y) { return -y[0]; };
    auto gamma = default_gamma1();
    DissGrid grid{.nt = 17, .ny = 33, .ns = 9, .y_radius = 2.0, .s_max = 1.0};
    for (auto _ : state)
        benchmark::DoNotOptimize(check_dissipation(ext, law, gamma, grid).pass_fraction);
}
BENCHMARK(BM_DissipationGrid);

BENCHMARK_MAIN();
