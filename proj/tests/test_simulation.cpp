#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gtf/backstepping.hpp"
#include "gtf/simulation.hpp"
#include "helpers.hpp"

using namespace gtf;
namespace th = gtf::testing;

namespace {

OdeRhs decay_rhs() {
    return [](double, std::span<const double> x) { return std::vector<double>{-x[0]}; };
}

}  // namespace

TEST_CASE("RK4 reproduces the exponential") {
    std::vector<double> x0{1.0};
    auto traj = integrate_ode(decay_rhs(), x0, 0.0, 1.0, 1e-3);
    CHECK(traj.status == Trajectory::Status::completed);
    CHECK(traj.states.back()[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-6));
    CHECK(traj.final_time() == doctest::Approx(1.0));
}

TEST_CASE("constant dynamics stay put") {
    OdeRhs zero = [](double, std::span<const double>) { return std::vector<double>{0.0}; };
    std::vector<double> x0{0.7};
    auto traj = integrate_ode(zero, x0, 0.0, 2.0, 0.01);
    for (const auto& s : traj.states) CHECK(s[0] == doctest::Approx(0.7));
}

TEST_CASE("finite-time blowup is reported, not propagated") {
    OdeRhs quad = [](double, std::span<const double> x) {
        return std::vector<double>{x[0] * x[0]};
    };
    std::vector<double> x0{10.0};  // escapes at t = 0.1
    auto traj = integrate_ode(quad, x0, 0.0, 1.0, 1e-4);
    CHECK(traj.status == Trajectory::Status::blowup);
    CHECK(traj.final_time() < 0.5);
}

TEST_CASE("step halving shows fourth order") {
    std::vector<double> x0{1.0};
    double exact = std::exp(-1.0);
    auto coarse = integrate_ode(decay_rhs(), x0, 0.0, 1.0, 0.1);
    auto fine = integrate_ode(decay_rhs(), x0, 0.0, 1.0, 0.05);
    double ec = std::abs(coarse.states.back()[0] - exact);
    double ef = std::abs(fine.states.back()[0] - exact);
    double ratio = ec / ef;
    CHECK(ratio >= 12.0);
    CHECK(ratio <= 20.0);
}

TEST_CASE("autonomous dynamics are t0-invariant") {
    std::vector<double> x0{1.0};
    auto a = integrate_ode(decay_rhs(), x0, 0.0, 1.0, 1e-3);
    auto b = integrate_ode(decay_rhs(), x0, 17.0, 1.0, 1e-3);
    CHECK(a.states.back()[0] == b.states.back()[0]);
}

TEST_CASE("closed-loop scalar trajectory obeys the comparison bound") {
    auto sys = th::scalar_integrator();
    auto out = synthesize_regular(sys);  // u = -x
    auto dist = make_disturbance(DisturbanceKind::piecewise_random, 0.5, 0.375, 11, 30.0, 1);
    std::vector<double> x0{1.0};
    auto traj = integrate(sys, &out.law, x0, 0.0, 30.0, 0.003, dist);
    double bound = std::max(1.0, dist.linf);
    for (const auto& s : traj.states) CHECK(std::abs(s[0]) <= bound + 1e-3);
}

TEST_CASE("open loop holds u at u_star") {
    auto sys = th::scalar_integrator();  // dx = u + delta, u* = 0
    auto dist = DisturbanceSignal::constant({0.25});
    std::vector<double> x0{0.0};
    auto traj = integrate(sys, nullptr, x0, 0.0, 4.0, 1e-3, dist);
    CHECK(traj.states.back()[0] == doctest::Approx(1.0).epsilon(1e-9));
    for (double u : traj.controls) CHECK(u == 0.0);  // held at u_star
}

TEST_CASE("ensembles are deterministic and worker-count independent") {
    auto sys = th::scalar_integrator();
    auto out = synthesize_regular(sys);
    EnsembleSpec spec{.id = "det",
                      .ball_radius = 1.0,
                      .count = 8,
                      .kind = DisturbanceKind::piecewise_random,
                      .amplitude = 0.3,
                      .dwell = 0.375,
                      .seed = 42,
                      .t0 = 0.0,
                      .horizon = 6.0,
                      .h_sim = 0.01};
    auto a = run_ensemble(sys, out.law, spec);
    auto b = run_ensemble(sys, out.law, spec);
    REQUIRE(a.trajectories.size() == 8);
    for (int i = 0; i < 8; ++i) {
        CHECK(a.trajectories[i].x0_norm == b.trajectories[i].x0_norm);
        CHECK(a.trajectories[i].states == b.trajectories[i].states);
    }
    CHECK(ensemble_index_json(a).dump(2) == ensemble_index_json(b).dump(2));

    EnsembleSpec empty = spec;
    empty.count = 0;
    CHECK(run_ensemble(sys, out.law, empty).trajectories.empty());
}

TEST_CASE("sample_ball respects the radius and the seed") {
    for (std::uint64_t s = 0; s < 50; ++s) {
        auto p = sample_ball(3, 2.0, s);
        REQUIRE(p.size() == 3);
        CHECK(th::norm(p) <= 2.0);
        CHECK(p == sample_ball(3, 2.0, s));
    }
}

TEST_CASE("csv output is byte-stable") {
    std::vector<double> x0{1.0};
    auto traj = integrate_ode(decay_rhs(), x0, 0.0, 0.1, 0.01);
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "gtf_csv_test";
    fs::create_directories(dir);
    auto p1 = (dir / "a.csv").string(), p2 = (dir / "b.csv").string();
    write_csv(traj, p1);
    write_csv(traj, p2);
    auto slurp = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    auto s1 = slurp(p1);
    CHECK(s1 == slurp(p2));
    CHECK(s1.rfind("t,x1", 0) == 0);
    fs::remove_all(dir);
}
