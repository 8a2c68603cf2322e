#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "gtf/backstepping.hpp"
#include "gtf/errors.hpp"
#include "gtf/extended.hpp"
#include "gtf/simulation.hpp"
#include "helpers.hpp"

using namespace gtf;
namespace th = gtf::testing;

namespace {

double identity_residual(const ExtendedSubsystem& ext, const StageLaw& alpha, double t,
                         std::span<const double> y) {
    std::vector<double> z(y.begin(), y.end() - 1);
    double zk1 = y.back();
    double v = alpha(t, y);
    double p = stage_pressure(ext, t, z, zk1);
    return 2.0 * ext.g_k1(t, z, zk1, v) + p + zk1;
}

}  // namespace

TEST_CASE("j_integral recovers the coefficient of an affine drift") {
    auto ext = th::scalar_stage([](double, double, double v) { return 2.5 * v; });
    // base stage: z empty, so J has no entries; use a k = 1 subsystem instead
    ExtendedSubsystem e2;
    e2.k = 1;
    e2.N_k = 1;
    e2.N_k1 = 2;
    e2.T = 6.0;
    e2.g = [](double, std::span<const double> z, double z2) {
        return std::vector<double>{3.0 * z2 - z[0]};
    };
    e2.g_k1 = [](double, std::span<const double>, double, double v) { return v; };
    e2.phi_top = [](double, std::span<const double>) { return std::vector<double>{1.0}; };
    e2.phi_bot = [](double, std::span<const double>) { return std::vector<double>{0.0, 1.0}; };

    std::vector<double> z{0.4};
    auto J = j_integral(e2, 0.0, z, 1.7);
    REQUIRE(J.size() == 1);
    CHECK(J[0] == doctest::Approx(3.0).epsilon(1e-9));
    (void)ext;
}

TEST_CASE("j_integral on a quadratic drift matches the averaged derivative") {
    ExtendedSubsystem e2;
    e2.k = 1;
    e2.N_k = 1;
    e2.N_k1 = 2;
    e2.T = 6.0;
    e2.g = [](double, std::span<const double>, double z2) {
        return std::vector<double>{z2 * z2};
    };
    e2.g_k1 = [](double, std::span<const double>, double, double v) { return v; };
    e2.phi_top = [](double, std::span<const double>) { return std::vector<double>{0.0}; };
    e2.phi_bot = [](double, std::span<const double>) { return std::vector<double>{0.0, 0.0}; };

    std::vector<double> z{0.0};
    // int_0^1 2 theta z2 dtheta = z2; at z2 = 1 the answer is 1
    auto J = j_integral(e2, 0.0, z, 1.0);
    CHECK(J[0] == doctest::Approx(1.0).epsilon(1e-8));

    // mean-value identity g(t,z,s) - g(t,z,0) = J(t,z,s) s at random points
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    for (int i = 0; i < 50; ++i) {
        double s = unif(rng);
        auto Js = j_integral(e2, 0.0, z, s);
        double lhs = s * s;  // g depends on z2 only
        CHECK(std::abs(lhs - Js[0] * s) <= 1e-8 * (1.0 + std::abs(lhs)));
    }
}

TEST_CASE("virtual control of the chain base stage is -z1") {
    auto ext = base_stage(th::chain2());
    auto alpha = synthesize_virtual_control(ext);
    for (double z1 : {-1.5, -0.2, 0.0, 0.3, 2.0}) {
        std::vector<double> y{z1};
        CHECK(alpha(0.7, y) == doctest::Approx(-z1).epsilon(1e-9));
    }
}

TEST_CASE("virtual control vanishes on the equilibrium ray") {
    auto ext = base_stage(th::example1());
    // the base row is degenerate globally but the identity is still solvable
    // pointwise at y = 0, where every branch gives v = 0
    auto params = SynthesisParams{};
    std::vector<double> zero{0.0};
    double v = solve_for_control(ext, 1.3, std::span<const double>{}, 0.0, params);
    CHECK(std::abs(v) <= 1e-10);
    (void)zero;
}

TEST_CASE("non-affine root: cubic control direction") {
    auto ext = th::scalar_stage([](double, double, double v) { return v * v * v; }, 0.0);
    // identity: 2 v^3 + P = -z1 with P = 0, so v = (-z1/2)^{1/3}
    double v = solve_for_control(ext, 0.0, std::span<const double>{}, -2.0);
    CHECK(v == doctest::Approx(1.0).epsilon(1e-8));
    double v2 = solve_for_control(ext, 0.0, std::span<const double>{}, 0.25);
    CHECK(v2 == doctest::Approx(-0.5).epsilon(1e-8));
}

TEST_CASE("bounded drift exhausts the bracket") {
    auto ext = th::scalar_stage([](double, double, double v) { return std::tanh(v); }, 0.0);
    SynthesisParams p;
    p.bracket_max = 1e3;
    CHECK_THROWS_AS(solve_for_control(ext, 0.0, std::span<const double>{}, 50.0, p), NoBracket);
}

TEST_CASE("check_regularity flags the van der Pol base row") {
    CHECK_THROWS_AS(check_regularity(base_stage(th::example1())), DegenerateControlDirection);
    CHECK_NOTHROW(check_regularity(base_stage(th::chain2())));
}

TEST_CASE("stage identity holds at random points after synthesis") {
    auto ext = base_stage(th::chain2());
    auto alpha = synthesize_virtual_control(ext);
    auto ext2 = extend_with_row(ext, alpha, th::chain2(), 1);
    auto alpha2 = synthesize_virtual_control(ext2);

    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    std::uniform_real_distribution<double> ut(0.0, 6.0);
    double worst1 = 0.0, worst2 = 0.0;
    for (int i = 0; i < 1000; ++i) {
        double t = ut(rng);
        std::vector<double> y1{unif(rng)};
        worst1 = std::max(worst1, std::abs(identity_residual(ext, alpha, t, y1)));
        std::vector<double> y2{unif(rng), unif(rng)};
        worst2 = std::max(worst2, std::abs(identity_residual(ext2, alpha2, t, y2)));
    }
    CHECK(worst1 <= 1e-8);
    CHECK(worst2 <= 1e-6);  // derivative-based terms enter at stage two
}

TEST_CASE("default gamma1 is the sampled square") {
    auto g1 = default_gamma1();
    CHECK(g1(0.0) == 0.0);
    CHECK(g1(1.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(g1(4.0) == doctest::Approx(16.0).epsilon(1e-12));
    CHECK(verify_class(g1, FnClass::Kinf).ok());
    // gain ladder is pointwise nondecreasing
    auto g2 = next_gain(g1);
    for (double s : g1.knots()) CHECK(g2(s) >= g1(s));
}

TEST_CASE("regular synthesis of the two-dimensional chain") {
    auto out = synthesize_regular(th::chain2());
    REQUIRE(out.reports.size() == 2);
    for (const auto& rep : out.reports) {
        CHECK(rep.pass_fraction >= 0.999);
        CHECK(rep.worst_violation <= 1e-6);
    }
    // equilibrium: u(t, 0) = 0 for all phases
    std::vector<double> zero{0.0, 0.0};
    for (int i = 0; i <= 12; ++i)
        CHECK(std::abs(out.law.control(i * 0.5, zero)) <= 1e-9);
    // periodicity of the law
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> x{unif(rng), unif(rng)};
        CHECK(std::abs(out.law.control(0.0, x) - out.law.control(6.0, x)) <= 1e-9);
    }
}

TEST_CASE("regular synthesis of the scalar integrator gives u = -x") {
    auto out = synthesize_regular(th::scalar_integrator());
    std::vector<double> x{1.0};
    CHECK(out.law.control(0.0, x) == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(out.reports[0].pass());
}

TEST_CASE("two-route consistency of the transformed coordinates") {
    auto sys = th::chain2();
    auto out = synthesize_regular(sys);
    const auto& ext2 = out.stages[1];

    std::vector<double> x0{1.2, -0.7};
    double h = 6.0 / 2000;
    auto dist = DisturbanceSignal::zero(2);
    auto trajx = integrate(sys, &out.law, x0, 0.0, 6.0, h, dist);
    auto z0 = out.law.to_z(0.0, x0);
    auto trajz = integrate_stage(ext2, out.law.stages[1], z0, 0.0, 6.0, h, dist);

    REQUIRE(trajx.times.size() == trajz.times.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < trajx.times.size(); ++i) {
        auto zx = out.law.to_z(trajx.times[i], trajx.states[i]);
        for (int c = 0; c < 2; ++c)
            worst = std::max(worst, std::abs(zx[c] - trajz.states[i][c]));
    }
    CHECK(worst <= 1e-5);
}

TEST_CASE("extension with a zero stage law reproduces the raw row") {
    auto sys = th::chain2();
    auto ext = base_stage(sys);
    StageLaw zero_alpha = [](double, std::span<const double>) { return 0.0; };
    auto ext2 = extend_with_row(ext, zero_alpha, sys, 1);
    // z2 = x2, g_2 = f_2 = v, and the top-right disturbance block is zero
    std::vector<double> z{0.4};
    CHECK(ext2.g_k1(0.0, z, 0.9, 1.3) == doctest::Approx(1.3).epsilon(1e-8));
    std::vector<double> y{0.4, 0.9};
    auto phi = ext2.phi_matrix(0.0, y);  // 2 x 2 row-major
    REQUIRE(phi.size() == 4);
    CHECK(phi[1] == 0.0);  // row z never sees the fresh channel
}

TEST_CASE("local feedback certifies a ball for the van der Pol base row") {
    auto ext = base_stage(th::example1());
    auto res = synthesize_local_feedback(ext, default_gamma1());
    CHECK(res.local.radius > 0.0);
    CHECK(res.local.margin >= -1e-6);  // within the grid check's tolerance
    CHECK(res.d_head > 0.0);
    // d_head stays under the head of the value ladder
    CHECK(res.d_head <= (2.0 * res.local.radius) * (2.0 * res.local.radius) / 3.0);
    // nu fixes the origin at every phase
    std::vector<double> zero{0.0};
    for (int i = 0; i < 100; ++i)
        CHECK(std::abs(res.local.nu(i * 0.06, zero)) <= 1e-9);
}
