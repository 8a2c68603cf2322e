#include <doctest.h>

#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "gtf/errors.hpp"
#include "gtf/expr.hpp"
#include "gtf/system.hpp"
#include "helpers.hpp"

using namespace gtf;
namespace th = gtf::testing;

TEST_CASE("parser handles the van der Pol row") {
    auto e = parse_dynamics("x2^3 - (1 - x1^2)*x2");
    std::vector<double> x{0.5, 2.0};
    EvalContext ctx{.state = x};
    double expect = 8.0 - (1.0 - 0.25) * 2.0;
    CHECK(e->eval(ctx) == doctest::Approx(expect).epsilon(1e-15));
    CHECK(e->max_state_index() == 2);
    CHECK_FALSE(e->references_control());

    // canonical print parses back to the same values
    auto e2 = parse_dynamics(e->print());
    CHECK(e2->eval(ctx) == e->eval(ctx));
}

TEST_CASE("parser handles constants, control, and periodic atoms") {
    EvalContext ctx{.state = {}, .control = 3.0, .sin_t = 0.6, .cos_t = 0.8};
    CHECK(parse_dynamics("0")->eval(ctx) == 0.0);
    CHECK(parse_dynamics("u")->eval(ctx) == 3.0);
    CHECK(parse_dynamics("sinT * cosT")->eval(ctx) == doctest::Approx(0.48));
    CHECK(parse_dynamics("tanh(u)")->eval(ctx) == doctest::Approx(std::tanh(3.0)));
    CHECK(parse_dynamics("-u^2")->eval(ctx) == doctest::Approx(-9.0));
}

TEST_CASE("syntax errors carry the byte offset") {
    try {
        parse_dynamics("x1 + * x2");
        FAIL("expected SyntaxError");
    } catch (const SyntaxError& e) {
        CHECK(e.offset == 5);
    }
    CHECK_THROWS_AS(parse_dynamics("x1 +"), SyntaxError);
    CHECK_THROWS_AS(parse_dynamics("foo(x1)"), UnknownSymbol);
    CHECK_THROWS_AS(parse_dynamics("t * x1"), UnknownSymbol);  // no raw time symbol
}

TEST_CASE("rhs of the van der Pol plant") {
    auto sys = th::example1();
    std::vector<double> x{0.0, 1.0};
    std::vector<double> delta{0.0, 0.0};
    auto dx = sys.rhs(0.0, x, 0.0, delta);
    CHECK(dx[0] == doctest::Approx(0.0));  // 1 - (1 - 0)*1
    CHECK(dx[1] == doctest::Approx(0.0));  // u = 0
}

TEST_CASE("rhs of the scalar plant with disturbance") {
    auto sys = GtfSystem::parse_config("n = 1\nT = 6\nf[1] = -x1 + u\nPhi[1] = 1\n");
    std::vector<double> x{2.0};
    std::vector<double> delta{0.5};
    auto dx = sys.rhs(0.0, x, 0.0, delta);
    CHECK(dx[0] == doctest::Approx(-1.5));
}

TEST_CASE("triangularity is enforced at assembly") {
    CHECK_THROWS_AS(
        GtfSystem::parse_config("n = 2\nT = 6\nf[1] = x3\nPhi[1] = 1\nf[2] = u\nPhi[2] = 1\n"),
        TriangularityViolation);
    // Phi_i may depend on x_1..x_i only
    CHECK_THROWS_AS(
        GtfSystem::parse_config("n = 2\nT = 6\nf[1] = x2\nPhi[1] = x2\nf[2] = u\nPhi[2] = 1\n"),
        TriangularityViolation);
}

TEST_CASE("recentred plant has the origin as equilibrium") {
    auto sys = GtfSystem::parse_config(
        "n = 1\nT = 6\nf[1] = -x1 + u + 1\nPhi[1] = 1\nx_star = 0\nu_star = -1\n");
    auto rec = sys.recentred();
    std::vector<double> zero{0.0};
    std::vector<double> dz{0.0};
    auto dx = rec.rhs(0.3, zero, 0.0, dz);
    CHECK(std::abs(dx[0]) <= 1e-12);
}

TEST_CASE("check_assumptions accepts the worked examples") {
    auto rep1 = check_assumptions(th::example1());
    CHECK(rep1.ok());
    CHECK(rep1.periodicity_residual <= 1e-9);
    CHECK(rep1.a2_all());
    CHECK(rep1.a3_all());

    CHECK(check_assumptions(th::chain2()).ok());
    CHECK(check_assumptions(th::scalar_integrator()).ok());
}

TEST_CASE("check_assumptions rejects a non-surjective row") {
    auto sys = GtfSystem::parse_config(
        "n = 2\nT = 6\nf[1] = x2^2\nPhi[1] = 1\nf[2] = u\nPhi[2] = 1\n");
    auto rep = check_assumptions(sys);
    CHECK_FALSE(rep.a2_ok[0]);
    CHECK_FALSE(rep.ok());
}

TEST_CASE("disturbance generators") {
    auto z = make_disturbance(DisturbanceKind::zero, 0.0, 0.1, 1, 10.0, 2);
    CHECK(z.linf == 0.0);
    CHECK(z.at(5.0)[0] == 0.0);

    auto c = make_disturbance(DisturbanceKind::constant, 0.3, 0.1, 1, 10.0, 1);
    CHECK(c.linf == doctest::Approx(0.3));
    CHECK(c.at(0.0)[0] == doctest::Approx(0.3));
    CHECK(c.at(9.9)[0] == doctest::Approx(0.3));

    auto p1 = make_disturbance(DisturbanceKind::piecewise_random, 0.5, 0.25, 7, 10.0, 2);
    auto p2 = make_disturbance(DisturbanceKind::piecewise_random, 0.5, 0.25, 7, 10.0, 2);
    REQUIRE(p1.values.size() == p2.values.size());
    for (std::size_t i = 0; i < p1.values.size(); ++i) {
        CHECK(p1.values[i] == p2.values[i]);  // same seed, same signal
        double norm2 = 0.0;
        for (double v : p1.values[i]) norm2 += v * v;
        CHECK(norm2 <= 0.25 + 1e-12);  // stays in the amplitude ball
    }
    CHECK(p1.linf <= 0.5 + 1e-12);

    CHECK_THROWS_AS(make_disturbance(DisturbanceKind::piecewise_random, 0.5, 0.0, 7, 10.0, 1),
                    BadParameter);
}

TEST_CASE("disturbance signal extends its last value") {
    auto c = DisturbanceSignal::constant({0.7});
    CHECK(c.at(1e9)[0] == doctest::Approx(0.7));
}

TEST_CASE("config parsing defaults and errors") {
    auto sys = GtfSystem::parse_config("n = 1\nT = 2\nf[1] = u\n");  // Phi defaults to 0
    CHECK(sys.eval_phi(0, 0.0, std::vector<double>{1.0}) == 0.0);
    CHECK(sys.T == doctest::Approx(2.0));
    CHECK_THROWS_AS(GtfSystem::parse_config("n = 1\nT = 2\n"), BadParameter);  // missing f[1]
    CHECK_THROWS_AS(GtfSystem::parse_config("n = 1\nT = -1\nf[1] = u\n"), BadParameter);
}

TEST_CASE("system json serializes the printed dynamics") {
    auto j = th::example1().to_json();
    CHECK(j["n"] == 2);
    CHECK(j["T"] == doctest::Approx(6.0));
    CHECK(j["f"].size() == 2);
}
