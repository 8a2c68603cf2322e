// Acceptance gate: end-to-end checks of the synthesis, certification, cover,
// and obstruction stack. Prints one pass/fail line per criterion and exits
// nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gtf/backstepping.hpp"
#include "gtf/certification.hpp"
#include "gtf/cover.hpp"
#include "gtf/obstruction.hpp"
#include "gtf/pipeline.hpp"
#include "gtf/simulation.hpp"
#include "helpers.hpp"

using namespace gtf;
namespace th = gtf::testing;
using clk = std::chrono::steady_clock;

namespace {

int g_failures = 0;

double seconds_since(clk::time_point t0) {
    return std::chrono::duration<double>(clk::now() - t0).count();
}

void criterion(int n, const std::string& what, const std::function<bool(std::string&)>& body) {
    std::string note;
    bool ok = false;
    try {
        ok = body(note);
    } catch (const std::exception& e) {
        note = std::string("exception: ") + e.what();
    }
    if (!ok) ++g_failures;
    std::printf("criterion %2d: %s  [%s]%s%s\n", n, ok ? "PASS" : "FAIL", what.c_str(),
                note.empty() ? "" : " -- ", note.c_str());
    std::fflush(stdout);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------

bool c1_comparison_properties(std::string& note) {
    auto t0 = clk::now();
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> unif(0.05, 1.0);
    auto random_fn = [&] {
        int nk = 3 + static_cast<int>(rng() % 5);
        std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
        double s = 0.0, v = 0.0;
        for (int i = 1; i < nk; ++i) {
            s += unif(rng);
            v += unif(rng);
            pts.emplace_back(s, v);
        }
        return ComparisonFunction::make(pts, FnClass::Kinf, unif(rng));
    };

    for (int trial = 0; trial < 1000; ++trial) {
        auto f = random_fn(), g = random_fn(), h = random_fn();
        if (!verify_class(f, FnClass::Kinf).ok()) {
            note = "randomized function failed its own class check";
            return false;
        }
        double a = unif(rng) * 2.0, b = a + unif(rng);
        if (!(f(a) < f(b))) {
            note = "monotonicity violated";
            return false;
        }
        if (std::abs(f.inverse(f(a)) - a) > 1e-9 * (1.0 + a)) {
            note = "inverse mismatch";
            return false;
        }
        auto left = compose(compose(f, g), h);
        auto right = compose(f, compose(g, h));
        for (double s : h.knots()) {
            if (std::abs(left(s) - right(s)) > 1e-9) {
                note = "associativity residual above 1e-9 at a knot";
                return false;
            }
            if (std::abs(left(s) - f(g(h(s)))) > 1e-9) {
                note = "composition disagrees with pointwise evaluation";
                return false;
            }
        }
    }
    double dt = seconds_since(t0);
    note = "1000 trials in " + std::to_string(dt) + "s";
    return dt < 5.0;
}

bool c2_dissipation_grid(std::string& note) {
    auto t0 = clk::now();
    auto ext = th::scalar_stage([](double, double, double v) { return v; });
    StageLaw law = [](double, std::span<const double> y) { return -y[0]; };
    std::vector<double> sknots;
    for (int i = 0; i < 21; ++i) sknots.push_back(i / 20.0);
    auto gamma = ComparisonFunction::sample([](double s) { return s * s; }, sknots,
                                            FnClass::Kinf, 2.0);
    DissGrid grid{.nt = 101, .ny = 101, .ns = 21, .y_radius = 2.0, .s_max = 1.0};
    auto rep = check_dissipation(ext, law, gamma, grid);
    double dt = seconds_since(t0);
    note = "pass fraction " + std::to_string(rep.pass_fraction) + ", " + std::to_string(dt) + "s";
    return rep.pass_fraction == 1.0 && dt < 10.0;
}

bool c3_chain_recursion(std::string& note) {
    auto sys = th::chain2();
    auto out = synthesize_regular(sys);
    for (const auto& rep : out.reports)
        if (rep.pass_fraction < 0.999) {
            note = "stage dissipation below 0.999";
            return false;
        }

    auto dist = DisturbanceSignal::zero(2);
    double h = sys.T / 2000;
    std::vector<double> x0{1.2, -0.7};
    auto trajx = integrate(sys, &out.law, x0, 0.0, sys.T, h, dist);
    auto z0 = out.law.to_z(0.0, x0);
    auto trajz = integrate_stage(out.stages[1], out.law.stages[1], z0, 0.0, sys.T, h, dist);
    double worst = 0.0;
    for (std::size_t i = 0; i < trajx.times.size(); ++i) {
        auto zx = out.law.to_z(trajx.times[i], trajx.states[i]);
        for (int c = 0; c < 2; ++c)
            worst = std::max(worst, std::abs(zx[c] - trajz.states[i][c]));
    }
    note = "transform consistency " + std::to_string(worst);
    return worst <= 1e-5;
}

bool c4_gain_recursion(std::string& note) {
    auto g1 = default_gamma1();
    auto g = g1;
    for (int n = 2; n <= 5; ++n) {
        g = next_gain(g);
        for (std::size_t i = 0; i < g1.knots().size(); ++i) {
            double s = g1.knots()[i];
            double expect = g1.values()[i];
            for (int j = 1; j < n; ++j) expect += s * s;
            if (g(s) != expect) {
                note = "gamma_" + std::to_string(n) + " misses the closed form at a knot";
                return false;
            }
        }
    }
    note = "gamma_n = gamma_1 + (n-1)s^2 exact at all knots, n <= 5";
    return true;
}

bool c5_example1_pipeline(std::string& note) {
    auto sys = th::example1();
    auto out = synthesize_auto(sys);

    EnsembleSpec zero_spec{.id = "e1-zero",
                           .ball_radius = 2.0,
                           .count = 50,
                           .kind = DisturbanceKind::zero,
                           .amplitude = 0.0,
                           .dwell = 0.375,
                           .seed = 4242,
                           .t0 = 0.0,
                           .horizon = 20.0 * sys.T,
                           .h_sim = sys.T / 2000};
    auto zens = run_ensemble(sys, out.law, zero_spec);
    double worst_final = 0.0;
    for (const auto& tr : zens.trajectories) {
        if (tr.status != Trajectory::Status::completed) {
            note = "zero-disturbance run blew up";
            return false;
        }
        worst_final = std::max(worst_final, th::norm(tr.states.back()));
    }
    if (worst_final > 0.05) {
        note = "worst terminal radius " + std::to_string(worst_final) + " > 0.05";
        return false;
    }

    EnsembleSpec dist_spec = zero_spec;
    dist_spec.id = "e1-dist";
    dist_spec.kind = DisturbanceKind::piecewise_random;
    dist_spec.amplitude = 0.1;
    auto dens = run_ensemble(sys, out.law, dist_spec);
    auto gamma = fit_gamma(dens, 0.2);
    double bound = gamma(0.1) + 1e-9;
    double tail_start = 0.8 * dist_spec.horizon;
    for (const auto& tr : dens.trajectories) {
        if (tr.status != Trajectory::Status::completed) {
            note = "disturbed run blew up";
            return false;
        }
        if (tr.tail_max(tail_start) > bound) {
            note = "tail exceeds the fitted gain at 0.1";
            return false;
        }
    }
    auto ag = check_ag(dens, gamma, 0.2, 1e-9);
    note = "terminal radius " + std::to_string(worst_final) + ", fitted gain(0.1) = " +
           std::to_string(gamma(0.1));
    return ag.pass();
}

bool c6_chain_funnel(std::string& note) {
    auto t0 = clk::now();
    auto reg = synthesize_regular(th::chain2());
    auto gamma1 = default_gamma1();
    auto gamma2 = next_gain(gamma1);
    LadderParams lp;  // q in [-3, 6]
    double r = 0.25;
    auto cover = build_ladder(reg.stages[1], gamma1, gamma2, r, r * r / 12.0, lp,
                              reg.law.stages[1]);
    auto rep = verify_funnel(reg.stages[1], reg.law.stages[1], cover, gamma2, 20, 777,
                             cover.T / 2000, 1e-6);
    double dt = seconds_since(t0);
    int viols = 0;
    for (const auto& pq : rep.per_q) viols += pq.violations;
    note = "max funnel excess " + std::to_string(rep.max_violation) + ", " +
           std::to_string(dt) + "s";
    return viols == 0 && rep.pass() && dt < 120.0;
}

bool c7_iss_verdicts(std::string& note) {
    auto sys = th::scalar_integrator();
    auto out = synthesize_regular(sys);
    EnsembleSpec spec{.id = "iss",
                      .ball_radius = 1.0,
                      .count = 20,
                      .kind = DisturbanceKind::piecewise_random,
                      .amplitude = 0.5,
                      .dwell = 0.375,
                      .seed = 7,
                      .t0 = 0.0,
                      .horizon = 60.0,
                      .h_sim = 0.003};
    auto ens = run_ensemble(sys, out.law, spec);
    auto id = ComparisonFunction::identity();
    auto ugs = check_ugs(ens, id, 1e-3);
    auto ag = check_ag(ens, id, 0.2, 1e-3);
    auto verdict = iss_verdict(ugs, ag);
    if (ugs.violations != 0 || !ag.pass() || !verdict.verdict) {
        note = "stable loop was not certified";
        return false;
    }

    auto unstable = GtfSystem::parse_config("n = 1\nT = 6\nf[1] = x1 + u\nPhi[1] = 1\n");
    FeedbackLaw off;
    off.T = 6.0;
    off.x_star = {0.0};
    off.stages = {[](double, std::span<const double>) { return 0.0; }};
    EnsembleSpec bad_spec = spec;
    bad_spec.id = "iss-off";
    bad_spec.kind = DisturbanceKind::zero;
    bad_spec.amplitude = 0.0;
    bad_spec.horizon = 40.0;
    auto bens = run_ensemble(unstable, off, bad_spec);
    auto bugs = check_ugs(bens, id, 1e-3);
    auto bag = check_ag(bens, id, 0.2, 1e-3);
    auto bverdict = iss_verdict(bugs, bag);
    note = "stable verdict true, zeroed-feedback verdict " +
           std::string(bverdict.verdict ? "true" : "false");
    return !bverdict.verdict;
}

bool c8_obstruction(std::string& note) {
    auto ident = [](double x1, double x2) { return std::array<double, 2>{x1, x2}; };
    auto constant = [](double, double) { return std::array<double, 2>{0.0, 1.0}; };
    auto antipodal = [](double x1, double x2) { return std::array<double, 2>{-x1, -x2}; };
    if (winding_number(ident) != 1 || winding_number(constant) != 0 ||
        winding_number(antipodal) != 1) {
        note = "reference winding numbers wrong";
        return false;
    }
    for (int m : {720, 1440, 2880}) {
        if (winding_number(ident, m) != 1 || winding_number(constant, m) != 0 ||
            winding_number(antipodal, m) != 1) {
            note = "winding changed under sample doubling";
            return false;
        }
    }
    auto rep = static_obstruction_check([](double, double) { return 1.0; });
    note = std::string("static check state: ") + to_string(rep.state);
    return rep.state == ObstructionState::obstructed;
}

bool c9_integrator_order(std::string& note) {
    OdeRhs decay = [](double, std::span<const double> x) { return std::vector<double>{-x[0]}; };
    std::vector<double> x0{1.0};
    double exact = std::exp(-1.0);
    double ec = std::abs(integrate_ode(decay, x0, 0.0, 1.0, 0.1).states.back()[0] - exact);
    double ef = std::abs(integrate_ode(decay, x0, 0.0, 1.0, 0.05).states.back()[0] - exact);
    double ratio = ec / ef;
    note = "halving ratio " + std::to_string(ratio);
    return ratio >= 12.0 && ratio <= 20.0;
}

bool c10_determinism(std::string& note) {
    namespace fs = std::filesystem;
    auto sys = th::scalar_integrator();
    auto out = synthesize_regular(sys);
    EnsembleSpec spec{.id = "det",
                      .ball_radius = 1.0,
                      .count = 10,
                      .kind = DisturbanceKind::piecewise_random,
                      .amplitude = 0.3,
                      .dwell = 0.375,
                      .seed = 42,
                      .t0 = 0.0,
                      .horizon = 12.0,
                      .h_sim = 0.003};
    auto dir = fs::temp_directory_path() / "gtf_acceptance_det";
    fs::create_directories(dir);
    std::string j1, j2;
    std::vector<std::string> csv1, csv2;
    for (int round = 0; round < 2; ++round) {
        auto ens = run_ensemble(sys, out.law, spec);
        auto& csvs = round == 0 ? csv1 : csv2;
        for (const auto& tr : ens.trajectories) {
            auto p = (dir / ("r" + std::to_string(round) + "_" + std::to_string(tr.index) +
                             ".csv"))
                         .string();
            write_csv(tr, p);
            csvs.push_back(slurp(p));
        }
        (round == 0 ? j1 : j2) = ensemble_index_json(ens).dump(2);
    }
    fs::remove_all(dir);
    if (j1 != j2) {
        note = "ensemble index JSON differs between runs";
        return false;
    }
    if (csv1 != csv2) {
        note = "trajectory CSV bytes differ between runs";
        return false;
    }
    note = "CSV and JSON byte-identical across reruns";
    return true;
}

}  // namespace

int main() {
    criterion(1, "comparison-function property suite (1000 randomized trials, < 5 s)",
              c1_comparison_properties);
    criterion(2, "scalar decay dissipation on the 101x101x21 grid (< 10 s)",
              c2_dissipation_grid);
    criterion(3, "two-stage chain: per-stage dissipation and transform consistency",
              c3_chain_recursion);
    criterion(4, "gain recursion closed form at the knots", c4_gain_recursion);
    criterion(5, "van der Pol plant: full pipeline, terminal ball and asymptotic gain",
              c5_example1_pipeline);
    criterion(6, "chain funnel verification, 20 runs per ring (< 2 min)", c6_chain_funnel);
    criterion(7, "ISS verdicts: contractive loop true, zeroed feedback false",
              c7_iss_verdicts);
    criterion(8, "winding numbers and the static obstruction check", c8_obstruction);
    criterion(9, "integrator order via step halving", c9_integrator_order);
    criterion(10, "byte-identical outputs under a fixed seed", c10_determinism);

    std::printf("%d of 10 criteria passed\n", 10 - g_failures);
    return g_failures == 0 ? 0 : 1;
}
