// gtfctl: synthesize, simulate, certify and obstruction-check GTF systems
// from a key=value run config. Exit codes: 0 pass, 1 usage/runtime error,
// 2 property failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gtf/certification.hpp"
#include "gtf/cover.hpp"
#include "gtf/errors.hpp"
#include "gtf/obstruction.hpp"
#include "gtf/pipeline.hpp"
#include "gtf/simulation.hpp"
#include "gtf/system.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Sectioned key=value config; keys are stored as "section.key" ('' section
/// for keys before any header). '#' starts a comment.
struct RunConfig {
    std::map<std::string, std::string> kv;
    fs::path dir;

    static RunConfig load(const fs::path& path) {
        std::ifstream in(path);
        if (!in) throw gtf::BadParameter("cannot open config file " + path.string());
        RunConfig cfg;
        cfg.dir = path.parent_path();
        std::string line, section;
        while (std::getline(in, line)) {
            if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            auto trim = [](std::string s) {
                std::size_t a = s.find_first_not_of(" \t\r");
                std::size_t b = s.find_last_not_of(" \t\r");
                return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
            };
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[' && line.back() == ']') {
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            auto eq = line.find('=');
            if (eq == std::string::npos)
                throw gtf::BadParameter("config line without '=': " + line);
            std::string key = trim(line.substr(0, eq));
            std::string val = trim(line.substr(eq + 1));
            cfg.kv[section.empty() ? key : section + "." + key] = val;
        }
        return cfg;
    }

    bool has(const std::string& key) const { return kv.count(key) > 0; }
    std::string str(const std::string& key, const std::string& dflt = "") const {
        auto it = kv.find(key);
        return it == kv.end() ? dflt : it->second;
    }
    double num(const std::string& key, double dflt) const {
        auto it = kv.find(key);
        if (it == kv.end()) return dflt;
        try {
            return std::stod(it->second);
        } catch (const std::exception&) {
            throw gtf::BadParameter("config key " + key + " is not a number: " + it->second);
        }
    }
    int integer(const std::string& key, int dflt) const {
        return static_cast<int>(num(key, dflt));
    }
    bool flag(const std::string& key, bool dflt) const {
        auto it = kv.find(key);
        if (it == kv.end()) return dflt;
        return it->second == "true" || it->second == "1" || it->second == "yes";
    }
    std::vector<double> numbers(const std::string& key) const {
        std::vector<double> out;
        std::istringstream is(str(key));
        double v;
        while (is >> v) out.push_back(v);
        return out;
    }
};

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    bool force = false;
};

std::uint64_t run_seed(const RunConfig& cfg, const CommonOpts& opts) {
    if (opts.seed) return *opts.seed;
    return static_cast<std::uint64_t>(cfg.num("seed", 42));
}

gtf::GtfSystem load_system(const RunConfig& cfg) {
    std::string file = cfg.str("system.file");
    if (file.empty()) throw gtf::BadParameter("config is missing system.file");
    fs::path p(file);
    if (p.is_relative()) p = cfg.dir / p;
    if (!fs::exists(p)) throw gtf::BadParameter("system file not found: " + p.string());
    return gtf::GtfSystem::load(p.string());
}

gtf::AutoParams synth_params(const RunConfig& cfg, std::uint64_t seed) {
    gtf::AutoParams p;
    p.synth.box_radius = cfg.num("synthesize.box_radius", p.synth.box_radius);
    p.synth.v_range = cfg.num("synthesize.v_range", p.synth.v_range);
    p.synth.deriv_floor = cfg.num("synthesize.deriv_floor", p.synth.deriv_floor);
    p.synth.diss.nt = cfg.integer("synthesize.nt", p.synth.diss.nt);
    p.synth.diss.ny = cfg.integer("synthesize.ny", p.synth.diss.ny);
    p.synth.diss.ns = cfg.integer("synthesize.ns", p.synth.diss.ns);
    p.synth.diss.y_radius = cfg.num("synthesize.y_radius", p.synth.diss.y_radius);
    p.synth.diss.s_max = cfg.num("synthesize.s_max", p.synth.diss.s_max);
    p.synth.diss.tol = cfg.num("synthesize.tol", p.synth.diss.tol);
    p.local.r_init = cfg.num("synthesize.r_init", p.local.r_init);
    p.ladder.q_lo = cfg.integer("synthesize.q_lo", p.ladder.q_lo);
    p.ladder.q_hi = cfg.integer("synthesize.q_hi", p.ladder.q_hi);
    p.ladder.q0 = cfg.integer("synthesize.q0", p.ladder.q0);
    p.ladder.seed = seed;
    p.cells.max_split_depth = cfg.integer("synthesize.max_split_depth", p.cells.max_split_depth);
    p.cells.tol_P = cfg.num("synthesize.tol_P", p.cells.tol_P);
    return p;
}

void write_json(const fs::path& dir, const std::string& name, const json& j) {
    fs::create_directories(dir);
    std::ofstream out(dir / name, std::ios::binary);
    out << j.dump(2) << "\n";
}

gtf::EnsembleSpec ensemble_spec(const RunConfig& cfg, const gtf::GtfSystem& sys,
                                std::uint64_t seed, const std::string& section) {
    gtf::EnsembleSpec spec;
    spec.id = cfg.str(section + ".id", section);
    spec.count = cfg.integer(section + ".count", 10);
    spec.ball_radius = cfg.num(section + ".ball_radius", 1.0);
    spec.horizon = cfg.num(section + ".horizon", 10.0 * sys.T);
    spec.h_sim = cfg.num(section + ".h_sim", sys.T / 2000.0);
    spec.t0 = cfg.num(section + ".t0", 0.0);
    spec.amplitude = cfg.num(section + ".amplitude", 0.0);
    spec.dwell = cfg.num(section + ".dwell", sys.T / 16.0);
    spec.seed = seed;
    std::string kind = cfg.str(section + ".disturbance", "zero");
    if (kind == "zero")
        spec.kind = gtf::DisturbanceKind::zero;
    else if (kind == "constant")
        spec.kind = gtf::DisturbanceKind::constant;
    else if (kind == "piecewise_random")
        spec.kind = gtf::DisturbanceKind::piecewise_random;
    else if (kind == "sinusoid_held")
        spec.kind = gtf::DisturbanceKind::sinusoid_held;
    else
        throw gtf::BadParameter("unknown disturbance kind: " + kind);
    return spec;
}

gtf::AutoSynthesis synthesize_checked(const RunConfig& cfg, const gtf::GtfSystem& sys,
                                      const CommonOpts& opts) {
    if (!opts.force) {
        gtf::AssumptionReport rep = gtf::check_assumptions(sys);
        if (!rep.ok())
            throw gtf::BadParameter(
                "system fails the assumption checks (rerun with --force to override)");
    }
    return gtf::synthesize_auto(sys, synth_params(cfg, run_seed(cfg, opts)));
}

int cmd_synthesize(const CommonOpts& opts) {
    RunConfig cfg = RunConfig::load(opts.config_path);
    gtf::GtfSystem sys = load_system(cfg);
    gtf::AutoSynthesis result = synthesize_checked(cfg, sys, opts);

    fs::path dir(opts.out_dir);
    json feedback = result.law.to_json();
    feedback["gamma_n"] = result.gamma_n.to_json();
    feedback["stage_regular"] = result.stage_regular;
    write_json(dir, "feedback.json", feedback);

    json covers = json::array();
    for (const auto& sc : result.covers) {
        json cells = json::array();
        for (const auto& c : sc.cells) cells.push_back(c.to_json());
        covers.push_back({{"stage", sc.stage},
                          {"local_radius", sc.local.radius},
                          {"local_margin", sc.local.margin},
                          {"ladder", sc.cover.to_json()},
                          {"cells", cells}});
    }
    write_json(dir, "cover.json", covers);

    bool all_pass = true;
    json reports = json::array();
    for (const auto& r : result.reports) {
        reports.push_back(r.to_json());
        all_pass = all_pass && r.pass();
    }
    write_json(dir, "reports.json", reports);

    std::cout << "synthesize: " << result.law.n() << " stages, " << result.covers.size()
              << " cover stage(s), dissipation " << (all_pass ? "pass" : "FAIL") << "\n";
    return all_pass ? 0 : 2;
}

int cmd_simulate(const CommonOpts& opts) {
    RunConfig cfg = RunConfig::load(opts.config_path);
    gtf::GtfSystem sys = load_system(cfg);
    std::uint64_t seed = run_seed(cfg, opts);
    fs::path dir(opts.out_dir);
    fs::create_directories(dir);

    bool closed = cfg.flag("simulate.closed_loop", true);
    std::optional<gtf::AutoSynthesis> synth;
    if (closed) synth = synthesize_checked(cfg, sys, opts);

    if (cfg.has("simulate.x0")) {
        std::vector<double> x0 = cfg.numbers("simulate.x0");
        if (static_cast<int>(x0.size()) != sys.n)
            throw gtf::DimensionMismatch("simulate.x0 has the wrong dimension");
        double horizon = cfg.num("simulate.horizon", 10.0 * sys.T);
        double h_sim = cfg.num("simulate.h_sim", sys.T / 2000.0);
        gtf::EnsembleSpec spec = ensemble_spec(cfg, sys, seed, "simulate");
        gtf::DisturbanceSignal dist = gtf::make_disturbance(
            spec.kind, spec.amplitude, spec.dwell, seed, spec.t0 + horizon,
            sys.total_dist_dim());
        gtf::Trajectory traj =
            gtf::integrate(sys, synth ? &synth->law : nullptr, x0, spec.t0, horizon, h_sim, dist);
        gtf::write_csv(traj, (dir / "traj_000.csv").string());
        json index = {{"count", 1},
                      {"seed", seed},
                      {"trajectories",
                       json::array({{{"file", "traj_000.csv"},
                                     {"index", 0},
                                     {"status", traj.status == gtf::Trajectory::Status::blowup
                                                    ? "blowup"
                                                    : "completed"},
                                     {"x0_norm", traj.x0_norm},
                                     {"dist_linf", traj.dist_linf}}})}};
        write_json(dir, "index.json", index);
        std::cout << "simulate: 1 trajectory, final |x| = "
                  << (traj.states.empty() ? 0.0 : [&] {
                         double s = 0.0;
                         for (double v : traj.states.back()) s += v * v;
                         return std::sqrt(s);
                     }())
                  << "\n";
        return 0;
    }

    if (!synth) throw gtf::BadParameter("ensemble simulation needs simulate.closed_loop = true");
    gtf::EnsembleSpec spec = ensemble_spec(cfg, sys, seed, "simulate");
    gtf::Ensemble ens = gtf::run_ensemble(sys, synth->law, spec);
    for (const auto& tr : ens.trajectories) {
        char name[32];
        std::snprintf(name, sizeof name, "traj_%03d.csv", tr.index);
        gtf::write_csv(tr, (dir / name).string());
    }
    write_json(dir, "index.json", gtf::ensemble_index_json(ens));
    std::cout << "simulate: " << ens.trajectories.size() << " trajectories\n";
    return 0;
}

int cmd_certify(const CommonOpts& opts) {
    RunConfig cfg = RunConfig::load(opts.config_path);
    gtf::GtfSystem sys = load_system(cfg);
    std::uint64_t seed = run_seed(cfg, opts);

    gtf::AutoSynthesis synth = synthesize_checked(cfg, sys, opts);
    gtf::EnsembleSpec spec = ensemble_spec(cfg, sys, seed, "certify");
    gtf::Ensemble ens = gtf::run_ensemble(sys, synth.law, spec);

    gtf::UgsReport ugs;
    if (cfg.str("certify.upsilon", "fit") == "fit")
        ugs = gtf::fit_ugs(ens);
    else
        ugs = gtf::check_ugs(ens, gtf::ComparisonFunction::identity(),
                             cfg.num("certify.tol_rel", 1e-6));

    double tail = cfg.num("certify.tail_fraction", 0.2);
    double tol_ag = cfg.num("certify.tol_ag", 1e-3);
    gtf::ComparisonFunction gamma = cfg.str("certify.gamma", "fit") == "fit"
                                        ? gtf::fit_gamma(ens, tail)
                                        : gtf::ComparisonFunction::identity();
    gtf::AgReport ag = gtf::check_ag(ens, gamma, tail, tol_ag);
    gtf::IssVerdict verdict = gtf::iss_verdict(ugs, ag);

    fs::path dir(opts.out_dir);
    write_json(dir, "ugs.json", ugs.to_json());
    write_json(dir, "ag.json", ag.to_json());
    json iss = verdict.to_json();
    iss["gamma"] = gamma.to_json();
    write_json(dir, "iss.json", iss);
    std::cout << "certify: UGS " << (verdict.ugs_pass ? "pass" : "FAIL") << ", AG "
              << (verdict.ag_pass ? "pass" : "FAIL") << ", verdict "
              << (verdict.verdict ? "true" : "false") << "\n";
    return verdict.verdict ? 0 : 2;
}

bool references_time(const gtf::Expr& e) {
    if (e.op == gtf::Expr::Op::SinT || e.op == gtf::Expr::Op::CosT) return true;
    return (e.lhs && references_time(*e.lhs)) || (e.rhs && references_time(*e.rhs));
}

int cmd_obstruct(const CommonOpts& opts) {
    RunConfig cfg = RunConfig::load(opts.config_path);
    std::string text = cfg.str("obstruct.u");
    if (text.empty()) throw gtf::BadParameter("config is missing obstruct.u");
    gtf::Expr::Ptr expr = gtf::parse_dynamics(text);
    if (references_time(*expr))
        throw gtf::BadParameter("static feedback must not reference time atoms");
    if (expr->references_control())
        throw gtf::BadParameter("static feedback must not reference u");
    if (expr->max_state_index() > 2)
        throw gtf::BadParameter("static feedback lives on the plane (x1, x2)");

    int m = cfg.integer("obstruct.m", 720);
    auto u = [&](double x1, double x2) {
        double state[2] = {x1, x2};
        gtf::EvalContext ctx;
        ctx.state = state;
        return expr->eval(ctx);
    };
    gtf::ObstructionReport rep = gtf::static_obstruction_check(u, m);
    write_json(fs::path(opts.out_dir), "obstruction.json", rep.to_json());
    std::cout << "obstruct: " << gtf::to_string(rep.state) << " (winding "
              << rep.winding_closed_loop << " vs " << rep.winding_reference << ")\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"controller synthesis and verification for generalized triangular systems"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::uint64_t seed_arg = 0;
    bool seed_given = false;
    for (auto* name : {"synthesize", "simulate", "certify", "obstruct"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", opts.config_path, "run config file")->required();
        sub->add_option("--out", opts.out_dir, "output directory");
        sub->add_option("--seed", seed_arg, "override the config seed")
            ->each([&](const std::string&) { seed_given = true; });
        sub->add_flag("--force", opts.force, "skip the assumption gate");
    }

    CLI11_PARSE(app, argc, argv);
    if (seed_given) opts.seed = seed_arg;

    try {
        if (app.got_subcommand("synthesize")) return cmd_synthesize(opts);
        if (app.got_subcommand("simulate")) return cmd_simulate(opts);
        if (app.got_subcommand("certify")) return cmd_certify(opts);
        if (app.got_subcommand("obstruct")) return cmd_obstruct(opts);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
