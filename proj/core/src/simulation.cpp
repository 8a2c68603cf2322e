#include "gtf/simulation.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include <nlohmann/json.hpp>

#include "gtf/errors.hpp"
#include "gtf/parallel.hpp"

namespace gtf {

namespace {

double norm2(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

bool finite(std::span<const double> x) {
    for (double v : x)
        if (!std::isfinite(v)) return false;
    return true;
}

/// Core RK4 loop. on_step runs once before each step's four rhs calls, so
/// callers can freeze the disturbance at the step start.
Trajectory rk4(const OdeRhs& rhs,
               const std::function<double(double, std::span<const double>)>& control,
               std::span<const double> x0, double t0, double horizon, double h_sim,
               double blowup_radius, const std::function<void(double)>& on_step = {}) {
    if (h_sim <= 0.0) throw BadParameter("h_sim must be positive");
    if (horizon < 0.0) throw BadParameter("horizon must be non-negative");
    long steps = std::lround(horizon / h_sim);
    if (std::abs(steps * h_sim - horizon) > 1e-9 * std::max(1.0, horizon))
        throw BadParameter("horizon must be a multiple of h_sim");

    Trajectory traj;
    traj.x0_norm = norm2(x0);
    std::vector<double> x(x0.begin(), x0.end());
    auto record = [&](double t) {
        traj.times.push_back(t);
        traj.states.push_back(x);
        if (control) traj.controls.push_back(control(t, x));
    };
    record(t0);
    std::size_t n = x.size();
    std::vector<double> k1, k2, k3, k4, tmp(n);
    for (long s = 0; s < steps; ++s) {
        double t = t0 + static_cast<double>(s) * h_sim;
        if (on_step) on_step(t);
        k1 = rhs(t, x);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h_sim * k1[i];
        k2 = rhs(t + 0.5 * h_sim, tmp);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h_sim * k2[i];
        k3 = rhs(t + 0.5 * h_sim, tmp);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h_sim * k3[i];
        k4 = rhs(t + h_sim, tmp);
        for (std::size_t i = 0; i < n; ++i)
            x[i] += h_sim / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if (!finite(x) || norm2(x) > blowup_radius) {
            traj.status = Trajectory::Status::blowup;
            return traj;
        }
        record(t0 + static_cast<double>(s + 1) * h_sim);
    }
    return traj;
}

}  // namespace

double Trajectory::sup_norm() const {
    double m = 0.0;
    for (const auto& x : states) m = std::max(m, norm2(x));
    return m;
}

double Trajectory::tail_max(double t_from) const {
    double m = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i)
        if (times[i] >= t_from) m = std::max(m, norm2(states[i]));
    return m;
}

Trajectory integrate_ode(const OdeRhs& rhs, std::span<const double> x0, double t0,
                         double horizon, double h_sim, double blowup_radius) {
    return rk4(rhs, {}, x0, t0, horizon, h_sim, blowup_radius);
}

Trajectory integrate(const GtfSystem& sys, const FeedbackLaw* law, std::span<const double> x0,
                     double t0, double horizon, double h_sim, const DisturbanceSignal& dist,
                     double blowup_radius) {
    // The disturbance is frozen at the step start across the RK4 substeps.
    std::vector<double> frozen;
    auto on_step = [&](double t) {
        std::span<const double> d = dist.at(t);
        frozen.assign(d.begin(), d.end());
    };
    on_step(t0);
    auto u_at = [&sys, law](double t, std::span<const double> x) {
        return law ? law->control(t, x) : sys.u_star;
    };
    OdeRhs rhs = [&](double t, std::span<const double> x) {
        return sys.rhs(t, x, u_at(t, x), frozen);
    };
    Trajectory traj = rk4(rhs, u_at, x0, t0, horizon, h_sim, blowup_radius, on_step);
    traj.dist_linf = dist.linf;
    return traj;
}

Trajectory integrate_stage(const ExtendedSubsystem& ext, const StageLaw& v,
                           std::span<const double> y0, double t0, double horizon,
                           double h_sim, const DisturbanceSignal& dist,
                           double blowup_radius) {
    std::vector<double> frozen;
    auto on_step = [&](double t) {
        std::span<const double> d = dist.at(t);
        frozen.assign(d.begin(), d.end());
    };
    on_step(t0);
    OdeRhs rhs = [&](double t, std::span<const double> y) {
        return ext.rhs(t, y, v(t, y), frozen);
    };
    auto u_at = [&v](double t, std::span<const double> y) { return v(t, y); };
    Trajectory traj = rk4(rhs, u_at, y0, t0, horizon, h_sim, blowup_radius, on_step);
    traj.dist_linf = dist.linf;
    return traj;
}

std::vector<double> sample_ball(int dim, double radius, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (;;) {
        double s = 0.0;
        for (auto& c : x) {
            c = unit(rng);
            s += c * c;
        }
        if (s <= 1.0) break;
    }
    for (auto& c : x) c *= radius;
    return x;
}

Ensemble run_ensemble(const GtfSystem& sys, const FeedbackLaw& law, const EnsembleSpec& spec) {
    if (spec.count < 0) throw BadParameter("ensemble count must be >= 0");
    Ensemble ens;
    ens.id = spec.id;
    ens.spec = spec;
    ens.trajectories.resize(static_cast<std::size_t>(spec.count));
    parallel_for(spec.count, [&](int i) {
        std::uint64_t s = spec.seed + static_cast<std::uint64_t>(i);
        std::vector<double> x0 = sample_ball(sys.n, spec.ball_radius, s);
        DisturbanceSignal dist =
            make_disturbance(spec.kind, spec.amplitude, spec.dwell, s ^ 0x9e3779b97f4a7c15ULL,
                             spec.horizon, sys.total_dist_dim());
        Trajectory traj;
        try {
            traj = integrate(sys, &law, x0, spec.t0, spec.horizon, spec.h_sim, dist);
        } catch (const Error&) {
            traj.status = Trajectory::Status::blowup;
            traj.times = {spec.t0};
            traj.states = {x0};
        }
        traj.index = i;
        ens.trajectories[static_cast<std::size_t>(i)] = std::move(traj);
    });
    return ens;
}

void write_csv(const Trajectory& traj, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw BadParameter("cannot open for writing: " + path);
    std::size_t n = traj.states.empty() ? 0 : traj.states.front().size();
    std::fprintf(f, "t");
    for (std::size_t j = 0; j < n; ++j) std::fprintf(f, ",x%zu", j + 1);
    if (!traj.controls.empty()) std::fprintf(f, ",u");
    std::fprintf(f, "\n");
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        std::fprintf(f, "%.17g", traj.times[i]);
        for (std::size_t j = 0; j < n; ++j) std::fprintf(f, ",%.17g", traj.states[i][j]);
        if (!traj.controls.empty()) std::fprintf(f, ",%.17g", traj.controls[i]);
        std::fprintf(f, "\n");
    }
    std::fclose(f);
}

nlohmann::json ensemble_index_json(const Ensemble& ens) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& tr : ens.trajectories) {
        runs.push_back({{"index", tr.index},
                        {"status", tr.status == Trajectory::Status::completed ? "completed"
                                                                              : "blowup"},
                        {"x0_norm", tr.x0_norm},
                        {"dist_linf", tr.dist_linf},
                        {"sup_norm", tr.sup_norm()},
                        {"final_time", tr.times.empty() ? 0.0 : tr.times.back()}});
    }
    return {{"id", ens.id},
            {"count", static_cast<int>(ens.trajectories.size())},
            {"seed", ens.spec.seed},
            {"horizon", ens.spec.horizon},
            {"h_sim", ens.spec.h_sim},
            {"runs", runs}};
}

}  // namespace gtf
