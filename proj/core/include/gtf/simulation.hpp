#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gtf/feedback.hpp"
#include "gtf/system.hpp"

namespace gtf {

struct Trajectory {
    enum class Status { completed, blowup };

    std::vector<double> times;                 // uniform grid, step h_sim
    std::vector<std::vector<double>> states;   // one vector per time point
    std::vector<double> controls;              // applied u (u_star in open loop)
    Status status = Status::completed;
    int index = 0;            // position in its ensemble
    double x0_norm = 0.0;
    double dist_linf = 0.0;

    double sup_norm() const;
    /// Max |x| over times >= t_from.
    double tail_max(double t_from) const;
    double final_time() const { return times.back(); }
};

using OdeRhs = std::function<std::vector<double>(double t, std::span<const double> x)>;

/// Classical fixed-step RK4 for a plain ODE. Blowup truncates the
/// trajectory with status blowup; a NaN mid-step counts as blowup too.
Trajectory integrate_ode(const OdeRhs& rhs, std::span<const double> x0, double t0,
                         double horizon, double h_sim, double blowup_radius = 1e6);

/// Closed (or open, law == nullptr meaning u = u_star) loop of a GTF plant
/// under a piecewise-constant disturbance. The disturbance is sampled at the
/// start of each step and held across the RK4 substeps.
Trajectory integrate(const GtfSystem& sys, const FeedbackLaw* law, std::span<const double> x0,
                     double t0, double horizon, double h_sim, const DisturbanceSignal& dist,
                     double blowup_radius = 1e6);

/// Same for an extended subsystem under a stage law.
Trajectory integrate_stage(const ExtendedSubsystem& ext, const StageLaw& v,
                           std::span<const double> y0, double t0, double horizon,
                           double h_sim, const DisturbanceSignal& dist,
                           double blowup_radius = 1e6);

struct EnsembleSpec {
    std::string id;
    double ball_radius = 1.0;
    int count = 0;
    DisturbanceKind kind = DisturbanceKind::zero;
    double amplitude = 0.0;
    double dwell = 0.1;
    std::uint64_t seed = 0;
    double t0 = 0.0;
    double horizon = 1.0;
    double h_sim = 1e-3;
};

struct Ensemble {
    std::string id;
    EnsembleSpec spec;
    std::vector<Trajectory> trajectories;  // ordered by index
};

/// Deterministic given the spec seed: trajectory i uses seed + i for both
/// its initial state (uniform in the ball) and its disturbance, so results
/// do not depend on the worker count.
Ensemble run_ensemble(const GtfSystem& sys, const FeedbackLaw& law, const EnsembleSpec& spec);

/// Uniform sample in the n-ball of the given radius, by rejection.
std::vector<double> sample_ball(int dim, double radius, std::uint64_t seed);

/// CSV with header t,x1..xn,u and %.17g formatting (byte-stable).
void write_csv(const Trajectory& traj, const std::string& path);

nlohmann::json ensemble_index_json(const Ensemble& ens);

}  // namespace gtf
