#pragma once

#include <vector>

#include "gtf/certification.hpp"
#include "gtf/comparison.hpp"
#include "gtf/extended.hpp"
#include "gtf/feedback.hpp"

namespace gtf {

struct SynthesisParams {
    double box_radius = 3.0;     // working box for regularity checks
    double v_range = 3.0;        // control sweep for the regularity check
    double deriv_floor = 1e-6;   // |dg_{k+1}/dv| must stay above this
    double h_diff = 1e-5;
    double root_tol = 1e-10;
    double bracket_max = 1e6;    // NoBracket beyond this control magnitude
    int reg_nt = 7;              // regularity-check grid densities
    int reg_ny = 5;
    int reg_nv = 13;
    DissGrid diss;               // per-stage dissipation grid
};

/// J(t,z,z_{k+1}) = int_0^1 dg(t,z,theta z_{k+1})/dz_{k+1} dtheta by 8-node
/// Gauss-Legendre quadrature, derivative by central differences. Satisfies
/// g(t,z,s) - g(t,z,0) = J s to quadrature tolerance.
std::vector<double> j_integral(const ExtendedSubsystem& ext, double t,
                               std::span<const double> z, double z_k1, double h_diff = 1e-5);

/// The pressure term P = (dV_k/dz) J + z_{k+1} sum_j phi_{k+1,j}^2 of the
/// stage identity.
double stage_pressure(const ExtendedSubsystem& ext, double t, std::span<const double> z,
                      double z_k1, double h_diff = 1e-5);

/// Solves 2 g_{k+1}(t,z,z_{k+1},v) + P = -z_{k+1} for v. Affine fast path
/// in closed form; otherwise the minimum-norm root by an outward bracket
/// scan plus safeguarded bisection/secant. Throws NoBracket when no sign
/// change appears up to bracket_max.
double solve_for_control(const ExtendedSubsystem& ext, double t, std::span<const double> z,
                         double z_k1, const SynthesisParams& params = {});

/// Throws DegenerateControlDirection when |dg_{k+1}/dv| dips below
/// deriv_floor anywhere on the sampled (t, y, v) box.
void check_regularity(const ExtendedSubsystem& ext, const SynthesisParams& params = {});

/// Stage law alpha(t, y) realizing the identity pointwise (regular case).
StageLaw synthesize_virtual_control(const ExtendedSubsystem& ext,
                                    const SynthesisParams& params = {});

/// gamma_1(s) = s^2 sampled on a default knot grid.
ComparisonFunction default_gamma1(double s_max = 4.0, int knots = 17);

struct RegularSynthesis {
    FeedbackLaw law;
    ComparisonFunction gamma_n;
    std::vector<ExtendedSubsystem> stages;        // stage k subsystem, k = 0..n-1
    std::vector<DissipationReport> reports;       // one per stage
};

/// Full regular-case recursion over all n rows of the plant. Stage errors
/// are rethrown with the stage index attached.
RegularSynthesis synthesize_regular(const GtfSystem& sys, const SynthesisParams& params = {});

struct LocalSynthesisResult {
    LocalFeedback local;
    ComparisonFunction gamma_k1;
    double d_head = 0.0;  // d_{-q0-1} = (1/12) max_{|y|<=r} V_{k+1}
};

struct LocalParams {
    double r_init = 0.25;
    int max_attempts = 20;
    SynthesisParams synth;
    DissGrid grid{.nt = 17, .ny = 12, .ns = 7, .s_max = 1.0};
};

/// Feedback nu on the ball |y| <= 2r with a grid-verified dissipation
/// inequality; halves r on failure, up to max_attempts. gamma_k1 is the
/// gain of this stage's y-inequality (gamma_1 = s^2 for the base stage,
/// next_gain of the previous stage's gain otherwise); it is echoed back.
LocalSynthesisResult synthesize_local_feedback(const ExtendedSubsystem& ext,
                                               const ComparisonFunction& gamma_k1,
                                               const LocalParams& params = {});

}  // namespace gtf
