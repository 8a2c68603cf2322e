#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gtf/comparison.hpp"
#include "gtf/extended.hpp"
#include "gtf/simulation.hpp"

namespace gtf {

/// Grid for check_dissipation: nt time samples over [0,T), ny points per
/// state coordinate over [-y_radius, y_radius], ns disturbance magnitudes
/// over [0, s_max]. The disturbance direction at each node is the worst
/// case: aligned with phi^T y, so it dominates every interior sample. If
/// ball_radius > 0 only nodes with |y| <= ball_radius are evaluated.
struct DissGrid {
    int nt = 33;
    int ny = 21;
    int ns = 11;
    double y_radius = 2.0;
    double s_max = 1.0;
    double ball_radius = 0.0;
    double tol = 1e-6;

    nlohmann::json to_json() const;
};

struct DissipationReport {
    DissGrid grid;
    long nodes = 0;
    double pass_fraction = 0.0;
    double worst_violation = 0.0;  // max of LHS - RHS over the grid
    double margin = 0.0;           // min slack over nodes with |y| > 0
    bool has_witness = false;
    double witness_t = 0.0;
    std::vector<double> witness_y;
    double witness_s = 0.0;

    bool pass() const { return pass_fraction >= 1.0; }
    nlohmann::json to_json() const;
};

/// Checks conclusion (ii): 2<y, psi(t,y,v(t,y)) + Delta phi(t,y)>
/// <= -|y|^2 + gamma(|Delta|), with V(y) = <y,y> analytic.
DissipationReport check_dissipation(const ExtendedSubsystem& ext, const StageLaw& v,
                                    const ComparisonFunction& gamma, const DissGrid& grid);

struct UgsReport {
    std::string ensemble_id;
    ComparisonFunction upsilon;
    bool fitted = false;
    bool k_representable = true;
    int violations = 0;
    double max_ratio = 0.0;
    double tol_rel = 1e-6;
    int witness_index = -1;

    bool pass() const { return violations == 0; }
    nlohmann::json to_json() const;
};

/// Counts violations of |x(t)| <= max{Y(|xi|), Y(||Delta||)} with relative
/// slack; blowup always counts as a violation.
UgsReport check_ugs(const Ensemble& ens, const ComparisonFunction& upsilon,
                    double tol_rel = 1e-6);

/// Minimal monotone (class N) envelope over the observed
/// (max(|xi|, ||Delta||), sup_t |x|) pairs; zero violations by construction.
UgsReport fit_ugs(const Ensemble& ens);

struct AgReport {
    std::string ensemble_id;
    double tail_fraction = 0.2;
    double tol_ag = 1e-3;
    int violations = 0;
    double worst_excess = 0.0;  // max over runs of tail_max - gamma(||Delta||)
    int witness_index = -1;

    bool pass() const { return violations == 0; }
    nlohmann::json to_json() const;
};

/// Tail-window estimate of the limsup against gamma(||Delta||).
AgReport check_ag(const Ensemble& ens, const ComparisonFunction& gamma,
                  double tail_fraction = 0.2, double tol_ag = 1e-3);

/// Monotone envelope of (||Delta||, tail max) pairs, for use as a fitted
/// asymptotic gain.
ComparisonFunction fit_gamma(const Ensemble& ens, double tail_fraction = 0.2);

struct IssVerdict {
    bool ugs_pass = false;
    bool ag_pass = false;
    bool verdict = false;
    std::string ensemble_id;

    nlohmann::json to_json() const;
};

IssVerdict iss_verdict(const UgsReport& ugs, const AgReport& ag);

}  // namespace gtf
