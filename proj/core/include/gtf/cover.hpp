#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gtf/backstepping.hpp"
#include "gtf/comparison.hpp"
#include "gtf/extended.hpp"
#include "gtf/feedback.hpp"

namespace gtf {

struct LadderParams {
    int q_lo = -3;               // must equal -q0 - 1
    int q_hi = 6;
    int q0 = 2;                  // r_{-q0} is the local feedback radius
    double inner_ratio = 1.12;   // ring growth r_{q+1}/r_q for q < 2
    double outer_ratio = 1.8;    // ring growth beyond
    double sigma_frac = 0.5;     // sigma = sigma_frac * r_{-q0}
    double d_frac = 0.25;        // d_q = d_frac * rho_q^2
    double rho_frac = 1.0 / 3.0; // rho_q position inside [r_q, r_{q+1}]
    double R_frac = 2.0 / 3.0;   // nominal R_q position
    double R_headroom = 1.05;    // inflation over the observed funnel need
    int ensemble_count = 8;      // trajectories per q in the R sweep
    std::uint64_t seed = 20210907;
    int steps_per_period = 400;
    int m_nt = 9;                // grid for the m_{q+1} maximization
    int m_ny = 9;
};

/// Finite radius/gain ladders. Arrays are indexed by q - q_lo; r, rho, R
/// and d carry an overhang up to q_hi + 3 so that every in-range formula
/// (R_{q+2}, r_{q+2}, D with R_{q+3}) stays inside the truncation.
struct AnnulusCover {
    int q_lo = -3, q_hi = 6, q0 = 2;
    double T = 1.0;
    double sigma = 0.0, kappa = 0.0, d_head = 0.0;
    std::vector<double> r, rho, R, d;  // q in [q_lo, q_hi+3]
    std::vector<double> D, m, eps;     // ring labels in [q_lo, q_hi+1]
    std::vector<double> M;             // per-ring control bound, filled by selection

    double r_at(int q) const;
    double rho_at(int q) const;
    double R_at(int q) const;
    double d_at(int q) const;
    double D_at(int label) const;
    double m_at(int label) const;
    double eps_at(int label) const;
    double M_at(int label) const;
    void bump_M(int label, double value);

    /// Ring index q covering r_q <= |y| < r_{q+1}; everything below
    /// r_{-q0+1} maps to the inner ring -q0; at or above r_{q_hi+1} throws
    /// OutOfRange (the boundary belongs to the outer, truncated ring).
    int ring_of(double norm_y) const;

    nlohmann::json to_json() const;
    static AnnulusCover from_json(const nlohmann::json& j);
};

/// Ladders built per the finite truncation. R_q comes from a descending
/// ensemble sweep: the observed one-period trajectories must fit the funnel
/// line from R_{q+2}^2 down to R_q^2. With closed_loop given, the sweep
/// simulates the full y dynamics under that law; otherwise (k >= 1) the
/// inner z subsystem runs under random held z_{k+1} paths bounded by
/// 3 sigma, and for k = 0 the nominal placements stand (the inner system
/// is empty). gamma_k bounds the inner disturbance in the m maximization
/// (ignored for k = 0); gamma_k1 gates the full disturbance.
AnnulusCover build_ladder(const ExtendedSubsystem& ext, const ComparisonFunction& gamma_k,
                          const ComparisonFunction& gamma_k1, double r_local, double d_head,
                          const LadderParams& params, const StageLaw& closed_loop = {});

enum class RegionTag { P, E, G };
const char* to_string(RegionTag t);

struct Classification {
    RegionTag tag;
    int ring;
};

/// P if |z_{k+1}| <= sigma, E if <= 2 sigma, G beyond; ring per ring_of.
Classification classify_point(const AnnulusCover& cover, std::span<const double> y);

struct CoverCell {
    double t_a = 0.0, t_b = 0.0;  // active time window within [0, T]
    bool windowed = false;        // false: active for all t
    std::vector<double> y_lo, y_hi;
    RegionTag tag = RegionTag::G;
    int ring = 0;
    double chi = 0.0;
    double h = 0.0;       // time ramp half-width
    double margin = 0.0;  // verified slack at the checked points
    int depth = 0;        // dyadic split depth

    std::vector<double> center() const;
    nlohmann::json to_json() const;
};

struct CellParams {
    double time_on_fraction = 0.5;  // windowed rings: ON fraction of T
    double h_frac = 0.1;            // ramp width as fraction of the window
    double overlap_frac = 0.25;     // spatial bump collar vs. cell width
    double select_slack = 0.05;     // relative slack demanded at the center
    int max_split_depth = 6;
    double tol_P = 1e-8;
    SynthesisParams synth;
};

/// Fills cell.chi/margin. E/G: minimum-norm v meeting both strict
/// inequalities at the center against the worst-case disturbance on the
/// gain ball, then re-verified at the cell corners (MarginLost on failure).
/// P: minimum-norm w zeroing the inner product to tol_P.
void select_cell_control(const ExtendedSubsystem& ext, AnnulusCover& cover,
                         const ComparisonFunction& gamma_k1, CoverCell& cell,
                         const CellParams& params);

/// Tiles rings [-q0+1, q_hi] with boxes of diameter < eps, selects controls
/// (dyadic split on MarginLost), and marks rings intersecting the inner
/// handover collar as time-windowed.
std::vector<CoverCell> build_cells(const ExtendedSubsystem& ext, AnnulusCover& cover,
                                   const ComparisonFunction& gamma_k1,
                                   const CellParams& params);

/// The blended T-periodic law v = sum p_l chi_l + p(y)(1 - sum p_l) nu.
/// Spatial bumps are C1 smoothsteps summing to one across cell seams
/// (normalized when unequal collars overlap); windowed cells additionally
/// ramp in time. Throws CoverageGap if some annulus point is uncovered at
/// every phase of the period.
StageLaw blend_feedback(const std::vector<CoverCell>& cells, const LocalFeedback& local,
                        const AnnulusCover& cover, const CellParams& params);

struct FunnelReport {
    struct PerQ {
        int q = 0;
        int runs = 0;
        int violations = 0;
        double worst = 0.0;
    };
    std::vector<PerQ> per_q;
    double max_violation = 0.0;
    double slack = 1e-6;

    bool pass() const { return max_violation <= slack; }
    nlohmann::json to_json() const;
};

/// Monte Carlo check of the one-period funnel |y(t)|^2 <=
/// R_{q+2}^2 - (t-t_0)/T (R_{q+2}^2 - R_q^2) for every in-range q, with
/// initial states |y_0|^2 <= r_{q+2}^2 and disturbances gated by
/// gamma_k1(||Delta||) <= d_q.
FunnelReport verify_funnel(const ExtendedSubsystem& ext, const StageLaw& law,
                           const AnnulusCover& cover, const ComparisonFunction& gamma_k1,
                           int runs_per_q, std::uint64_t seed, double h_sim,
                           double slack = 1e-6);

}  // namespace gtf
