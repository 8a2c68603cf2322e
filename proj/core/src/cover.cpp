#include "gtf/cover.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gtf/errors.hpp"
#include "gtf/parallel.hpp"
#include "gtf/simulation.hpp"

namespace gtf {

namespace {

double norm_of(std::span<const double> y) {
    double s = 0.0;
    for (double v : y) s += v * v;
    return std::sqrt(s);
}

double smoothstep(double x) {
    x = std::clamp(x, 0.0, 1.0);
    return x * x * (3.0 - 2.0 * x);
}

/// C1 ramp: 0 at c - w, 1 at c + w (step function when w = 0).
double rise(double x, double c, double w) {
    if (w <= 0.0) return x >= c ? 1.0 : 0.0;
    return smoothstep((x - (c - w)) / (2.0 * w));
}

std::size_t idx_of(int q, int q_lo, std::size_t size, const char* what) {
    if (q < q_lo || static_cast<std::size_t>(q - q_lo) >= size)
        throw OutOfRange(std::string(what) + " index " + std::to_string(q) +
                         " outside the ladder truncation");
    return static_cast<std::size_t>(q - q_lo);
}

}  // namespace

double AnnulusCover::r_at(int q) const { return r[idx_of(q, q_lo, r.size(), "r")]; }
double AnnulusCover::rho_at(int q) const { return rho[idx_of(q, q_lo, rho.size(), "rho")]; }
double AnnulusCover::R_at(int q) const { return R[idx_of(q, q_lo, R.size(), "R")]; }
double AnnulusCover::d_at(int q) const { return d[idx_of(q, q_lo, d.size(), "d")]; }
double AnnulusCover::D_at(int label) const { return D[idx_of(label, q_lo, D.size(), "D")]; }
double AnnulusCover::m_at(int label) const { return m[idx_of(label, q_lo, m.size(), "m")]; }
double AnnulusCover::eps_at(int label) const {
    return eps[idx_of(label, q_lo, eps.size(), "eps")];
}
double AnnulusCover::M_at(int label) const { return M[idx_of(label, q_lo, M.size(), "M")]; }
void AnnulusCover::bump_M(int label, double value) {
    std::size_t i = idx_of(label, q_lo, M.size(), "M");
    M[i] = std::max(M[i], value);
}

int AnnulusCover::ring_of(double norm_y) const {
    if (!std::isfinite(norm_y) || norm_y < 0.0)
        throw NonFiniteValue("ring_of needs a finite nonnegative norm");
    if (norm_y < r_at(-q0 + 1)) return -q0;
    if (norm_y >= r_at(q_hi + 1))
        throw OutOfRange("|y| = " + std::to_string(norm_y) + " beyond the outer ring radius " +
                         std::to_string(r_at(q_hi + 1)));
    // half-open rings [r_q, r_{q+1}): an exact boundary hit goes outward
    for (int q = q_hi; q >= -q0 + 1; --q)
        if (norm_y >= r_at(q)) return q;
    return -q0;
}

nlohmann::json AnnulusCover::to_json() const {
    return {{"q_lo", q_lo},     {"q_hi", q_hi}, {"q0", q0},   {"T", T},
            {"sigma", sigma},   {"kappa", kappa}, {"d_head", d_head},
            {"r", r},           {"rho", rho},   {"R", R},     {"d", d},
            {"D", D},           {"m", m},       {"eps", eps}, {"M", M}};
}

AnnulusCover AnnulusCover::from_json(const nlohmann::json& j) {
    AnnulusCover c;
    c.q_lo = j.at("q_lo").get<int>();
    c.q_hi = j.at("q_hi").get<int>();
    c.q0 = j.at("q0").get<int>();
    c.T = j.at("T").get<double>();
    c.sigma = j.at("sigma").get<double>();
    c.kappa = j.at("kappa").get<double>();
    c.d_head = j.at("d_head").get<double>();
    c.r = j.at("r").get<std::vector<double>>();
    c.rho = j.at("rho").get<std::vector<double>>();
    c.R = j.at("R").get<std::vector<double>>();
    c.d = j.at("d").get<std::vector<double>>();
    c.D = j.at("D").get<std::vector<double>>();
    c.m = j.at("m").get<std::vector<double>>();
    c.eps = j.at("eps").get<std::vector<double>>();
    c.M = j.at("M").get<std::vector<double>>();
    return c;
}

namespace {

/// Smallest R_q^2 such that the observed one-period decay fits the funnel
/// line from R_{q+2}^2 down to R_q^2, estimated over a small ensemble.
double funnel_need_sq(const ExtendedSubsystem& ext, const AnnulusCover& cv,
                      const ComparisonFunction& gamma_k, const ComparisonFunction& gamma_k1,
                      int q, const LadderParams& params, const StageLaw& closed_loop) {
    double T = cv.T;
    double h = T / params.steps_per_period;
    double R2_hi = cv.R_at(q + 2) * cv.R_at(q + 2);
    double need = 0.0;
    for (int i = 0; i < params.ensemble_count; ++i) {
        std::uint64_t s = params.seed + static_cast<std::uint64_t>(q - cv.q_lo) * 7919 +
                          static_cast<std::uint64_t>(i);
        double t0 = T * (i % 4) / 4.0;
        if (closed_loop) {
            double amp = gamma_k1.inverse(cv.d_at(q));
            std::vector<double> y0 = sample_ball(ext.dim(), cv.r_at(q + 2), s);
            DisturbanceSignal dist = make_disturbance(DisturbanceKind::piecewise_random, amp,
                                                      T / 16.0, s ^ 0x9e3779b97f4a7c15ULL,
                                                      t0 + T, ext.N_k1);
            Trajectory tr = integrate_stage(ext, closed_loop, y0, t0, T, h, dist);
            if (tr.status == Trajectory::Status::blowup) return 1e300;
            for (std::size_t j = 1; j < tr.times.size(); ++j) {
                double tau = (tr.times[j] - t0) / T;
                double sq = 0.0;
                for (double v : tr.states[j]) sq += v * v;
                need = std::max(need, (sq - (1.0 - tau) * R2_hi) / tau);
            }
        } else {
            // inner z dynamics under a held random z_{k+1} path within the
            // 3 sigma tube and an inner disturbance gated by gamma_k
            double amp = gamma_k.inverse(cv.d_at(q));
            std::vector<double> z0 = sample_ball(ext.k, cv.r_at(q + 2), s);
            DisturbanceSignal dist = make_disturbance(DisturbanceKind::piecewise_random, amp,
                                                      T / 16.0, s ^ 0x9e3779b97f4a7c15ULL,
                                                      t0 + T, ext.N_k);
            DisturbanceSignal omega = make_disturbance(DisturbanceKind::piecewise_random,
                                                       3.0 * cv.sigma, T / 8.0, s ^ 0x1234567ULL,
                                                       t0 + T, 1);
            OdeRhs rhs = [&](double t, std::span<const double> z) {
                double w = omega.at(t)[0];
                std::vector<double> dz = ext.g(t, z, w);
                std::vector<double> phi = ext.phi_top(t, z);
                std::span<const double> del = dist.at(t);
                for (int a = 0; a < ext.k; ++a)
                    for (int b = 0; b < ext.N_k; ++b)
                        dz[static_cast<std::size_t>(a)] +=
                            del[static_cast<std::size_t>(b)] *
                            phi[static_cast<std::size_t>(a * ext.N_k + b)];
                return dz;
            };
            Trajectory tr = integrate_ode(rhs, z0, t0, T, h);
            if (tr.status == Trajectory::Status::blowup) return 1e300;
            for (std::size_t j = 1; j < tr.times.size(); ++j) {
                double tau = (tr.times[j] - t0) / T;
                double w = omega.at(tr.times[j])[0];
                double sq = w * w;
                for (double v : tr.states[j]) sq += v * v;
                need = std::max(need, (sq - (1.0 - tau) * R2_hi) / tau);
            }
        }
    }
    return need;
}

}  // namespace

AnnulusCover build_ladder(const ExtendedSubsystem& ext, const ComparisonFunction& gamma_k,
                          const ComparisonFunction& gamma_k1, double r_local, double d_head,
                          const LadderParams& params, const StageLaw& closed_loop) {
    if (params.q_lo != -params.q0 - 1)
        throw BadParameter("ladder must start at q_lo = -q0 - 1");
    if (params.q_hi < -params.q0 + 2) throw BadParameter("q_hi too small for a working annulus");
    if (r_local <= 0.0 || d_head <= 0.0) throw BadParameter("r_local and d_head must be positive");
    if (params.inner_ratio <= 1.0 || params.outer_ratio <= 1.0)
        throw BadParameter("ring ratios must exceed one");

    AnnulusCover cv;
    cv.q_lo = params.q_lo;
    cv.q_hi = params.q_hi;
    cv.q0 = params.q0;
    cv.T = ext.T;
    cv.sigma = params.sigma_frac * r_local;
    cv.d_head = d_head;

    int top = cv.q_hi + 3;
    std::size_t nr = static_cast<std::size_t>(top - cv.q_lo + 1);
    cv.r.assign(nr, 0.0);
    cv.rho.assign(nr, 0.0);
    cv.R.assign(nr, 0.0);
    cv.d.assign(nr, 0.0);

    auto ratio_after = [&](int q) { return q < 2 ? params.inner_ratio : params.outer_ratio; };
    cv.r[idx_of(-cv.q0, cv.q_lo, nr, "r")] = r_local;
    for (int q = -cv.q0 + 1; q <= top; ++q)
        cv.r[idx_of(q, cv.q_lo, nr, "r")] =
            cv.r[idx_of(q - 1, cv.q_lo, nr, "r")] * ratio_after(q - 1);
    cv.r[idx_of(cv.q_lo, cv.q_lo, nr, "r")] = r_local / params.inner_ratio;
    double r_above = cv.r_at(top) * ratio_after(top);

    auto r_next = [&](int q) { return q < top ? cv.r_at(q + 1) : r_above; };
    for (int q = cv.q_lo; q <= top; ++q) {
        double gap = r_next(q) - cv.r_at(q);
        cv.rho[idx_of(q, cv.q_lo, nr, "rho")] = cv.r_at(q) + params.rho_frac * gap;
        cv.R[idx_of(q, cv.q_lo, nr, "R")] = cv.r_at(q) + params.R_frac * gap;
    }

    cv.d[idx_of(cv.q_lo, cv.q_lo, nr, "d")] = d_head;
    for (int q = cv.q_lo + 1; q <= top; ++q)
        cv.d[idx_of(q, cv.q_lo, nr, "d")] = params.d_frac * cv.rho_at(q) * cv.rho_at(q);
    for (int q = cv.q_lo + 1; q <= top; ++q)
        if (cv.d_at(q) <= cv.d_at(q - 1)) throw LadderInfeasible(q, "gain ladder not increasing");

    cv.kappa = std::min(r_local * r_local / 6.0,
                        (cv.rho_at(1) * cv.rho_at(1) - cv.d_at(1)) / 4.0);
    if (cv.kappa <= 0.0) throw LadderInfeasible(1, "decrease margin kappa is nonpositive");

    // descending funnel sweep: the top two stay at their nominal placement
    if (closed_loop || ext.k >= 1) {
        for (int q = cv.q_hi + 1; q >= cv.q_lo; --q) {
            double need = funnel_need_sq(ext, cv, gamma_k, gamma_k1, q, params, closed_loop);
            double R2 = std::max(cv.R_at(q) * cv.R_at(q), params.R_headroom * need);
            cv.R[idx_of(q, cv.q_lo, nr, "R")] = std::sqrt(R2);
        }
    }

    for (int q = cv.q_lo; q <= top; ++q) {
        bool ok = cv.r_at(q) < cv.rho_at(q) && cv.rho_at(q) < cv.R_at(q) &&
                  cv.R_at(q) < r_next(q);
        if (!ok) throw LadderInfeasible(q, "radius chain r < rho < R < r_next broken");
    }
    for (int q = -cv.q0; q <= 0; ++q) {
        double slope = (cv.r_at(q + 2) * cv.r_at(q + 2) - cv.R_at(q - 1) * cv.R_at(q - 1)) / cv.T;
        if (2.0 * cv.kappa <= slope) throw LadderInfeasible(q, "funnel slope bound fails");
    }
    if (d_head >= cv.R_at(cv.q_lo) * cv.R_at(cv.q_lo))
        throw LadderInfeasible(cv.q_lo, "head gain exceeds the innermost energy level");

    std::size_t nl = static_cast<std::size_t>(cv.q_hi + 1 - cv.q_lo + 1);
    cv.m.assign(nl, 1.0);
    cv.D.assign(nl, 0.0);
    cv.eps.assign(nl, 0.0);
    cv.M.assign(nl, 0.0);

    for (int l = cv.q_lo; l <= cv.q_hi + 1; ++l) {
        int q = l - 1;
        std::size_t li = idx_of(l, cv.q_lo, nl, "m");
        if (ext.k >= 1) {
            double rmax = cv.r_at(q + 3);
            double s_d = gamma_k.inverse(cv.d_at(q + 3));
            double best = 1.0;
            std::vector<double> z(static_cast<std::size_t>(ext.k));
            std::size_t cells = 1;
            for (int a = 0; a < ext.k; ++a) cells *= static_cast<std::size_t>(params.m_ny);
            for (int it = 0; it < params.m_nt; ++it) {
                double t = cv.T * it / params.m_nt;
                for (std::size_t c = 0; c < cells; ++c) {
                    std::size_t rem = c;
                    double zsq = 0.0;
                    for (int a = 0; a < ext.k; ++a) {
                        std::size_t iz = rem % static_cast<std::size_t>(params.m_ny);
                        rem /= static_cast<std::size_t>(params.m_ny);
                        z[static_cast<std::size_t>(a)] =
                            -rmax + 2.0 * rmax * static_cast<double>(iz) / (params.m_ny - 1);
                        zsq += z[static_cast<std::size_t>(a)] * z[static_cast<std::size_t>(a)];
                    }
                    if (zsq > rmax * rmax) continue;
                    for (int iw = 0; iw < params.m_ny; ++iw) {
                        double w = -2.0 * cv.sigma +
                                   4.0 * cv.sigma * static_cast<double>(iw) / (params.m_ny - 1);
                        std::vector<double> g = ext.g(t, z, w);
                        std::vector<double> phi = ext.phi_top(t, z);
                        double dot = 0.0;
                        for (int a = 0; a < ext.k; ++a)
                            dot += z[static_cast<std::size_t>(a)] * g[static_cast<std::size_t>(a)];
                        double csq = 0.0;
                        for (int b = 0; b < ext.N_k; ++b) {
                            double cj = 0.0;
                            for (int a = 0; a < ext.k; ++a)
                                cj += z[static_cast<std::size_t>(a)] *
                                      phi[static_cast<std::size_t>(a * ext.N_k + b)];
                            csq += cj * cj;
                        }
                        best = std::max(best, 2.0 * (std::abs(dot) + s_d * std::sqrt(csq)) + 1.0);
                    }
                }
            }
            cv.m[li] = best;
        }
        double base = q <= -cv.q0 + 1
                          ? cv.R_at(q + 3) * cv.R_at(q + 3) / cv.T
                          : (cv.R_at(q + 3) * cv.R_at(q + 3) - cv.r_at(q - 2) * cv.r_at(q - 2)) /
                                cv.T;
        cv.D[li] = std::max(base, 3.0 * cv.m[li]);

        double e = std::min(cv.r_at(-cv.q0) / 2.0, cv.sigma * cv.sigma / 2.0);
        for (int i = -cv.q0 - 1; i <= l; ++i) {
            e = std::min(e, (r_next(i) - cv.R_at(i)) / 5.0);
            e = std::min(e, (r_next(i) * r_next(i) - cv.R_at(i) * cv.R_at(i)) / 5.0);
        }
        for (int i = -cv.q0; i <= l; ++i) {
            e = std::min(e, (cv.R_at(i) - cv.r_at(i)) / 5.0);
            e = std::min(e, (cv.R_at(i) * cv.R_at(i) - cv.r_at(i) * cv.r_at(i)) / 5.0);
        }
        if (e <= 0.0) throw LadderInfeasible(l, "cell diameter bound collapsed");
        cv.eps[li] = e;
    }
    return cv;
}

const char* to_string(RegionTag t) {
    switch (t) {
        case RegionTag::P: return "P";
        case RegionTag::E: return "E";
        default: return "G";
    }
}

Classification classify_point(const AnnulusCover& cover, std::span<const double> y) {
    if (y.empty()) throw BadParameter("classify_point needs a nonempty state");
    double zk1 = std::abs(y.back());
    RegionTag tag = zk1 <= cover.sigma          ? RegionTag::P
                    : zk1 <= 2.0 * cover.sigma ? RegionTag::E
                                               : RegionTag::G;
    return {tag, cover.ring_of(norm_of(y))};
}

std::vector<double> CoverCell::center() const {
    std::vector<double> c(y_lo.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = 0.5 * (y_lo[i] + y_hi[i]);
    return c;
}

nlohmann::json CoverCell::to_json() const {
    return {{"t_a", t_a},       {"t_b", t_b},   {"windowed", windowed},
            {"y_lo", y_lo},     {"y_hi", y_hi}, {"tag", to_string(tag)},
            {"ring", ring},     {"chi", chi},   {"h", h},
            {"margin", margin}, {"depth", depth}};
}

namespace {

/// Feasibility boundary search: walks |v| outward geometrically on both
/// signs until cond(v) <= 0, then bisects back toward the smallest feasible
/// magnitude. The returned v always satisfies cond(v) <= 0.
double min_norm_feasible(const std::function<double(double)>& cond, double bracket_max,
                         const char* what) {
    if (cond(0.0) <= 0.0) return 0.0;
    double prev[2] = {0.0, 0.0};
    for (double mag = 1e-3; mag <= bracket_max; mag *= 1.25) {
        for (int sgn = 0; sgn < 2; ++sgn) {
            double v = sgn == 0 ? mag : -mag;
            if (cond(v) <= 0.0) {
                double a = prev[sgn], b = v;  // cond(a) > 0, cond(b) <= 0
                for (int it = 0; it < 80; ++it) {
                    double mid = 0.5 * (a + b);
                    if (cond(mid) <= 0.0)
                        b = mid;
                    else
                        a = mid;
                }
                return b;
            }
            prev[sgn] = v;
        }
    }
    throw ControlNotFound(std::string(what) + ": no feasible control up to |v| = " +
                          std::to_string(bracket_max));
}

}  // namespace

void select_cell_control(const ExtendedSubsystem& ext, AnnulusCover& cover,
                         const ComparisonFunction& gamma_k1, CoverCell& cell,
                         const CellParams& params) {
    int dim = ext.dim();
    if (static_cast<int>(cell.y_lo.size()) != dim || cell.y_hi.size() != cell.y_lo.size())
        throw DimensionMismatch("cell box dimension does not match the subsystem");

    // Plunge level and disturbance gate, interpolated continuously in the
    // cell-center radius. At a ring boundary both adjacent rings' labels
    // apply, so the knot takes their max; the interpolant therefore
    // dominates each ring's own requirement while keeping the selected
    // controls continuous across rings (the next stage differentiates the
    // blended law, so label jumps would become derivative spikes).
    std::vector<double> yc = cell.center();
    double c_r = norm_of(yc);
    double lo_r = cover.r_at(cell.ring), hi_r = cover.r_at(cell.ring + 1);
    double th = hi_r > lo_r ? std::clamp((c_r - lo_r) / (hi_r - lo_r), 0.0, 1.0) : 0.0;
    auto knot_level = [&](int q) {
        int qa = std::min(q + 1, cover.q_hi + 1);
        return std::max(cover.D_at(q), cover.D_at(qa));
    };
    auto knot_gate = [&](int q) {
        return std::max(gamma_k1.inverse(cover.d_at(q)), gamma_k1.inverse(cover.d_at(q + 1)));
    };
    double D_eff = (1.0 - th) * knot_level(cell.ring) + th * knot_level(cell.ring + 1);
    double s_d = (1.0 - th) * knot_gate(cell.ring) + th * knot_gate(cell.ring + 1);
    auto drift = [&](double t, std::span<const double> y, double v) {
        std::span<const double> z = y.first(y.size() - 1);
        double zk1 = y.back();
        double gv = ext.g_k1(t, z, zk1, v);
        std::vector<double> phi = ext.phi_bot(t, y);
        return zk1 * gv + s_d * std::abs(zk1) * norm_of(phi);
    };

    double tc = 0.5 * (cell.t_a + cell.t_b);

    if (cell.tag == RegionTag::P) {
        // inner-product equality |z_{k+1} g_{k+1}| <= tol_P at the center
        double zk1 = yc.back();
        std::span<const double> zc(yc.data(), yc.size() - 1);
        double w = 0.0;
        if (std::abs(zk1) > params.tol_P) {
            auto cond = [&](double v) {
                return std::abs(zk1 * ext.g_k1(tc, zc, zk1, v)) - params.tol_P;
            };
            w = min_norm_feasible(cond, params.synth.bracket_max, "P cell");
        }
        cell.chi = w;
        cell.margin = params.tol_P - std::abs(zk1 * ext.g_k1(tc, zc, zk1, w));
        cover.bump_M(cell.ring, std::abs(w));
        return;
    }

    double target = std::min(-2.0 * D_eff, -3.0 * cover.sigma * cover.sigma / cover.T);
    double want = target * (1.0 + params.select_slack);
    auto cond = [&](double v) { return drift(tc, yc, v) - want; };
    double chi = min_norm_feasible(cond, params.synth.bracket_max,
                                   cell.tag == RegionTag::G ? "G cell" : "E cell");

    double margin = target - drift(tc, yc, chi);
    std::vector<double> y(static_cast<std::size_t>(dim));
    std::size_t corners = std::size_t{1} << dim;
    for (double t : {cell.t_a, cell.t_b}) {
        for (std::size_t c = 0; c < corners; ++c) {
            for (int i = 0; i < dim; ++i)
                y[static_cast<std::size_t>(i)] = (c >> i) & 1 ? cell.y_hi[static_cast<std::size_t>(i)]
                                                              : cell.y_lo[static_cast<std::size_t>(i)];
            margin = std::min(margin, target - drift(t, y, chi));
        }
    }
    if (margin < 0.0)
        throw MarginLost("cell control loses its margin at a corner (ring " +
                         std::to_string(cell.ring) + ", depth " + std::to_string(cell.depth) +
                         ")");
    cell.chi = chi;
    cell.margin = margin;
    cover.bump_M(cell.ring, std::abs(chi));
}

namespace {

void emit_cell(const ExtendedSubsystem& ext, AnnulusCover& cover,
               const ComparisonFunction& gamma_k1, const CellParams& params, CoverCell cell,
               std::vector<CoverCell>& out) {
    std::vector<double> c = cell.center();
    cell.tag = std::abs(c.back()) <= cover.sigma         ? RegionTag::P
               : std::abs(c.back()) <= 2.0 * cover.sigma ? RegionTag::E
                                                         : RegionTag::G;
    try {
        select_cell_control(ext, cover, gamma_k1, cell, params);
        out.push_back(std::move(cell));
    } catch (const MarginLost&) {
        if (cell.depth >= params.max_split_depth) throw;
        int dim = static_cast<int>(cell.y_lo.size());
        std::size_t halves = std::size_t{1} << dim;
        for (std::size_t hmask = 0; hmask < halves; ++hmask) {
            CoverCell child = cell;
            ++child.depth;
            for (int i = 0; i < dim; ++i) {
                std::size_t ii = static_cast<std::size_t>(i);
                double mid = 0.5 * (cell.y_lo[ii] + cell.y_hi[ii]);
                if ((hmask >> i) & 1)
                    child.y_lo[ii] = mid;
                else
                    child.y_hi[ii] = mid;
            }
            emit_cell(ext, cover, gamma_k1, params, std::move(child), out);
        }
    }
}

double inner_cutoff_radius(const AnnulusCover& cover) {
    double r = cover.r_at(-cover.q0);
    double r_in = cover.r_at(-cover.q0 + 1);
    if (2.0 * r <= r_in)
        throw BadParameter("inner ring ratio leaves no room for the blend cutoff");
    return std::min(r_in + 0.3 * (2.0 * r - r_in), 0.5 * (r_in + cover.r_at(-cover.q0 + 2)));
}

}  // namespace

std::vector<CoverCell> build_cells(const ExtendedSubsystem& ext, AnnulusCover& cover,
                                   const ComparisonFunction& gamma_k1,
                                   const CellParams& params) {
    int dim = ext.dim();
    if (dim > 3) throw BadParameter("annulus cells support dim(y) <= 3 only");
    double rbar = inner_cutoff_radius(cover);
    std::vector<CoverCell> out;

    for (int q = -cover.q0 + 1; q <= cover.q_hi; ++q) {
        double inner = cover.r_at(q), outer = cover.r_at(q + 1);
        double side = 0.9 * cover.eps_at(q + 1) / std::sqrt(static_cast<double>(dim));
        long naxis = static_cast<long>(std::ceil(2.0 * outer / side));
        side = 2.0 * outer / static_cast<double>(naxis);
        bool windowed = inner < rbar;

        std::vector<long> ix(static_cast<std::size_t>(dim), 0);
        while (true) {
            CoverCell cell;
            cell.ring = q;
            cell.windowed = windowed;
            cell.t_a = 0.0;
            cell.t_b = windowed ? params.time_on_fraction * cover.T : cover.T;
            cell.h = windowed ? params.h_frac * (cell.t_b - cell.t_a) : 0.0;
            cell.y_lo.resize(static_cast<std::size_t>(dim));
            cell.y_hi.resize(static_cast<std::size_t>(dim));
            double near_sq = 0.0, far_sq = 0.0;
            for (int i = 0; i < dim; ++i) {
                std::size_t ii = static_cast<std::size_t>(i);
                cell.y_lo[ii] = -outer + side * static_cast<double>(ix[ii]);
                cell.y_hi[ii] = cell.y_lo[ii] + side;
                double lo = cell.y_lo[ii], hi = cell.y_hi[ii];
                double nearest = lo > 0.0 ? lo : hi < 0.0 ? -hi : 0.0;
                near_sq += nearest * nearest;
                far_sq += std::max(lo * lo, hi * hi);
            }
            if (near_sq < outer * outer && far_sq > inner * inner)
                emit_cell(ext, cover, gamma_k1, params, std::move(cell), out);
            int i = 0;
            for (; i < dim; ++i) {
                std::size_t ii = static_cast<std::size_t>(i);
                if (++ix[ii] < naxis) break;
                ix[ii] = 0;
            }
            if (i == dim) break;
        }
    }
    return out;
}

namespace {

struct BlendData {
    AnnulusCover cover;
    std::vector<CoverCell> cells;
    LocalFeedback local;
    CellParams params;
    double rbar = 0.0, r_in = 0.0, win_hi = 0.0;
    int dim = 0;
    // per ring label (offset by -q0+1): cell indices sorted by y_lo[0]
    struct RingIndex {
        std::vector<int> idx;
        std::vector<double> lo0;
        double max_span = 0.0;  // widest first-coordinate bump support
    };
    std::vector<RingIndex> rings;

    double bump(const CoverCell& c, double t, std::span<const double> y) const {
        (void)t;
        double p = 1.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            double w = params.overlap_frac * (c.y_hi[i] - c.y_lo[i]);
            p *= rise(y[i], c.y_lo[i], w) * (1.0 - rise(y[i], c.y_hi[i], w));
            if (p <= 0.0) return 0.0;
        }
        return p;
    }

    double p_inner(double norm_y) const {
        return 1.0 - rise(norm_y, 0.5 * (r_in + rbar), 0.5 * (rbar - r_in));
    }

    /// Weight of the cell field against the local feedback. The handover
    /// front alternates over the period. During the on-window it sits at the
    /// inner cutoff band [r_in, rbar]. During the off phase it retreats well
    /// past the handover: every shell out to 1.5 r_in follows the pure local
    /// feedback for a stretch of each period. A fixed front always has a
    /// radius where the mixed value crosses the drift's dead zone and the
    /// closed loop can park there; the retreat breaks that cycle because the
    /// parked state's outward excursion stays inside the pure region while
    /// its fresh coordinate contracts, after which the local feedback pulls
    /// it through the handover. The off front ends at 1.75 r_in, inside the
    /// ball on which the local feedback's dissipation was certified
    /// (2 r_local ~ 1.79 r_in), and both fronts are band-wide ramps, so the
    /// law the next stage differentiates has moderate slopes.
    double mix_weight(double t, double norm_y) const {
        if (norm_y >= win_hi) return 1.0;
        double tm = std::fmod(t, cover.T);
        if (tm < 0.0) tm += cover.T;
        double t_on = params.time_on_fraction * cover.T;
        double h = params.h_frac * t_on;
        double a = rise(tm, h, h) * (1.0 - rise(tm, t_on - h, h));
        double m_on = 1.0 - p_inner(norm_y);
        double off_lo = std::max(rbar, (6.0 / 7.0) * win_hi);
        double m_off = rise(norm_y, 0.5 * (off_lo + win_hi), 0.5 * (win_hi - off_lo));
        return a * m_on + (1.0 - a) * m_off;
    }

    /// Cell bump sum and chi-weighted sum over candidate rings near |y|.
    void accumulate(double t, std::span<const double> y, double norm_y, double& sum,
                    double& acc) const {
        int ring;
        if (norm_y >= cover.r_at(cover.q_hi + 1))
            ring = cover.q_hi + 1;
        else
            ring = cover.ring_of(norm_y);
        for (int q = ring - 1; q <= ring + 1; ++q) {
            int slot = q - (-cover.q0 + 1);
            if (slot < 0 || slot >= static_cast<int>(rings.size())) continue;
            const RingIndex& ri = rings[static_cast<std::size_t>(slot)];
            auto it = std::lower_bound(ri.lo0.begin(), ri.lo0.end(), y[0] - ri.max_span);
            for (std::size_t j = static_cast<std::size_t>(it - ri.lo0.begin());
                 j < ri.lo0.size() && ri.lo0[j] <= y[0] + ri.max_span; ++j) {
                const CoverCell& c = cells[static_cast<std::size_t>(ri.idx[j])];
                double p = bump(c, t, y);
                sum += p;
                acc += p * c.chi;
            }
        }
    }

    double eval(double t, std::span<const double> y) const {
        double norm_y = norm_of(y);
        double sum = 0.0, acc = 0.0;
        accumulate(t, y, norm_y, sum, acc);
        double v = sum > 1.0 ? acc / sum : acc;
        double m = mix_weight(t, norm_y);
        if (m < 1.0) v = m * v + (1.0 - m) * local.nu(t, y);
        return v;
    }
};

}  // namespace

StageLaw blend_feedback(const std::vector<CoverCell>& cells, const LocalFeedback& local,
                        const AnnulusCover& cover, const CellParams& params) {
    if (!local.nu) throw BadParameter("blend needs a local feedback");
    auto data = std::make_shared<BlendData>();
    data->cover = cover;
    data->cells = cells;
    data->local = local;
    data->params = params;
    data->r_in = cover.r_at(-cover.q0 + 1);
    data->rbar = inner_cutoff_radius(cover);
    // outer end of the off-phase retreat: well past the handover band but
    // inside the ball on which the local feedback's dissipation was certified
    data->win_hi =
        std::max(std::min(1.75 * data->r_in, 1.96 * local.radius), 1.05 * data->rbar);
    data->dim = cells.empty() ? 1 : static_cast<int>(cells.front().y_lo.size());

    int nrings = cover.q_hi - (-cover.q0 + 1) + 1;
    data->rings.resize(static_cast<std::size_t>(std::max(nrings, 0)));
    for (int i = 0; i < static_cast<int>(cells.size()); ++i) {
        const CoverCell& c = cells[static_cast<std::size_t>(i)];
        int slot = c.ring - (-cover.q0 + 1);
        if (slot < 0 || slot >= nrings)
            throw BadParameter("cell ring outside the cover's working annulus");
        auto& ri = data->rings[static_cast<std::size_t>(slot)];
        ri.idx.push_back(i);
        double w = params.overlap_frac * (c.y_hi[0] - c.y_lo[0]);
        ri.max_span = std::max(ri.max_span, c.y_hi[0] - c.y_lo[0] + w);
    }
    for (auto& ri : data->rings) {
        std::sort(ri.idx.begin(), ri.idx.end(), [&](int a, int b) {
            return data->cells[static_cast<std::size_t>(a)].y_lo[0] <
                   data->cells[static_cast<std::size_t>(b)].y_lo[0];
        });
        ri.lo0.reserve(ri.idx.size());
        for (int i : ri.idx) ri.lo0.push_back(data->cells[static_cast<std::size_t>(i)].y_lo[0]);
    }

    // coverage audit: every annulus point must see some bump at some phase,
    // or sit inside the inner cutoff's support
    std::mt19937_64 rng(0x5eedULL);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> y(static_cast<std::size_t>(data->dim));
    for (int q = -cover.q0 + 1; q <= cover.q_hi; ++q) {
        for (int s = 0; s < 512; ++s) {
            double nrm = 0.0;
            for (double& v : y) {
                v = gauss(rng);
                nrm += v * v;
            }
            nrm = std::sqrt(nrm);
            if (nrm == 0.0) continue;
            double rad = cover.r_at(q) + unif(rng) * (cover.r_at(q + 1) - cover.r_at(q));
            for (double& v : y) v *= rad / nrm;
            if (data->p_inner(rad) > 1e-12) continue;
            bool covered = false;
            for (int ph = 0; ph < 16 && !covered; ++ph) {
                double t = cover.T * ph / 16.0;
                double sum = 0.0, acc = 0.0;
                data->accumulate(t, y, rad, sum, acc);
                covered = sum > 1e-12;
            }
            if (!covered) {
                std::ostringstream os;
                os << "uncovered point at |y| = " << rad << " in ring " << q << " (y =";
                for (double v : y) os << ' ' << v;
                os << ")";
                throw CoverageGap(os.str());
            }
        }
    }

    return [data](double t, std::span<const double> yy) { return data->eval(t, yy); };
}

nlohmann::json FunnelReport::to_json() const {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& p : per_q)
        per.push_back({{"q", p.q},
                       {"runs", p.runs},
                       {"violations", p.violations},
                       {"worst", p.worst}});
    return {{"per_q", per},
            {"max_violation", max_violation},
            {"slack", slack},
            {"pass", pass()}};
}

FunnelReport verify_funnel(const ExtendedSubsystem& ext, const StageLaw& law,
                           const AnnulusCover& cover, const ComparisonFunction& gamma_k1,
                           int runs_per_q, std::uint64_t seed, double h_sim, double slack) {
    if (runs_per_q < 1 || h_sim <= 0.0) throw BadParameter("bad funnel ensemble parameters");
    FunnelReport rep;
    rep.slack = slack;
    rep.max_violation = -1e300;

    for (int q = cover.q_lo; q <= cover.q_hi; ++q) {
        FunnelReport::PerQ pq;
        pq.q = q;
        pq.runs = runs_per_q;
        pq.worst = -1e300;
        double R2_hi = cover.R_at(q + 2) * cover.R_at(q + 2);
        double R2_lo = cover.R_at(q) * cover.R_at(q);
        double amp = gamma_k1.inverse(cover.d_at(q));
        std::vector<double> worst(static_cast<std::size_t>(runs_per_q), 0.0);

        parallel_for(static_cast<std::size_t>(runs_per_q), [&](std::size_t i) {
            std::uint64_t s = seed + static_cast<std::uint64_t>(q - cover.q_lo) * 100003 +
                              static_cast<std::uint64_t>(i);
            double t0 = cover.T * (static_cast<int>(i) % 4) / 4.0;
            std::vector<double> y0 = sample_ball(ext.dim(), cover.r_at(q + 2), s);
            DisturbanceSignal dist =
                make_disturbance(DisturbanceKind::piecewise_random, amp, cover.T / 16.0,
                                 s ^ 0x9e3779b97f4a7c15ULL, t0 + cover.T, ext.N_k1);
            Trajectory tr = integrate_stage(ext, law, y0, t0, cover.T, h_sim, dist);
            double w = -1e300;
            if (tr.status == Trajectory::Status::blowup) {
                w = 1e300;
            } else {
                for (std::size_t j = 0; j < tr.times.size(); ++j) {
                    double tau = (tr.times[j] - t0) / cover.T;
                    double sq = 0.0;
                    for (double v : tr.states[j]) sq += v * v;
                    w = std::max(w, sq - (R2_hi - tau * (R2_hi - R2_lo)));
                }
            }
            worst[i] = w;
        });

        for (double w : worst) {
            pq.worst = std::max(pq.worst, w);
            if (w > slack) ++pq.violations;
        }
        rep.max_violation = std::max(rep.max_violation, pq.worst);
        rep.per_q.push_back(pq);
    }
    return rep;
}

}  // namespace gtf
