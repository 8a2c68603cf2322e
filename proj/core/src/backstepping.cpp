#include "gtf/backstepping.hpp"

#include <cmath>

#include "gtf/errors.hpp"

namespace gtf {

namespace {

// 8-node Gauss-Legendre rule mapped to [0, 1].
constexpr double kGlNode[8] = {
    0.5 - 0.9602898564975363 / 2, 0.5 - 0.7966664774136267 / 2,
    0.5 - 0.5255324099163290 / 2, 0.5 - 0.1834346424956498 / 2,
    0.5 + 0.1834346424956498 / 2, 0.5 + 0.5255324099163290 / 2,
    0.5 + 0.7966664774136267 / 2, 0.5 + 0.9602898564975363 / 2};
constexpr double kGlWeight[8] = {
    0.1012285362903763 / 2, 0.2223810344533745 / 2, 0.3137066458778873 / 2,
    0.3626837833783620 / 2, 0.3626837833783620 / 2, 0.3137066458778873 / 2,
    0.2223810344533745 / 2, 0.1012285362903763 / 2};

}  // namespace

std::vector<double> j_integral(const ExtendedSubsystem& ext, double t,
                               std::span<const double> z, double z_k1, double h_diff) {
    std::vector<double> J(static_cast<std::size_t>(ext.k), 0.0);
    if (ext.k == 0) return J;
    if (h_diff <= 0.0) throw DerivativeUnavailable("h_diff must be positive");
    for (int node = 0; node < 8; ++node) {
        double s = kGlNode[node] * z_k1;
        std::vector<double> hi = ext.g(t, z, s + h_diff);
        std::vector<double> lo = ext.g(t, z, s - h_diff);
        for (int i = 0; i < ext.k; ++i)
            J[static_cast<std::size_t>(i)] +=
                kGlWeight[node] *
                (hi[static_cast<std::size_t>(i)] - lo[static_cast<std::size_t>(i)]) /
                (2.0 * h_diff);
    }
    return J;
}

double stage_pressure(const ExtendedSubsystem& ext, double t, std::span<const double> z,
                      double z_k1, double h_diff) {
    double P = 0.0;
    if (ext.k > 0) {
        std::vector<double> J = j_integral(ext, t, z, z_k1, h_diff);
        for (int i = 0; i < ext.k; ++i)
            P += 2.0 * z[static_cast<std::size_t>(i)] * J[static_cast<std::size_t>(i)];
    }
    std::vector<double> y(z.begin(), z.end());
    y.push_back(z_k1);
    std::vector<double> phi = ext.phi_bot(t, y);
    double sq = 0.0;
    for (double p : phi) sq += p * p;
    P += z_k1 * sq;
    return P;
}

namespace {

double refine_root(const std::function<double(double)>& h, double a, double b, double ha,
                   double hb, double tol) {
    if (ha == 0.0) return a;
    if (hb == 0.0) return b;
    double scale = std::max({1.0, std::abs(ha), std::abs(hb)});
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (a + b);
        // secant candidate, kept only when it lands strictly inside
        if (hb != ha) {
            double sec = b - hb * (b - a) / (hb - ha);
            if (sec > std::min(a, b) && sec < std::max(a, b)) mid = sec;
        }
        double hm = h(mid);
        if (std::abs(hm) <= tol * scale || std::abs(b - a) <= 1e-15 * std::max(1.0, std::abs(mid)))
            return mid;
        if ((ha <= 0.0) == (hm <= 0.0)) {
            a = mid;
            ha = hm;
        } else {
            b = mid;
            hb = hm;
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

double solve_for_control(const ExtendedSubsystem& ext, double t, std::span<const double> z,
                         double z_k1, const SynthesisParams& params) {
    double P = stage_pressure(ext, t, z, z_k1, params.h_diff);
    double w = 0.5 * (-z_k1 - P);
    auto g = [&](double v) { return ext.g_k1(t, z, z_k1, v); };

    // affine fast path: second differences vanish on two stencils
    double g0 = g(0.0), g1 = g(1.0), g2 = g(2.0), gm1 = g(-1.0);
    double scale = std::max({1.0, std::abs(g0), std::abs(g1), std::abs(g2)});
    if (std::abs(g2 - 2.0 * g1 + g0) <= 1e-10 * scale &&
        std::abs(g1 - 2.0 * g0 + gm1) <= 1e-10 * scale) {
        double b = g1 - g0;
        if (std::abs(b) < params.deriv_floor)
            throw DegenerateControlDirection("affine stage with |dg/dv| below floor");
        return (w - g0) / b;
    }

    auto h = [&](double v) { return g(v) - w; };
    double h0 = g0 - w;
    if (h0 == 0.0) return 0.0;

    // outward scan for the minimum-norm bracket
    double prev_v[2] = {0.0, 0.0};
    double prev_h[2] = {h0, h0};
    for (double m = 1e-3; m <= params.bracket_max; m *= 1.25) {
        for (int sgn = 0; sgn < 2; ++sgn) {
            double v = sgn == 0 ? m : -m;
            double hv = h(v);
            if ((prev_h[sgn] <= 0.0) != (hv <= 0.0) || hv == 0.0)
                return refine_root(h, prev_v[sgn], v, prev_h[sgn], hv, params.root_tol);
            prev_v[sgn] = v;
            prev_h[sgn] = hv;
        }
    }
    throw NoBracket("no control bracket up to |v| = " + std::to_string(params.bracket_max));
}

void check_regularity(const ExtendedSubsystem& ext, const SynthesisParams& params) {
    int dim = ext.dim();
    int sign_seen = 0;  // dg/dv must keep one sign over the whole box
    std::vector<double> z(static_cast<std::size_t>(ext.k));
    std::size_t cells = 1;
    for (int i = 0; i < dim; ++i) cells *= static_cast<std::size_t>(params.reg_ny);
    for (int it = 0; it < params.reg_nt; ++it) {
        double t = ext.T * it / params.reg_nt;
        for (std::size_t c = 0; c < cells; ++c) {
            std::size_t rem = c;
            double y[4] = {0, 0, 0, 0};
            for (int i = 0; i < dim; ++i) {
                std::size_t idx = rem % static_cast<std::size_t>(params.reg_ny);
                rem /= static_cast<std::size_t>(params.reg_ny);
                y[i] = -params.box_radius +
                       2.0 * params.box_radius * static_cast<double>(idx) /
                           (params.reg_ny - 1);
            }
            for (int i = 0; i < ext.k; ++i) z[static_cast<std::size_t>(i)] = y[i];
            double z_k1 = y[dim - 1];
            for (int iv = 0; iv < params.reg_nv; ++iv) {
                double v = -params.v_range +
                           2.0 * params.v_range * static_cast<double>(iv) / (params.reg_nv - 1);
                double d = (ext.g_k1(t, z, z_k1, v + params.h_diff) -
                            ext.g_k1(t, z, z_k1, v - params.h_diff)) /
                           (2.0 * params.h_diff);
                if (std::abs(d) < params.deriv_floor)
                    throw DegenerateControlDirection(
                        "dg/dv vanishes at t=" + std::to_string(t) + ", v=" + std::to_string(v));
                int sign = d > 0.0 ? 1 : -1;
                if (sign_seen == 0) sign_seen = sign;
                if (sign != sign_seen)
                    throw DegenerateControlDirection(
                        "dg/dv changes sign on the box (zero in between), t=" +
                        std::to_string(t) + ", v=" + std::to_string(v));
            }
        }
    }
}

StageLaw synthesize_virtual_control(const ExtendedSubsystem& ext,
                                    const SynthesisParams& params) {
    return [ext, params](double t, std::span<const double> y) {
        std::span<const double> z = y.first(y.size() - 1);
        return solve_for_control(ext, t, z, y.back(), params);
    };
}

ComparisonFunction default_gamma1(double s_max, int knots) {
    std::vector<double> ks(static_cast<std::size_t>(knots));
    for (int i = 0; i < knots; ++i)
        ks[static_cast<std::size_t>(i)] = s_max * static_cast<double>(i) / (knots - 1);
    return ComparisonFunction::sample([](double s) { return s * s; }, ks, FnClass::Kinf,
                                      2.0 * s_max);
}

RegularSynthesis synthesize_regular(const GtfSystem& sys, const SynthesisParams& params) {
    GtfSystem c = sys.recentred();
    RegularSynthesis out;
    out.law.T = sys.T;
    out.law.x_star = sys.x_star;
    out.law.u_star = sys.u_star;

    ExtendedSubsystem ext = base_stage(c);
    ComparisonFunction gamma = default_gamma1();
    for (int stage = 0; stage < c.n; ++stage) {
        try {
            check_regularity(ext, params);
            StageLaw alpha = synthesize_virtual_control(ext, params);
            out.stages.push_back(ext);
            out.reports.push_back(check_dissipation(ext, alpha, gamma, params.diss));
            out.law.stages.push_back(alpha);
            if (stage + 1 < c.n) {
                ext = extend_with_row(ext, alpha, c, stage + 1, params.h_diff);
                gamma = next_gain(gamma);
            }
        } catch (const DegenerateControlDirection& e) {
            throw DegenerateControlDirection("stage " + std::to_string(stage + 1) + ": " +
                                             e.what());
        } catch (const NoBracket& e) {
            throw NoBracket("stage " + std::to_string(stage + 1) + ": " + e.what());
        }
    }
    out.gamma_n = gamma;
    return out;
}

LocalSynthesisResult synthesize_local_feedback(const ExtendedSubsystem& ext,
                                               const ComparisonFunction& gamma_k1,
                                               const LocalParams& params) {
    LocalSynthesisResult out;
    out.gamma_k1 = gamma_k1;
    StageLaw nu = synthesize_virtual_control(ext, params.synth);

    double r = params.r_init;
    for (int attempt = 0; attempt < params.max_attempts; ++attempt) {
        DissGrid grid = params.grid;
        grid.y_radius = 2.0 * r;
        grid.ball_radius = 2.0 * r;
        DissipationReport rep = check_dissipation(ext, nu, out.gamma_k1, grid);
        if (rep.pass()) {
            out.local.radius = r;
            out.local.nu = nu;
            out.local.margin = rep.margin;
            out.d_head = r * r / 12.0;
            return out;
        }
        r *= 0.5;
    }
    throw LocalSynthesisFailed("no radius passed the local dissipation check after " +
                               std::to_string(params.max_attempts) + " halvings");
}

}  // namespace gtf
