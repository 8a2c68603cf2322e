#include "gtf/extended.hpp"

#include <cmath>

#include "gtf/errors.hpp"

namespace gtf {

std::vector<double> ExtendedSubsystem::psi(double t, std::span<const double> y,
                                           double v) const {
    if (static_cast<int>(y.size()) != dim()) throw DimensionMismatch("psi: bad y dimension");
    std::span<const double> z = y.first(static_cast<std::size_t>(k));
    std::vector<double> out = k > 0 ? g(t, z, y[static_cast<std::size_t>(k)])
                                    : std::vector<double>{};
    out.push_back(g_k1(t, z, y[static_cast<std::size_t>(k)], v));
    return out;
}

std::vector<double> ExtendedSubsystem::phi_matrix(double t, std::span<const double> y) const {
    if (static_cast<int>(y.size()) != dim())
        throw DimensionMismatch("phi_matrix: bad y dimension");
    std::span<const double> z = y.first(static_cast<std::size_t>(k));
    std::vector<double> m(static_cast<std::size_t>(dim() * N_k1), 0.0);
    if (k > 0 && N_k > 0) {
        std::vector<double> top = phi_top(t, z);
        if (static_cast<int>(top.size()) != k * N_k)
            throw DimensionMismatch("phi_top: bad size");
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < N_k; ++j)
                m[static_cast<std::size_t>(i * N_k1 + j)] =
                    top[static_cast<std::size_t>(i * N_k + j)];
    }
    std::vector<double> bot = phi_bot(t, y);
    if (static_cast<int>(bot.size()) != N_k1) throw DimensionMismatch("phi_bot: bad size");
    for (int j = 0; j < N_k1; ++j)
        m[static_cast<std::size_t>(k * N_k1 + j)] = bot[static_cast<std::size_t>(j)];
    return m;
}

std::vector<double> ExtendedSubsystem::rhs(double t, std::span<const double> y, double v,
                                           std::span<const double> delta) const {
    std::vector<double> dy = psi(t, y, v);
    if (!delta.empty()) {
        if (static_cast<int>(delta.size()) != N_k1)
            throw DimensionMismatch("rhs: bad disturbance dimension");
        std::vector<double> m = phi_matrix(t, y);
        for (int i = 0; i < dim(); ++i)
            for (int j = 0; j < N_k1; ++j)
                dy[static_cast<std::size_t>(i)] +=
                    m[static_cast<std::size_t>(i * N_k1 + j)] *
                    delta[static_cast<std::size_t>(j)];
    }
    return dy;
}

ExtendedSubsystem base_stage(const GtfSystem& sys) {
    ExtendedSubsystem e;
    e.k = 0;
    e.N_k = 0;
    e.N_k1 = sys.dist_dims[0];
    e.T = sys.T;
    e.g = [](double, std::span<const double>, double) { return std::vector<double>{}; };
    int n = sys.n;
    e.g_k1 = [sys, n](double t, std::span<const double>, double z1, double v) {
        if (n > 1) {
            double x[2] = {z1, v};
            return sys.eval_f(0, t, x, 0.0);
        }
        double x[1] = {z1};
        return sys.eval_f(0, t, x, v);
    };
    e.phi_top = [](double, std::span<const double>) { return std::vector<double>{}; };
    int nd = sys.dist_dims[0];
    e.phi_bot = [sys, nd](double t, std::span<const double> y) {
        double x[1] = {y[0]};
        return std::vector<double>(static_cast<std::size_t>(nd), sys.eval_phi(0, t, x));
    };
    e.to_x = [](double, std::span<const double> y) {
        return std::vector<double>(y.begin(), y.end());
    };
    return e;
}

ExtendedSubsystem extend_subsystem(
    const ExtendedSubsystem& prev, const StageLaw& alpha,
    std::function<double(double t, std::span<const double> x, double u)> next_f,
    std::function<double(double t, std::span<const double> x)> next_Phi, int next_dist_dim,
    double h_diff) {
    if (!alpha) throw BadParameter("extend_subsystem: empty stage law");
    if (next_dist_dim < 1) throw BadParameter("extend_subsystem: next_dist_dim must be >= 1");
    if (h_diff <= 0.0) throw DerivativeUnavailable("h_diff must be positive");

    ExtendedSubsystem e;
    e.k = prev.k + 1;
    e.N_k = prev.N_k1;
    e.N_k1 = prev.N_k1 + next_dist_dim;
    e.T = prev.T;

    auto alpha_dt = [alpha, h_diff](double t, std::span<const double> z) {
        return (alpha(t + h_diff, z) - alpha(t - h_diff, z)) / (2.0 * h_diff);
    };
    auto alpha_dz = [alpha, h_diff](double t, std::span<const double> z) {
        std::vector<double> grad(z.size());
        std::vector<double> zp(z.begin(), z.end());
        for (std::size_t i = 0; i < z.size(); ++i) {
            zp[i] = z[i] + h_diff;
            double hi = alpha(t, zp);
            zp[i] = z[i] - h_diff;
            double lo = alpha(t, zp);
            zp[i] = z[i];
            grad[i] = (hi - lo) / (2.0 * h_diff);
        }
        return grad;
    };

    e.g = [prev, alpha](double t, std::span<const double> z, double s) {
        return prev.psi(t, z, s + alpha(t, z));
    };
    e.phi_top = [prev](double t, std::span<const double> z) { return prev.phi_matrix(t, z); };
    e.to_x = [prev, alpha](double t, std::span<const double> y) {
        std::span<const double> z = y.first(y.size() - 1);
        std::vector<double> x = prev.to_x(t, z);
        x.push_back(y.back() + alpha(t, z));
        return x;
    };

    auto to_x_full = e.to_x;
    e.g_k1 = [prev, alpha, alpha_dt, alpha_dz, next_f, to_x_full](
                 double t, std::span<const double> z, double s, double v) {
        std::vector<double> y(z.begin(), z.end());
        y.push_back(s);
        std::vector<double> x = to_x_full(t, y);
        double fval = next_f(t, x, v);
        double at = alpha_dt(t, z);
        std::vector<double> az = alpha_dz(t, z);
        std::vector<double> gz = prev.psi(t, z, s + alpha(t, z));
        double dot = 0.0;
        for (std::size_t i = 0; i < az.size(); ++i) dot += az[i] * gz[i];
        double r = fval - at - dot;
        if (!std::isfinite(r)) throw NonFiniteValue("g_k1 is not finite");
        return r;
    };

    int nk = e.N_k, nd = next_dist_dim;
    e.phi_bot = [prev, alpha, alpha_dz, next_Phi, to_x_full, nk, nd](
                    double t, std::span<const double> y) {
        std::span<const double> z = y.first(y.size() - 1);
        std::vector<double> out(static_cast<std::size_t>(nk + nd), 0.0);
        std::vector<double> az = alpha_dz(t, z);
        std::vector<double> m = prev.phi_matrix(t, z);
        for (int j = 0; j < nk; ++j) {
            double dot = 0.0;
            for (int i = 0; i < prev.dim(); ++i)
                dot += az[static_cast<std::size_t>(i)] *
                       m[static_cast<std::size_t>(i * prev.N_k1 + j)];
            out[static_cast<std::size_t>(j)] = -dot;
        }
        std::vector<double> x = to_x_full(t, y);
        double p = next_Phi(t, x);
        for (int j = 0; j < nd; ++j) out[static_cast<std::size_t>(nk + j)] = p;
        return out;
    };
    return e;
}

ExtendedSubsystem extend_with_row(const ExtendedSubsystem& prev, const StageLaw& alpha,
                                  const GtfSystem& sys, int row, double h_diff) {
    if (row < 1 || row >= sys.n) throw BadParameter("extend_with_row: bad row index");
    int n = sys.n;
    auto nf = [sys, row, n](double t, std::span<const double> x, double u) {
        if (row + 1 < n) {
            std::vector<double> xs(x.begin(), x.end());
            xs.push_back(u);
            return sys.eval_f(row, t, xs, 0.0);
        }
        return sys.eval_f(row, t, x, u);
    };
    auto np = [sys, row](double t, std::span<const double> x) {
        return sys.eval_phi(row, t, x);
    };
    return extend_subsystem(prev, alpha, nf, np, sys.dist_dims[static_cast<std::size_t>(row)],
                            h_diff);
}

}  // namespace gtf
