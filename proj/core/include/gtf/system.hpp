#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gtf/expr.hpp"

namespace gtf {

/// GTF plant: dx_i = f_i(t, x_1..x_{i+1}) + delta_i * Phi_i(t, x_1..x_i),
/// with x_{n+1} = u. All blocks scalar; disturbance channels may be wider.
struct GtfSystem {
    int n = 0;
    double T = 1.0;
    std::vector<Expr::Ptr> f;    // n entries
    std::vector<Expr::Ptr> phi;  // n entries
    std::vector<int> dist_dims;  // channel widths N_i - N_{i-1}, default 1
    std::vector<double> x_star;
    double u_star = 0.0;

    /// Validates triangularity (static, on the AST) and the equilibrium
    /// residual of f; throws TriangularityViolation / BadParameter.
    static GtfSystem assemble(int n, double T, std::vector<Expr::Ptr> f,
                              std::vector<Expr::Ptr> phi, std::vector<double> x_star,
                              double u_star, std::vector<int> dist_dims = {});

    /// Same plant with the equilibrium moved to the origin (x*=0, u*=0).
    GtfSystem recentred() const;

    int total_dist_dim() const;

    /// Full right-hand side; delta is the stacked disturbance vector.
    std::vector<double> rhs(double t, std::span<const double> x, double u,
                            std::span<const double> delta) const;

    double eval_f(int i, double t, std::span<const double> x, double u) const;
    double eval_phi(int i, double t, std::span<const double> x) const;

    nlohmann::json to_json() const;

    /// Loads the key=value config format (keys n, T, f[i], Phi[i], x_star,
    /// u_star, dist_dims).
    static GtfSystem load(const std::string& path);
    static GtfSystem parse_config(const std::string& text);
};

/// Piecewise-constant bounded disturbance; the last value extends forever.
struct DisturbanceSignal {
    std::vector<double> breakpoints;         // increasing
    std::vector<std::vector<double>> values; // one vector per interval
    double linf = 0.0;

    std::span<const double> at(double t) const;
    static DisturbanceSignal zero(int dim);
    static DisturbanceSignal constant(std::vector<double> value);
};

enum class DisturbanceKind { zero, constant, piecewise_random, sinusoid_held };

DisturbanceSignal make_disturbance(DisturbanceKind kind, double amplitude, double dwell,
                                   std::uint64_t seed, double horizon, int dim = 1);

/// Sampling grid for check_assumptions.
struct AssumptionGrid {
    int nt = 33;
    int nx = 17;
    double box_radius = 2.0;
    double control_range = 10.0;   // x_{i+1} sweep for the A2 proxy
    double range_target = 10.0;    // sampled image of f_i must cover +-this
    double deriv_floor = 1e-6;     // A3 lower bound on |df_i/dx_{i+1}|
    double h_diff = 1e-5;
};

struct AssumptionReport {
    double periodicity_residual = 0.0;
    std::vector<bool> a2_ok;
    std::vector<bool> a3_ok;
    std::vector<double> a3_min_derivative;
    double f_equilibrium_residual = 0.0;
    double phi_equilibrium_residual = 0.0;
    bool a2_all() const;
    bool a3_all() const;
    /// A1/A2/A3 and the f-equilibrium; the Phi residual is informational
    /// (additive disturbance channels are admitted).
    bool ok() const;
    nlohmann::json to_json() const;
};

AssumptionReport check_assumptions(const GtfSystem& sys, const AssumptionGrid& grid = {});

}  // namespace gtf
