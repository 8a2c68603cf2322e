#pragma once

#include <functional>
#include <span>
#include <vector>

#include "gtf/system.hpp"

namespace gtf {

using StageLaw = std::function<double(double t, std::span<const double> y)>;

/// Backstepping pair at stage k: the stabilized block z (dimension k) and
/// the fresh coordinate z_{k+1}, with y = [z, z_{k+1}] and scalar virtual
/// control v:
///
///   dz       = g(t, z, z_{k+1}) + sum_{j<=N_k}  Delta_j phi_top[.,j](t, z)
///   dz_{k+1} = g_k1(t, z, z_{k+1}, v) + sum_{j<=N_k1} Delta_j phi_bot[j](t, y)
///
/// The disturbance matrix has the block layout with the top-right block
/// identically zero: rows of z never see the new channels.
struct ExtendedSubsystem {
    int k = 0;        // dimension of z (0 for the base stage)
    int N_k = 0;      // channels feeding z
    int N_k1 = 1;     // channels feeding the full y, N_k1 > N_k
    double T = 1.0;

    std::function<std::vector<double>(double t, std::span<const double> z, double z_k1)> g;
    std::function<double(double t, std::span<const double> z, double z_k1, double v)> g_k1;
    /// k x N_k matrix, row-major.
    std::function<std::vector<double>(double t, std::span<const double> z)> phi_top;
    /// N_k1 entries, functions of the full y.
    std::function<std::vector<double>(double t, std::span<const double> y)> phi_bot;
    /// Original coordinates from transformed ones: x_{1..k+1} from y.
    std::function<std::vector<double>(double t, std::span<const double> y)> to_x;

    int dim() const { return k + 1; }

    /// Drift psi(t,y,v) = [g; g_k1], dimension k+1.
    std::vector<double> psi(double t, std::span<const double> y, double v) const;

    /// Full (k+1) x N_k1 disturbance matrix, row-major, with the zero block
    /// materialized.
    std::vector<double> phi_matrix(double t, std::span<const double> y) const;

    /// psi + phi * Delta.
    std::vector<double> rhs(double t, std::span<const double> y, double v,
                            std::span<const double> delta) const;
};

/// First stage of a GTF plant: k = 0, z_1 = x_1, v = x_2.
ExtendedSubsystem base_stage(const GtfSystem& sys);

/// One backstepping extension: given the stage-k pair and its stabilizing
/// virtual control alpha(t, y), append the next plant row. New coordinates:
/// z_new = y_old, z_{k+2} = x_{k+2} - alpha(t, y_old). Partial derivatives
/// of alpha are taken by central differences with step h_diff.
ExtendedSubsystem extend_subsystem(
    const ExtendedSubsystem& prev, const StageLaw& alpha,
    std::function<double(double t, std::span<const double> x, double u)> next_f,
    std::function<double(double t, std::span<const double> x)> next_Phi, int next_dist_dim,
    double h_diff = 1e-5);

/// Convenience: extend with row i (0-based, >= 1) of the plant.
ExtendedSubsystem extend_with_row(const ExtendedSubsystem& prev, const StageLaw& alpha,
                                  const GtfSystem& sys, int row, double h_diff = 1e-5);

}  // namespace gtf
