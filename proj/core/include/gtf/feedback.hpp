#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gtf/extended.hpp"

namespace gtf {

/// T-periodic feedback u(t, x) built from backstepping stages. stages[i] is
/// alpha_{i+1}(t, z_1..z_{i+1}); the last stage is the actual control. The
/// transformed coordinates are z_1 = x_1 - x*_1 and
/// z_{i+1} = (x_{i+1} - x*_{i+1}) - alpha_i(t, z_1..z_i).
struct FeedbackLaw {
    double T = 1.0;
    std::vector<double> x_star;
    double u_star = 0.0;
    std::vector<StageLaw> stages;

    int n() const { return static_cast<int>(stages.size()); }

    /// Transformed coordinates z(t, x).
    std::vector<double> to_z(double t, std::span<const double> x) const;

    /// The applied control u(t, x).
    double control(double t, std::span<const double> x) const;

    /// Tabulates every stage on a uniform (t, z) grid for inspection; laws
    /// are function-composed, so serialization is numeric only.
    nlohmann::json to_json(int nt = 17, int nz = 9, double z_range = 2.0) const;
};

/// Feedback valid on the closed ball of radius 2r around the origin of the
/// extended coordinates, with the verified slack of its dissipation check.
struct LocalFeedback {
    double radius = 0.0;  // r; the law is certified on |y| <= 2r
    StageLaw nu;
    double margin = 0.0;
};

}  // namespace gtf
