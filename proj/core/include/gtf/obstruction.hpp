#pragma once

#include <array>
#include <functional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace gtf {

/// Planar vector field sampled on the unit circle at uniform angles.
struct CircleMapSamples {
    std::vector<double> angles;              // theta_i = 2 pi i / m
    std::vector<std::array<double, 2>> g;    // g(cos theta_i, sin theta_i)
    bool normalized = false;

    int count() const { return static_cast<int>(angles.size()); }

    /// Samples f at m uniform angles; m >= 16.
    static CircleMapSamples sample(
        const std::function<std::array<double, 2>(double x1, double x2)>& f, int m = 720);
};

struct WindingParams {
    double tol_zero = 1e-10;  // |g| at or below this is a vanishing vector
    int max_samples = 1 << 16;
};

/// Degree of theta -> g/|g|: sum of wrapped angle increments over 2 pi,
/// rounded to the nearest integer. Throws VanishingVector when some sample
/// has |g| <= tol_zero, Undersampled when an increment reaches pi/2 (the
/// map-based overloads refine dyadically up to max_samples first).
int winding_number(const CircleMapSamples& samples, const WindingParams& params = {});
int winding_number(const std::function<std::array<double, 2>(double, double)>& f, int m = 720,
                   const WindingParams& params = {});

enum class ObstructionState { obstructed, not_obstructed, inconclusive };
const char* to_string(ObstructionState s);

struct ObstructionReport {
    ObstructionState state = ObstructionState::inconclusive;
    int winding_closed_loop = 0;     // valid unless inconclusive
    int winding_reference = 1;       // degree of the antipodal map
    double first_component_max = 0.0;  // max |g_1| over C, algebraically zero
    double min_control = 0.0;          // min |u| over C
    int samples = 0;

    nlohmann::json to_json() const;
};

/// Example 1 test: closed-loop field g(x) = [x_2^3 - (1 - x_1^2) x_2, u(x)]
/// on the unit circle. The first component vanishes on C identically, so
/// the normalized field is vertical and its winding is 0 whenever u keeps
/// one sign; a continuous stabilizer would need winding equal to the
/// antipodal reference 1. u vanishing somewhere on C is inconclusive.
ObstructionReport static_obstruction_check(
    const std::function<double(double x1, double x2)>& u_static, int m = 720,
    const WindingParams& params = {});

}  // namespace gtf
