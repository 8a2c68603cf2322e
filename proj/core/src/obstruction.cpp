#include "gtf/obstruction.hpp"

#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "gtf/errors.hpp"

namespace gtf {

CircleMapSamples CircleMapSamples::sample(
    const std::function<std::array<double, 2>(double, double)>& f, int m) {
    if (m < 16) throw BadParameter("circle sampling needs m >= 16");
    CircleMapSamples s;
    s.angles.resize(static_cast<std::size_t>(m));
    s.g.resize(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        double th = 2.0 * std::numbers::pi * i / m;
        s.angles[static_cast<std::size_t>(i)] = th;
        s.g[static_cast<std::size_t>(i)] = f(std::cos(th), std::sin(th));
    }
    return s;
}

int winding_number(const CircleMapSamples& samples, const WindingParams& params) {
    int m = samples.count();
    if (m < 16) throw BadParameter("winding number needs at least 16 samples");
    double total = 0.0;
    double prev = 0.0;
    for (int i = 0; i <= m; ++i) {
        const auto& g = samples.g[static_cast<std::size_t>(i % m)];
        double mag = std::hypot(g[0], g[1]);
        if (!(mag > params.tol_zero))
            throw VanishingVector("|g| = " + std::to_string(mag) + " at sample " +
                                  std::to_string(i % m));
        double ang = std::atan2(g[1], g[0]);
        if (i > 0) {
            double inc = ang - prev;
            while (inc > std::numbers::pi) inc -= 2.0 * std::numbers::pi;
            while (inc < -std::numbers::pi) inc += 2.0 * std::numbers::pi;
            if (std::abs(inc) >= std::numbers::pi / 2.0)
                throw Undersampled("angle increment " + std::to_string(inc) +
                                   " at sample " + std::to_string(i) + " reaches pi/2");
            total += inc;
        }
        prev = ang;
    }
    return static_cast<int>(std::lround(total / (2.0 * std::numbers::pi)));
}

int winding_number(const std::function<std::array<double, 2>(double, double)>& f, int m,
                   const WindingParams& params) {
    for (int count = m; count <= params.max_samples; count *= 2) {
        try {
            return winding_number(CircleMapSamples::sample(f, count), params);
        } catch (const Undersampled&) {
            if (2 * count > params.max_samples) throw;
        }
    }
    throw Undersampled("winding undersampled at the maximum refinement");
}

const char* to_string(ObstructionState s) {
    switch (s) {
        case ObstructionState::obstructed: return "obstructed";
        case ObstructionState::not_obstructed: return "not_obstructed";
        default: return "inconclusive";
    }
}

nlohmann::json ObstructionReport::to_json() const {
    return {{"state", to_string(state)},
            {"winding_closed_loop", winding_closed_loop},
            {"winding_reference", winding_reference},
            {"first_component_max", first_component_max},
            {"min_control", min_control},
            {"samples", samples}};
}

ObstructionReport static_obstruction_check(const std::function<double(double, double)>& u_static,
                                           int m, const WindingParams& params) {
    ObstructionReport rep;
    rep.samples = m;
    rep.winding_reference = 1;

    auto field = [&](double x1, double x2) -> std::array<double, 2> {
        return {x2 * x2 * x2 - (1.0 - x1 * x1) * x2, u_static(x1, x2)};
    };
    CircleMapSamples s = CircleMapSamples::sample(field, m);
    rep.min_control = 1e300;
    for (int i = 0; i < m; ++i) {
        const auto& g = s.g[static_cast<std::size_t>(i)];
        rep.first_component_max = std::max(rep.first_component_max, std::abs(g[0]));
        rep.min_control = std::min(rep.min_control, std::abs(g[1]));
    }
    if (rep.min_control <= params.tol_zero) {
        rep.state = ObstructionState::inconclusive;
        return rep;
    }
    rep.winding_closed_loop = winding_number(field, m, params);
    rep.state = rep.winding_closed_loop != rep.winding_reference
                    ? ObstructionState::obstructed
                    : ObstructionState::not_obstructed;
    return rep;
}

}  // namespace gtf
