#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gtf/extended.hpp"
#include "gtf/system.hpp"

namespace gtf::testing {

inline GtfSystem chain2() {
    return GtfSystem::parse_config(
        "n = 2\nT = 6\nf[1] = x2\nPhi[1] = 1\nf[2] = u\nPhi[2] = 1\n");
}

inline GtfSystem example1() {
    return GtfSystem::parse_config(
        "n = 2\nT = 6\nf[1] = x2^3 - (1 - x1^2)*x2\nPhi[1] = 0\nf[2] = u\nPhi[2] = 1\n");
}

inline GtfSystem scalar_integrator() {
    return GtfSystem::parse_config("n = 1\nT = 6\nf[1] = u\nPhi[1] = 1\n");
}

/// Base-stage-shaped subsystem (k = 0) with a custom scalar drift and
/// disturbance column, for targeted oracle tests.
inline ExtendedSubsystem scalar_stage(
    std::function<double(double t, double y, double v)> f, double phi = 1.0, double T = 6.0) {
    ExtendedSubsystem ext;
    ext.k = 0;
    ext.N_k = 0;
    ext.N_k1 = 1;
    ext.T = T;
    ext.g = [](double, std::span<const double>, double) { return std::vector<double>{}; };
    ext.g_k1 = [f](double t, std::span<const double>, double z, double v) { return f(t, z, v); };
    ext.phi_top = [](double, std::span<const double>) { return std::vector<double>{}; };
    ext.phi_bot = [phi](double, std::span<const double>) { return std::vector<double>{phi}; };
    ext.to_x = [](double, std::span<const double> y) {
        return std::vector<double>(y.begin(), y.end());
    };
    return ext;
}

inline double norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace gtf::testing
