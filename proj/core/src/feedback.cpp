#include "gtf/feedback.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "gtf/errors.hpp"

namespace gtf {

std::vector<double> FeedbackLaw::to_z(double t, std::span<const double> x) const {
    if (x.size() != stages.size()) throw DimensionMismatch("to_z: state dimension mismatch");
    std::vector<double> z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double xi = x[i] - (i < x_star.size() ? x_star[i] : 0.0);
        z[i] = i == 0 ? xi
                      : xi - stages[i - 1](t, std::span<const double>(z.data(), i));
    }
    return z;
}

double FeedbackLaw::control(double t, std::span<const double> x) const {
    std::vector<double> z = to_z(t, x);
    double u = u_star + stages.back()(t, z);
    if (!std::isfinite(u)) throw NonFiniteValue("feedback control is not finite");
    return u;
}

nlohmann::json FeedbackLaw::to_json(int nt, int nz, double z_range) const {
    nlohmann::json j;
    j["T"] = T;
    j["x_star"] = x_star;
    j["u_star"] = u_star;
    j["representation"] = "tabulated";
    j["grid"] = {{"nt", nt}, {"nz", nz}, {"z_range", z_range}};
    nlohmann::json tabs = nlohmann::json::array();
    for (std::size_t s = 0; s < stages.size(); ++s) {
        // Flattened table over t x z_1 x ... x z_{s+1}, z-major last.
        std::vector<double> table;
        std::vector<double> z(s + 1, 0.0);
        std::size_t cells = 1;
        for (std::size_t i = 0; i <= s; ++i) cells *= static_cast<std::size_t>(nz);
        for (int it = 0; it < nt; ++it) {
            double t = T * it / nt;
            for (std::size_t c = 0; c < cells; ++c) {
                std::size_t rem = c;
                for (std::size_t i = 0; i <= s; ++i) {
                    std::size_t idx = rem % static_cast<std::size_t>(nz);
                    rem /= static_cast<std::size_t>(nz);
                    z[i] = -z_range + 2.0 * z_range * static_cast<double>(idx) / (nz - 1);
                }
                table.push_back(stages[s](t, z));
            }
        }
        tabs.push_back({{"stage", s + 1}, {"values", table}});
    }
    j["stages"] = tabs;
    return j;
}

}  // namespace gtf
