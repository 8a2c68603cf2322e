#include "gtf/system.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gtf/errors.hpp"

namespace gtf {

namespace {

EvalContext ctx_at(double t, double T, std::span<const double> x, double u) {
    double w = 2.0 * std::numbers::pi * t / T;
    return EvalContext{x, u, std::sin(w), std::cos(w)};
}

}  // namespace

GtfSystem GtfSystem::assemble(int n, double T, std::vector<Expr::Ptr> f,
                              std::vector<Expr::Ptr> phi, std::vector<double> x_star,
                              double u_star, std::vector<int> dist_dims) {
    if (n < 1) throw BadParameter("n must be >= 1");
    if (T <= 0.0) throw BadParameter("period T must be positive");
    if (static_cast<int>(f.size()) != n || static_cast<int>(phi.size()) != n)
        throw DimensionMismatch("need exactly n entries in f and Phi");
    if (static_cast<int>(x_star.size()) != n)
        throw DimensionMismatch("x_star dimension mismatch");
    if (dist_dims.empty()) dist_dims.assign(static_cast<std::size_t>(n), 1);
    if (static_cast<int>(dist_dims.size()) != n)
        throw DimensionMismatch("dist_dims dimension mismatch");

    for (int i = 0; i < n; ++i) {
        // f_i may reach x_{i+1} (x_{n+1} being u); Phi_i only x_1..x_i.
        if (f[static_cast<std::size_t>(i)]->max_state_index() > i + 2 ||
            (i + 2 > n && f[static_cast<std::size_t>(i)]->max_state_index() > n))
            throw TriangularityViolation("f" + std::to_string(i + 1) +
                                         " references a state beyond x" +
                                         std::to_string(i + 2));
        if (i + 1 < n && f[static_cast<std::size_t>(i)]->references_control())
            throw TriangularityViolation("f" + std::to_string(i + 1) + " references u");
        if (phi[static_cast<std::size_t>(i)]->max_state_index() > i + 1)
            throw TriangularityViolation("Phi" + std::to_string(i + 1) +
                                         " references a state beyond x" +
                                         std::to_string(i + 1));
        if (phi[static_cast<std::size_t>(i)]->references_control())
            throw TriangularityViolation("Phi" + std::to_string(i + 1) + " references u");
    }

    GtfSystem sys;
    sys.n = n;
    sys.T = T;
    sys.f = std::move(f);
    sys.phi = std::move(phi);
    sys.x_star = std::move(x_star);
    sys.u_star = u_star;
    sys.dist_dims = std::move(dist_dims);

    double res = 0.0;
    for (int k = 0; k <= 32; ++k) {
        double t = T * k / 32.0;
        for (int i = 0; i < n; ++i)
            res = std::max(res, std::abs(sys.eval_f(i, t, sys.x_star, sys.u_star)));
    }
    if (res > 1e-9)
        throw BadParameter("f(t, x*, u*) does not vanish (residual " + std::to_string(res) +
                           ")");
    return sys;
}

GtfSystem GtfSystem::recentred() const {
    GtfSystem s = *this;
    for (auto& e : s.f) e = e->shifted(x_star, u_star);
    for (auto& e : s.phi) e = e->shifted(x_star, u_star);
    std::fill(s.x_star.begin(), s.x_star.end(), 0.0);
    s.u_star = 0.0;
    return s;
}

int GtfSystem::total_dist_dim() const {
    int m = 0;
    for (int d : dist_dims) m += d;
    return m;
}

double GtfSystem::eval_f(int i, double t, std::span<const double> x, double u) const {
    return f[static_cast<std::size_t>(i)]->eval(ctx_at(t, T, x, u));
}

double GtfSystem::eval_phi(int i, double t, std::span<const double> x) const {
    return phi[static_cast<std::size_t>(i)]->eval(ctx_at(t, T, x, 0.0));
}

std::vector<double> GtfSystem::rhs(double t, std::span<const double> x, double u,
                                   std::span<const double> delta) const {
    if (static_cast<int>(x.size()) != n) throw DimensionMismatch("state dimension mismatch");
    if (!delta.empty() && static_cast<int>(delta.size()) != total_dist_dim())
        throw DimensionMismatch("disturbance dimension mismatch");
    std::vector<double> dx(static_cast<std::size_t>(n));
    int off = 0;
    for (int i = 0; i < n; ++i) {
        double v = eval_f(i, t, x, u);
        if (!delta.empty()) {
            double p = eval_phi(i, t, x);
            for (int j = 0; j < dist_dims[static_cast<std::size_t>(i)]; ++j)
                v += delta[static_cast<std::size_t>(off + j)] * p;
        }
        off += dist_dims[static_cast<std::size_t>(i)];
        if (!std::isfinite(v)) throw NonFiniteValue("rhs is not finite");
        dx[static_cast<std::size_t>(i)] = v;
    }
    return dx;
}

nlohmann::json GtfSystem::to_json() const {
    nlohmann::json j;
    j["n"] = n;
    j["T"] = T;
    for (const auto& e : f) j["f"].push_back(e->print());
    for (const auto& e : phi) j["Phi"].push_back(e->print());
    j["x_star"] = x_star;
    j["u_star"] = u_star;
    j["dist_dims"] = dist_dims;
    return j;
}

namespace {

std::vector<double> parse_number_list(const std::string& s) {
    std::vector<double> out;
    std::istringstream in(s);
    double v;
    while (in >> v) out.push_back(v);
    return out;
}

}  // namespace

GtfSystem GtfSystem::parse_config(const std::string& text) {
    int n = 0;
    double T = 0.0, u_star = 0.0;
    std::vector<std::string> f_src, phi_src;
    std::vector<double> x_star;
    std::vector<int> dist_dims;

    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty()) continue;
        if (key == "n")
            n = std::stoi(val);
        else if (key == "T")
            T = std::stod(val);
        else if (key == "u_star")
            u_star = std::stod(val);
        else if (key == "x_star")
            x_star = parse_number_list(val);
        else if (key == "dist_dims") {
            for (double d : parse_number_list(val)) dist_dims.push_back(static_cast<int>(d));
        } else if (key.rfind("f[", 0) == 0) {
            std::size_t idx = static_cast<std::size_t>(std::stoi(key.substr(2)));
            if (f_src.size() < idx) f_src.resize(idx);
            f_src[idx - 1] = val;
        } else if (key.rfind("Phi[", 0) == 0) {
            std::size_t idx = static_cast<std::size_t>(std::stoi(key.substr(4)));
            if (phi_src.size() < idx) phi_src.resize(idx);
            phi_src[idx - 1] = val;
        } else {
            throw BadParameter("unknown system config key '" + key + "' on line " +
                               std::to_string(lineno));
        }
    }
    if (n == 0) throw BadParameter("system config missing n");
    if (x_star.empty()) x_star.assign(static_cast<std::size_t>(n), 0.0);
    std::vector<Expr::Ptr> f, phi;
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(f_src.size()) <= i || f_src[static_cast<std::size_t>(i)].empty())
            throw BadParameter("missing f[" + std::to_string(i + 1) + "]");
        f.push_back(parse_dynamics(f_src[static_cast<std::size_t>(i)]));
        std::string p = (static_cast<int>(phi_src.size()) > i &&
                         !phi_src[static_cast<std::size_t>(i)].empty())
                            ? phi_src[static_cast<std::size_t>(i)]
                            : "0";
        phi.push_back(parse_dynamics(p));
    }
    return assemble(n, T, std::move(f), std::move(phi), std::move(x_star), u_star,
                    std::move(dist_dims));
}

GtfSystem GtfSystem::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw BadParameter("cannot open system file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::span<const double> DisturbanceSignal::at(double t) const {
    if (values.empty()) return {};
    std::size_t i = 0;
    while (i + 1 < breakpoints.size() && t >= breakpoints[i + 1]) ++i;
    return values[std::min(i, values.size() - 1)];
}

DisturbanceSignal DisturbanceSignal::zero(int dim) {
    DisturbanceSignal d;
    d.breakpoints = {0.0};
    d.values = {std::vector<double>(static_cast<std::size_t>(dim), 0.0)};
    d.linf = 0.0;
    return d;
}

DisturbanceSignal DisturbanceSignal::constant(std::vector<double> value) {
    DisturbanceSignal d;
    d.breakpoints = {0.0};
    double norm = 0.0;
    for (double v : value) norm += v * v;
    d.linf = std::sqrt(norm);
    d.values = {std::move(value)};
    return d;
}

DisturbanceSignal make_disturbance(DisturbanceKind kind, double amplitude, double dwell,
                                   std::uint64_t seed, double horizon, int dim) {
    if (amplitude < 0.0) throw BadParameter("amplitude must be >= 0");
    if (dwell <= 0.0) throw BadParameter("dwell must be > 0");
    if (dim < 1) throw BadParameter("disturbance dimension must be >= 1");

    if (kind == DisturbanceKind::zero) return DisturbanceSignal::zero(dim);
    if (kind == DisturbanceKind::constant) {
        // amplitude along the first channel, |value| = amplitude
        std::vector<double> v(static_cast<std::size_t>(dim), 0.0);
        v[0] = amplitude;
        return DisturbanceSignal::constant(std::move(v));
    }

    DisturbanceSignal d;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    int steps = std::max(1, static_cast<int>(std::ceil(horizon / dwell)));
    for (int k = 0; k < steps; ++k) {
        d.breakpoints.push_back(k * dwell);
        std::vector<double> v(static_cast<std::size_t>(dim));
        if (kind == DisturbanceKind::piecewise_random) {
            // uniform in the amplitude ball by rejection
            for (;;) {
                double norm = 0.0;
                for (auto& c : v) {
                    c = unit(rng);
                    norm += c * c;
                }
                if (norm <= 1.0) {
                    for (auto& c : v) c *= amplitude;
                    break;
                }
            }
        } else {  // sinusoid_held
            double phase = 2.0 * std::numbers::pi * k * dwell / std::max(horizon, dwell);
            for (int j = 0; j < dim; ++j)
                v[static_cast<std::size_t>(j)] =
                    amplitude * std::sin(phase + j) / std::sqrt(static_cast<double>(dim));
        }
        double norm = 0.0;
        for (double c : v) norm += c * c;
        d.linf = std::max(d.linf, std::sqrt(norm));
        d.values.push_back(std::move(v));
    }
    return d;
}

bool AssumptionReport::a2_all() const {
    return std::all_of(a2_ok.begin(), a2_ok.end(), [](bool b) { return b; });
}

bool AssumptionReport::a3_all() const {
    return std::all_of(a3_ok.begin(), a3_ok.end(), [](bool b) { return b; });
}

bool AssumptionReport::ok() const {
    return periodicity_residual <= 1e-9 && a2_all() && a3_all() &&
           f_equilibrium_residual <= 1e-9;
}

nlohmann::json AssumptionReport::to_json() const {
    return {{"periodicity_residual", periodicity_residual},
            {"a2_ok", a2_ok},
            {"a3_ok", a3_ok},
            {"a3_min_derivative", a3_min_derivative},
            {"f_equilibrium_residual", f_equilibrium_residual},
            {"phi_equilibrium_residual", phi_equilibrium_residual},
            {"ok", ok()}};
}

AssumptionReport check_assumptions(const GtfSystem& sys, const AssumptionGrid& grid) {
    AssumptionReport rep;
    std::vector<double> x(static_cast<std::size_t>(sys.n));

    // Periodicity: zero by grammar construction, asserted anyway.
    for (int k = 0; k < grid.nt; ++k) {
        double t = sys.T * k / grid.nt;
        for (int i = 0; i < sys.n; ++i) {
            for (int s = 0; s < grid.nx; ++s) {
                for (int j = 0; j < sys.n; ++j)
                    x[static_cast<std::size_t>(j)] =
                        grid.box_radius * std::cos(1.7 * (s + 1) * (j + 1));
                double u = grid.control_range * std::sin(0.9 * (s + 1));
                double a = sys.eval_f(i, t, x, u);
                double b = sys.eval_f(i, t + sys.T, x, u);
                rep.periodicity_residual = std::max(rep.periodicity_residual, std::abs(a - b));
            }
        }
    }

    // A2 proxy: sampled range of x_{i+1} |-> f_i covers [-range_target, range_target].
    for (int i = 0; i < sys.n; ++i) {
        double lo = 1e300, hi = -1e300;
        for (int k = 0; k < grid.nt; ++k) {
            double t = sys.T * k / grid.nt;
            for (int s = 0; s <= 400; ++s) {
                double w = -grid.control_range + 2.0 * grid.control_range * s / 400.0;
                std::fill(x.begin(), x.end(), 0.0);
                double u = sys.u_star;
                if (i + 1 < sys.n)
                    x[static_cast<std::size_t>(i + 1)] = w;
                else
                    u = w;
                double v = sys.eval_f(i, t, x, u);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        rep.a2_ok.push_back(lo <= -grid.range_target && hi >= grid.range_target);
    }

    // A3: |df_i/dx_{i+1}| at x* along sampled t, central differences.
    for (int i = 0; i < sys.n; ++i) {
        double min_d = 1e300;
        for (int k = 0; k <= grid.nt; ++k) {
            double t = sys.T * k / grid.nt;
            auto eval_at = [&](double w) {
                std::vector<double> xs(sys.x_star.begin(), sys.x_star.end());
                double u = sys.u_star;
                if (i + 1 < sys.n)
                    xs[static_cast<std::size_t>(i + 1)] += w;
                else
                    u += w;
                return sys.eval_f(i, t, xs, u);
            };
            double d = (eval_at(grid.h_diff) - eval_at(-grid.h_diff)) / (2.0 * grid.h_diff);
            min_d = std::min(min_d, std::abs(d));
        }
        rep.a3_ok.push_back(min_d >= grid.deriv_floor);
        rep.a3_min_derivative.push_back(min_d);
    }

    for (int k = 0; k <= grid.nt; ++k) {
        double t = sys.T * k / grid.nt;
        for (int i = 0; i < sys.n; ++i) {
            rep.f_equilibrium_residual =
                std::max(rep.f_equilibrium_residual,
                         std::abs(sys.eval_f(i, t, sys.x_star, sys.u_star)));
            rep.phi_equilibrium_residual = std::max(
                rep.phi_equilibrium_residual, std::abs(sys.eval_phi(i, t, sys.x_star)));
        }
    }
    return rep;
}

}  // namespace gtf
