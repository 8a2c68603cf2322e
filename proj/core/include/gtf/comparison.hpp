#pragma once

#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace gtf {

enum class FnClass { N, K, Kinf };

const char* to_string(FnClass k);
FnClass fn_class_from_string(const std::string& s);

/// Report produced by verify_class; never throws, records the first bad knot.
struct ClassReport {
    bool origin_ok = true;
    bool monotone_ok = true;
    bool unbounded_ok = true;  // tail_slope > 0 proxy, only meaningful for Kinf
    bool decay_ok = true;      // only meaningful for KL
    int first_violation = -1;  // knot index, -1 if clean
    bool ok() const { return origin_ok && monotone_ok && unbounded_ok && decay_ok; }
};

/// Continuous piecewise-linear comparison function on [0, inf), extended
/// linearly with tail_slope beyond the last knot. Immutable after
/// construction; evaluation is pure.
class ComparisonFunction {
  public:
    ComparisonFunction() = default;

    /// Validating constructor for the three monotone classes.
    static ComparisonFunction make(const std::vector<std::pair<double, double>>& samples,
                                   FnClass kind, double tail_slope = 1.0);

    /// Samples a callable on the given knot grid (first knot must be 0).
    template <class F>
    static ComparisonFunction sample(F&& f, const std::vector<double>& knots, FnClass kind,
                                     double tail_slope) {
        std::vector<std::pair<double, double>> pts;
        pts.reserve(knots.size());
        for (double s : knots) pts.emplace_back(s, f(s));
        return make(pts, kind, tail_slope);
    }

    static ComparisonFunction identity();

    double operator()(double s) const;

    /// Monotone inverse by exact per-segment solve (K/Kinf only).
    double inverse(double v) const;

    FnClass kind() const { return kind_; }
    const std::vector<double>& knots() const { return knots_; }
    const std::vector<double>& values() const { return values_; }
    double tail_slope() const { return tail_slope_; }

    nlohmann::json to_json() const;
    static ComparisonFunction from_json(const nlohmann::json& j);

  private:
    FnClass kind_ = FnClass::K;
    std::vector<double> knots_;
    std::vector<double> values_;
    double tail_slope_ = 1.0;
};

/// Exact piecewise-linear composition outer(inner(s)). Both operands must be
/// K or Kinf; the knot set is inner's knots plus the preimages of outer's
/// knots, so the result is exact everywhere, not a resampling.
ComparisonFunction compose(const ComparisonFunction& outer, const ComparisonFunction& inner);

/// Gain recursion step: gamma_{k+1}(s) = gamma_k(s) + s^2 at every knot.
ComparisonFunction next_gain(const ComparisonFunction& gamma_k);

ClassReport verify_class(const ComparisonFunction& f, FnClass kind);

/// beta(s, t) = gain(s) * exp(-decay_rate * t).
struct KLFunction {
    ComparisonFunction gain;  // class Kinf in s
    double decay_rate = 1.0;

    double operator()(double s, double t) const;

    nlohmann::json to_json() const;
    static KLFunction from_json(const nlohmann::json& j);
};

ClassReport verify_class(const KLFunction& beta);

}  // namespace gtf
