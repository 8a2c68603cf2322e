#include "gtf/comparison.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "gtf/errors.hpp"

namespace gtf {

const char* to_string(FnClass k) {
    switch (k) {
        case FnClass::N: return "N";
        case FnClass::K: return "K";
        case FnClass::Kinf: return "Kinf";
    }
    return "?";
}

FnClass fn_class_from_string(const std::string& s) {
    if (s == "N") return FnClass::N;
    if (s == "K") return FnClass::K;
    if (s == "Kinf") return FnClass::Kinf;
    throw BadParameter("unknown function class: " + s);
}

ComparisonFunction ComparisonFunction::make(
    const std::vector<std::pair<double, double>>& samples, FnClass kind, double tail_slope) {
    if (samples.empty()) throw BadParameter("empty sample set");
    if (samples.front().first != 0.0)
        throw MissingOrigin("first knot must be at s=0");
    if ((kind == FnClass::K || kind == FnClass::Kinf) && samples.front().second != 0.0)
        throw MissingOrigin("class K/Kinf requires v(0)=0");
    if (kind == FnClass::Kinf && tail_slope <= 0.0)
        throw BadParameter("class Kinf requires tail_slope > 0");

    ComparisonFunction f;
    f.kind_ = kind;
    f.tail_slope_ = tail_slope;
    f.knots_.reserve(samples.size());
    f.values_.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        auto [s, v] = samples[i];
        if (i > 0) {
            if (s <= f.knots_.back())
                throw BadParameter("knots must be strictly increasing");
            if (kind == FnClass::N ? v < f.values_.back() : v <= f.values_.back())
                throw NonMonotone("values violate monotonicity at knot " + std::to_string(i));
        }
        f.knots_.push_back(s);
        f.values_.push_back(v);
    }
    return f;
}

ComparisonFunction ComparisonFunction::identity() {
    return make({{0.0, 0.0}, {1.0, 1.0}}, FnClass::Kinf, 1.0);
}

double ComparisonFunction::operator()(double s) const {
    if (s <= knots_.front()) return values_.front();
    if (s >= knots_.back()) return values_.back() + tail_slope_ * (s - knots_.back());
    auto it = std::upper_bound(knots_.begin(), knots_.end(), s);
    std::size_t i = static_cast<std::size_t>(it - knots_.begin());
    double t = (s - knots_[i - 1]) / (knots_[i] - knots_[i - 1]);
    return values_[i - 1] + t * (values_[i] - values_[i - 1]);
}

double ComparisonFunction::inverse(double v) const {
    if (kind_ == FnClass::N) throw KindMismatch("inverse requires class K or Kinf");
    if (v <= values_.front()) return knots_.front();
    if (v >= values_.back()) {
        if (tail_slope_ <= 0.0) throw BadParameter("value beyond range of a bounded function");
        return knots_.back() + (v - values_.back()) / tail_slope_;
    }
    auto it = std::upper_bound(values_.begin(), values_.end(), v);
    std::size_t i = static_cast<std::size_t>(it - values_.begin());
    double t = (v - values_[i - 1]) / (values_[i] - values_[i - 1]);
    return knots_[i - 1] + t * (knots_[i] - knots_[i - 1]);
}

nlohmann::json ComparisonFunction::to_json() const {
    return {{"kind", to_string(kind_)},
            {"knots", knots_},
            {"values", values_},
            {"tail_slope", tail_slope_}};
}

ComparisonFunction ComparisonFunction::from_json(const nlohmann::json& j) {
    std::vector<double> ks = j.at("knots").get<std::vector<double>>();
    std::vector<double> vs = j.at("values").get<std::vector<double>>();
    if (ks.size() != vs.size()) throw BadParameter("knots/values size mismatch");
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < ks.size(); ++i) pts.emplace_back(ks[i], vs[i]);
    return make(pts, fn_class_from_string(j.at("kind").get<std::string>()),
                j.at("tail_slope").get<double>());
}

ComparisonFunction compose(const ComparisonFunction& outer, const ComparisonFunction& inner) {
    if (outer.kind() == FnClass::N || inner.kind() == FnClass::N)
        throw KindMismatch("compose requires class K or Kinf operands");

    // Kinks of outer∘inner live at inner's knots and at preimages of
    // outer's knots under inner.
    std::set<double> ks(inner.knots().begin(), inner.knots().end());
    for (double ov : outer.knots()) {
        double v = ov;
        if (v < inner.values().front()) continue;
        if (v > inner.values().back() && inner.tail_slope() <= 0.0) continue;
        ks.insert(inner.inverse(v));
    }
    std::vector<std::pair<double, double>> pts;
    pts.reserve(ks.size());
    for (double s : ks) pts.emplace_back(s, outer(inner(s)));

    FnClass kind = (outer.kind() == FnClass::Kinf && inner.kind() == FnClass::Kinf)
                       ? FnClass::Kinf
                       : FnClass::K;
    return ComparisonFunction::make(pts, kind, outer.tail_slope() * inner.tail_slope());
}

ComparisonFunction next_gain(const ComparisonFunction& gamma_k) {
    if (gamma_k.kind() != FnClass::Kinf)
        throw KindMismatch("next_gain requires a class Kinf gain");
    std::vector<std::pair<double, double>> pts;
    pts.reserve(gamma_k.knots().size());
    for (std::size_t i = 0; i < gamma_k.knots().size(); ++i) {
        double s = gamma_k.knots()[i];
        pts.emplace_back(s, gamma_k.values()[i] + s * s);
    }
    double s_m = gamma_k.knots().back();
    return ComparisonFunction::make(pts, FnClass::Kinf, gamma_k.tail_slope() + 2.0 * s_m);
}

ClassReport verify_class(const ComparisonFunction& f, FnClass kind) {
    ClassReport rep;
    const auto& ks = f.knots();
    const auto& vs = f.values();
    if (ks.front() != 0.0 ||
        ((kind == FnClass::K || kind == FnClass::Kinf) && vs.front() != 0.0)) {
        rep.origin_ok = false;
        rep.first_violation = 0;
    }
    for (std::size_t i = 1; i < vs.size(); ++i) {
        bool bad = (kind == FnClass::N) ? vs[i] < vs[i - 1] : vs[i] <= vs[i - 1];
        if (bad) {
            rep.monotone_ok = false;
            if (rep.first_violation < 0) rep.first_violation = static_cast<int>(i);
            break;
        }
    }
    if (kind == FnClass::Kinf && f.tail_slope() <= 0.0) {
        rep.unbounded_ok = false;
        if (rep.first_violation < 0) rep.first_violation = static_cast<int>(ks.size()) - 1;
    }
    return rep;
}

double KLFunction::operator()(double s, double t) const {
    return gain(s) * std::exp(-decay_rate * t);
}

nlohmann::json KLFunction::to_json() const {
    return {{"gain", gain.to_json()}, {"decay_rate", decay_rate}};
}

KLFunction KLFunction::from_json(const nlohmann::json& j) {
    return {ComparisonFunction::from_json(j.at("gain")), j.at("decay_rate").get<double>()};
}

ClassReport verify_class(const KLFunction& beta) {
    ClassReport rep = verify_class(beta.gain, FnClass::Kinf);
    rep.decay_ok = beta.decay_rate > 0.0;
    return rep;
}

}  // namespace gtf
