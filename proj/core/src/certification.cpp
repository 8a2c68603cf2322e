#include "gtf/certification.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <nlohmann/json.hpp>

#include "gtf/errors.hpp"

namespace gtf {

nlohmann::json DissGrid::to_json() const {
    return {{"nt", nt},           {"ny", ny},
            {"ns", ns},           {"y_radius", y_radius},
            {"s_max", s_max},     {"ball_radius", ball_radius},
            {"tol", tol}};
}

nlohmann::json DissipationReport::to_json() const {
    nlohmann::json j{{"grid", grid.to_json()},
                     {"nodes", nodes},
                     {"pass_fraction", pass_fraction},
                     {"worst_violation", worst_violation},
                     {"margin", margin},
                     {"tol", grid.tol},
                     {"pass", pass()}};
    if (has_witness)
        j["witness"] = {{"t", witness_t}, {"y", witness_y}, {"s", witness_s}};
    return j;
}

DissipationReport check_dissipation(const ExtendedSubsystem& ext, const StageLaw& v,
                                    const ComparisonFunction& gamma, const DissGrid& grid) {
    if (grid.nt < 1 || grid.ny < 2 || grid.ns < 1) throw BadParameter("dissipation grid too small");
    DissipationReport rep;
    rep.grid = grid;
    rep.margin = 1e300;
    rep.worst_violation = -1e300;

    int dim = ext.dim();
    long pass = 0;
    std::vector<double> y(static_cast<std::size_t>(dim));
    std::size_t cells = 1;
    for (int i = 0; i < dim; ++i) cells *= static_cast<std::size_t>(grid.ny);

    for (int it = 0; it < grid.nt; ++it) {
        double t = ext.T * it / grid.nt;
        for (std::size_t c = 0; c < cells; ++c) {
            std::size_t rem = c;
            double ysq = 0.0;
            for (int i = 0; i < dim; ++i) {
                std::size_t idx = rem % static_cast<std::size_t>(grid.ny);
                rem /= static_cast<std::size_t>(grid.ny);
                y[static_cast<std::size_t>(i)] =
                    -grid.y_radius +
                    2.0 * grid.y_radius * static_cast<double>(idx) / (grid.ny - 1);
                ysq += y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
            }
            if (grid.ball_radius > 0.0 && ysq > grid.ball_radius * grid.ball_radius) continue;

            std::vector<double> psi = ext.psi(t, y, v(t, y));
            std::vector<double> phi = ext.phi_matrix(t, y);
            double drift = 0.0;
            for (int i = 0; i < dim; ++i) drift += y[static_cast<std::size_t>(i)] * psi[static_cast<std::size_t>(i)];
            drift *= 2.0;
            // worst case over |Delta| = s is Delta aligned with phi^T y
            double cnorm = 0.0;
            for (int j = 0; j < ext.N_k1; ++j) {
                double cj = 0.0;
                for (int i = 0; i < dim; ++i)
                    cj += y[static_cast<std::size_t>(i)] *
                          phi[static_cast<std::size_t>(i * ext.N_k1 + j)];
                cnorm += cj * cj;
            }
            cnorm = std::sqrt(cnorm);

            for (int is = 0; is < grid.ns; ++is) {
                double s = grid.ns == 1 ? 0.0
                                        : grid.s_max * static_cast<double>(is) / (grid.ns - 1);
                double viol = drift + 2.0 * s * cnorm + ysq - gamma(s);
                ++rep.nodes;
                if (viol <= grid.tol) {
                    ++pass;
                } else if (viol > rep.worst_violation || !rep.has_witness) {
                    rep.has_witness = true;
                    rep.witness_t = t;
                    rep.witness_y = y;
                    rep.witness_s = s;
                }
                rep.worst_violation = std::max(rep.worst_violation, viol);
                if (ysq > 0.0) rep.margin = std::min(rep.margin, -viol);
            }
        }
    }
    rep.pass_fraction = rep.nodes == 0 ? 0.0
                                       : static_cast<double>(pass) / static_cast<double>(rep.nodes);
    if (rep.pass()) rep.has_witness = false;
    if (rep.margin == 1e300) rep.margin = 0.0;
    return rep;
}

nlohmann::json UgsReport::to_json() const {
    return {{"ensemble_id", ensemble_id}, {"upsilon", upsilon.to_json()},
            {"fitted", fitted},           {"k_representable", k_representable},
            {"violations", violations},   {"max_ratio", max_ratio},
            {"tol_rel", tol_rel},         {"witness_index", witness_index},
            {"pass", pass()}};
}

UgsReport check_ugs(const Ensemble& ens, const ComparisonFunction& upsilon, double tol_rel) {
    UgsReport rep;
    rep.ensemble_id = ens.id;
    rep.upsilon = upsilon;
    rep.tol_rel = tol_rel;
    for (const auto& tr : ens.trajectories) {
        double bound = std::max(upsilon(tr.x0_norm), upsilon(tr.dist_linf));
        double sup = tr.sup_norm();
        bool bad = tr.status == Trajectory::Status::blowup;
        if (bound > 0.0) {
            rep.max_ratio = std::max(rep.max_ratio, sup / bound);
            bad = bad || sup > bound * (1.0 + tol_rel);
        } else {
            bad = bad || sup > 1e-9;
        }
        if (bad) {
            ++rep.violations;
            if (rep.witness_index < 0) rep.witness_index = tr.index;
        }
    }
    return rep;
}

namespace {

ComparisonFunction monotone_envelope(const std::vector<std::pair<double, double>>& pts) {
    std::map<double, double> best;
    best[0.0] = 0.0;
    for (auto [m, s] : pts) {
        auto [it, fresh] = best.emplace(m, s);
        if (!fresh) it->second = std::max(it->second, s);
    }
    std::vector<std::pair<double, double>> knots;
    double run = 0.0;
    for (auto [m, s] : best) {
        run = std::max(run, s);
        knots.emplace_back(m, run);
    }
    return ComparisonFunction::make(knots, FnClass::N, 1.0);
}

double tail_start(const Trajectory& tr, double tail_fraction) {
    double span = tr.times.back() - tr.times.front();
    return tr.times.back() - tail_fraction * span;
}

}  // namespace

UgsReport fit_ugs(const Ensemble& ens) {
    UgsReport rep;
    rep.ensemble_id = ens.id;
    rep.fitted = true;
    std::vector<std::pair<double, double>> pts;
    for (const auto& tr : ens.trajectories) {
        if (tr.status == Trajectory::Status::blowup) {
            ++rep.violations;
            if (rep.witness_index < 0) rep.witness_index = tr.index;
            continue;
        }
        pts.emplace_back(std::max(tr.x0_norm, tr.dist_linf), tr.sup_norm());
    }
    rep.upsilon = monotone_envelope(pts);
    rep.k_representable = rep.upsilon.values().front() <= 1e-9;
    rep.max_ratio = 1.0;
    return rep;
}

nlohmann::json AgReport::to_json() const {
    return {{"ensemble_id", ensemble_id}, {"tail_fraction", tail_fraction},
            {"tol_ag", tol_ag},           {"violations", violations},
            {"worst_excess", worst_excess}, {"witness_index", witness_index},
            {"pass", pass()}};
}

AgReport check_ag(const Ensemble& ens, const ComparisonFunction& gamma, double tail_fraction,
                  double tol_ag) {
    if (tail_fraction <= 0.0 || tail_fraction > 1.0)
        throw BadParameter("tail_fraction must be in ]0,1]");
    AgReport rep;
    rep.ensemble_id = ens.id;
    rep.tail_fraction = tail_fraction;
    rep.tol_ag = tol_ag;
    rep.worst_excess = -1e300;
    for (const auto& tr : ens.trajectories) {
        if (tr.status == Trajectory::Status::blowup) {
            ++rep.violations;
            if (rep.witness_index < 0) rep.witness_index = tr.index;
            rep.worst_excess = std::max(rep.worst_excess, 1e300);
            continue;
        }
        if (tr.times.size() < 2 ||
            tail_start(tr, tail_fraction) <= tr.times.front() + 0.5 * (tr.times[1] - tr.times[0]))
            throw HorizonTooShort("tail window has too few samples");
        double excess = tr.tail_max(tail_start(tr, tail_fraction)) - gamma(tr.dist_linf);
        rep.worst_excess = std::max(rep.worst_excess, excess);
        if (excess > tol_ag) {
            ++rep.violations;
            if (rep.witness_index < 0) rep.witness_index = tr.index;
        }
    }
    if (rep.worst_excess == -1e300) rep.worst_excess = 0.0;
    return rep;
}

ComparisonFunction fit_gamma(const Ensemble& ens, double tail_fraction) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& tr : ens.trajectories) {
        if (tr.status == Trajectory::Status::blowup || tr.times.size() < 2) continue;
        pts.emplace_back(tr.dist_linf, tr.tail_max(tail_start(tr, tail_fraction)));
    }
    return monotone_envelope(pts);
}

nlohmann::json IssVerdict::to_json() const {
    return {{"ensemble_id", ensemble_id},
            {"ugs_pass", ugs_pass},
            {"ag_pass", ag_pass},
            {"verdict", verdict}};
}

IssVerdict iss_verdict(const UgsReport& ugs, const AgReport& ag) {
    if (ugs.ensemble_id != ag.ensemble_id)
        throw EnsembleMismatch("UGS and AG reports come from different ensembles ('" +
                               ugs.ensemble_id + "' vs '" + ag.ensemble_id + "')");
    IssVerdict v;
    v.ensemble_id = ugs.ensemble_id;
    v.ugs_pass = ugs.pass();
    v.ag_pass = ag.pass();
    v.verdict = v.ugs_pass && v.ag_pass;
    return v;
}

}  // namespace gtf
