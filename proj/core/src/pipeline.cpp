#include "gtf/pipeline.hpp"

#include <algorithm>
#include <string>

#include "gtf/errors.hpp"

namespace gtf {

AutoSynthesis synthesize_auto(const GtfSystem& sys, const AutoParams& params) {
    GtfSystem c = sys.recentred();
    AutoSynthesis out;
    out.law.T = sys.T;
    out.law.x_star = sys.x_star;
    out.law.u_star = sys.u_star;

    ExtendedSubsystem ext = base_stage(c);
    ComparisonFunction gamma = default_gamma1();
    ComparisonFunction gamma_prev = ComparisonFunction::identity();
    double certified_ball = 0.0;  // 0 = global; set once a cover stage appears

    for (int stage = 0; stage < c.n; ++stage) {
        StageLaw alpha;
        bool regular = true;
        try {
            check_regularity(ext, params.synth);
            alpha = synthesize_virtual_control(ext, params.synth);
        } catch (const DegenerateControlDirection&) {
            regular = false;
            StageCover sc;
            sc.stage = stage;
            LocalParams lp = params.local;
            lp.synth = params.synth;
            LocalSynthesisResult loc = synthesize_local_feedback(ext, gamma, lp);
            sc.local = loc.local;
            try {
                sc.cover = build_ladder(ext, gamma_prev, gamma, loc.local.radius, loc.d_head,
                                        params.ladder);
                CellParams cp = params.cells;
                cp.synth = params.synth;
                sc.cells = build_cells(ext, sc.cover, gamma, cp);
                alpha = blend_feedback(sc.cells, sc.local, sc.cover, cp);
            } catch (const Error& e) {
                throw LocalSynthesisFailed("stage " + std::to_string(stage + 1) +
                                           " cover construction: " + e.what());
            }
            // the blend equals nu inside r_{-q0+1}, so that ball is certified
            double r_in = sc.cover.r_at(-sc.cover.q0 + 1);
            certified_ball = certified_ball > 0.0 ? std::min(certified_ball, r_in) : r_in;
            out.covers.push_back(std::move(sc));
        }

        out.stage_regular.push_back(regular);
        out.stages.push_back(ext);
        DissGrid grid = params.synth.diss;
        if (certified_ball > 0.0) {
            grid.ball_radius = certified_ball;
            grid.y_radius = certified_ball;
        }
        out.reports.push_back(check_dissipation(ext, alpha, gamma, grid));
        out.law.stages.push_back(alpha);
        if (stage + 1 < c.n) {
            ext = extend_with_row(ext, alpha, c, stage + 1, params.synth.h_diff);
            gamma_prev = gamma;
            gamma = next_gain(gamma);
        }
    }
    out.gamma_n = gamma;
    return out;
}

}  // namespace gtf
