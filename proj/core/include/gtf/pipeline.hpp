#pragma once

#include <vector>

#include "gtf/backstepping.hpp"
#include "gtf/cover.hpp"

namespace gtf {

struct AutoParams {
    SynthesisParams synth;
    LocalParams local;
    LadderParams ladder;
    CellParams cells;
};

/// Cover-path artifacts of one degenerate stage.
struct StageCover {
    int stage = 0;  // 0-based plant row
    LocalFeedback local;
    AnnulusCover cover;
    std::vector<CoverCell> cells;
};

struct AutoSynthesis {
    FeedbackLaw law;
    ComparisonFunction gamma_n;
    std::vector<ExtendedSubsystem> stages;
    std::vector<DissipationReport> reports;
    std::vector<bool> stage_regular;
    std::vector<StageCover> covers;
};

/// Full recursion that tries the regular identity at each stage and falls
/// back to the local-feedback + annulus-cover construction when the control
/// direction degenerates on the working box. Dissipation reports for cover
/// stages and every stage after one are restricted to the certified ball.
AutoSynthesis synthesize_auto(const GtfSystem& sys, const AutoParams& params = {});

}  // namespace gtf
