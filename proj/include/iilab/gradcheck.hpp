#pragma once

#include <string>
#include <vector>

namespace iilab {

struct GradCheckRow {
    std::string name;
    double max_rel_err = 0.0;
};

inline constexpr double kGradCheckThreshold = 1e-5;

// Finite-difference checks for every differentiable op plus the full
// combined loss across batch sizes and encoder kinds. Deterministic inputs.
std::vector<GradCheckRow> grad_check_battery();

// One aligned "name  err  ok/FAIL" line per row plus a verdict line.
std::string grad_check_report(const std::vector<GradCheckRow>& rows);

bool grad_check_passed(const std::vector<GradCheckRow>& rows);

}  // namespace iilab
