#pragma once

#include <string>
#include <vector>

namespace vcmr {

struct GradCheckResult {
    std::string name;
    double max_err = 0.0;
    bool pass = false;
};

// Central finite differences (eps 1e-5) against the analytic gradients at
// 64-bit, one entry per op kind; `seeds` random inputs each. Error metric is
// |analytic - fd| / max(1, |analytic|, |fd|).
std::vector<GradCheckResult> run_op_gradchecks(int seeds = 20, double tol = 1e-4);

// Finite-difference check of the full pipeline loss (encoders -> fusion ->
// query-aware coupling -> heads -> shared-normalization losses) against
// every parameter coordinate of a miniature model.
GradCheckResult run_composite_gradcheck(int seeds = 5, double tol = 1e-4);

std::string gradcheck_table(const std::vector<GradCheckResult>& results);

}  // namespace vcmr
