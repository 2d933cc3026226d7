#pragma once

#include <iosfwd>
#include <string>

namespace gir::selftest {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;  // one-line evidence: max error, timing, counts
};

CriterionResult check_gf_oracle();        // fast path vs per-window solver
CriterionResult check_gf_identities();    // I = P and constant-guide limits
CriterionResult check_attention();        // row sums, single token, global
CriterionResult check_gradients();        // finite-difference audit
CriterionResult check_overfit();          // 300-step training smoke test
CriterionResult check_mfif_masks();       // focus-mask invariants
CriterionResult check_metric_cases();     // analytic metric values
CriterionResult check_channel_schedule(); // constructed parameter shapes
CriterionResult check_imgf_identity();    // Q_Im = A o I + B, bitwise
CriterionResult check_scope_statement();  // what this build does not verify

/// Runs all checks in order, one pass/fail line each; true iff all pass.
bool run_all(std::ostream& os);

}  // namespace gir::selftest
