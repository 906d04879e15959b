#pragma once

// The acceptance suite: nine end-to-end checks with fixed tolerances and
// runtime limits. All random instances derive from one seed.

#include <functional>
#include <string>
#include <vector>

namespace hs {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
  /// 0 when the criterion has no runtime limit
  double limit_seconds = 0.0;
};

struct AcceptanceOptions {
  unsigned seed = 0;
  /// criterion ids to run; empty runs all nine
  std::vector<int> only;
};

inline constexpr int kCriterionCount = 9;

CriterionResult run_criterion(int id, const AcceptanceOptions& opts = {});
/// Runs the selected criteria in order; `progress` sees each result as it
/// completes.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts = {},
                                            const std::function<void(const CriterionResult&)>& progress = {});

/// "[PASS] 4 smoothing bounds: ... (1.2 s)"
std::string format_result(const CriterionResult& r);

}  // namespace hs
