#pragma once

#include <string>
#include <vector>

namespace supergraph {

struct CheckResult {
  std::string suite;
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Verification hooks: each injects a deliberate defect so the corresponding
/// suite demonstrably fails.
struct CheckOptions {
  bool inject_cdgc_sign_flip = false;
  bool inject_forget_gate_fault = false;
};

/// Runs every invariant suite on self-contained fixtures.
std::vector<CheckResult> run_selfchecks(const CheckOptions& opts = {});

/// Runs the single suite with the given name; throws std::invalid_argument
/// for unknown names.
CheckResult run_selfcheck(const std::string& name, const CheckOptions& opts = {});

}  // namespace supergraph
