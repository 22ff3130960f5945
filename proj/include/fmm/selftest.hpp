#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fmm/model.hpp"

namespace fmm {

struct SuiteResult {
  std::string name;
  int checks = 0;
  int failures = 0;
  std::vector<std::string> messages;  // first few failures
  double seconds = 0.0;

  bool passed() const { return failures == 0 && checks > 0; }
};

/// model, propagate, prufer, green, lyapunov, moments
const std::vector<std::string>& selftest_suite_names();

/// Runs one invariant suite on instances drawn from `spec` (a continuum or
/// lattice counterpart is derived when the flavor does not fit). `trials`
/// scales the number of random instances. Throws InvalidSpec for an
/// unknown name.
SuiteResult run_selftest_suite(const std::string& name, const ModelSpec& spec, std::uint64_t seed, int trials = 50);

}  // namespace fmm
