// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace msep {

// Central finite-difference verification of every differentiable op,
// run in double precision (h = 1e-4, max relative error < 1e-4).
struct GradCheckCase {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 1e-4;
  bool pass = false;
};

std::vector<GradCheckCase> run_gradcheck(uint64_t seed = 1234);
bool gradcheck_passed(const std::vector<GradCheckCase>& cases);

}  // namespace msep
