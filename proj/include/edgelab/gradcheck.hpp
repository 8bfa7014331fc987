#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edgelab/loss.hpp"

namespace edgelab::loss {

struct GradCheckCase {
  std::string name;  // e.g. "pred/full"
  double max_rel_err = 0.0;
  bool pass = false;
};

struct GradCheckReport {
  std::vector<GradCheckCase> cases;
  double tolerance = 0.0;
  bool all_pass = false;
};

// Central finite differences of every loss forward against its analytic
// gradient, for all losses and both gradient modes. Instances are random
// size x size maps with predictions drawn from [0.01, 0.99]; in
// DetachedWeights mode the differenced forward keeps the weights frozen at
// the base point.
GradCheckReport run_gradient_checks(uint64_t seed, int trials, int size,
                                    double tol, double step = 1e-5);

std::string format_gradcheck_table(const GradCheckReport& report);

}  // namespace edgelab::loss
