#include "edgelab/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include "edgelab/rng.hpp"

namespace edgelab::loss {

namespace {

using Forward = std::function<double(const SoftMap&)>;

double max_rel_err_for_instance(const Forward& fwd, const SoftMap& base,
                                const Grid<double>& analytic, double step) {
  SoftMap x = base;
  double worst = 0.0;
  for (int64_t i = 0; i < x.size(); ++i) {
    const double keep = x.data[i];
    x.data[i] = keep + step;
    const double hi = fwd(x);
    x.data[i] = keep - step;
    const double lo = fwd(x);
    x.data[i] = keep;
    const double fd = (hi - lo) / (2.0 * step);
    const double a = analytic.data[i];
    const double denom = std::max({std::fabs(a), std::fabs(fd), 1e-10});
    worst = std::max(worst, std::fabs(a - fd) / denom);
  }
  return worst;
}

struct Instance {
  SoftMap pred;
  BinaryMap gt;
};

Instance random_instance(Xoshiro256pp& rng, int size) {
  Instance inst;
  inst.pred = SoftMap(size, size, 0.0);
  inst.gt = BinaryMap(size, size, 0);
  // Redraw until the ground truth has both classes; the degenerate maps have
  // their own dedicated tests and would zero out the label weights here.
  while (true) {
    int64_t pos = 0;
    for (int64_t i = 0; i < inst.gt.size(); ++i) {
      inst.gt.data[i] = rng.uniform() < 0.25 ? 1 : 0;
      pos += inst.gt.data[i];
    }
    if (pos > 0 && pos < inst.gt.size()) break;
  }
  for (int64_t i = 0; i < inst.pred.size(); ++i) {
    inst.pred.data[i] = rng.uniform(0.01, 0.99);
  }
  return inst;
}

}  // namespace

GradCheckReport run_gradient_checks(uint64_t seed, int trials, int size,
                                    double tol, double step) {
  GradCheckReport report;
  report.tolerance = tol;

  struct CaseSpec {
    const char* name;
    GradMode mode;
    int which;  // 0 = label, 1 = pred, 2 = swbce
  };
  const CaseSpec specs[] = {
      {"label/detached", GradMode::DetachedWeights, 0},
      {"label/full", GradMode::FullGradient, 0},
      {"pred/detached", GradMode::DetachedWeights, 1},
      {"pred/full", GradMode::FullGradient, 1},
      {"swbce/detached", GradMode::DetachedWeights, 2},
      {"swbce/full", GradMode::FullGradient, 2},
  };

  for (const CaseSpec& spec : specs) {
    LossConfig cfg;
    cfg.grad_mode = spec.mode;
    GradCheckCase result;
    result.name = spec.name;

    Xoshiro256pp rng(derive_seed(seed, static_cast<uint64_t>(spec.which)));
    for (int t = 0; t < trials; ++t) {
      Instance inst = random_instance(rng, size);

      LossResult analytic;
      Forward fwd;
      if (spec.which == 0) {
        analytic = label_loss(inst.pred, inst.gt, cfg);
        fwd = [&](const SoftMap& p) {
          return label_loss(p, inst.gt, cfg).value;
        };
      } else if (spec.which == 1) {
        analytic = pred_loss(inst.pred, inst.gt, cfg);
        if (spec.mode == GradMode::DetachedWeights) {
          const WeightMaps frozen = compute_pred_weights(inst.pred, cfg);
          fwd = [&, frozen](const SoftMap& p) {
            return weighted_ce_value(p, inst.gt, frozen.pred_weights,
                                     cfg.clamp_eps);
          };
        } else {
          fwd = [&](const SoftMap& p) {
            return pred_loss(p, inst.gt, cfg).value;
          };
        }
      } else {
        analytic = swbce_loss(inst.pred, inst.gt, cfg);
        if (spec.mode == GradMode::DetachedWeights) {
          const WeightMaps frozen = compute_pred_weights(inst.pred, cfg);
          const double b = cfg.balance_b;
          fwd = [&, frozen, b](const SoftMap& p) {
            const double lab = label_loss(p, inst.gt, cfg).value;
            const double prd = weighted_ce_value(p, inst.gt,
                                                 frozen.pred_weights,
                                                 cfg.clamp_eps);
            return (lab + b * prd) / (1.0 + b);
          };
        } else {
          fwd = [&](const SoftMap& p) {
            return swbce_loss(p, inst.gt, cfg).value;
          };
        }
      }

      result.max_rel_err =
          std::max(result.max_rel_err,
                   max_rel_err_for_instance(fwd, inst.pred, analytic.gradient,
                                            step));
    }
    result.pass = result.max_rel_err < tol;
    report.cases.push_back(result);
  }

  report.all_pass = true;
  for (const auto& c : report.cases) report.all_pass = report.all_pass && c.pass;
  return report;
}

std::string format_gradcheck_table(const GradCheckReport& report) {
  std::string out;
  char line[128];
  std::snprintf(line, sizeof(line), "%-16s %-14s %s\n", "case",
                "max_rel_err", "status");
  out += line;
  for (const auto& c : report.cases) {
    std::snprintf(line, sizeof(line), "%-16s %-14.3e %s\n", c.name.c_str(),
                  c.max_rel_err, c.pass ? "pass" : "FAIL");
    out += line;
  }
  std::snprintf(line, sizeof(line), "tolerance %.3e -> %s\n", report.tolerance,
                report.all_pass ? "all pass" : "FAILED");
  out += line;
  return out;
}

}  // namespace edgelab::loss
