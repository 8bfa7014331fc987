// Acceptance gate for the project: eight checks, one printed line each,
// covering the frozen numeric fixture, gradient exactness, structural
// identities of the balanced loss, the matching and metric oracles, the
// precision/recall behavior of the two training losses, stability across the
// balance grid, and byte-level determinism of the command-line pipeline.
//
// Checks 6 and 7 are directional claims about training outcomes. They are
// reported honestly (with PR-curve and CSV artifacts under
// acceptance_artifacts/) but do not gate the exit code; everything else must
// pass within its runtime budget for the process to exit 0.
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "edgelab/gradcheck.hpp"
#include "edgelab/grid.hpp"
#include "edgelab/loss.hpp"
#include "edgelab/metrics.hpp"
#include "edgelab/net.hpp"
#include "edgelab/pgm.hpp"
#include "edgelab/rng.hpp"
#include "edgelab/synth.hpp"
#include "support/oracles.hpp"

using namespace edgelab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  bool soft = false;      // reported but not gating
  std::string detail;
};

const fs::path kArtifacts = "acceptance_artifacts";

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point t0 = clock::now();
  return std::chrono::duration<double>(clock::now() - t0).count();
}

// ---------------------------------------------------------------- no. 1 ----

SoftMap fixture_pred() {
  SoftMap p(2, 2, 0.2);
  p.at(0, 0) = 0.8;
  return p;
}

BinaryMap fixture_gt() {
  BinaryMap g(2, 2, 0);
  g.at(0, 0) = 1;
  return g;
}

Outcome check_fixture() {
  const SoftMap pred = fixture_pred();
  const BinaryMap gt = fixture_gt();
  loss::LossConfig cfg;

  const double label = loss::label_loss(pred, gt, cfg).value;
  const double predv = loss::pred_loss(pred, gt, cfg).value;
  const double swbce = loss::swbce_loss(pred, gt, cfg).value;

  const std::vector<double> p(pred.data);
  const std::vector<uint8_t> g(gt.data);
  const double label_ref = oracle::label_loss(p, g, 1.1, 1e-7);
  const double pred_ref = oracle::pred_loss(p, g, 1.1, 1e-7);
  const double swbce_ref = oracle::swbce(p, g, 1.1, 1.1, 1.0, 1e-7);

  const double worst =
      std::max({std::abs(label - label_ref), std::abs(predv - pred_ref),
                std::abs(swbce - swbce_ref)});
  char buf[192];
  std::snprintf(buf, sizeof buf,
                "label %.6f pred %.6f swbce %.6f, max |dev| %.2e",
                label, predv, swbce, worst);
  return {worst < 1e-9 && std::abs(label - 0.35145109331988034) < 1e-9 &&
              std::abs(predv - 0.42642732656145477) < 1e-9 &&
              std::abs(swbce - 0.38893920994066755) < 1e-9,
          false, buf};
}

// ---------------------------------------------------------------- no. 2 ----

Outcome check_gradients() {
  const auto report = loss::run_gradient_checks(2024, 20, 8, 1e-4);
  double worst = 0.0;
  std::string worst_name = "-";
  for (const auto& c : report.cases) {
    if (c.max_rel_err > worst) {
      worst = c.max_rel_err;
      worst_name = c.name;
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "%zu cases x 20 instances, worst %s at %.3e (tol 1e-4)",
                report.cases.size(), worst_name.c_str(), worst);
  return {report.all_pass && report.cases.size() == 6, false, buf};
}

// ---------------------------------------------------------------- no. 3 ----

Outcome check_identities() {
  Xoshiro256pp rng(515);
  SoftMap pred(8, 8, 0.0);
  for (auto& v : pred.data) v = rng.uniform(0.05, 0.95);
  BinaryMap gt(8, 8, 0);
  for (auto& v : gt.data) v = rng.uniform() < 0.3 ? 1 : 0;
  gt.data[0] = 1;
  gt.data[1] = 0;

  loss::LossConfig cfg;
  cfg.balance_b = 0.0;
  const auto collapsed = loss::swbce_loss(pred, gt, cfg);
  const auto label = loss::label_loss(pred, gt, cfg);
  const bool b0_ok = collapsed.value == label.value &&
                     collapsed.gradient.data == label.gradient.data;

  cfg.balance_b = 1e9;
  const double big = loss::swbce_loss(pred, gt, cfg).value;
  const double predv = loss::pred_loss(pred, gt, cfg).value;
  const bool b_inf_ok = std::abs(big - predv) <= 1e-6 * std::abs(predv);

  loss::LossConfig base;
  const SoftMap zeros(4, 4, 0.0);
  const SoftMap ones(4, 4, 1.0);
  const BinaryMap all_edge(4, 4, 1);
  const BinaryMap all_bg(4, 4, 0);
  SoftMap mixed(4, 4, 0.3);
  mixed.at(0, 0) = 0.9;
  BinaryMap mixed_gt(4, 4, 0);
  mixed_gt.at(0, 0) = 1;
  const bool zero_ok =
      loss::label_loss(mixed, all_edge, base).value == 0.0 &&
      loss::label_loss(mixed, all_bg, base).value == 0.0 &&
      loss::pred_loss(zeros, mixed_gt, base).value == 0.0 &&
      loss::pred_loss(ones, mixed_gt, base).value == 0.0;

  char buf[160];
  std::snprintf(buf, sizeof buf,
                "b=0 bitwise %s, b=1e9 rel dev %.2e, degenerate zeros %s",
                b0_ok ? "ok" : "MISMATCH",
                std::abs(big - predv) / std::abs(predv),
                zero_ok ? "ok" : "MISMATCH");
  return {b0_ok && b_inf_ok && zero_ok, false, buf};
}

// ---------------------------------------------------------------- no. 4 ----

Outcome check_matching() {
  Xoshiro256pp rng(606);
  int checked = 0;
  long long mismatches = 0;
  while (checked < 200) {
    const int h = rng.range(4, 16);
    const int w = rng.range(4, 16);
    BinaryMap pred(h, w, 0);
    BinaryMap gt(h, w, 0);
    const double dp = rng.uniform(0.01, 0.10);
    for (auto& v : pred.data) v = rng.uniform() < dp ? 1 : 0;
    for (auto& v : gt.data) v = rng.uniform() < dp ? 1 : 0;
    int np = 0, ng = 0;
    for (auto v : pred.data) np += v;
    for (auto v : gt.data) ng += v;
    if (np > 12 || ng > 12) continue;
    for (double tol : {0.0, 1.0, 2.0}) {
      const auto got =
          metrics::correspond(pred, gt, tol, metrics::Matching::OptimalAssignment);
      const int64_t want = oracle::match_count_exhaustive(pred, gt, tol);
      if (got.tp != want || got.fp != np - want || got.fn_ != ng - want) {
        ++mismatches;
      }
    }
    ++checked;
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "200 pairs x tol {0,1,2}, %lld mismatches",
                mismatches);
  return {mismatches == 0, false, buf};
}

// ---------------------------------------------------------------- no. 5 ----

Outcome check_metrics() {
  // Fixed 3-image fixture against the brute-force evaluator. Positives are
  // kept sparse on both sides so the oracle's exhaustive matcher stays
  // tractable at the lowest thresholds (every pixel it leaves at exactly
  // zero falls below the whole threshold grid).
  Xoshiro256pp rng(707);
  std::vector<SoftMap> preds;
  std::vector<BinaryMap> gts;
  for (int i = 0; i < 3; ++i) {
    const int h = 8 + i, w = 10 - i;
    SoftMap p(h, w, 0.0);
    BinaryMap g(h, w, 0);
    for (int k = 0; k < 10; ++k) {
      g.at(rng.range(0, h - 1), rng.range(0, w - 1)) = 1;
    }
    for (int k = 0; k < 12; ++k) {
      const int r = rng.range(0, h - 1);
      const int c = rng.range(0, w - 1);
      p.at(r, c) = std::round(rng.uniform(0.05, 1.0) * 65535.0) / 65535.0;
    }
    preds.push_back(std::move(p));
    gts.push_back(std::move(g));
  }
  const fs::path root = oracle::make_temp_dir("acceptance_metrics");
  fs::create_directories(root / "p");
  fs::create_directories(root / "g");
  char name[16];
  for (size_t i = 0; i < preds.size(); ++i) {
    std::snprintf(name, sizeof name, "%03zu.pgm", i);
    io::write_soft(preds[i], root / "p" / name);
    io::write_binary(gts[i], root / "g" / name);
  }
  metrics::EvalConfig cfg;
  const auto got = metrics::evaluate_dataset(root / "p", root / "g", cfg, 2);
  const auto want =
      oracle::brute_force_eval(preds, gts, cfg.thresholds, 1.0);
  const double dev = std::max({std::abs(got.ods - want.ods),
                               std::abs(got.ois - want.ois),
                               std::abs(got.ap - want.ap)});

  // OIS >= ODS across 50 random synthetic datasets (noisy renderings of a
  // generated scene's own boundary map as the prediction).
  int violations = 0;
  for (int d = 0; d < 50; ++d) {
    Xoshiro256pp drng(derive_seed(808, static_cast<uint64_t>(d)));
    std::vector<metrics::ImageEval> images;
    const int n = drng.range(2, 4);
    for (int k = 0; k < n; ++k) {
      BinaryMap g(12, 12, 0);
      for (auto& v : g.data) v = drng.uniform() < 0.18 ? 1 : 0;
      SoftMap p(12, 12, 0.0);
      for (int64_t i = 0; i < p.size(); ++i) {
        const double base = g.data[static_cast<size_t>(i)] ? 0.75 : 0.2;
        p.data[static_cast<size_t>(i)] =
            std::clamp(base + 0.25 * (drng.uniform() - 0.5), 0.0, 1.0);
      }
      metrics::ImageEval ev;
      ev.stem = std::to_string(k);
      ev.counts = metrics::pr_at_thresholds(p, g, cfg);
      images.push_back(std::move(ev));
    }
    const auto rep = metrics::aggregate(std::move(images), cfg);
    if (rep.ois < rep.ods - 1e-12) ++violations;
  }

  char buf[160];
  std::snprintf(buf, sizeof buf,
                "brute-force max |dev| %.2e, OIS<ODS violations %d/50", dev,
                violations);
  return {dev <= 1e-12 && violations == 0, false, buf};
}

// ----------------------------------------------------- shared training ----

struct TrainedEval {
  metrics::EvalReport report;
  double precision_at_ods = 0.0;
  double recall_at_ods = 0.0;
};

fs::path default_split_dir() {
  static fs::path dir;
  if (dir.empty()) {
    dir = oracle::make_temp_dir("acceptance_split");
    synth::SceneSpec base;  // the gen-data defaults: 64x64, 3 shapes,
    base.seed = 42;         // checker texture, mild noise
    base.noise_sigma = 0.05;
    base.texture = synth::Texture::Checker;
    base.texture_contrast = 0.12;
    synth::generate_split(base, 20, 7, dir, 0);
  }
  return dir;
}

TrainedEval train_and_eval(const std::vector<net::TrainSample>& train_data,
                           const std::vector<net::TrainSample>& test_data,
                           net::LossKind kind, double b, uint64_t seed) {
  net::TrainConfig cfg;
  cfg.learning_rate = 1e-2;  // shared by every run in checks 6 and 7
  cfg.epochs = 50;
  cfg.seed = seed;
  cfg.loss_kind = kind;
  cfg.loss.balance_b = b;
  net::Trainer trainer(train_data, cfg);
  trainer.run_epochs(cfg.epochs);

  metrics::EvalConfig ecfg;
  std::vector<metrics::ImageEval> images;
  for (size_t k = 0; k < test_data.size(); ++k) {
    metrics::ImageEval ev;
    ev.stem = std::to_string(k);
    ev.counts = metrics::pr_at_thresholds(
        trainer.net().forward(test_data[k].image), test_data[k].edges, ecfg);
    images.push_back(std::move(ev));
  }
  TrainedEval out;
  out.report = metrics::aggregate(std::move(images), ecfg);
  for (const auto& pt : out.report.dataset_curve) {
    if (pt.threshold == out.report.ods_threshold) {
      out.precision_at_ods = pt.precision;
      out.recall_at_ods = pt.recall;
      break;
    }
  }
  return out;
}

void dump_curve(std::FILE* f, const char* tag,
                const metrics::EvalReport& rep) {
  for (const auto& pt : rep.dataset_curve) {
    std::fprintf(f, "%s,%.2f,%.6f,%.6f,%.6f\n", tag, pt.threshold,
                 pt.precision, pt.recall, pt.f);
  }
}

// ---------------------------------------------------------------- no. 6 ----

Outcome check_behavior() {
  const fs::path dir = default_split_dir();
  const auto train_data = net::load_split(dir, "train");
  const auto test_data = net::load_split(dir, "test");

  int wins = 0;
  bool recall_ok_everywhere = true;
  std::string detail;
  std::vector<std::pair<TrainedEval, TrainedEval>> runs;  // (swbce, wbce)
  for (uint64_t seed : {1, 2, 3}) {
    const auto sw = train_and_eval(train_data, test_data,
                                   net::LossKind::SWBCE, 1.0, seed);
    const auto wb = train_and_eval(train_data, test_data, net::LossKind::WBCE,
                                   1.0, seed);
    const bool precision_win = sw.precision_at_ods > wb.precision_at_ods;
    const bool recall_close =
        std::abs(sw.recall_at_ods - wb.recall_at_ods) <= 0.10;
    wins += precision_win && recall_close;
    recall_ok_everywhere = recall_ok_everywhere && recall_close;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%sseed %llu P %.3f/%.3f R %.3f/%.3f",
                  detail.empty() ? "" : "; ",
                  static_cast<unsigned long long>(seed), sw.precision_at_ods,
                  wb.precision_at_ods, sw.recall_at_ods, wb.recall_at_ods);
    detail += buf;
    runs.emplace_back(sw, wb);
  }

  const bool pass = wins >= 2;
  if (!pass) {
    fs::create_directories(kArtifacts);
    std::FILE* f =
        std::fopen((kArtifacts / "behavior_pr_curves.csv").string().c_str(),
                   "w");
    if (f) {
      std::fprintf(f, "run,threshold,precision,recall,f\n");
      for (size_t i = 0; i < runs.size(); ++i) {
        dump_curve(f, ("swbce_seed" + std::to_string(i + 1)).c_str(),
                   runs[i].first.report);
        dump_curve(f, ("wbce_seed" + std::to_string(i + 1)).c_str(),
                   runs[i].second.report);
      }
      std::fclose(f);
      detail += "; full PR curves in acceptance_artifacts/behavior_pr_curves.csv";
    }
  }
  return {pass, true, std::to_string(wins) + "/3 seeds favor swbce (" +
                          detail + ")"};
}

// ---------------------------------------------------------------- no. 7 ----

Outcome check_b_stability() {
  const fs::path dir = default_split_dir();
  const auto train_data = net::load_split(dir, "train");
  const auto test_data = net::load_split(dir, "test");

  const std::vector<double> grid = {0.25, 0.5, 0.75, 0.9, 1.0,
                                    1.1,  1.25, 1.5, 2.0};
  fs::create_directories(kArtifacts);
  const fs::path csv_path = kArtifacts / "b_sweep.csv";
  std::ofstream csv(csv_path, std::ios::trunc);
  csv << "b,ods,ois,ap\n";

  double lo = 1.0, hi = 0.0;
  for (double b : grid) {
    const auto run = train_and_eval(train_data, test_data,
                                    net::LossKind::SWBCE, b, 42);
    char line[96];
    std::snprintf(line, sizeof line, "%g,%.6f,%.6f,%.6f\n", b,
                  run.report.ods, run.report.ois, run.report.ap);
    csv << line << std::flush;
    if (b >= 0.5 && b <= 1.5) {
      lo = std::min(lo, run.report.ods);
      hi = std::max(hi, run.report.ods);
    }
  }
  const double spread = hi - lo;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "ODS spread %.4f over b in [0.5,1.5] (limit 0.05), CSV at %s",
                spread, csv_path.string().c_str());
  return {spread <= 0.05, true, buf};
}

// ---------------------------------------------------------------- no. 8 ----

int shell(const std::string& cmd) {
  const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool run_pipeline(const fs::path& root, int threads) {
  const std::string bin = EDGELAB_BIN;
  const std::string t = " --threads " + std::to_string(threads);
  const std::string data = (root / "data").string();
  if (shell(bin + " gen-data --seed 5 --n-train 2 --n-test 2 --size 16 "
                  "--shapes 1 --out " + data + t)) return false;
  if (shell(bin + " train --data " + data +
            " --epochs 3 --batch 2 --lr 0.01 --out " +
            (root / "model").string() + t)) return false;
  if (shell(bin + " predict --ckpt " + (root / "model/checkpoint.bin").string() +
            " --images " + data + "/test/images --out " +
            (root / "preds").string() + t)) return false;
  if (shell(bin + " eval --pred-dir " + (root / "preds").string() +
            " --gt-dir " + data + "/test/edges --out " +
            (root / "eval").string() + t)) return false;
  if (shell(bin + " sweep --data " + data +
            " --b-values 0.5,1 --epochs 2 --batch 2 --lr 0.01 --out " +
            (root / "sweep").string() + t)) return false;
  if (shell(bin + " loss --pred " + (root / "preds/0000.pgm").string() +
            " --gt " + data + "/test/edges/0000.pgm --grad-out grad.pgm"
            " --out " + (root / "loss").string())) return false;
  return true;
}

Outcome check_determinism() {
  const fs::path a = oracle::make_temp_dir("acceptance_det_a");
  const fs::path b = oracle::make_temp_dir("acceptance_det_b");
  if (!run_pipeline(a, 1) || !run_pipeline(b, 4)) {
    return {false, false, "pipeline subcommand returned nonzero"};
  }
  // The run manifests record wall-clock durations and are the only files
  // excluded from the byte comparison.
  const uint64_t ha = oracle::tree_hash(a, {"manifest.json"});
  const uint64_t hb = oracle::tree_hash(b, {"manifest.json"});
  char buf[128];
  std::snprintf(buf, sizeof buf,
                "tree hash %016llx (threads 1) vs %016llx (threads 4)",
                static_cast<unsigned long long>(ha),
                static_cast<unsigned long long>(hb));
  return {ha == hb, false, buf};
}

// ------------------------------------------------------------------ main ----

struct Criterion {
  const char* name;
  double budget_seconds;
  Outcome (*run)();
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {"loss fixture equality", 1.0, check_fixture},
      {"gradient suite", 10.0, check_gradients},
      {"structural identities", 1.0, check_identities},
      {"matching oracle", 30.0, check_matching},
      {"metric oracle", 30.0, check_metrics},
      {"behavioral direction", 900.0, check_behavior},
      {"b-stability", 3600.0, check_b_stability},
      {"determinism", 300.0, check_determinism},
  };

  bool gate_ok = true;
  int index = 0;
  for (const auto& c : criteria) {
    ++index;
    const double t0 = now_seconds();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, false, std::string("exception: ") + e.what()};
    }
    const double elapsed = now_seconds() - t0;
    const bool in_budget = elapsed < c.budget_seconds;
    const bool ok = out.pass && in_budget;
    std::printf("[%d/8] %s: %s%s — %s (%.2f s%s)\n", index, c.name,
                ok ? "PASS" : "FAIL", out.soft ? " (soft)" : "",
                out.detail.c_str(), elapsed,
                in_budget ? "" : ", OVER BUDGET");
    std::fflush(stdout);
    if (!ok && !out.soft) gate_ok = false;
  }
  std::printf("acceptance: %s\n", gate_ok ? "PASS" : "FAIL");
  return gate_ok ? 0 : 1;
}
