// Tests for the edge-detection evaluation stack: thresholding, tolerance
// matching, and the ODS / OIS / AP aggregation. Reference answers come from
// the exhaustive matcher and brute-force evaluator in support/oracles.hpp.
#include "doctest.h"

#include "edgelab/metrics.hpp"
#include "edgelab/pgm.hpp"
#include "edgelab/rng.hpp"
#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace edgelab;
using namespace edgelab::io;
using namespace edgelab::metrics;
namespace fs = std::filesystem;

namespace {

BinaryMap map_from(int h, int w, std::initializer_list<int> v) {
  BinaryMap m(h, w, 0);
  REQUIRE(static_cast<int>(v.size()) == h * w);
  int k = 0;
  for (int x : v) m.data[static_cast<size_t>(k++)] = static_cast<uint8_t>(x);
  return m;
}

BinaryMap random_map(Xoshiro256pp& rng, int h, int w, double p) {
  BinaryMap m(h, w, 0);
  for (auto& v : m.data) v = rng.uniform() < p ? 1 : 0;
  return m;
}

SoftMap random_probs(Xoshiro256pp& rng, int h, int w) {
  SoftMap m(h, w, 0.0);
  for (auto& v : m.data) v = rng.uniform();
  return m;
}

}  // namespace

TEST_CASE("thresholding includes values exactly at the cut") {
  SoftMap p(1, 4, 0.0);
  p.data = {0.0, 0.4999999, 0.5, 1.0};
  BinaryMap b = threshold(p, 0.5);
  CHECK(b.data == std::vector<uint8_t>{0, 0, 1, 1});
  b = threshold(p, 0.0);
  CHECK(b.data == std::vector<uint8_t>{1, 1, 1, 1});
}

TEST_CASE("matching identical maps is perfect at zero tolerance") {
  Xoshiro256pp rng(11);
  BinaryMap m = random_map(rng, 12, 9, 0.3);
  MatchCounts c = correspond(m, m, 0.0, Matching::OptimalAssignment);
  const int n = count_positives(m);
  CHECK(c.tp == n);
  CHECK(c.fp == 0);
  CHECK(c.fn_ == 0);
}

TEST_CASE("a one-pixel shift is forgiven exactly when tolerance allows it") {
  // Vertical 5-pixel line at column 3, prediction shifted to column 4.
  BinaryMap gt(7, 8, 0);
  BinaryMap pred(7, 8, 0);
  for (int r = 1; r <= 5; ++r) {
    gt.at(r, 3) = 1;
    pred.at(r, 4) = 1;
  }
  MatchCounts loose = correspond(pred, gt, 1.0, Matching::OptimalAssignment);
  CHECK(loose.tp == 5);
  CHECK(loose.fp == 0);
  CHECK(loose.fn_ == 0);
  MatchCounts tight = correspond(pred, gt, 0.5, Matching::OptimalAssignment);
  CHECK(tight.tp == 0);
  CHECK(tight.fp == 5);
  CHECK(tight.fn_ == 5);
}

TEST_CASE("each ground-truth pixel matches at most one prediction") {
  // Two predictions flank a single ground-truth pixel: one true positive,
  // one false positive, no misses.
  BinaryMap gt = map_from(1, 5, {0, 0, 1, 0, 0});
  BinaryMap pred = map_from(1, 5, {0, 1, 0, 1, 0});
  for (Matching mode : {Matching::OptimalAssignment, Matching::GreedyNearest}) {
    CAPTURE(matching_to_string(mode));
    MatchCounts c = correspond(pred, gt, 1.0, mode);
    CHECK(c.tp == 1);
    CHECK(c.fp == 1);
    CHECK(c.fn_ == 0);
  }
}

TEST_CASE("true-positive count is symmetric under swapping the two maps") {
  Xoshiro256pp rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    BinaryMap a = random_map(rng, 10, 10, 0.15);
    BinaryMap b = random_map(rng, 10, 10, 0.15);
    const double tol = static_cast<double>(rng.range(0, 2));
    MatchCounts ab = correspond(a, b, tol, Matching::OptimalAssignment);
    MatchCounts ba = correspond(b, a, tol, Matching::OptimalAssignment);
    CAPTURE(trial);
    CHECK(ab.tp == ba.tp);
    CHECK(ab.fp == ba.fn_);
    CHECK(ab.fn_ == ba.fp);
  }
}

TEST_CASE("matches never decrease as the tolerance radius grows") {
  Xoshiro256pp rng(22);
  for (int trial = 0; trial < 25; ++trial) {
    BinaryMap pred = random_map(rng, 11, 13, 0.12);
    BinaryMap gt = random_map(rng, 11, 13, 0.12);
    long long prev = -1;
    for (double tol : {0.0, 1.0, 1.5, 2.0, 3.0}) {
      MatchCounts c = correspond(pred, gt, tol, Matching::OptimalAssignment);
      CAPTURE(trial);
      CAPTURE(tol);
      CHECK(c.tp >= prev);
      prev = c.tp;
    }
  }
}

TEST_CASE("greedy matching never beats the optimal assignment") {
  Xoshiro256pp rng(23);
  for (int trial = 0; trial < 60; ++trial) {
    BinaryMap pred = random_map(rng, 9, 9, 0.2);
    BinaryMap gt = random_map(rng, 9, 9, 0.2);
    const double tol = 1.0 + rng.uniform();
    MatchCounts g = correspond(pred, gt, tol, Matching::GreedyNearest);
    MatchCounts o = correspond(pred, gt, tol, Matching::OptimalAssignment);
    CAPTURE(trial);
    CHECK(g.tp <= o.tp);
    // Both modes still account for every pixel exactly once.
    CHECK(g.tp + g.fp == o.tp + o.fp);
    CHECK(g.tp + g.fn_ == o.tp + o.fn_);
  }
}

TEST_CASE("optimal matching agrees with an exhaustive enumerator") {
  Xoshiro256pp rng(24);
  int done = 0;
  while (done < 120) {
    const int h = rng.range(3, 12);
    const int w = rng.range(3, 12);
    BinaryMap pred = random_map(rng, h, w, 0.12);
    BinaryMap gt = random_map(rng, h, w, 0.12);
    if (count_positives(pred) > 11 || count_positives(gt) > 11) continue;
    const double tol = static_cast<double>(rng.range(0, 2));
    MatchCounts c = correspond(pred, gt, tol, Matching::OptimalAssignment);
    const int want = oracle::match_count_exhaustive(pred, gt, tol);
    CAPTURE(done);
    CAPTURE(tol);
    CHECK(c.tp == want);
    CHECK(c.fp == count_positives(pred) - want);
    CHECK(c.fn_ == count_positives(gt) - want);
    ++done;
  }
}

TEST_CASE("precision and recall handle empty sides by convention") {
  MatchCounts none{0, 0, 0};
  CHECK(precision(none) == 0.0);
  CHECK(recall(none) == 0.0);
  CHECK(f_measure(0.0, 0.0) == 0.0);
  MatchCounts hits{3, 1, 2};
  CHECK(precision(hits) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(recall(hits) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(f_measure(0.75, 0.6) ==
        doctest::Approx(2.0 * 0.75 * 0.6 / 1.35).epsilon(1e-15));
}

TEST_CASE("diagonal-ratio tolerance scales with the image diagonal") {
  EvalConfig cfg;
  cfg.tolerance_mode = ToleranceMode::DiagonalRatio;
  cfg.tolerance_value = 0.0075;
  const double px = cfg.tolerance_px(720, 1280);
  CHECK(px == doctest::Approx(0.0075 * std::hypot(720.0, 1280.0)).epsilon(1e-12));
  CHECK(px == doctest::Approx(11.0145).epsilon(1e-4));
  cfg.tolerance_mode = ToleranceMode::Pixels;
  cfg.tolerance_value = 2.0;
  CHECK(cfg.tolerance_px(720, 1280) == 2.0);
}

TEST_CASE("evaluation config rejects out-of-range settings") {
  EvalConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.thresholds = {0.5, 0.25};
  CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
  cfg.thresholds = {0.0, 0.5};
  CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
  cfg = EvalConfig{};
  cfg.tolerance_value = -1.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
  cfg = EvalConfig{};
  cfg.tolerance_mode = ToleranceMode::DiagonalRatio;
  cfg.tolerance_value = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
}

namespace {

// Writes a prediction/ground-truth pair set under a fresh directory tree and
// returns (pred_dir, gt_dir). Predictions are quantized to 16-bit samples, so
// callers pick probabilities representable there.
std::pair<fs::path, fs::path> write_dataset(const std::string& tag,
                                            const std::vector<SoftMap>& preds,
                                            const std::vector<BinaryMap>& gts) {
  fs::path root = oracle::make_temp_dir(tag);
  fs::path pred_dir = root / "preds";
  fs::path gt_dir = root / "gts";
  fs::create_directories(pred_dir);
  fs::create_directories(gt_dir);
  char name[32];
  for (size_t i = 0; i < preds.size(); ++i) {
    std::snprintf(name, sizeof name, "%04zu.pgm", i);
    write_soft(preds[i], pred_dir / name);
    if (i < gts.size()) write_binary(gts[i], gt_dir / name);
  }
  for (size_t i = preds.size(); i < gts.size(); ++i) {
    std::snprintf(name, sizeof name, "%04zu.pgm", i);
    write_binary(gts[i], gt_dir / name);
  }
  return {pred_dir, gt_dir};
}

// Probabilities that survive the 16-bit quantization round trip far from any
// decision threshold used by the default grid.
double quantized(double v) {
  return std::round(v * 65535.0) / 65535.0;
}

}  // namespace

TEST_CASE("dataset aggregation matches a brute-force evaluator") {
  // Positives stay sparse on both sides so the exhaustive reference matcher
  // is tractable even at the lowest threshold (exact zeros fall below the
  // whole grid).
  Xoshiro256pp rng(31);
  std::vector<SoftMap> preds;
  std::vector<BinaryMap> gts;
  for (int i = 0; i < 3; ++i) {
    const int h = 8 + i;
    const int w = 9 - i;
    SoftMap p(h, w, 0.0);
    BinaryMap g(h, w, 0);
    for (int k = 0; k < 9; ++k) {
      g.at(rng.range(0, h - 1), rng.range(0, w - 1)) = 1;
    }
    for (int k = 0; k < 12; ++k) {
      p.at(rng.range(0, h - 1), rng.range(0, w - 1)) =
          quantized(rng.uniform(0.05, 1.0));
    }
    preds.push_back(std::move(p));
    gts.push_back(std::move(g));
  }
  auto [pred_dir, gt_dir] = write_dataset("metrics_brute", preds, gts);

  EvalConfig cfg;
  cfg.tolerance_mode = ToleranceMode::Pixels;
  cfg.tolerance_value = 1.0;
  EvalReport got = evaluate_dataset(pred_dir, gt_dir, cfg, 2);
  oracle::BruteReport want = oracle::brute_force_eval(preds, gts, cfg.thresholds, 1.0);

  CHECK(got.ods == doctest::Approx(want.ods).epsilon(1e-12));
  CHECK(got.ods_threshold == doctest::Approx(want.ods_threshold).epsilon(1e-12));
  CHECK(got.ois == doctest::Approx(want.ois).epsilon(1e-12));
  CHECK(got.ap == doctest::Approx(want.ap).epsilon(1e-12));
  REQUIRE(got.dataset_curve.size() == cfg.thresholds.size());
  for (size_t t = 0; t < cfg.thresholds.size(); ++t) {
    CHECK(got.dataset_curve[t].counts.tp == want.curve[t].tp);
    CHECK(got.dataset_curve[t].counts.fp == want.curve[t].fp);
    CHECK(got.dataset_curve[t].counts.fn_ == want.curve[t].fn);
  }
}

TEST_CASE("a perfect detector scores one on every summary metric") {
  Xoshiro256pp rng(32);
  std::vector<SoftMap> preds;
  std::vector<BinaryMap> gts;
  for (int i = 0; i < 2; ++i) {
    BinaryMap gt = random_map(rng, 10, 10, 0.25);
    if (count_positives(gt) == 0) gt.at(4, 4) = 1;
    SoftMap p(10, 10, 0.0);
    for (size_t k = 0; k < p.data.size(); ++k) p.data[k] = gt.data[k] ? 1.0 : 0.0;
    preds.push_back(std::move(p));
    gts.push_back(std::move(gt));
  }
  auto [pred_dir, gt_dir] = write_dataset("metrics_perfect", preds, gts);
  EvalReport rep = evaluate_dataset(pred_dir, gt_dir, EvalConfig{}, 1);
  CHECK(rep.ods == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.ois == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.ap == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("an all-zero detector scores zero on every summary metric") {
  Xoshiro256pp rng(33);
  std::vector<SoftMap> preds{SoftMap(8, 8, 0.0)};
  std::vector<BinaryMap> gts{random_map(rng, 8, 8, 0.3)};
  auto [pred_dir, gt_dir] = write_dataset("metrics_zero", preds, gts);
  EvalReport rep = evaluate_dataset(pred_dir, gt_dir, EvalConfig{}, 1);
  CHECK(rep.ods == 0.0);
  CHECK(rep.ois == 0.0);
  CHECK(rep.ap == 0.0);
}

TEST_CASE("per-image threshold selection never loses to the shared one") {
  Xoshiro256pp rng(34);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<ImageEval> images;
    const int n = rng.range(2, 5);
    EvalConfig cfg;
    for (int i = 0; i < n; ++i) {
      SoftMap p = random_probs(rng, 8, 8);
      BinaryMap gt = random_map(rng, 8, 8, 0.2);
      ImageEval ev;
      ev.stem = "img" + std::to_string(i);
      ev.counts = pr_at_thresholds(p, gt, cfg);
      images.push_back(std::move(ev));
    }
    EvalReport rep = aggregate(std::move(images), cfg);
    CAPTURE(trial);
    CHECK(rep.ois >= rep.ods - 1e-12);
  }
}

TEST_CASE("evaluate_dataset rejects unpaired or empty directories") {
  Xoshiro256pp rng(35);
  std::vector<SoftMap> preds{random_probs(rng, 6, 6), random_probs(rng, 6, 6)};
  std::vector<BinaryMap> gts{random_map(rng, 6, 6, 0.3)};
  auto [pred_dir, gt_dir] = write_dataset("metrics_missing", preds, gts);
  CHECK_THROWS_AS(evaluate_dataset(pred_dir, gt_dir, EvalConfig{}, 1), MissingPair);

  fs::path root = oracle::make_temp_dir("metrics_empty");
  fs::create_directories(root / "p");
  fs::create_directories(root / "g");
  CHECK_THROWS_AS(evaluate_dataset(root / "p", root / "g", EvalConfig{}, 1),
                  IoFailure);
}

TEST_CASE("report JSON and PR CSV carry the published fields") {
  Xoshiro256pp rng(36);
  std::vector<SoftMap> preds{random_probs(rng, 8, 8)};
  for (auto& v : preds[0].data) v = quantized(v);
  std::vector<BinaryMap> gts{random_map(rng, 8, 8, 0.25)};
  auto [pred_dir, gt_dir] = write_dataset("metrics_report", preds, gts);
  EvalConfig cfg;
  EvalReport rep = evaluate_dataset(pred_dir, gt_dir, cfg, 1);

  fs::path root = pred_dir.parent_path();
  write_report_json(rep, cfg, root / "report.json");
  write_pr_csv(rep, cfg, root / "pr.csv");

  std::ifstream jf(root / "report.json");
  std::stringstream jbuf;
  jbuf << jf.rdbuf();
  const std::string text = jbuf.str();
  for (const char* key : {"\"ods\"", "\"ods_threshold\"", "\"ois\"", "\"ap\"",
                          "\"tolerance_mode\"", "\"matching\"", "\"per_image\"",
                          "\"thinning\""}) {
    CAPTURE(key);
    CHECK(text.find(key) != std::string::npos);
  }

  std::ifstream cf(root / "pr.csv");
  std::string header;
  REQUIRE(std::getline(cf, header));
  CHECK(header == "threshold,tp,fp,fn,precision,recall,f");
  size_t rows = 0;
  std::string line;
  while (std::getline(cf, line)) rows += !line.empty();
  CHECK(rows == cfg.thresholds.size());
}
