#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "edgelab/grid.hpp"

namespace edgelab::metrics {

enum class Matching { OptimalAssignment, GreedyNearest };
enum class ToleranceMode { Pixels, DiagonalRatio };

Matching matching_from_string(const std::string& name);
std::string matching_to_string(Matching m);

std::vector<double> default_thresholds();  // 0.01, 0.02, ..., 0.99

struct EvalConfig {
  ToleranceMode tolerance_mode = ToleranceMode::Pixels;
  double tolerance_value = 1.0;  // pixels, or the diagonal ratio
  std::vector<double> thresholds = default_thresholds();
  Matching matching = Matching::OptimalAssignment;

  void validate() const;  // throws InvalidConfig
  // Tolerance in pixels for a given image size; DiagonalRatio resolves to
  // value * sqrt(H^2 + W^2).
  double tolerance_px(int height, int width) const;
};

struct MatchCounts {
  int64_t tp = 0;
  int64_t fp = 0;
  int64_t fn_ = 0;
};

double precision(const MatchCounts& m);  // 0 when no predictions
double recall(const MatchCounts& m);     // 0 when no ground truth
double f_measure(double p, double r);    // 0 when p + r == 0

struct PRPoint {
  double threshold = 0.0;
  MatchCounts counts;
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

struct ImageEval {
  std::string stem;
  std::vector<MatchCounts> counts;  // one per threshold, same order as cfg
  int best_index = 0;               // threshold index maximizing this image's F
  double best_f = 0.0;
};

struct EvalReport {
  double ods = 0.0;
  double ods_threshold = 0.0;
  double ois = 0.0;
  double ap = 0.0;
  std::vector<PRPoint> dataset_curve;  // counts summed over images
  std::vector<ImageEval> per_image;
};

// Pixel = 1 iff pred >= t.
BinaryMap threshold(const SoftMap& pred, double t);

// One-to-one correspondence between predicted-positive and ground-truth
// pixels at Euclidean distance <= tol. OptimalAssignment finds a
// maximum-cardinality matching (augmenting paths, distance-ordered so closer
// pairs are preferred among equals); GreedyNearest pairs globally nearest
// first. tp = matched, fp = unmatched predictions, fn = unmatched truth.
MatchCounts correspond(const BinaryMap& pred_bin, const BinaryMap& gt_bin,
                       double tol, Matching matching);

// correspond applied at every configured threshold.
std::vector<MatchCounts> pr_at_thresholds(const SoftMap& pred,
                                          const BinaryMap& gt,
                                          const EvalConfig& cfg);

// Aggregates per-image counts into ODS (best shared threshold), OIS (counts
// pooled at per-image best thresholds) and AP (trapezoid area under the
// recall-sorted dataset PR points, duplicate recalls collapsed to their best
// precision, anchored at recall 0).
EvalReport aggregate(std::vector<ImageEval> images, const EvalConfig& cfg);

// Pairs files by stem between the two directories (*.pgm), evaluates each
// pair, and aggregates. Throws MissingPair when a stem appears on one side
// only.
EvalReport evaluate_dataset(const std::filesystem::path& pred_dir,
                            const std::filesystem::path& gt_dir,
                            const EvalConfig& cfg, int threads = 0);

// report.json: ods / ois / ap, the choices that produced them, per-image
// best thresholds. pr_curve.csv: threshold,tp,fp,fn,precision,recall,f with
// reals at 6 decimals.
void write_report_json(const EvalReport& report, const EvalConfig& cfg,
                       const std::filesystem::path& path);
void write_pr_csv(const EvalReport& report, const EvalConfig& cfg,
                  const std::filesystem::path& path);

}  // namespace edgelab::metrics
