#include "edgelab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <tuple>

#include "json.hpp"

#include "edgelab/errors.hpp"
#include "edgelab/parallel.hpp"
#include "edgelab/pgm.hpp"

namespace edgelab::metrics {

namespace {

struct Pt {
  int r;
  int c;
};

std::vector<Pt> positives(const BinaryMap& map) {
  std::vector<Pt> pts;
  for (int r = 0; r < map.height; ++r) {
    for (int c = 0; c < map.width; ++c) {
      if (map.at(r, c)) pts.push_back({r, c});
    }
  }
  return pts;
}

// Candidate partners of `pts` among `others`, found by scanning the
// tolerance window in an occupancy grid. Each adjacency list is sorted by
// (squared distance, partner index) so closer pairs are tried first.
std::vector<std::vector<int>> build_adjacency(const std::vector<Pt>& pts,
                                              const std::vector<Pt>& others,
                                              int h, int w, double tol) {
  Grid<int> id(h, w, -1);
  for (size_t j = 0; j < others.size(); ++j) {
    id.at(others[j].r, others[j].c) = static_cast<int>(j);
  }
  const int win = static_cast<int>(std::floor(tol));
  const double tol2 = tol * tol;

  std::vector<std::vector<int>> adj(pts.size());
  std::vector<std::pair<int, int>> found;  // (d2, j)
  for (size_t i = 0; i < pts.size(); ++i) {
    found.clear();
    const Pt p = pts[i];
    for (int dr = -win; dr <= win; ++dr) {
      const int r = p.r + dr;
      if (r < 0 || r >= h) continue;
      for (int dc = -win; dc <= win; ++dc) {
        const int c = p.c + dc;
        if (c < 0 || c >= w) continue;
        const int j = id.at(r, c);
        if (j < 0) continue;
        const int d2 = dr * dr + dc * dc;
        if (static_cast<double>(d2) <= tol2) found.push_back({d2, j});
      }
    }
    std::sort(found.begin(), found.end());
    adj[i].reserve(found.size());
    for (const auto& [d2, j] : found) adj[i].push_back(j);
  }
  return adj;
}

// Kuhn's augmenting-path maximum bipartite matching, run from the side with
// fewer positives. Exact at this scale; the distance-sorted adjacency makes
// the outcome deterministic and biases ties toward nearer partners.
int64_t max_matching(const std::vector<std::vector<int>>& adj, int n_right) {
  const int n_left = static_cast<int>(adj.size());
  std::vector<int> match_right(static_cast<size_t>(n_right), -1);
  std::vector<int> match_left(static_cast<size_t>(n_left), -1);
  std::vector<int> stamp(static_cast<size_t>(n_right), -1);
  int round = 0;

  std::function<bool(int)> try_augment = [&](int i) -> bool {
    for (int j : adj[static_cast<size_t>(i)]) {
      if (stamp[static_cast<size_t>(j)] == round) continue;
      stamp[static_cast<size_t>(j)] = round;
      if (match_right[static_cast<size_t>(j)] == -1 ||
          try_augment(match_right[static_cast<size_t>(j)])) {
        match_right[static_cast<size_t>(j)] = i;
        match_left[static_cast<size_t>(i)] = j;
        return true;
      }
    }
    return false;
  };

  int64_t matched = 0;
  // Cheap greedy pass first; augmenting paths then fix the remainder.
  for (int i = 0; i < n_left; ++i) {
    for (int j : adj[static_cast<size_t>(i)]) {
      if (match_right[static_cast<size_t>(j)] == -1) {
        match_right[static_cast<size_t>(j)] = i;
        match_left[static_cast<size_t>(i)] = j;
        ++matched;
        break;
      }
    }
  }
  for (int i = 0; i < n_left; ++i) {
    if (match_left[static_cast<size_t>(i)] != -1) continue;
    ++round;
    if (try_augment(i)) ++matched;
  }
  return matched;
}

int64_t greedy_matching(const std::vector<std::vector<int>>& adj_pred,
                        const std::vector<Pt>& pred, const std::vector<Pt>& gt,
                        int w) {
  // Globally nearest-first pairing; ties broken by row-major pixel order so
  // the result is reproducible.
  struct Cand {
    int d2;
    int64_t p_key;
    int64_t g_key;
    int pi;
    int gi;
  };
  std::vector<Cand> cands;
  for (size_t i = 0; i < adj_pred.size(); ++i) {
    for (int j : adj_pred[i]) {
      const Pt a = pred[i];
      const Pt b = gt[static_cast<size_t>(j)];
      const int dr = a.r - b.r;
      const int dc = a.c - b.c;
      cands.push_back({dr * dr + dc * dc,
                       static_cast<int64_t>(a.r) * w + a.c,
                       static_cast<int64_t>(b.r) * w + b.c,
                       static_cast<int>(i), j});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
    return std::tie(x.d2, x.p_key, x.g_key) < std::tie(y.d2, y.p_key, y.g_key);
  });
  std::vector<char> p_used(pred.size(), 0), g_used(gt.size(), 0);
  int64_t matched = 0;
  for (const Cand& c : cands) {
    if (p_used[static_cast<size_t>(c.pi)] || g_used[static_cast<size_t>(c.gi)])
      continue;
    p_used[static_cast<size_t>(c.pi)] = 1;
    g_used[static_cast<size_t>(c.gi)] = 1;
    ++matched;
  }
  return matched;
}

}  // namespace

Matching matching_from_string(const std::string& name) {
  if (name == "optimal") return Matching::OptimalAssignment;
  if (name == "greedy") return Matching::GreedyNearest;
  throw InvalidConfig("unknown matching '" + name + "' (expected optimal|greedy)");
}

std::string matching_to_string(Matching m) {
  return m == Matching::OptimalAssignment ? "optimal" : "greedy";
}

std::vector<double> default_thresholds() {
  std::vector<double> t(99);
  for (int i = 0; i < 99; ++i) t[static_cast<size_t>(i)] = (i + 1) / 100.0;
  return t;
}

void EvalConfig::validate() const {
  if (tolerance_mode == ToleranceMode::Pixels) {
    if (tolerance_value < 0.0) throw InvalidConfig("pixel tolerance must be >= 0");
  } else if (tolerance_value <= 0.0) {
    throw InvalidConfig("diagonal-ratio tolerance must be > 0");
  }
  if (thresholds.empty()) throw InvalidConfig("threshold list is empty");
  for (size_t i = 0; i < thresholds.size(); ++i) {
    if (thresholds[i] <= 0.0 || thresholds[i] >= 1.0) {
      throw InvalidConfig("thresholds must lie in (0,1)");
    }
    if (i > 0 && thresholds[i] <= thresholds[i - 1]) {
      throw InvalidConfig("thresholds must be strictly increasing");
    }
  }
}

double EvalConfig::tolerance_px(int height, int width) const {
  if (tolerance_mode == ToleranceMode::Pixels) return tolerance_value;
  return tolerance_value * std::sqrt(static_cast<double>(height) * height +
                                     static_cast<double>(width) * width);
}

double precision(const MatchCounts& m) {
  const int64_t denom = m.tp + m.fp;
  return denom == 0 ? 0.0 : static_cast<double>(m.tp) / static_cast<double>(denom);
}

double recall(const MatchCounts& m) {
  const int64_t denom = m.tp + m.fn_;
  return denom == 0 ? 0.0 : static_cast<double>(m.tp) / static_cast<double>(denom);
}

double f_measure(double p, double r) {
  return (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

BinaryMap threshold(const SoftMap& pred, double t) {
  BinaryMap out(pred.height, pred.width, 0);
  for (int64_t i = 0; i < pred.size(); ++i) {
    out.data[i] = pred.data[i] >= t ? 1 : 0;
  }
  return out;
}

MatchCounts correspond(const BinaryMap& pred_bin, const BinaryMap& gt_bin,
                       double tol, Matching matching) {
  require_same_shape(pred_bin, gt_bin);
  if (tol < 0.0) throw InvalidConfig("tolerance must be >= 0");

  const std::vector<Pt> pred = positives(pred_bin);
  const std::vector<Pt> gt = positives(gt_bin);

  int64_t tp = 0;
  if (!pred.empty() && !gt.empty()) {
    if (matching == Matching::GreedyNearest) {
      const auto adj = build_adjacency(pred, gt, pred_bin.height,
                                       pred_bin.width, tol);
      tp = greedy_matching(adj, pred, gt, pred_bin.width);
    } else if (pred.size() <= gt.size()) {
      const auto adj = build_adjacency(pred, gt, pred_bin.height,
                                       pred_bin.width, tol);
      tp = max_matching(adj, static_cast<int>(gt.size()));
    } else {
      const auto adj = build_adjacency(gt, pred, pred_bin.height,
                                       pred_bin.width, tol);
      tp = max_matching(adj, static_cast<int>(pred.size()));
    }
  }

  MatchCounts counts;
  counts.tp = tp;
  counts.fp = static_cast<int64_t>(pred.size()) - tp;
  counts.fn_ = static_cast<int64_t>(gt.size()) - tp;
  return counts;
}

std::vector<MatchCounts> pr_at_thresholds(const SoftMap& pred,
                                          const BinaryMap& gt,
                                          const EvalConfig& cfg) {
  cfg.validate();
  require_same_shape(pred, gt);
  const double tol = cfg.tolerance_px(pred.height, pred.width);
  std::vector<MatchCounts> counts(cfg.thresholds.size());
  for (size_t t = 0; t < cfg.thresholds.size(); ++t) {
    counts[t] = correspond(threshold(pred, cfg.thresholds[t]), gt, tol,
                           cfg.matching);
  }
  return counts;
}

EvalReport aggregate(std::vector<ImageEval> images, const EvalConfig& cfg) {
  cfg.validate();
  const size_t n_thr = cfg.thresholds.size();
  for (const auto& img : images) {
    if (img.counts.size() != n_thr) {
      throw DimensionMismatch("image '" + img.stem + "' has " +
                              std::to_string(img.counts.size()) +
                              " thresholds, expected " + std::to_string(n_thr));
    }
  }

  EvalReport report;

  // Per-image optimum: first threshold index attaining the best F.
  for (auto& img : images) {
    img.best_index = 0;
    img.best_f = -1.0;
    for (size_t t = 0; t < n_thr; ++t) {
      const double p = precision(img.counts[t]);
      const double r = recall(img.counts[t]);
      const double f = f_measure(p, r);
      if (f > img.best_f) {
        img.best_f = f;
        img.best_index = static_cast<int>(t);
      }
    }
  }

  // Shared-threshold curve over pooled counts.
  report.dataset_curve.resize(n_thr);
  double best_ods = -1.0;
  for (size_t t = 0; t < n_thr; ++t) {
    MatchCounts sum;
    for (const auto& img : images) {
      sum.tp += img.counts[t].tp;
      sum.fp += img.counts[t].fp;
      sum.fn_ += img.counts[t].fn_;
    }
    PRPoint& pt = report.dataset_curve[t];
    pt.threshold = cfg.thresholds[t];
    pt.counts = sum;
    pt.precision = precision(sum);
    pt.recall = recall(sum);
    pt.f = f_measure(pt.precision, pt.recall);
    if (pt.f > best_ods) {
      best_ods = pt.f;
      report.ods = pt.f;
      report.ods_threshold = pt.threshold;
    }
  }

  // Counts pooled at each image's own best threshold.
  MatchCounts ois_sum;
  for (const auto& img : images) {
    const MatchCounts& m = img.counts[static_cast<size_t>(img.best_index)];
    ois_sum.tp += m.tp;
    ois_sum.fp += m.fp;
    ois_sum.fn_ += m.fn_;
  }
  report.ois = f_measure(precision(ois_sum), recall(ois_sum));

  // Trapezoid area under the dataset PR points, viewed as a function of
  // recall. Duplicate recalls collapse to their best precision; the curve is
  // anchored at recall 0 with the precision of the lowest-recall point.
  std::map<double, double> best_p;
  for (const PRPoint& pt : report.dataset_curve) {
    auto [it, inserted] = best_p.try_emplace(pt.recall, pt.precision);
    if (!inserted) it->second = std::max(it->second, pt.precision);
  }
  double ap = 0.0;
  double prev_r = 0.0;
  double prev_p = best_p.empty() ? 0.0 : best_p.begin()->second;
  for (const auto& [r, p] : best_p) {
    ap += (r - prev_r) * (p + prev_p) / 2.0;
    prev_r = r;
    prev_p = p;
  }
  report.ap = ap;

  report.per_image = std::move(images);
  return report;
}

namespace {

std::vector<std::string> pgm_stems(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    throw IoFailure("not a directory: " + dir.string());
  }
  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") {
      stems.push_back(entry.path().stem().string());
    }
  }
  std::sort(stems.begin(), stems.end());
  return stems;
}

}  // namespace

EvalReport evaluate_dataset(const std::filesystem::path& pred_dir,
                            const std::filesystem::path& gt_dir,
                            const EvalConfig& cfg, int threads) {
  cfg.validate();
  const std::vector<std::string> pred_stems = pgm_stems(pred_dir);
  const std::vector<std::string> gt_stems = pgm_stems(gt_dir);

  const std::set<std::string> pred_set(pred_stems.begin(), pred_stems.end());
  const std::set<std::string> gt_set(gt_stems.begin(), gt_stems.end());
  for (const auto& s : pred_stems) {
    if (!gt_set.count(s)) {
      throw MissingPair("prediction '" + s + "' has no ground truth in " +
                        gt_dir.string());
    }
  }
  for (const auto& s : gt_stems) {
    if (!pred_set.count(s)) {
      throw MissingPair("ground truth '" + s + "' has no prediction in " +
                        pred_dir.string());
    }
  }
  if (pred_stems.empty()) {
    throw IoFailure("no .pgm files to evaluate in " + pred_dir.string());
  }

  std::vector<ImageEval> images(pred_stems.size());
  std::exception_ptr failure;
  std::mutex failure_mu;
  parallel_for(static_cast<int>(pred_stems.size()), threads, [&](int k) {
    try {
      const std::string& stem = pred_stems[static_cast<size_t>(k)];
      const SoftMap pred = io::read_soft(pred_dir / (stem + ".pgm"));
      const BinaryMap gt = io::read_binary(gt_dir / (stem + ".pgm"));
      ImageEval& img = images[static_cast<size_t>(k)];
      img.stem = stem;
      img.counts = pr_at_thresholds(pred, gt, cfg);
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mu);
      if (!failure) failure = std::current_exception();
    }
  });
  if (failure) std::rethrow_exception(failure);

  return aggregate(std::move(images), cfg);
}

void write_report_json(const EvalReport& report, const EvalConfig& cfg,
                       const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["ods"] = report.ods;
  j["ods_threshold"] = report.ods_threshold;
  j["ois"] = report.ois;
  j["ap"] = report.ap;
  j["tolerance_mode"] = cfg.tolerance_mode == ToleranceMode::Pixels
                            ? "pixels"
                            : "diagonal_ratio";
  j["tolerance_value"] = cfg.tolerance_value;
  j["matching"] = matching_to_string(cfg.matching);
  j["thinning"] = "none";  // raw thresholded maps, no NMS or skeletonization
  j["per_image"] = nlohmann::ordered_json::array();
  for (const auto& img : report.per_image) {
    nlohmann::ordered_json e;
    e["stem"] = img.stem;
    e["best_threshold"] = cfg.thresholds[static_cast<size_t>(img.best_index)];
    e["best_f"] = img.best_f;
    j["per_image"].push_back(e);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw IoFailure("write failed: " + path.string());
}

void write_pr_csv(const EvalReport& report, const EvalConfig& cfg,
                  const std::filesystem::path& path) {
  (void)cfg;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure("cannot write " + path.string());
  out << "threshold,tp,fp,fn,precision,recall,f\n";
  char line[160];
  for (const PRPoint& pt : report.dataset_curve) {
    std::snprintf(line, sizeof(line), "%.6f,%lld,%lld,%lld,%.6f,%.6f,%.6f\n",
                  pt.threshold, static_cast<long long>(pt.counts.tp),
                  static_cast<long long>(pt.counts.fp),
                  static_cast<long long>(pt.counts.fn_), pt.precision,
                  pt.recall, pt.f);
    out << line;
  }
  if (!out) throw IoFailure("write failed: " + path.string());
}

}  // namespace edgelab::metrics
