#include "edgelab/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "json.hpp"

#include "edgelab/errors.hpp"
#include "edgelab/parallel.hpp"
#include "edgelab/pgm.hpp"
#include "edgelab/rng.hpp"

namespace edgelab::synth {

namespace {

using LabelMap = Grid<int>;

void paint_rect(LabelMap& labels, int r0, int c0, int h, int w, int label) {
  for (int r = std::max(0, r0); r < std::min(labels.height, r0 + h); ++r) {
    for (int c = std::max(0, c0); c < std::min(labels.width, c0 + w); ++c) {
      labels.at(r, c) = label;
    }
  }
}

// Filled disk from the midpoint circle outline: the algorithm yields the
// widest in-circle column offset per row offset, and rows are filled between
// the mirrored extremes.
void paint_disk(LabelMap& labels, int cr, int cc, int radius, int label) {
  std::vector<int> half(static_cast<size_t>(radius) + 1, 0);
  int x = radius;
  int y = 0;
  int err = 1 - radius;
  while (x >= y) {
    half[static_cast<size_t>(y)] = std::max(half[static_cast<size_t>(y)], x);
    half[static_cast<size_t>(x)] = std::max(half[static_cast<size_t>(x)], y);
    ++y;
    if (err < 0) {
      err += 2 * y + 1;
    } else {
      --x;
      err += 2 * (y - x) + 1;
    }
  }
  for (int dy = -radius; dy <= radius; ++dy) {
    const int r = cr + dy;
    if (r < 0 || r >= labels.height) continue;
    const int hw = half[static_cast<size_t>(std::abs(dy))];
    for (int c = std::max(0, cc - hw); c <= std::min(labels.width - 1, cc + hw);
         ++c) {
      labels.at(r, c) = label;
    }
  }
}

double texture_delta(Texture t, double contrast, int r, int c) {
  switch (t) {
    case Texture::Stripes:
      return ((r / 2) % 2 == 0) ? contrast : -contrast;
    case Texture::Checker:
      return ((r / 2 + c / 2) % 2 == 0) ? contrast : -contrast;
    case Texture::None:
      return 0.0;
  }
  return 0.0;
}

// Draws an intensity separated from everything already placed, so every
// region boundary is a real intensity discontinuity.
double distinct_intensity(Xoshiro256pp& rng, const std::vector<double>& taken,
                          double spacing) {
  for (int tries = 0; tries < 256; ++tries) {
    const double v = rng.uniform(0.2, 0.95);
    bool ok = true;
    for (double u : taken) ok = ok && std::fabs(v - u) >= spacing;
    if (ok) return v;
  }
  // Spacing infeasible for this many shapes; fall back to any draw.
  return rng.uniform(0.2, 0.95);
}

}  // namespace

BinaryMap boundary_map(const Grid<int>& labels) {
  BinaryMap edges(labels.height, labels.width, 0);
  for (int r = 0; r < labels.height; ++r) {
    for (int c = 0; c < labels.width; ++c) {
      const int lab = labels.at(r, c);
      if (lab == 0) continue;
      const bool boundary =
          (r > 0 && labels.at(r - 1, c) != lab) ||
          (r + 1 < labels.height && labels.at(r + 1, c) != lab) ||
          (c > 0 && labels.at(r, c - 1) != lab) ||
          (c + 1 < labels.width && labels.at(r, c + 1) != lab);
      if (boundary) edges.at(r, c) = 1;
    }
  }
  return edges;
}

Texture texture_from_string(const std::string& name) {
  if (name == "none") return Texture::None;
  if (name == "stripes") return Texture::Stripes;
  if (name == "checker") return Texture::Checker;
  throw InvalidSpec("unknown texture '" + name +
                    "' (expected none|stripes|checker)");
}

std::string texture_to_string(Texture t) {
  switch (t) {
    case Texture::None: return "none";
    case Texture::Stripes: return "stripes";
    case Texture::Checker: return "checker";
  }
  return "none";
}

void SceneSpec::validate() const {
  if (height < 16 || width < 16) {
    throw InvalidSpec("size must be at least 16x16, got " +
                      std::to_string(height) + "x" + std::to_string(width));
  }
  if (shape_count <= 0) throw InvalidSpec("shape_count must be positive");
  if (noise_sigma < 0.0 || noise_sigma > 0.5) {
    throw InvalidSpec("noise_sigma must lie in [0, 0.5]");
  }
  if (texture_contrast < 0.0 || texture_contrast > 0.5) {
    throw InvalidSpec("texture_contrast must lie in [0, 0.5]");
  }
}

Sample generate(const SceneSpec& spec, Grid<int>* labels_out) {
  spec.validate();
  const int h = spec.height;
  const int w = spec.width;
  Xoshiro256pp rng(spec.seed);

  // Edge pixels scale with shape perimeter, so when a draw exceeds the
  // density cap the scene is re-drawn with smaller shapes. A matching floor
  // keeps the topmost (never occluded) shape's perimeter above roughly
  // 0.006 * area, so the edge fraction cannot collapse either. The floor
  // makes some (shape_count, size) combinations genuinely infeasible; those
  // are rejected rather than silently dropping shapes.
  const double min_perimeter = 0.006 * h * w;
  LabelMap labels(h, w, 0);
  BinaryMap edges(h, w, 0);
  bool accepted = false;
  for (int attempt = 0; attempt < 48 && !accepted; ++attempt) {
    const double shrink = std::pow(0.9, attempt);
    const int max_side =
        std::max(4, static_cast<int>(std::min(h, w) * 0.45 * shrink));
    // A k x k rectangle has 4k - 4 boundary pixels; a radius-R disk about 5R.
    const int rect_min = std::min(
        max_side,
        std::max(4, static_cast<int>(std::ceil((min_perimeter + 4.0) / 4.0))));
    const int radius_max = std::max(2, max_side / 2);
    const int radius_min = std::min(
        radius_max,
        std::max(2, static_cast<int>(std::ceil(min_perimeter / 4.0))));

    std::fill(labels.data.begin(), labels.data.end(), 0);
    for (int s = 1; s <= spec.shape_count; ++s) {
      if (rng.coin()) {
        const int sh = rng.range(rect_min, max_side);
        const int sw = rng.range(rect_min, max_side);
        const int r0 = rng.range(0, h - sh);
        const int c0 = rng.range(0, w - sw);
        paint_rect(labels, r0, c0, sh, sw, s);
      } else {
        const int radius = rng.range(radius_min, radius_max);
        const int cr = rng.range(radius, h - 1 - radius);
        const int cc = rng.range(radius, w - 1 - radius);
        paint_disk(labels, cr, cc, radius, s);
      }
    }

    // Later shapes may occlude earlier ones; every shape must stay visible.
    std::vector<bool> seen(static_cast<size_t>(spec.shape_count) + 1, false);
    for (int v : labels.data) seen[static_cast<size_t>(v)] = true;
    bool all_visible = true;
    for (int s = 1; s <= spec.shape_count; ++s) all_visible &= seen[static_cast<size_t>(s)];
    if (!all_visible) continue;

    edges = boundary_map(labels);
    const double density =
        static_cast<double>(count_positives(edges)) / static_cast<double>(edges.size());
    accepted = density <= kMaxEdgeDensity;
  }
  if (!accepted) {
    throw InvalidSpec("cannot place " + std::to_string(spec.shape_count) +
                      " shapes in " + std::to_string(h) + "x" +
                      std::to_string(w) + " under the edge density cap");
  }

  // Intensities: one per region, pairwise separated where feasible.
  const double spacing =
      std::min(0.08, 0.75 / (2.0 * (spec.shape_count + 1)));
  std::vector<double> intensity(static_cast<size_t>(spec.shape_count) + 1);
  intensity[0] = rng.uniform(0.02, 0.15);  // background, kept dark
  std::vector<double> taken = {intensity[0]};
  for (int s = 1; s <= spec.shape_count; ++s) {
    intensity[static_cast<size_t>(s)] = distinct_intensity(rng, taken, spacing);
    taken.push_back(intensity[static_cast<size_t>(s)]);
  }

  Sample sample;
  sample.edges = std::move(edges);
  sample.image = SoftMap(h, w, 0.0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double v = intensity[static_cast<size_t>(labels.at(r, c))];
      if (labels.at(r, c) != 0) {
        v += texture_delta(spec.texture, spec.texture_contrast, r, c);
      }
      if (spec.noise_sigma > 0.0) v += spec.noise_sigma * rng.gaussian();
      sample.image.at(r, c) = std::clamp(v, 0.0, 1.0);
    }
  }
  if (labels_out) *labels_out = std::move(labels);
  return sample;
}

void generate_split(const SceneSpec& base, int n_train, int n_test,
                    const std::filesystem::path& out, int threads) {
  if (n_train < 1 || n_test < 1) {
    throw InvalidSpec("n_train and n_test must be at least 1");
  }
  base.validate();

  namespace fs = std::filesystem;
  std::error_code ec;
  for (const char* split : {"train", "test"}) {
    fs::create_directories(out / split / "images", ec);
    if (ec) throw IoFailure("cannot create " + (out / split).string());
    fs::create_directories(out / split / "edges", ec);
    if (ec) throw IoFailure("cannot create " + (out / split).string());
  }

  const int total = n_train + n_test;
  std::vector<Sample> samples(static_cast<size_t>(total));
  parallel_for(total, threads, [&](int k) {
    SceneSpec spec = base;
    spec.seed = derive_seed(base.seed, static_cast<uint64_t>(k));
    samples[static_cast<size_t>(k)] = generate(spec);
  });

  nlohmann::ordered_json manifest;
  manifest["schema"] = "edgelab-dataset/1";
  manifest["base_seed"] = base.seed;
  manifest["n_train"] = n_train;
  manifest["n_test"] = n_test;
  manifest["samples"] = nlohmann::ordered_json::array();
  for (int k = 0; k < total; ++k) {
    const bool is_train = k < n_train;
    const int local = is_train ? k : k - n_train;
    const std::string split = is_train ? "train" : "test";
    char stem[16];
    std::snprintf(stem, sizeof(stem), "%04d", local);
    const std::string img_rel = split + "/images/" + stem + ".pgm";
    const std::string edge_rel = split + "/edges/" + stem + ".pgm";

    io::write_soft(samples[static_cast<size_t>(k)].image, out / img_rel, 255);
    io::write_binary(samples[static_cast<size_t>(k)].edges, out / edge_rel);

    nlohmann::ordered_json entry;
    entry["split"] = split;
    entry["index"] = local;
    entry["image"] = img_rel;
    entry["edges"] = edge_rel;
    entry["spec"] = {
        {"seed", derive_seed(base.seed, static_cast<uint64_t>(k))},
        {"height", base.height},
        {"width", base.width},
        {"shape_count", base.shape_count},
        {"noise_sigma", base.noise_sigma},
        {"texture", texture_to_string(base.texture)},
        {"texture_contrast", base.texture_contrast},
    };
    manifest["samples"].push_back(entry);
  }

  std::ofstream mf(out / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!mf) throw IoFailure("cannot write " + (out / "manifest.json").string());
  mf << manifest.dump(2) << "\n";
  if (!mf) throw IoFailure("write failed: " + (out / "manifest.json").string());
}

}  // namespace edgelab::synth
