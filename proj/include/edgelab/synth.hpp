#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "edgelab/grid.hpp"

namespace edgelab::synth {

enum class Texture { None, Stripes, Checker };

Texture texture_from_string(const std::string& name);  // throws InvalidSpec
std::string texture_to_string(Texture t);

struct SceneSpec {
  uint64_t seed = 0;
  int height = 64;
  int width = 64;
  int shape_count = 3;
  double noise_sigma = 0.0;        // additive Gaussian, intensity units
  Texture texture = Texture::None;
  double texture_contrast = 0.0;

  void validate() const;  // throws InvalidSpec
};

struct Sample {
  SoftMap image;
  BinaryMap edges;
};

// Renders shape_count filled convex shapes (axis-aligned rectangles and
// filled midpoint circles) with distinct intensities over a flat background,
// then optional texture inside the shapes and additive Gaussian noise
// clipped to [0,1]. The edge map is derived from the underlying shape labels
// before texture or noise: a pixel is an edge iff it belongs to a shape and
// has an in-image 4-neighbor with a different label. Shape sizes are
// re-drawn smaller until the edge fraction fits under the density cap.
// labels_out, when given, receives the underlying shape labels
// (0 = background) so callers can verify the edge map against them.
Sample generate(const SceneSpec& spec, Grid<int>* labels_out = nullptr);

// The edge-derivation rule by itself: a pixel is a boundary iff its label is
// nonzero and some in-image 4-neighbor holds a different label.
BinaryMap boundary_map(const Grid<int>& labels);

// Fraction of the map a generated edge set may occupy.
inline constexpr double kMaxEdgeDensity = 0.15;

// Writes n_train + n_test samples under out/train and out/test as
// images/NNNN.pgm (8-bit) and edges/NNNN.pgm pairs, plus a manifest.json.
// Sample k draws its seed from (base.seed, k), so the result is independent
// of generation order.
void generate_split(const SceneSpec& base, int n_train, int n_test,
                    const std::filesystem::path& out, int threads = 0);

}  // namespace edgelab::synth
