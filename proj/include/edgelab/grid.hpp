#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edgelab/errors.hpp"

namespace edgelab {

// Row-major H x W grid. Everything in the pipeline (predictions, ground
// truth, gradients) travels through one of the aliases below.
template <typename T>
struct Grid {
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int h, int w, T fill = T{}) : height(h), width(w) {
    if (h < 1 || w < 1) {
      throw InvalidSpec("grid dimensions must be positive, got " +
                        std::to_string(h) + "x" + std::to_string(w));
    }
    data.assign(static_cast<size_t>(h) * static_cast<size_t>(w), fill);
  }

  T& at(int r, int c) { return data[static_cast<size_t>(r) * width + c]; }
  const T& at(int r, int c) const {
    return data[static_cast<size_t>(r) * width + c];
  }

  int64_t size() const { return static_cast<int64_t>(height) * width; }
  bool empty() const { return data.empty(); }

  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return height == other.height && width == other.width;
  }

  bool operator==(const Grid& other) const {
    return height == other.height && width == other.width &&
           data == other.data;
  }
};

// A model prediction or soft label; values in [0, 1].
using SoftMap = Grid<double>;

// A ground-truth edge map or thresholded prediction; values in {0, 1}.
using BinaryMap = Grid<uint8_t>;

template <typename A, typename B>
inline void require_same_shape(const Grid<A>& a, const Grid<B>& b,
                               const char* what = "maps") {
  if (!a.same_shape(b)) {
    throw DimensionMismatch(std::string(what) + ": shapes differ, " +
                            std::to_string(a.height) + "x" +
                            std::to_string(a.width) + " vs " +
                            std::to_string(b.height) + "x" +
                            std::to_string(b.width));
  }
}

inline bool in_unit_range(const SoftMap& m) {
  for (double v : m.data) {
    if (!(v >= 0.0 && v <= 1.0)) return false;
  }
  return true;
}

inline int64_t count_positives(const BinaryMap& m) {
  int64_t n = 0;
  for (uint8_t v : m.data) n += (v != 0);
  return n;
}

}  // namespace edgelab
