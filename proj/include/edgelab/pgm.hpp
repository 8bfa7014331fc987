#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "edgelab/grid.hpp"

namespace edgelab::io {

// Binary (P5) PGM image. maxval is restricted to 255 or 65535; 16-bit
// samples are big-endian on disk per the PGM specification.
struct PgmImage {
  int width = 0;
  int height = 0;
  int maxval = 255;
  std::vector<uint16_t> samples;  // row-major
};

PgmImage read_pgm(const std::filesystem::path& path);
void write_pgm(const PgmImage& img, const std::filesystem::path& path);

// Decodes samples to sample/maxval.
SoftMap read_soft(const std::filesystem::path& path);

// Decodes and binarizes: pixel = 1 iff sample/maxval >= positive_threshold.
BinaryMap read_binary(const std::filesystem::path& path,
                      double positive_threshold = 0.5);

// Encodes round(value * maxval), ties away from zero. Values are expected
// in [0,1]; out-of-range values are clamped before quantization.
void write_soft(const SoftMap& map, const std::filesystem::path& path,
                int maxval = 65535);

// Writes 0/255 at maxval 255.
void write_binary(const BinaryMap& map, const std::filesystem::path& path);

}  // namespace edgelab::io
