#include "edgelab/pgm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "edgelab/errors.hpp"

namespace edgelab::io {

namespace {

// Reads one PGM header token, skipping whitespace and '#' comments.
// The header grammar allows comments anywhere between tokens.
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

int parse_dim(const std::string& tok, const char* what) {
  if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos) {
    throw MalformedHeader(std::string("bad ") + what + " token '" + tok + "'");
  }
  long v = std::stol(tok);
  if (v <= 0 || v > std::numeric_limits<int>::max()) {
    throw MalformedHeader(std::string(what) + " out of range: " + tok);
  }
  return static_cast<int>(v);
}

}  // namespace

PgmImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path.string());

  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (in.gcount() == 0) throw TruncatedData("empty file: " + path.string());
  if (in.gcount() < 2 || magic[0] != 'P' || magic[1] != '5') {
    throw MalformedHeader("not a binary PGM (P5): " + path.string());
  }

  PgmImage img;
  img.width = parse_dim(next_token(in), "width");
  img.height = parse_dim(next_token(in), "height");
  const std::string maxtok = next_token(in);
  const int maxval = parse_dim(maxtok, "maxval");
  if (maxval != 255 && maxval != 65535) {
    throw UnsupportedMaxval("maxval " + maxtok + " (expected 255 or 65535)");
  }
  img.maxval = maxval;
  // next_token consumed exactly one whitespace byte after the maxval, which
  // is the single separator the format requires before the raster.
  if (!in) throw TruncatedData("header cut short: " + path.string());

  const size_t n = static_cast<size_t>(img.width) * img.height;
  const size_t bytes = n * (maxval == 255 ? 1 : 2);
  std::vector<unsigned char> raw(bytes);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(bytes));
  if (static_cast<size_t>(in.gcount()) != bytes) {
    throw TruncatedData("expected " + std::to_string(bytes) +
                        " raster bytes, got " + std::to_string(in.gcount()) +
                        ": " + path.string());
  }

  img.samples.resize(n);
  if (maxval == 255) {
    std::copy(raw.begin(), raw.end(), img.samples.begin());
  } else {
    for (size_t i = 0; i < n; ++i) {
      img.samples[i] =
          static_cast<uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
    }
  }
  return img;
}

void write_pgm(const PgmImage& img, const std::filesystem::path& path) {
  if (img.maxval != 255 && img.maxval != 65535) {
    throw UnsupportedMaxval("maxval " + std::to_string(img.maxval));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure("cannot open for write: " + path.string());

  out << "P5\n" << img.width << ' ' << img.height << '\n' << img.maxval
      << '\n';
  const size_t n = static_cast<size_t>(img.width) * img.height;
  if (img.maxval == 255) {
    std::vector<unsigned char> raw(n);
    for (size_t i = 0; i < n; ++i) {
      raw[i] = static_cast<unsigned char>(img.samples[i]);
    }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(n));
  } else {
    std::vector<unsigned char> raw(2 * n);
    for (size_t i = 0; i < n; ++i) {
      raw[2 * i] = static_cast<unsigned char>(img.samples[i] >> 8);
      raw[2 * i + 1] = static_cast<unsigned char>(img.samples[i] & 0xff);
    }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(2 * n));
  }
  if (!out) throw IoFailure("write failed: " + path.string());
}

SoftMap read_soft(const std::filesystem::path& path) {
  const PgmImage img = read_pgm(path);
  SoftMap map(img.height, img.width, 0.0);
  const double scale = 1.0 / img.maxval;
  for (int64_t i = 0; i < map.size(); ++i) {
    map.data[i] = img.samples[static_cast<size_t>(i)] * scale;
  }
  return map;
}

BinaryMap read_binary(const std::filesystem::path& path,
                      double positive_threshold) {
  const PgmImage img = read_pgm(path);
  BinaryMap map(img.height, img.width, 0);
  const double scale = 1.0 / img.maxval;
  for (int64_t i = 0; i < map.size(); ++i) {
    map.data[i] =
        img.samples[static_cast<size_t>(i)] * scale >= positive_threshold ? 1
                                                                          : 0;
  }
  return map;
}

void write_soft(const SoftMap& map, const std::filesystem::path& path,
                int maxval) {
  if (maxval != 255 && maxval != 65535) {
    throw UnsupportedMaxval("maxval " + std::to_string(maxval));
  }
  PgmImage img;
  img.width = map.width;
  img.height = map.height;
  img.maxval = maxval;
  img.samples.resize(static_cast<size_t>(map.size()));
  for (int64_t i = 0; i < map.size(); ++i) {
    const double v = std::clamp(map.data[i], 0.0, 1.0);
    img.samples[static_cast<size_t>(i)] =
        static_cast<uint16_t>(std::llround(v * maxval));
  }
  write_pgm(img, path);
}

void write_binary(const BinaryMap& map, const std::filesystem::path& path) {
  PgmImage img;
  img.width = map.width;
  img.height = map.height;
  img.maxval = 255;
  img.samples.resize(static_cast<size_t>(map.size()));
  for (int64_t i = 0; i < map.size(); ++i) {
    img.samples[static_cast<size_t>(i)] = map.data[i] ? 255 : 0;
  }
  write_pgm(img, path);
}

}  // namespace edgelab::io
