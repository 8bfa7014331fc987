#pragma once

#include <stdexcept>
#include <string>

namespace edgelab {

// Base class for all library errors. The CLI maps these onto stable exit
// codes (2 for input/usage errors, 3 for numerical aborts).
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionMismatch : Error {
  explicit DimensionMismatch(const std::string& msg) : Error(msg) {}
};

struct InvalidSpec : Error {
  explicit InvalidSpec(const std::string& msg) : Error(msg) {}
};

struct InvalidConfig : Error {
  explicit InvalidConfig(const std::string& msg) : Error(msg) {}
};

struct EmptyLevelList : Error {
  explicit EmptyLevelList(const std::string& msg) : Error(msg) {}
};

struct IoFailure : Error {
  explicit IoFailure(const std::string& msg) : Error(msg) {}
};

struct MalformedHeader : IoFailure {
  explicit MalformedHeader(const std::string& msg) : IoFailure(msg) {}
};

struct TruncatedData : IoFailure {
  explicit TruncatedData(const std::string& msg) : IoFailure(msg) {}
};

struct UnsupportedMaxval : IoFailure {
  explicit UnsupportedMaxval(const std::string& msg) : IoFailure(msg) {}
};

struct MissingPair : Error {
  explicit MissingPair(const std::string& msg) : Error(msg) {}
};

struct NonFiniteLoss : Error {
  explicit NonFiniteLoss(const std::string& msg) : Error(msg) {}
};

}  // namespace edgelab
