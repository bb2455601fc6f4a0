#pragma once

#include <stdexcept>
#include <string>

namespace pipeboost {

enum class Errc {
  InvalidArgument,
  ProfileCorrupt,
  InvalidMapping,
  TooLarge,
  DimensionMismatch,
  Overflow,
  NotTrained,
  Io,
};

const char* to_string(Errc code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace pipeboost
