#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace stfem {

/// Maximum space-time dimension (d = 2 spatial axes plus time).
inline constexpr int kMaxDim = 3;

/// Per-axis refinement depth limit. Lattice coordinates of a root cell span 2^kMaxLevel.
inline constexpr int kMaxLevel = 24;

using Lattice = std::int64_t;
using Point = std::array<double, kMaxDim>;

enum class ErrorKind {
  invalid_argument,
  stale_directive,
  invalid_mesh,
  hierarchy,
  coefficient,
  parameter,
  solver,
  config,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace stfem
