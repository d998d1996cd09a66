#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>

namespace rfm {

/// Small coordinate vector (at most x, y, z, t). Stack allocated.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 4, 1>;

inline constexpr int kMaxDim = 4;

enum class Side : std::uint8_t { One = 0, Two = 1 };

enum class Subdomain : std::uint8_t { One, Two, Outside };

inline Side other(Side s) { return s == Side::One ? Side::Two : Side::One; }
inline int index(Side s) { return static_cast<int>(s); }
const char* to_string(Side s);
const char* to_string(Subdomain s);

/// A spatial point together with a time stamp. For stationary problems the
/// time is ignored.
struct SpaceTimePoint {
  Vec x;
  double t = 0.0;
};

/// Partial-derivative multi-index over model coordinates; alpha[k] is the
/// number of derivatives taken along axis k.
struct MultiIndex {
  std::array<std::uint8_t, kMaxDim> alpha{};

  static MultiIndex value() { return {}; }
  static MultiIndex d(int a) {
    MultiIndex m;
    ++m.alpha[a];
    return m;
  }
  static MultiIndex dd(int a, int b) {
    MultiIndex m;
    ++m.alpha[a];
    ++m.alpha[b];
    return m;
  }

  int order() const { return alpha[0] + alpha[1] + alpha[2] + alpha[3]; }
  /// Axes differentiated, in ascending order; unused slots are -1.
  std::array<int, 2> axes() const;

  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
};

std::string to_string(const MultiIndex& m);

}  // namespace rfm
