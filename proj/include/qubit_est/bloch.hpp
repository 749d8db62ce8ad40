// bloch.hpp
// Bloch-vector geometry, single-copy outcome probabilities, priors and the
// seeded random source used by every sampled computation.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace qest {

using Vec3 = std::array<double, 3>;

inline constexpr double kUnitTolerance = 1e-12;

struct ZeroVectorError : std::domain_error {
  ZeroVectorError() : std::domain_error("cannot normalize a zero vector") {}
};

struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Isotropic priors: uniform on the sphere (sin t dt dphi / 4pi) or on the
// equator (dphi / 2pi). Both have unit mass.
enum class Prior { Sphere3D, Circle2D };

inline constexpr int dimension(Prior p) { return p == Prior::Sphere3D ? 3 : 2; }

inline std::string_view to_string(Prior p) { return p == Prior::Sphere3D ? "3d" : "2d"; }

inline Prior parse_prior(std::string_view s) {
  if (s == "3d" || s == "3D") return Prior::Sphere3D;
  if (s == "2d" || s == "2D") return Prior::Circle2D;
  throw std::invalid_argument("unknown prior '" + std::string(s) + "' (expected 2d or 3d)");
}

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline Vec3 scaled(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

/// Unit vector standing for a pure qubit state or a measurement axis.
///
/// Construction re-normalizes its input, so optimizer round-off is absorbed
/// instead of rejected. Vectors built with planar() have an exactly zero z
/// component and are the 2D (equatorial) states.
class BlochVector {
 public:
  BlochVector() = default;  // +z

  explicit BlochVector(const Vec3& v) : c_(unit(v)) {}
  BlochVector(double x, double y, double z) : BlochVector(Vec3{x, y, z}) {}

  static BlochVector planar(double x, double y) { return BlochVector(Vec3{x, y, 0.0}); }
  static BlochVector from_angles(double polar, double azimuth) {
    const double s = std::sin(polar);
    return BlochVector(Vec3{s * std::cos(azimuth), s * std::sin(azimuth), std::cos(polar)});
  }

  double x() const { return c_[0]; }
  double y() const { return c_[1]; }
  double z() const { return c_[2]; }
  double operator[](std::size_t i) const { return c_[i]; }
  const Vec3& components() const { return c_; }

  double dot(const BlochVector& o) const { return qest::dot(c_, o.c_); }
  bool is_planar() const { return c_[2] == 0.0; }

  BlochVector operator-() const {
    BlochVector r;
    r.c_ = {-c_[0], -c_[1], -c_[2]};
    return r;
  }
  bool operator==(const BlochVector&) const = default;

 private:
  static Vec3 unit(const Vec3& v) {
    const double n = norm(v);
    if (!(n > kUnitTolerance)) throw ZeroVectorError();
    return {v[0] / n, v[1] / n, v[2] / n};
  }

  Vec3 c_{0.0, 0.0, 1.0};
};

inline const BlochVector kAxisX{1.0, 0.0, 0.0};
inline const BlochVector kAxisY{0.0, 1.0, 0.0};
inline const BlochVector kAxisZ{0.0, 0.0, 1.0};

/// v/|v|; throws ZeroVectorError when |v| <= 1e-12.
inline BlochVector normalize(const Vec3& v) { return BlochVector(v); }

inline bool fits_prior(const BlochVector& v, Prior p) { return p == Prior::Sphere3D || v.is_planar(); }

/// Overlap |<n|M>|^2 = (1 + n.M)/2.
inline double fidelity_overlap(const BlochVector& n, const BlochVector& guess) {
  return 0.5 * (1.0 + n.dot(guess));
}

inline double fidelity_overlap(const BlochVector& n, const BlochVector& guess, Prior prior) {
  if (!fits_prior(n, prior) || !fits_prior(guess, prior))
    throw DimensionMismatch("fidelity_overlap: vector leaves the equatorial plane of a 2d prior");
  return fidelity_overlap(n, guess);
}

/// Probability of outcome 0 (projector O(+m)) or 1 (projector O(-m)) for a
/// von Neumann measurement along m on state n.
inline double outcome_probability(const BlochVector& n, const BlochVector& m, int outcome) {
  const double c = n.dot(m);
  return outcome == 0 ? 0.5 * (1.0 + c) : 0.5 * (1.0 - c);
}

// -- random source ----------------------------------------------------------

/// Seeded random stream. The engine (mt19937_64) and the seed expansion
/// (std::seed_seq) are fully specified by the standard, and all variates
/// are derived from raw 64-bit draws here, so a (seed, stream) pair yields
/// the same sequence on every conforming platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x9e3779b9u};
    engine_.seed(seq);
  }

  /// Independent child stream; streams are never shared between threads.
  Rng split(std::uint64_t stream) const { return Rng(seed_, stream_ * 0x100000001b3ULL + stream + 1); }

  std::uint64_t next() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

inline BlochVector sample_prior(Prior prior, Rng& rng) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (prior == Prior::Circle2D) {
    const double phi = two_pi * rng.uniform();
    return BlochVector::planar(std::cos(phi), std::sin(phi));
  }
  // Archimedes: z is uniform on [-1, 1] under the invariant measure.
  const double z = 2.0 * rng.uniform() - 1.0;
  const double phi = two_pi * rng.uniform();
  const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
  return BlochVector(s * std::cos(phi), s * std::sin(phi), z);
}

}  // namespace qest
