#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace majutsu {

enum class ErrorCode {
  // layout
  NonPaletteColor,
  CorruptImage,
  NegativeHMax,
  DimensionMismatch,
  EmptyMask,
  MultipleComponents,
  // geometry
  ZeroHeight,
  InvalidPolygon,
  EmptyInput,
  DegenerateAsset,
  DegenerateOBB,
  EmptyMesh,
  ResolutionMismatch,
  // scene
  MissingAsset,
  MaterialMissing,
  SerializationFailure,
  UnknownVersion,
  SchemaViolation,
  // edit
  ParseError,
  UnknownInstance,
  UnknownMaterial,
  OutOfBounds,
  InvalidPatch,
  NothingToUndo,
  NothingToRedo,
  // providers
  ProviderUnavailable,
  IncompleteSpec,
  InvalidProviderOutput,
  RefineExhausted,
  MissingMap,
  DanglingURI,
  DuplicateId,
  EmptyLibrary,
  // eval
  TooFewSamples,
  NotADistribution,
  EmptyScores,
  ScoreOutOfRange,
  TooFewMethods,
  // orchestrator
  ConfigError,
  PipelineFailure,
};

std::string_view to_string(ErrorCode code);

/// Every failure surfaced by the library. `detail` carries the machine-readable
/// payload of the error (offending id, JSON path, map kind, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string detail, const std::string& message = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
  friend Vec2 operator*(double s, Vec2 a) { return {a.x * s, a.y * s}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
  friend Vec3 operator*(double s, Vec3 a) { return {a.x * s, a.y * s, a.z * s}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(Vec3 a) {
  const double n = norm(a);
  return n > 0.0 ? a * (1.0 / n) : Vec3{};
}

struct Pixel {
  int x = 0;
  int y = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
  friend auto operator<=>(const Pixel& a, const Pixel& b) {
    if (auto c = a.y <=> b.y; c != 0) return c;
    return a.x <=> b.x;
  }
};

/// Row-major 2D grid. Row 0 is the top image row.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height),
        cells_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {
    if (width < 0 || height < 0) throw std::invalid_argument("negative grid size");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return cells_.size(); }
  bool empty() const noexcept { return cells_.empty(); }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }
  T& at(int x, int y) { return cells_[index(x, y)]; }
  const T& at(int x, int y) const { return cells_[index(x, y)]; }
  T& operator[](std::size_t i) { return cells_[i]; }
  const T& operator[](std::size_t i) const { return cells_[i]; }

  std::span<T> cells() noexcept { return cells_; }
  std::span<const T> cells() const noexcept { return cells_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> cells_;
};

using Bitmask = Grid<std::uint8_t>;

std::size_t count_set(const Bitmask& mask);

/// Map frame: x east, y north, z up, all in meters. Pixel (col, row) covers
/// x in [col, col+1]*mpp and y in [H-row-1, H-row]*mpp.
inline Vec2 pixel_center(int col, int row, int grid_height, double mpp) {
  return {(col + 0.5) * mpp, (grid_height - row - 0.5) * mpp};
}

/// Pixel containing a map-frame point (may be outside the grid).
inline Pixel pixel_at(Vec2 p, int grid_height, double mpp) {
  return {static_cast<int>(std::floor(p.x / mpp)),
          grid_height - 1 - static_cast<int>(std::floor(p.y / mpp))};
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes,
                      std::uint64_t seed = 1469598103934665603ULL);
std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed = 1469598103934665603ULL);
std::string hex64(std::uint64_t value);

/// splitmix64 finalizer; used to derive independent seeds from (seed, key).
std::uint64_t mix64(std::uint64_t value);

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double unit_double(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);
void write_file(const std::string& path, std::string_view text);

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);

}  // namespace majutsu
