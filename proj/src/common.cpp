#include "majutsu/common.hpp"

#include <array>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace majutsu {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPaletteColor: return "NonPaletteColor";
    case ErrorCode::CorruptImage: return "CorruptImage";
    case ErrorCode::NegativeHMax: return "NegativeHMax";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::MultipleComponents: return "MultipleComponents";
    case ErrorCode::ZeroHeight: return "ZeroHeight";
    case ErrorCode::InvalidPolygon: return "InvalidPolygon";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DegenerateAsset: return "DegenerateAsset";
    case ErrorCode::DegenerateOBB: return "DegenerateOBB";
    case ErrorCode::EmptyMesh: return "EmptyMesh";
    case ErrorCode::ResolutionMismatch: return "ResolutionMismatch";
    case ErrorCode::MissingAsset: return "MissingAsset";
    case ErrorCode::MaterialMissing: return "MaterialMissing";
    case ErrorCode::SerializationFailure: return "SerializationFailure";
    case ErrorCode::UnknownVersion: return "UnknownVersion";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnknownInstance: return "UnknownInstance";
    case ErrorCode::UnknownMaterial: return "UnknownMaterial";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::InvalidPatch: return "InvalidPatch";
    case ErrorCode::NothingToUndo: return "NothingToUndo";
    case ErrorCode::NothingToRedo: return "NothingToRedo";
    case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
    case ErrorCode::IncompleteSpec: return "IncompleteSpec";
    case ErrorCode::InvalidProviderOutput: return "InvalidProviderOutput";
    case ErrorCode::RefineExhausted: return "RefineExhausted";
    case ErrorCode::MissingMap: return "MissingMap";
    case ErrorCode::DanglingURI: return "DanglingURI";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::EmptyLibrary: return "EmptyLibrary";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::NotADistribution: return "NotADistribution";
    case ErrorCode::EmptyScores: return "EmptyScores";
    case ErrorCode::ScoreOutOfRange: return "ScoreOutOfRange";
    case ErrorCode::TooFewMethods: return "TooFewMethods";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::PipelineFailure: return "PipelineFailure";
  }
  return "Unknown";
}

namespace {

std::string compose_message(ErrorCode code, const std::string& detail,
                            const std::string& message) {
  std::string out(to_string(code));
  if (!detail.empty()) out += "(" + detail + ")";
  if (!message.empty()) out += ": " + message;
  return out;
}

}  // namespace

Error::Error(ErrorCode code, std::string detail, const std::string& message)
    : std::runtime_error(compose_message(code, detail, message)),
      code_(code),
      detail_(std::move(detail)) {}

std::size_t count_set(const Bitmask& mask) {
  std::size_t n = 0;
  for (auto v : mask.cells()) n += v != 0;
  return n;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (auto b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed) {
  return fnv1a64(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()),
                 seed);
}

std::string hex64(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[value & 0xF];
    value >>= 4;
  }
  return out;
}

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {
constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}
}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kB64[(v >> 18) & 63];
    out += kB64[(v >> 12) & 63];
    out += kB64[(v >> 6) & 63];
    out += kB64[v & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const std::uint32_t v = bytes[i] << 16;
    out += kB64[(v >> 18) & 63];
    out += kB64[(v >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kB64[(v >> 18) & 63];
    out += kB64[(v >> 12) & 63];
    out += kB64[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  std::uint32_t acc = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=') break;
    const int v = b64_value(c);
    if (v < 0) throw std::invalid_argument("invalid base64 character");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
    }
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write " + path);
  }
  std::filesystem::rename(tmp, target);
}

void write_file(const std::string& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string format_double(double value) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf.data(), end);
}

}  // namespace majutsu
