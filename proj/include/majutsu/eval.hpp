#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "majutsu/common.hpp"

namespace majutsu::eval {

using Json = nlohmann::json;

/// n x d row-major feature matrix produced by some external embedding network.
struct FeatureSet {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> values;
  std::string source;

  FeatureSet() = default;
  FeatureSet(std::size_t rows, std::size_t cols, std::vector<double> v = {}, std::string src = {});
  double at(std::size_t i, std::size_t j) const { return values[i * d + j]; }
  double& at(std::size_t i, std::size_t j) { return values[i * d + j]; }
  /// SchemaViolation("<row>:<col>") on the first non-finite entry.
  void validate() const;
};

/// Frechet distance between Gaussian fits (covariance with 1/(n-1)).
double compute_fid(const FeatureSet& a, const FeatureSet& b);
/// Unbiased MMD^2 with k(x, y) = (x.y / d + 1)^3, diagonal terms excluded.
double compute_kid(const FeatureSet& a, const FeatureSet& b);
double kid_kernel(const double* x, const double* y, std::size_t d);
/// exp(mean KL(p(y|x) || p(y))) over rows of class probabilities.
double compute_is(const FeatureSet& probs);

// Feature files: "MCFV" + version byte 1, u32 n, u32 d (little-endian), then
// n*d float32 row-major. CSV (one row per line, optional header) is the fallback.
std::vector<std::uint8_t> write_mcfv1(const FeatureSet& f);
FeatureSet read_mcfv1(std::span<const std::uint8_t> bytes);
FeatureSet read_features_csv(std::string_view text);
std::string write_features_csv(const FeatureSet& f);
/// Sniffs the magic and dispatches to the MCFV1 or CSV reader.
FeatureSet load_features(const std::string& path);

enum class Dimension : std::uint8_t { SVC = 0, SRC, MTF, LA };
inline constexpr std::array<Dimension, 4> kDimensions = {Dimension::SVC, Dimension::SRC, Dimension::MTF,
                                                         Dimension::LA};
std::string_view dimension_name(Dimension d);
/// SchemaViolation("dimension") for anything outside the closed set.
Dimension dimension_from_name(std::string_view name);

struct ScoreSheet {
  std::string method;
  Dimension dimension = Dimension::SVC;
  std::vector<double> scores;
  /// ScoreOutOfRange("<method>/<dim>[i]") for scores outside [1, 10].
  void validate() const;
};

struct AqsTable {
  /// method -> dimension -> mean score
  std::map<std::string, std::map<Dimension, double>> mean;
  std::map<std::string, std::map<Dimension, std::size_t>> count;
  /// Fixed-width rows, two decimals: "method  SVC  SRC  MTF  LA" ("-" if absent).
  std::string format() const;
  Json to_json() const;
};

/// EmptyScores when there are no sheets or a sheet has no scores.
AqsTable aggregate_aqs(const std::vector<ScoreSheet>& sheets);

struct ImageRef {
  std::string id;
  std::string method;
  friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

struct ScheduledPair {
  ImageRef a;
  ImageRef b;
  Dimension dimension = Dimension::SVC;
  friend bool operator==(const ScheduledPair&, const ScheduledPair&) = default;
};

inline constexpr int kMinParticipation = 10;

/// Rounds over every method pair (in seeded order) pairing the least-used
/// image of each side until every image has at least `min_participation`
/// comparisons. Pair counts per method pair are equal by construction.
/// TooFewMethods unless at least two methods have images.
std::vector<ScheduledPair> schedule_comparisons(const std::map<std::string, std::vector<std::string>>& images,
                                                Dimension dimension, std::uint64_t seed,
                                                int min_participation = kMinParticipation);

struct TrueSkillParams {
  double mu0 = 25.0;
  double sigma0 = 25.0 / 3.0;
  double beta = 25.0 / 6.0;
  double tau = 25.0 / 300.0;
};

struct Rating {
  double mu = 25.0;
  double sigma = 25.0 / 3.0;
};

/// v(t) = phi(t) / Phi(t), evaluated stably for very negative t.
double trueskill_v(double t);
double trueskill_w(double t);

/// Win/loss update without draws; tau^2 is added to both variances first.
std::pair<Rating, Rating> trueskill_update_pair(Rating winner, Rating loser,
                                                const TrueSkillParams& params = {});

enum class Winner : std::uint8_t { A, B };

struct ComparisonRecord {
  Dimension dimension = Dimension::SVC;
  ImageRef a;
  ImageRef b;
  Winner winner = Winner::A;
  std::string judge;
  std::int64_t timestamp = 0;
  /// SchemaViolation unless the images differ and come from distinct methods.
  void validate() const;
};

/// Method of a method-tagged image id ("<method>/<name>"); empty if untagged.
std::string method_of(std::string_view image_id);

Json record_to_json(const ComparisonRecord& r);
/// Missing method fields are derived from the image id prefix.
ComparisonRecord record_from_json(const Json& j);
std::vector<ComparisonRecord> read_records_jsonl(std::string_view text);
std::string write_records_jsonl(const std::vector<ComparisonRecord>& records);

/// Offset added to mu - 3 sigma when reporting RDR, in units of sigma0, so a
/// method at the prior reports mu0.
inline constexpr double kRdrSigmaOffset = 3.0;

struct LeaderboardEntry {
  std::string method;
  Rating rating;
  double conservative = 0.0;  // mu - 3 sigma
  double rdr = 0.0;           // conservative + kRdrSigmaOffset * sigma0
  std::size_t wins = 0;
  std::size_t losses = 0;
};

struct Leaderboard {
  std::map<Dimension, std::vector<LeaderboardEntry>> by_dimension;
  Json to_json() const;
  /// One JSON object per (dimension, method) line.
  std::string to_jsonl() const;
};

/// Folds records per dimension in (timestamp, input order) through the pair
/// update, then sorts by mu - 3 sigma (ties alphabetical). `methods` lists
/// methods to show even without records.
Leaderboard rank_methods(const std::vector<ComparisonRecord>& records,
                         const std::vector<std::string>& methods = {},
                         const TrueSkillParams& params = {});

}  // namespace majutsu::eval
