#include "majutsu/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include <Eigen/Dense>

namespace majutsu::eval {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd to_matrix(const FeatureSet& f) {
  MatrixXd m(static_cast<Eigen::Index>(f.n), static_cast<Eigen::Index>(f.d));
  for (std::size_t i = 0; i < f.n; ++i) {
    for (std::size_t j = 0; j < f.d; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = f.at(i, j);
  }
  return m;
}

void check_pair(const FeatureSet& a, const FeatureSet& b) {
  if (a.d != b.d) {
    throw Error(ErrorCode::DimensionMismatch, std::to_string(a.d) + " vs " + std::to_string(b.d));
  }
  if (a.n < 2 || b.n < 2) throw Error(ErrorCode::TooFewSamples, std::to_string(std::min(a.n, b.n)));
  a.validate();
  b.validate();
}

/// Symmetric PSD square root with negative eigenvalues clamped to zero.
MatrixXd sqrtm_psd(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()));
  VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

FeatureSet::FeatureSet(std::size_t rows, std::size_t cols, std::vector<double> v, std::string src)
    : n(rows), d(cols), values(std::move(v)), source(std::move(src)) {
  if (values.empty()) values.assign(n * d, 0.0);
  if (values.size() != n * d) throw Error(ErrorCode::DimensionMismatch, "values", "feature matrix size");
}

void FeatureSet::validate() const {
  if (values.size() != n * d) throw Error(ErrorCode::DimensionMismatch, "values");
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!std::isfinite(values[k])) {
      throw Error(ErrorCode::SchemaViolation, std::to_string(k / d) + ":" + std::to_string(k % d),
                  "non-finite feature");
    }
  }
}

double compute_fid(const FeatureSet& a, const FeatureSet& b) {
  check_pair(a, b);
  const MatrixXd ma = to_matrix(a), mb = to_matrix(b);
  const VectorXd mu_a = ma.colwise().mean(), mu_b = mb.colwise().mean();
  const MatrixXd ca = ma.rowwise() - mu_a.transpose();
  const MatrixXd cb = mb.rowwise() - mu_b.transpose();
  const MatrixXd sa = ca.transpose() * ca / static_cast<double>(a.n - 1);
  const MatrixXd sb = cb.transpose() * cb / static_cast<double>(b.n - 1);
  const MatrixXd root_a = sqrtm_psd(sa);
  const MatrixXd inner = root_a * sb * root_a;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double tr_sqrt = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double fid = (mu_a - mu_b).squaredNorm() + sa.trace() + sb.trace() - 2.0 * tr_sqrt;
  return std::max(0.0, fid);
}

double kid_kernel(const double* x, const double* y, std::size_t d) {
  double s = 0.0;
  for (std::size_t k = 0; k < d; ++k) s += x[k] * y[k];
  const double base = s / static_cast<double>(d) + 1.0;
  return base * base * base;
}

double compute_kid(const FeatureSet& a, const FeatureSet& b) {
  check_pair(a, b);
  const std::size_t m = a.n, n = b.n, d = a.d;
  auto row = [d](const FeatureSet& f, std::size_t i) { return f.values.data() + i * d; };
  double kxx = 0.0, kyy = 0.0, kxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) kxx += kid_kernel(row(a, i), row(a, j), d);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) kyy += kid_kernel(row(b, i), row(b, j), d);
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) kxy += kid_kernel(row(a, i), row(b, j), d);
  }
  const double dm = static_cast<double>(m), dn = static_cast<double>(n);
  return 2.0 * kxx / (dm * (dm - 1.0)) + 2.0 * kyy / (dn * (dn - 1.0)) - 2.0 * kxy / (dm * dn);
}

double compute_is(const FeatureSet& p) {
  if (p.n == 0 || p.d == 0) throw Error(ErrorCode::TooFewSamples, "0");
  for (std::size_t i = 0; i < p.n; ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < p.d; ++c) {
      const double v = p.at(i, c);
      if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorCode::NotADistribution, std::to_string(i));
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw Error(ErrorCode::NotADistribution, std::to_string(i));
  }
  std::vector<double> marginal(p.d, 0.0);
  for (std::size_t i = 0; i < p.n; ++i) {
    for (std::size_t c = 0; c < p.d; ++c) marginal[c] += p.at(i, c);
  }
  for (double& m : marginal) m /= static_cast<double>(p.n);
  double kl_sum = 0.0;
  for (std::size_t i = 0; i < p.n; ++i) {
    for (std::size_t c = 0; c < p.d; ++c) {
      const double v = p.at(i, c);
      if (v > 0.0) kl_sum += v * (std::log(v) - std::log(marginal[c]));
    }
  }
  return std::exp(kl_sum / static_cast<double>(p.n));
}

// ---- feature files ----------------------------------------------------------

std::vector<std::uint8_t> write_mcfv1(const FeatureSet& f) {
  std::vector<std::uint8_t> out = {'M', 'C', 'F', 'V', 1};
  auto put32 = [&](std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  };
  put32(static_cast<std::uint32_t>(f.n));
  put32(static_cast<std::uint32_t>(f.d));
  for (double v : f.values) {
    const float x = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &x, 4);
    put32(bits);
  }
  return out;
}

FeatureSet read_mcfv1(std::span<const std::uint8_t> b) {
  if (b.size() < 13 || std::memcmp(b.data(), "MCFV", 4) != 0) {
    throw Error(ErrorCode::SerializationFailure, "magic", "not an MCFV feature file");
  }
  if (b[4] != 1) throw Error(ErrorCode::SerializationFailure, "version", "unsupported MCFV version");
  auto get32 = [&](std::size_t at) {
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(b[at + static_cast<std::size_t>(k)]) << (8 * k);
    return v;
  };
  const std::size_t n = get32(5), d = get32(9);
  if (b.size() != 13 + 4 * n * d) throw Error(ErrorCode::SerializationFailure, "size", "truncated feature file");
  FeatureSet f(n, d, {}, "mcfv1");
  for (std::size_t k = 0; k < n * d; ++k) {
    const std::uint32_t bits = get32(13 + 4 * k);
    float x;
    std::memcpy(&x, &bits, 4);
    f.values[k] = x;
  }
  f.validate();
  return f;
}

FeatureSet read_features_csv(std::string_view text) {
  std::vector<double> values;
  std::size_t d = 0, n = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ls, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (first) {
        first = false;  // header
        continue;
      }
      throw Error(ErrorCode::SerializationFailure, "csv:" + std::to_string(n + 1), "non-numeric cell");
    }
    first = false;
    if (d == 0) d = row.size();
    if (row.size() != d) throw Error(ErrorCode::DimensionMismatch, "csv:" + std::to_string(n + 1));
    values.insert(values.end(), row.begin(), row.end());
    ++n;
  }
  FeatureSet f(n, d, std::move(values), "csv");
  f.validate();
  return f;
}

std::string write_features_csv(const FeatureSet& f) {
  std::string out;
  for (std::size_t i = 0; i < f.n; ++i) {
    for (std::size_t j = 0; j < f.d; ++j) {
      if (j) out += ',';
      out += format_double(f.at(i, j));
    }
    out += '\n';
  }
  return out;
}

FeatureSet load_features(const std::string& path) {
  const auto bytes = read_file(path);
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), "MCFV", 4) == 0) return read_mcfv1(bytes);
  FeatureSet f = read_features_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  f.source = path;
  return f;
}

// ---- AQS --------------------------------------------------------------------

std::string_view dimension_name(Dimension d) {
  switch (d) {
    case Dimension::SVC: return "SVC";
    case Dimension::SRC: return "SRC";
    case Dimension::MTF: return "MTF";
    case Dimension::LA: return "LA";
  }
  return "?";
}

Dimension dimension_from_name(std::string_view name) {
  for (auto d : kDimensions) {
    if (dimension_name(d) == name) return d;
  }
  throw Error(ErrorCode::SchemaViolation, "dimension", "unknown dimension '" + std::string(name) + "'");
}

void ScoreSheet::validate() const {
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!(scores[i] >= 1.0 && scores[i] <= 10.0)) {
      throw Error(ErrorCode::ScoreOutOfRange,
                  method + "/" + std::string(dimension_name(dimension)) + "[" + std::to_string(i) + "]",
                  "score " + format_double(scores[i]) + " outside [1, 10]");
    }
  }
}

AqsTable aggregate_aqs(const std::vector<ScoreSheet>& sheets) {
  if (sheets.empty()) throw Error(ErrorCode::EmptyScores, "", "no score sheets");
  std::map<std::string, std::map<Dimension, double>> sums;
  AqsTable t;
  for (const auto& s : sheets) {
    s.validate();
    if (s.scores.empty()) {
      throw Error(ErrorCode::EmptyScores, s.method + "/" + std::string(dimension_name(s.dimension)));
    }
    for (double v : s.scores) sums[s.method][s.dimension] += v;
    t.count[s.method][s.dimension] += s.scores.size();
  }
  for (const auto& [m, per] : sums) {
    for (const auto& [d, sum] : per) t.mean[m][d] = sum / static_cast<double>(t.count[m][d]);
  }
  return t;
}

std::string AqsTable::format() const {
  std::size_t width = 6;
  for (const auto& [m, _] : mean) width = std::max(width, m.size());
  std::ostringstream out;
  out << std::string("method") << std::string(width - 6, ' ');
  for (auto d : kDimensions) {
    const auto name = dimension_name(d);
    out << "  " << std::string(6 - name.size(), ' ') << name;
  }
  out << '\n';
  for (const auto& [m, per] : mean) {
    out << m << std::string(width - m.size(), ' ');
    for (auto d : kDimensions) {
      char cell[32];
      const auto it = per.find(d);
      if (it == per.end()) std::snprintf(cell, sizeof cell, "%6s", "-");
      else std::snprintf(cell, sizeof cell, "%6.2f", it->second);
      out << "  " << cell;
    }
    out << '\n';
  }
  return out.str();
}

Json AqsTable::to_json() const {
  Json j = Json::object();
  for (const auto& [m, per] : mean) {
    for (const auto& [d, v] : per) j[m][std::string(dimension_name(d))] = v;
  }
  return j;
}

// ---- scheduling ---------------------------------------------------------------

std::vector<ScheduledPair> schedule_comparisons(const std::map<std::string, std::vector<std::string>>& images,
                                                Dimension dimension, std::uint64_t seed, int min_participation) {
  struct Slot {
    ImageRef ref;
    int uses = 0;
    std::uint64_t key = 0;
  };
  std::vector<std::vector<Slot>> methods;
  for (const auto& [method, ids] : images) {
    if (ids.empty()) continue;
    std::vector<Slot> slots;
    for (const auto& id : ids) slots.push_back({{id, method}, 0, mix64(seed ^ fnv1a64(method + "/" + id))});
    methods.push_back(std::move(slots));
  }
  if (methods.size() < 2) throw Error(ErrorCode::TooFewMethods, std::to_string(methods.size()));
  std::vector<std::pair<std::size_t, std::size_t>> method_pairs;
  for (std::size_t i = 0; i < methods.size(); ++i) {
    for (std::size_t j = i + 1; j < methods.size(); ++j) method_pairs.emplace_back(i, j);
  }
  std::mt19937_64 rng(mix64(seed ^ static_cast<std::uint64_t>(dimension)));
  auto least_used = [](std::vector<Slot>& slots) -> Slot& {
    return *std::min_element(slots.begin(), slots.end(), [](const Slot& x, const Slot& y) {
      return x.uses != y.uses ? x.uses < y.uses : x.key < y.key;
    });
  };
  auto satisfied = [&] {
    for (const auto& slots : methods) {
      for (const auto& s : slots) {
        if (s.uses < min_participation) return false;
      }
    }
    return true;
  };
  std::vector<ScheduledPair> out;
  while (!satisfied()) {
    std::shuffle(method_pairs.begin(), method_pairs.end(), rng);
    for (const auto& [i, j] : method_pairs) {
      Slot& x = least_used(methods[i]);
      Slot& y = least_used(methods[j]);
      ++x.uses;
      ++y.uses;
      // Left/right position is randomized so judges cannot infer methods from it.
      if (rng() & 1) out.push_back({x.ref, y.ref, dimension});
      else out.push_back({y.ref, x.ref, dimension});
      // Re-key so repeated pairings rotate through equally used images.
      x.key = mix64(x.key);
      y.key = mix64(y.key);
    }
  }
  return out;
}

// ---- TrueSkill --------------------------------------------------------------------

double trueskill_v(double t) {
  const double cdf = 0.5 * std::erfc(-t * kInvSqrt2);
  const double pdf = kInvSqrt2Pi * std::exp(-0.5 * t * t);
  if (cdf > 1e-300 && t > -30.0) return pdf / cdf;
  // Mills-ratio asymptotics for the far left tail.
  const double t2 = t * t;
  return -t / (1.0 - 1.0 / t2 + 3.0 / (t2 * t2));
}

double trueskill_w(double t) {
  const double v = trueskill_v(t);
  return v * (v + t);
}

std::pair<Rating, Rating> trueskill_update_pair(Rating w, Rating l, const TrueSkillParams& p) {
  const double var_w = w.sigma * w.sigma + p.tau * p.tau;
  const double var_l = l.sigma * l.sigma + p.tau * p.tau;
  const double c2 = 2.0 * p.beta * p.beta + var_w + var_l;
  const double c = std::sqrt(c2);
  const double t = (w.mu - l.mu) / c;
  const double v = trueskill_v(t), wt = trueskill_w(t);
  Rating nw{w.mu + var_w / c * v, std::sqrt(var_w * std::max(1e-12, 1.0 - var_w / c2 * wt))};
  Rating nl{l.mu - var_l / c * v, std::sqrt(var_l * std::max(1e-12, 1.0 - var_l / c2 * wt))};
  return {nw, nl};
}

// ---- records ---------------------------------------------------------------------

std::string method_of(std::string_view image_id) {
  const auto slash = image_id.find('/');
  return slash == std::string_view::npos ? std::string() : std::string(image_id.substr(0, slash));
}

void ComparisonRecord::validate() const {
  if (a.id.empty() || b.id.empty()) throw Error(ErrorCode::SchemaViolation, "image_a", "missing image id");
  if (a.id == b.id) throw Error(ErrorCode::SchemaViolation, "image_b", "an image cannot face itself");
  if (a.method.empty() || b.method.empty()) throw Error(ErrorCode::SchemaViolation, "method_a", "missing method");
  if (a.method == b.method) throw Error(ErrorCode::SchemaViolation, "method_b", "pairs must cross methods");
}

Json record_to_json(const ComparisonRecord& r) {
  return Json{{"dimension", dimension_name(r.dimension)},
              {"image_a", r.a.id},
              {"image_b", r.b.id},
              {"method_a", r.a.method},
              {"method_b", r.b.method},
              {"winner", r.winner == Winner::A ? "A" : "B"},
              {"judge", r.judge},
              {"timestamp", r.timestamp}};
}

ComparisonRecord record_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::SchemaViolation, "record", "expected an object");
  auto str = [&](const char* key, bool required) -> std::string {
    const auto it = j.find(key);
    if (it == j.end()) {
      if (required) throw Error(ErrorCode::SchemaViolation, key, "missing");
      return {};
    }
    if (!it->is_string()) throw Error(ErrorCode::SchemaViolation, key, "expected a string");
    return it->get<std::string>();
  };
  ComparisonRecord r;
  r.dimension = dimension_from_name(str("dimension", true));
  r.a.id = str("image_a", true);
  r.b.id = str("image_b", true);
  r.a.method = str("method_a", false);
  r.b.method = str("method_b", false);
  if (r.a.method.empty()) r.a.method = method_of(r.a.id);
  if (r.b.method.empty()) r.b.method = method_of(r.b.id);
  const std::string w = str("winner", true);
  if (w == "A" || w == "a") r.winner = Winner::A;
  else if (w == "B" || w == "b") r.winner = Winner::B;
  else throw Error(ErrorCode::SchemaViolation, "winner", "winner must be A or B");
  r.judge = str("judge", false);
  if (j.contains("timestamp")) {
    if (!j.at("timestamp").is_number_integer()) throw Error(ErrorCode::SchemaViolation, "timestamp");
    r.timestamp = j.at("timestamp").get<std::int64_t>();
  }
  r.validate();
  return r;
}

std::vector<ComparisonRecord> read_records_jsonl(std::string_view text) {
  std::vector<ComparisonRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(Json::parse(line)));
    } catch (const nlohmann::json::parse_error&) {
      throw Error(ErrorCode::SchemaViolation, "line " + std::to_string(line_no), "invalid JSON");
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.detail(), e.what());
    }
  }
  return out;
}

std::string write_records_jsonl(const std::vector<ComparisonRecord>& records) {
  std::string out;
  for (const auto& r : records) out += record_to_json(r).dump() + "\n";
  return out;
}

// ---- leaderboard ---------------------------------------------------------------

Leaderboard rank_methods(const std::vector<ComparisonRecord>& records, const std::vector<std::string>& methods,
                         const TrueSkillParams& params) {
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return records[x].timestamp < records[y].timestamp; });
  std::set<std::string> all(methods.begin(), methods.end());
  for (const auto& r : records) {
    all.insert(r.a.method);
    all.insert(r.b.method);
  }
  Leaderboard board;
  for (auto dim : kDimensions) {
    std::map<std::string, LeaderboardEntry> table;
    for (const auto& m : all) table[m] = {m, {params.mu0, params.sigma0}, 0, 0, 0, 0};
    for (std::size_t k : order) {
      const auto& r = records[k];
      if (r.dimension != dim) continue;
      auto& win = table[r.winner == Winner::A ? r.a.method : r.b.method];
      auto& lose = table[r.winner == Winner::A ? r.b.method : r.a.method];
      std::tie(win.rating, lose.rating) = trueskill_update_pair(win.rating, lose.rating, params);
      ++win.wins;
      ++lose.losses;
    }
    auto& rows = board.by_dimension[dim];
    for (auto& [m, e] : table) {
      e.conservative = e.rating.mu - 3.0 * e.rating.sigma;
      e.rdr = e.conservative + kRdrSigmaOffset * params.sigma0;
      rows.push_back(e);
    }
    std::stable_sort(rows.begin(), rows.end(), [](const LeaderboardEntry& x, const LeaderboardEntry& y) {
      if (x.conservative != y.conservative) return x.conservative > y.conservative;
      return x.method < y.method;
    });
  }
  return board;
}

Json Leaderboard::to_json() const {
  Json j = Json::object();
  for (const auto& [dim, rows] : by_dimension) {
    Json arr = Json::array();
    std::size_t rank = 1;
    for (const auto& e : rows) {
      arr.push_back({{"rank", rank++},
                     {"method", e.method},
                     {"mu", e.rating.mu},
                     {"sigma", e.rating.sigma},
                     {"conservative", e.conservative},
                     {"rdr", e.rdr},
                     {"wins", e.wins},
                     {"losses", e.losses}});
    }
    j[std::string(dimension_name(dim))] = arr;
  }
  return j;
}

std::string Leaderboard::to_jsonl() const {
  std::string out;
  const Json j = to_json();
  for (const auto& [dim, rows] : j.items()) {
    for (Json row : rows) {
      row["dimension"] = dim;
      out += row.dump() + "\n";
    }
  }
  return out;
}

}  // namespace majutsu::eval
