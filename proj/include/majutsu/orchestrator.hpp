#pragma once

#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "majutsu/eval.hpp"
#include "majutsu/placement.hpp"
#include "majutsu/providers.hpp"
#include "majutsu/scene.hpp"

namespace majutsu::orchestrator {

using Json = nlohmann::json;

struct PipelineConfig {
  std::optional<std::string> prompt;
  std::optional<std::string> layout_path;
  std::optional<std::string> height_path;
  /// Optional design.json to pair with a supplied layout.
  std::optional<std::string> design_path;
  providers::ProviderConfig providers;
  placement::SamplingConfig sampling;
  /// Directory holding assets.json / materials.json / skyboxes.json; empty
  /// selects the builtin procedural library.
  std::string libs_dir;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool export_glb = true;
  int fan_out = 8;
  std::string name;

  /// ConfigError unless exactly one of prompt or layout+height is present.
  void validate() const;
};

/// Applies known keys of a JSON object. Nested "providers" and "sampling"
/// tables are accepted; unknown keys raise ConfigError(key).
PipelineConfig pipeline_config_from_json(const Json& j, PipelineConfig base = {});
Json pipeline_config_to_json(const PipelineConfig& cfg);

/// Flat TOML subset: `key = value` lines with string, integer, float and
/// boolean values, `[section]` headers, `#` comments.
Json parse_flat_toml(std::string_view text);
/// .toml files go through parse_flat_toml, anything else is read as JSON.
Json load_config_file(const std::string& path);

/// Loads the libraries named by the config (builtin when libs_dir is empty).
providers::Libraries load_libraries(const PipelineConfig& cfg);

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct PipelineReport {
  std::vector<StageTiming> timings;
  std::map<std::string, std::size_t> counts;
  std::map<std::string, providers::RefineTrace> refine;
  /// building id -> matched library asset (reference and fallback)
  std::map<std::string, std::string> matches;
  std::vector<std::string> fallbacks;
  std::vector<std::string> warnings;
  std::vector<std::string> artifacts;
  Json to_json() const;
};

struct PipelineResult {
  providers::DesignSpec spec;
  providers::LayoutPair layout;
  scene::SceneDocument doc;
  PipelineReport report;
};

// Individual stages, also used by the CLI subcommands.
providers::DesignSpec stage_design(const PipelineConfig& cfg);
providers::LayoutPair stage_layout(const providers::DesignSpec& spec, const PipelineConfig& cfg);
/// Layout analysis, asset generation (refine loop, library fallback),
/// placement sampling, material and skybox choice, assembly.
scene::SceneDocument stage_assemble(const providers::DesignSpec& spec, const providers::LayoutPair& layout,
                                    const PipelineConfig& cfg, const providers::Libraries& libs,
                                    PipelineReport& report);

/// Copies or writes every texture / HDR the document references under
/// `out_dir` and rewrites the URIs relative to it.
void stage_textures(scene::SceneDocument& doc, const PipelineConfig& cfg, PipelineReport& report);

/// Runs every stage and writes design.json, layout.png, height.png,
/// scene.majutsu.json, scene.glb and report.json to cfg.out_dir. Module
/// errors keep their code; the message is prefixed with the stage name.
PipelineResult run_pipeline(const PipelineConfig& cfg);

inline constexpr const char* kArtifacts[] = {"design.json", "layout.png", "height.png",
                                             "scene.majutsu.json", "scene.glb", "report.json"};

/// Writes `bytes` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::string& path, std::string_view bytes);

// ---- sessions -----------------------------------------------------------------

struct Session {
  std::string id;
  std::string dir;  // persistence directory (empty: memory only)
  scene::SceneDocument doc;
  std::mutex mutex;  // single writer
  std::condition_variable changed;
};

struct CommandOutcome {
  std::int64_t revision = 0;
  std::vector<std::string> diff;
  std::vector<std::string> warnings;
  Json applied;
};

/// Session table plus the judging state served over HTTP.
class Service {
 public:
  struct Options {
    PipelineConfig pipeline;        // template for POST /sessions pipelines
    std::string state_dir;          // sessions/ and eval/ live here; empty: memory only
    std::uint64_t schedule_seed = 0;
  };

  explicit Service(Options opts);

  /// Runs the pipeline for a prompt (body keys prompt, seed, name) or loads a
  /// document (body key document, or path). Returns the new session.
  std::shared_ptr<Session> create_session(const Json& body);
  std::shared_ptr<Session> find(const std::string& id) const;
  std::vector<std::string> session_ids() const;

  /// Applies text or JSON; stale base_revision raises RevisionConflict.
  CommandOutcome apply(Session& s, const Json& command, std::optional<std::int64_t> base_revision);
  CommandOutcome undo(Session& s, std::optional<std::int64_t> base_revision);
  CommandOutcome redo(Session& s, std::optional<std::int64_t> base_revision);
  /// Blocks until revision > since or the timeout elapses.
  Json events(Session& s, std::int64_t since, double timeout_s);

  // judging
  void register_images(const std::map<std::string, std::vector<std::string>>& images);
  /// Blind schedule: image tokens only, no method names.
  Json schedule(eval::Dimension dim, const std::string& judge);
  /// Accepts {pair_id, winner, judge} or a full ComparisonRecord.
  eval::ComparisonRecord submit_verdict(const Json& body);
  Json leaderboard() const;
  std::size_t record_count() const;
  /// Public image info for a token (method is revealed only after a verdict).
  std::optional<std::string> image_id_for_token(const std::string& token) const;

 private:
  void persist(const Session& s) const;
  void restore();
  const std::vector<eval::ScheduledPair>& schedule_for(eval::Dimension dim);

  Options opts_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_session_ = 1;

  mutable std::mutex eval_mutex_;
  std::map<std::string, std::vector<std::string>> images_;
  std::map<std::string, std::string> token_to_image_;  // token -> image id
  std::map<std::string, std::string> image_method_;
  std::map<eval::Dimension, std::vector<eval::ScheduledPair>> schedules_;
  std::vector<eval::ComparisonRecord> records_;
  std::set<std::string> verdict_keys_;
};

/// Thrown by Service when a client's base_revision is stale.
struct RevisionConflict : std::runtime_error {
  std::int64_t current;
  explicit RevisionConflict(std::int64_t cur)
      : std::runtime_error("stale base revision"), current(cur) {}
};

/// Opaque image token used by the blind judging API.
std::string image_token(const std::string& image_id);

/// HTTP status for a library error code.
int http_status(ErrorCode code);

/// Builds the HTTP server over a Service. The caller owns both.
class ApiServer {
 public:
  explicit ApiServer(Service& service);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds and serves in a background thread; port 0 picks a free port.
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  bool listen(const std::string& host, int port);
  void stop();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace majutsu::orchestrator
