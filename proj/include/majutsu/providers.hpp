#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "majutsu/geometry.hpp"
#include "majutsu/layout.hpp"
#include "majutsu/scene.hpp"

namespace majutsu::providers {

using Json = nlohmann::json;

/// Shipped architectural styles, in tie-break order.
inline constexpr std::array<std::string_view, 10> kStyles = {
    "cyberpunk",   "ghibli",   "minecraft",  "netherlands", "modern",
    "classical",   "east_asian", "mediterranean", "industrial", "suburban"};

/// Words that vote for each style when matching free text.
const std::vector<std::string>& style_tags(std::string_view style);
bool is_style(std::string_view style);

/// Nearest library style by tag match: every prompt word equal to a style tag
/// scores 1 (2 when it is the style name itself); a trailing plural "s" is
/// ignored. Highest score wins, ties go to the earlier style. With no match at
/// all the style is picked by mix64(fnv(text) ^ seed).
std::string match_style(std::string_view text, std::uint64_t seed);

struct DesignSpec {
  std::string layout_text;
  std::string assets_design;
  std::string materials_design;
  std::string skymap_design;
  std::string style_tag;

  /// IncompleteSpec with the missing section name (layout, assets, materials, skymap).
  void validate() const;
  friend bool operator==(const DesignSpec&, const DesignSpec&) = default;
};

Json design_to_json(const DesignSpec& spec);
/// Reads the wire form; an absent or empty section raises IncompleteSpec(section).
DesignSpec design_from_json(const Json& j);

enum class ProviderMode { Offline, External };

struct ProviderConfig {
  ProviderMode mode = ProviderMode::Offline;
  std::string design_url;
  std::string layout_url;
  std::string asset_url;
  std::string judge_url;
  double timeout_s = 60.0;
  int retries = 2;
  double backoff_initial_s = 0.25;
  double backoff_max_s = 4.0;
  double cfg_scale = 9.0;
  int steps = 50;
  std::uint64_t seed = 0;
  double iou_threshold = 0.85;
  int max_refine_iters = 3;
  int layout_size = 512;
  double meters_per_pixel = 2.0;
  double h_max = 150.0;
  int silhouette_resolution = 128;
  std::size_t point_cloud_size = 2048;

  /// ConfigError naming the offending field.
  void validate() const;
  /// Fills every provider URL from one base ("http://host:port") as
  /// <base>/design, <base>/layout, <base>/asset, <base>/judge.
  void set_base_url(const std::string& base);
};

Json config_to_json(const ProviderConfig& cfg);
/// Unknown keys are rejected with ConfigError(key).
ProviderConfig config_from_json(const Json& j, ProviderConfig base = {});

// ---- design ---------------------------------------------------------------

DesignSpec design_scene(const std::string& prompt, const ProviderConfig& cfg);
DesignSpec offline_design(const std::string& prompt, std::uint64_t seed);

// ---- layout ---------------------------------------------------------------

/// Knobs the offline generator reads out of the layout text.
struct LayoutKnobs {
  bool river = false;
  double park_share = 0.12;
  double height_scale = 1.0;  // >1 for dense downtowns, <1 for towns and villages
};
LayoutKnobs layout_knobs(std::string_view layout_text);

using LayoutPair = std::pair<layout::LayoutMap, layout::HeightMap>;

LayoutPair generate_layout_pair(const DesignSpec& spec, const ProviderConfig& cfg);
/// Grid-with-jitter roads, blocks split into lots with one building each,
/// parks and a river or lake. Heights are whole 16-bit codes so the pair
/// survives a PNG round trip bit-exactly.
LayoutPair offline_layout(const DesignSpec& spec, std::uint64_t seed, int size = 512,
                          double meters_per_pixel = 2.0, double h_max = 150.0);

/// Shape of a provider layout reply: decodes both PNGs, checks the size and
/// repairs height consistency. `warnings` receives the repair report.
LayoutPair decode_layout_reply(const Json& reply, const ProviderConfig& cfg,
                               std::vector<std::string>* warnings = nullptr);

// ---- assets ---------------------------------------------------------------

struct AssetRequest {
  layout::BuildingInstance instance;
  geometry::Mesh coarse_mesh;             // extruded footprint in the box frame
  geometry::SilhouetteMask iso_silhouette;  // I_iso of coarse_mesh
  geometry::PointCloud point_cloud;       // surface samples of coarse_mesh
  std::optional<std::string> reference_image;
  std::string prompt;
  std::string style_tag;
};

/// Coarse mesh in the instance's box frame: x along the box w axis, y along
/// its l axis, origin at the box center, base at z = 0.
geometry::Mesh coarse_building_mesh(const layout::BuildingInstance& instance);

AssetRequest make_asset_request(const layout::BuildingInstance& instance, const DesignSpec& spec,
                                const ProviderConfig& cfg);

/// One generation attempt; `iteration` starts at 1.
using AssetGenerator = std::function<geometry::Mesh(const AssetRequest&, int iteration)>;
/// Shape agreement in [0, 1] between a candidate and the request.
using ShapeScorer = std::function<double(const geometry::Mesh&, const AssetRequest&)>;

/// Offline fallback: the coarse mesh with planar facade UVs.
geometry::Mesh offline_asset(const AssetRequest& req);
geometry::Mesh request_asset(const AssetRequest& req, const ProviderConfig& cfg, int iteration = 1);
AssetGenerator asset_generator(const ProviderConfig& cfg);

/// silhouette_iou(render_iso_silhouette(candidate), req.iso_silhouette).
double silhouette_score(const geometry::Mesh& candidate, const AssetRequest& req);
ShapeScorer shape_scorer(const ProviderConfig& cfg);

struct RefineStep {
  int iteration = 0;
  double score = 0.0;
  bool accepted = false;
};

struct RefineTrace {
  std::vector<RefineStep> steps;
  bool accepted = false;
  double best_score = 0.0;
};

Json trace_to_json(const RefineTrace& trace);

struct RefineResult {
  geometry::Mesh mesh;
  RefineTrace trace;
};

/// Review / regenerate loop. Throws RefineExhausted (detail = best score) once
/// max_refine_iters candidates all score below the threshold; `trace_out`
/// is filled in either case.
RefineResult constrained_refine_loop(const AssetRequest& req, const ProviderConfig& cfg,
                                     const AssetGenerator& generate,
                                     const ShapeScorer& score = silhouette_score,
                                     RefineTrace* trace_out = nullptr);

// ---- libraries ------------------------------------------------------------

inline constexpr std::array<std::string_view, 5> kMapKinds = {
    "base_color", "normal", "roughness", "metallic", "ambient_occlusion"};

struct AssetRecord {
  std::string id;
  std::string mesh_uri;
  std::string style;
  std::string building_type;
  scene::Category category = scene::Category::Building;
  geometry::Aabb bounds;
  geometry::Mesh mesh;
};

struct MaterialRecord {
  scene::MaterialDef def;
  std::vector<std::string> tags;
  std::string description;
};

struct SkyboxRecord {
  scene::SkyboxDef def;
  std::vector<std::string> tags;
  std::string description;
};

template <typename Record>
struct Library {
  std::vector<Record> entries;
  std::map<std::string, std::size_t> by_id;
  std::map<std::string, std::vector<std::size_t>> by_tag;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  const Record* find(const std::string& id) const {
    const auto it = by_id.find(id);
    return it == by_id.end() ? nullptr : &entries[it->second];
  }
  std::vector<const Record*> tagged(const std::string& tag) const {
    std::vector<const Record*> out;
    if (const auto it = by_tag.find(tag); it != by_tag.end()) {
      for (std::size_t i : it->second) out.push_back(&entries[i]);
    }
    return out;
  }
};

/// Asset tags are the style and the category name; material and skybox tags
/// come from the manifest.
using AssetLibrary = Library<AssetRecord>;
using MaterialLibrary = Library<MaterialRecord>;
using SkyboxLibrary = Library<SkyboxRecord>;

struct Libraries {
  AssetLibrary assets;
  MaterialLibrary materials;
  SkyboxLibrary skyboxes;
  std::vector<std::string> warnings;
};

struct ManifestPaths {
  std::string assets;     // assets.json
  std::string materials;  // materials.json
  std::string skyboxes;   // skyboxes.json
  static ManifestPaths in_directory(const std::string& dir);
};

/// Loads and validates the three manifests. URIs are resolved relative to the
/// manifest's directory; "builtin:" URIs always resolve.
Libraries ingest_libraries(const ManifestPaths& paths);
/// Same checks on already-parsed manifests (`base_dir` resolves relative URIs).
Libraries ingest_manifests(const Json& assets, const Json& materials, const Json& skyboxes,
                           const std::string& base_dir);

Json assets_manifest(const AssetLibrary& lib);
Json materials_manifest(const MaterialLibrary& lib);
Json skyboxes_manifest(const SkyboxLibrary& lib);

/// Procedural stand-in for the dataset: 20 building types per style, one tree
/// and one streetlight, per-layer and per-style materials, a few skyboxes.
const Libraries& builtin_libraries();
/// Writes the PNG/HDR files the builtin URIs point at under `dir`, returning
/// the relative paths written.
std::vector<std::string> write_builtin_textures(const std::string& dir);
/// Maps "builtin:<path>" to "<path>"; other URIs are returned as is.
std::string builtin_relative(const std::string& uri);

/// Wavefront OBJ (v/vt/vn/f with polygon fans) or binary glTF.
geometry::Mesh load_mesh_file(const std::string& path);
geometry::Mesh parse_obj(std::string_view text);

inline constexpr double kAspectTieTol = 1e-9;

/// instance id -> asset id. Filters to spec.style_tag (falling back to every
/// building asset with a warning), then minimizes |asset aspect - box aspect|;
/// ties (within kAspectTieTol) go to the smallest mix64(seed ^ fnv(instance|asset)).
std::map<std::string, std::string> match_assets(const std::vector<layout::BuildingInstance>& instances,
                                                const DesignSpec& spec, const AssetLibrary& lib,
                                                std::uint64_t seed,
                                                std::vector<std::string>* warnings = nullptr);
double footprint_aspect(const geometry::Aabb& bounds);
double footprint_aspect(const geometry::OrientedBox& box);

/// Material for a layer: candidates tagged with the layer name, ranked by
/// word overlap with the materials design text plus a style bonus.
std::string choose_layer_material(scene::LayerKind layer, const DesignSpec& spec,
                                  const MaterialLibrary& lib, std::uint64_t seed);
std::string choose_skybox(const DesignSpec& spec, const SkyboxLibrary& lib, std::uint64_t seed);

// ---- HTTP -----------------------------------------------------------------

/// POSTs JSON with bounded exponential backoff: transport failures and 5xx
/// replies are retried `retries` times, then ProviderUnavailable(url).
/// Non-JSON or 4xx replies raise InvalidProviderOutput.
Json post_json(const std::string& url, const Json& body, const ProviderConfig& cfg);

}  // namespace majutsu::providers
