#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "majutsu/common.hpp"
#include "majutsu/geometry.hpp"
#include "majutsu/layout.hpp"
#include "majutsu/placement.hpp"

namespace majutsu::scene {

using Json = nlohmann::json;
using geometry::Mesh;
using geometry::SimilarityPlacement;

inline constexpr std::string_view kFormatVersion = "majutsu-scene/1";

enum class LayerKind : std::uint8_t { Ground = 0, Road, Water, Vegetation };
inline constexpr std::array<LayerKind, 4> kLayerKinds = {LayerKind::Ground, LayerKind::Road,
                                                         LayerKind::Water, LayerKind::Vegetation};
std::string_view layer_name(LayerKind kind);
std::optional<LayerKind> layer_from_name(std::string_view name);
layout::SemanticClass layer_class(LayerKind kind);

enum class Category : std::uint8_t { Building = 0, Tree, Streetlight };
std::string_view category_name(Category c);
Category category_from_name(std::string_view name);

struct MaterialDef {
  std::string id;
  std::string base_color;
  std::string normal;
  std::string roughness;
  std::string metallic;
  std::string ambient_occlusion;
  double uv_tiling = 0.25;  // repeats per meter

  void validate() const;
  friend bool operator==(const MaterialDef&, const MaterialDef&) = default;
};

struct Layer {
  LayerKind kind = LayerKind::Ground;
  Mesh mesh;
  std::string material;
  friend bool operator==(const Layer&, const Layer&) = default;
};

using Overrides = std::map<std::string, std::string>;

struct AssetInstance {
  std::string id;
  std::string asset_ref;
  Category category = Category::Building;
  SimilarityPlacement placement;
  Overrides overrides;
  friend bool operator==(const AssetInstance&, const AssetInstance&) = default;
};

/// Mesh referenced by one or more instances, in its own local frame.
struct AssetEntry {
  std::string id;
  Category category = Category::Building;
  std::string style;
  Mesh mesh;
  friend bool operator==(const AssetEntry&, const AssetEntry&) = default;
};

struct SkyboxDef {
  std::string id;
  std::string hdr_ref;
  double rotation = 0.0;
  friend bool operator==(const SkyboxDef&, const SkyboxDef&) = default;
};

struct Metadata {
  std::string name;
  std::uint64_t seed = 0;
  double meters_per_pixel = 2.0;
  int width_px = 0;
  int height_px = 0;
  std::string layout_hash;
  std::string height_hash;
  friend bool operator==(const Metadata&, const Metadata&) = default;
};

/// One applied log entry. Commands are stored in their JSON wire form so the
/// document does not depend on the edit engine.
struct EditRecord {
  Json command;
  Json inverse;
  std::int64_t revision = 0;   // revision produced by this entry
  std::string origin = "apply";  // apply | undo | redo
  friend bool operator==(const EditRecord&, const EditRecord&) = default;
};

struct StackEntry {
  Json command;
  Json inverse;
  friend bool operator==(const StackEntry&, const StackEntry&) = default;
};

struct SceneDocument {
  Metadata meta;
  std::array<Layer, 4> layers;
  std::map<std::string, AssetInstance> instances;
  std::map<std::string, AssetEntry> assets;
  std::map<std::string, MaterialDef> materials;
  SkyboxDef skybox;
  std::int64_t revision = 1;
  std::vector<EditRecord> edit_log;
  std::vector<StackEntry> undo_stack;
  std::vector<StackEntry> redo_stack;

  Layer& layer(LayerKind k) { return layers[static_cast<std::size_t>(k)]; }
  const Layer& layer(LayerKind k) const { return layers[static_cast<std::size_t>(k)]; }
  /// Map rectangle in meters: [0, width_m] x [0, height_m].
  double width_m() const { return meta.width_px * meta.meters_per_pixel; }
  double height_m() const { return meta.height_px * meta.meters_per_pixel; }

  friend bool operator==(const SceneDocument&, const SceneDocument&) = default;
};

struct AssemblyInputs {
  const layout::LayoutMap* layout = nullptr;
  const layout::HeightMap* hmap = nullptr;
  std::vector<layout::BuildingInstance> buildings;
  /// building id -> asset id; every asset id must be present in `assets`.
  std::map<std::string, std::string> building_assets;
  std::vector<placement::PlacementPoint> placements;
  /// Library assets usable by instances (and later Add commands).
  std::map<std::string, AssetEntry> assets;
  std::string tree_asset;
  std::string streetlight_asset;
  /// Material id bound to each layer; the definitions live in `materials`.
  std::map<LayerKind, std::string> layer_materials;
  std::map<std::string, MaterialDef> materials;
  SkyboxDef skybox;
  std::string name = "untitled";
  std::uint64_t seed = 0;
};

SceneDocument assemble_scene(const AssemblyInputs& in);

/// Content equality: everything except revision, edit log and undo/redo stacks.
bool content_equal(const SceneDocument& a, const SceneDocument& b);

/// Human-readable list of subtrees that differ in content ("instances/bldg_0003",
/// "layers/road", "skybox", ...).
std::vector<std::string> diff_documents(const SceneDocument& a, const SceneDocument& b);

/// World-space AABB of an instance (asset mesh under its placement).
geometry::Aabb instance_world_bounds(const SceneDocument& doc, const AssetInstance& inst);

// Persistence. Meshes larger than 1 MiB are written as external .bin files
// next to the document when `mesh_dir` is non-empty; otherwise embedded.
inline constexpr std::size_t kExternalMeshBytes = 1u << 20;
std::string save_document(const SceneDocument& doc, const std::string& mesh_dir = {});
SceneDocument load_document(std::string_view text, const std::string& mesh_dir = {});
Json document_to_json(const SceneDocument& doc, const std::string& mesh_dir = {});
SceneDocument document_from_json(const Json& j, const std::string& mesh_dir = {});
Json content_json(const SceneDocument& doc);

Json mesh_to_json(const Mesh& mesh);
Mesh mesh_from_json(const Json& j, const std::string& path = "mesh");
Json placement_to_json(const SimilarityPlacement& p);

// glTF 2.0 binary export.
std::vector<std::uint8_t> export_gltf(const SceneDocument& doc);

struct GlbNodeInfo {
  std::string name;
  int mesh = -1;
  std::size_t vertex_count = 0;
  std::size_t triangle_count = 0;
  bool has_bounds = false;
  geometry::Aabb world_bounds;  // map frame (z up)
};

struct GlbSummary {
  Json gltf;
  std::vector<GlbNodeInfo> nodes;
  std::size_t bin_bytes = 0;
};

/// Parses and structurally validates a .glb; throws SerializationFailure with
/// the failing check in `detail`.
GlbSummary inspect_glb(std::span<const std::uint8_t> glb);

/// Equirectangular UV sphere with inward-facing winding.
Mesh make_sky_sphere(Vec3 center, double radius, int rings = 16, int segments = 32);

}  // namespace majutsu::scene
