#include "majutsu/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <numbers>

namespace majutsu::scene {

using layout::SemanticClass;

std::string_view layer_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Ground: return "ground";
    case LayerKind::Road: return "road";
    case LayerKind::Water: return "water";
    case LayerKind::Vegetation: return "vegetation";
  }
  return "ground";
}

std::optional<LayerKind> layer_from_name(std::string_view name) {
  for (LayerKind k : kLayerKinds)
    if (layer_name(k) == name) return k;
  return std::nullopt;
}

SemanticClass layer_class(LayerKind kind) {
  switch (kind) {
    case LayerKind::Ground: return SemanticClass::Ground;
    case LayerKind::Road: return SemanticClass::Road;
    case LayerKind::Water: return SemanticClass::Water;
    case LayerKind::Vegetation: return SemanticClass::Vegetation;
  }
  return SemanticClass::Ground;
}

std::string_view category_name(Category c) {
  switch (c) {
    case Category::Building: return "building";
    case Category::Tree: return "tree";
    case Category::Streetlight: return "streetlight";
  }
  return "building";
}

Category category_from_name(std::string_view name) {
  if (name == "building") return Category::Building;
  if (name == "tree") return Category::Tree;
  if (name == "streetlight") return Category::Streetlight;
  throw Error(ErrorCode::SchemaViolation, "category", "unknown category '" + std::string(name) + "'");
}

void MaterialDef::validate() const {
  const std::pair<const char*, const std::string*> maps[] = {
      {"base_color", &base_color}, {"normal", &normal}, {"roughness", &roughness},
      {"metallic", &metallic}, {"ambient_occlusion", &ambient_occlusion}};
  for (const auto& [name, ref] : maps) {
    if (ref->empty()) throw Error(ErrorCode::MissingMap, id + ":" + name, "material map missing");
  }
  if (!(uv_tiling > 0.0)) throw Error(ErrorCode::SchemaViolation, id + ".uv_tiling", "must be > 0");
}

namespace {

std::string numbered_id(const char* prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%04zu", prefix, n);
  return buf;
}

template <typename T>
std::string hash_cells(const Grid<T>& grid) {
  const auto cells = grid.cells();
  std::uint64_t h = fnv1a64(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(cells.data()), cells.size_bytes()));
  const std::int64_t dims[2] = {grid.width(), grid.height()};
  h = fnv1a64(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(dims), sizeof dims), h);
  return hex64(h);
}

double point_yaw(std::uint64_t seed, Vec2 p) {
  std::uint64_t bits[2];
  std::memcpy(&bits[0], &p.x, 8);
  std::memcpy(&bits[1], &p.y, 8);
  const std::uint64_t h = fnv1a64(
      std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(bits), sizeof bits), mix64(seed));
  std::mt19937_64 rng(mix64(h));
  return 2.0 * std::numbers::pi * unit_double(rng);
}

}  // namespace

SceneDocument assemble_scene(const AssemblyInputs& in) {
  if (!in.layout || !in.hmap) throw Error(ErrorCode::PipelineFailure, "inputs", "layout and height map required");
  const layout::LayoutMap& map = *in.layout;
  if (map.width() != in.hmap->width() || map.height() != in.hmap->height()) {
    throw Error(ErrorCode::DimensionMismatch, "", "layout and height map sizes differ");
  }
  SceneDocument doc;
  doc.meta.name = in.name;
  doc.meta.seed = in.seed;
  doc.meta.meters_per_pixel = map.meters_per_pixel;
  doc.meta.width_px = map.width();
  doc.meta.height_px = map.height();
  doc.meta.layout_hash = hash_cells(map.cells);
  doc.meta.height_hash = hash_cells(in.hmap->heights);
  doc.materials = in.materials;
  for (const auto& [id, m] : doc.materials) m.validate();
  doc.assets = in.assets;

  for (LayerKind kind : kLayerKinds) {
    Layer& layer = doc.layer(kind);
    layer.kind = kind;
    auto it = in.layer_materials.find(kind);
    if (it == in.layer_materials.end() || !doc.materials.count(it->second)) {
      throw Error(ErrorCode::MaterialMissing, std::string(layer_name(kind)), "no material bound to layer");
    }
    layer.material = it->second;
    layer.mesh = geometry::triangulate_layer_mask(map.mask(layer_class(kind)), map.meters_per_pixel);
  }

  for (const auto& b : in.buildings) {
    auto it = in.building_assets.find(b.id);
    if (it == in.building_assets.end()) throw Error(ErrorCode::MissingAsset, b.id, "building has no asset");
    auto asset = doc.assets.find(it->second);
    if (asset == doc.assets.end()) throw Error(ErrorCode::MissingAsset, b.id, "asset '" + it->second + "' not provided");
    AssetInstance inst;
    inst.id = b.id;
    inst.asset_ref = it->second;
    inst.category = Category::Building;
    inst.placement = layout::fit_placement(asset->second.mesh.bounds(), b);
    doc.instances.emplace(inst.id, std::move(inst));
  }

  std::size_t trees = 0, lights = 0;
  for (const auto& p : in.placements) {
    const bool tree = p.kind == placement::PlacementKind::Tree;
    const std::string& ref = tree ? in.tree_asset : in.streetlight_asset;
    if (!doc.assets.count(ref)) {
      throw Error(ErrorCode::MissingAsset, std::string(tree ? "tree" : "streetlight"), "no library asset for category");
    }
    AssetInstance inst;
    inst.id = tree ? numbered_id("tree", ++trees) : numbered_id("light", ++lights);
    inst.asset_ref = ref;
    inst.category = tree ? Category::Tree : Category::Streetlight;
    inst.placement.translation = {p.position.x, p.position.y, 0.0};
    inst.placement.yaw = point_yaw(in.seed, p.position);
    doc.instances.emplace(inst.id, std::move(inst));
  }

  if (in.skybox.hdr_ref.empty()) throw Error(ErrorCode::SchemaViolation, "skybox.hdr_ref", "skybox needs an HDR ref");
  doc.skybox = in.skybox;
  doc.revision = 1;
  return doc;
}

geometry::Aabb instance_world_bounds(const SceneDocument& doc, const AssetInstance& inst) {
  auto it = doc.assets.find(inst.asset_ref);
  if (it == doc.assets.end()) throw Error(ErrorCode::MissingAsset, inst.asset_ref, "unknown asset");
  geometry::Aabb box{{INFINITY, INFINITY, INFINITY}, {-INFINITY, -INFINITY, -INFINITY}};
  for (const Vec3& v : it->second.mesh.vertices) {
    const Vec3 w = inst.placement.apply(v);
    box.min = {std::min(box.min.x, w.x), std::min(box.min.y, w.y), std::min(box.min.z, w.z)};
    box.max = {std::max(box.max.x, w.x), std::max(box.max.y, w.y), std::max(box.max.z, w.z)};
  }
  return box;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

template <typename T>
void append_raw(std::vector<std::uint8_t>& out, const T* data, std::size_t count) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(data);
  out.insert(out.end(), p, p + count * sizeof(T));
}

std::vector<std::uint8_t> pack_doubles(const std::vector<Vec3>& v) {
  std::vector<std::uint8_t> out;
  out.reserve(v.size() * 24);
  for (const Vec3& p : v) {
    const double d[3] = {p.x, p.y, p.z};
    append_raw(out, d, 3);
  }
  return out;
}

std::vector<std::uint8_t> pack_doubles(const std::vector<Vec2>& v) {
  std::vector<std::uint8_t> out;
  out.reserve(v.size() * 16);
  for (const Vec2& p : v) {
    const double d[2] = {p.x, p.y};
    append_raw(out, d, 2);
  }
  return out;
}

std::vector<std::uint8_t> pack_triangles(const std::vector<std::array<std::uint32_t, 3>>& t) {
  std::vector<std::uint8_t> out;
  out.reserve(t.size() * 12);
  for (const auto& tri : t) append_raw(out, tri.data(), 3);
  return out;
}

[[noreturn]] void schema(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::SchemaViolation, path, what);
}

const Json& field(const Json& j, const std::string& path, const char* key) {
  if (!j.is_object()) schema(path, "expected object");
  auto it = j.find(key);
  if (it == j.end()) schema(path.empty() ? key : path + "." + key, "missing field");
  return *it;
}

std::string sub(const std::string& path, const char* key) { return path.empty() ? key : path + "." + key; }
std::string sub(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

std::string get_string(const Json& j, const std::string& path, const char* key) {
  const Json& v = field(j, path, key);
  if (!v.is_string()) schema(sub(path, key), "expected string");
  return v.get<std::string>();
}

double get_number(const Json& j, const std::string& path, const char* key) {
  const Json& v = field(j, path, key);
  if (!v.is_number()) schema(sub(path, key), "expected number");
  return v.get<double>();
}

std::int64_t get_int(const Json& j, const std::string& path, const char* key) {
  const Json& v = field(j, path, key);
  if (!v.is_number_integer()) schema(sub(path, key), "expected integer");
  return v.get<std::int64_t>();
}

const Json& get_array(const Json& j, const std::string& path, const char* key) {
  const Json& v = field(j, path, key);
  if (!v.is_array()) schema(sub(path, key), "expected array");
  return v;
}

std::vector<std::uint8_t> decode_blob(const Json& j, const std::string& path, const char* key,
                                      std::size_t expected) {
  const std::string text = get_string(j, path, key);
  std::vector<std::uint8_t> bytes;
  try {
    bytes = base64_decode(text);
  } catch (const std::exception&) {
    schema(sub(path, key), "bad base64");
  }
  if (bytes.size() != expected) schema(sub(path, key), "wrong byte length");
  return bytes;
}

void unpack_mesh(Mesh& m, std::span<const std::uint8_t> verts, std::span<const std::uint8_t> normals,
                 std::span<const std::uint8_t> uvs, std::span<const std::uint8_t> tris,
                 std::size_t nv, std::size_t nt, bool has_uvs, const std::string& path) {
  m.vertices.resize(nv);
  m.normals.resize(normals.empty() ? 0 : nv);
  m.uvs.resize(has_uvs ? nv : 0);
  m.triangles.resize(nt);
  for (std::size_t i = 0; i < nv; ++i) {
    double d[3];
    std::memcpy(d, verts.data() + i * 24, 24);
    m.vertices[i] = {d[0], d[1], d[2]};
    if (!normals.empty()) {
      std::memcpy(d, normals.data() + i * 24, 24);
      m.normals[i] = {d[0], d[1], d[2]};
    }
    if (has_uvs) {
      std::memcpy(d, uvs.data() + i * 16, 16);
      m.uvs[i] = {d[0], d[1]};
    }
  }
  for (std::size_t t = 0; t < nt; ++t) {
    std::memcpy(m.triangles[t].data(), tris.data() + t * 12, 12);
    for (auto idx : m.triangles[t])
      if (idx >= nv) schema(path + ".triangles", "index out of range");
  }
}

std::size_t mesh_payload_bytes(const Mesh& m) {
  return m.vertices.size() * 24 + m.normals.size() * 24 + m.uvs.size() * 16 + m.triangles.size() * 12;
}

Json mesh_json_impl(const Mesh& m, const std::string& mesh_dir) {
  Json j;
  j["vertex_count"] = m.vertices.size();
  j["triangle_count"] = m.triangles.size();
  j["has_normals"] = !m.normals.empty();
  j["has_uvs"] = !m.uvs.empty();
  if (!mesh_dir.empty() && mesh_payload_bytes(m) > kExternalMeshBytes) {
    std::vector<std::uint8_t> blob = pack_doubles(m.vertices);
    auto n = pack_doubles(m.normals);
    auto u = pack_doubles(m.uvs);
    auto t = pack_triangles(m.triangles);
    blob.insert(blob.end(), n.begin(), n.end());
    blob.insert(blob.end(), u.begin(), u.end());
    blob.insert(blob.end(), t.begin(), t.end());
    const std::string name = "mesh_" + hex64(fnv1a64(blob)) + ".bin";
    write_file((std::filesystem::path(mesh_dir) / name).string(), blob);
    j["external"] = name;
    return j;
  }
  j["vertices"] = base64_encode(pack_doubles(m.vertices));
  j["normals"] = base64_encode(pack_doubles(m.normals));
  j["uvs"] = base64_encode(pack_doubles(m.uvs));
  j["triangles"] = base64_encode(pack_triangles(m.triangles));
  return j;
}

Mesh mesh_from_json_impl(const Json& j, const std::string& path, const std::string& mesh_dir) {
  const std::int64_t nv = get_int(j, path, "vertex_count");
  const std::int64_t nt = get_int(j, path, "triangle_count");
  if (nv < 0 || nt < 0) schema(path, "negative count");
  const bool has_n = field(j, path, "has_normals").get<bool>();
  const bool has_uv = field(j, path, "has_uvs").get<bool>();
  const auto v = static_cast<std::size_t>(nv), t = static_cast<std::size_t>(nt);
  const std::size_t vb = v * 24, nb = has_n ? v * 24 : 0, ub = has_uv ? v * 16 : 0, tb = t * 12;
  Mesh m;
  if (j.contains("external")) {
    const std::string name = get_string(j, path, "external");
    if (name.find('/') != std::string::npos || name.find("..") != std::string::npos) {
      schema(path + ".external", "external mesh must be a plain file name");
    }
    std::vector<std::uint8_t> blob;
    try {
      blob = read_file((std::filesystem::path(mesh_dir) / name).string());
    } catch (const std::exception&) {
      schema(path + ".external", "external mesh file unreadable");
    }
    if (blob.size() != vb + nb + ub + tb) schema(path + ".external", "wrong byte length");
    std::span<const std::uint8_t> all(blob);
    unpack_mesh(m, all.subspan(0, vb), all.subspan(vb, nb), all.subspan(vb + nb, ub),
                all.subspan(vb + nb + ub, tb), v, t, has_uv, path);
    return m;
  }
  const auto verts = decode_blob(j, path, "vertices", vb);
  const auto normals = decode_blob(j, path, "normals", nb);
  const auto uvs = decode_blob(j, path, "uvs", ub);
  const auto tris = decode_blob(j, path, "triangles", tb);
  unpack_mesh(m, verts, normals, uvs, tris, v, t, has_uv, path);
  return m;
}

SimilarityPlacement placement_from_json(const Json& j, const std::string& path) {
  SimilarityPlacement p;
  const Json& t = get_array(j, path, "translation");
  if (t.size() != 3 || !t[0].is_number() || !t[1].is_number() || !t[2].is_number()) {
    schema(path + ".translation", "expected 3 numbers");
  }
  p.translation = {t[0].get<double>(), t[1].get<double>(), t[2].get<double>()};
  p.yaw = get_number(j, path, "yaw");
  p.xy_scale = get_number(j, path, "xy_scale");
  p.z_scale = get_number(j, path, "z_scale");
  if (!p.valid()) schema(path, "invalid placement");
  return p;
}

Json material_json(const MaterialDef& m) {
  return Json{{"id", m.id},
              {"base_color", m.base_color},
              {"normal", m.normal},
              {"roughness", m.roughness},
              {"metallic", m.metallic},
              {"ambient_occlusion", m.ambient_occlusion},
              {"uv_tiling", m.uv_tiling}};
}

MaterialDef material_from_json(const Json& j, const std::string& path) {
  MaterialDef m;
  m.id = get_string(j, path, "id");
  m.base_color = get_string(j, path, "base_color");
  m.normal = get_string(j, path, "normal");
  m.roughness = get_string(j, path, "roughness");
  m.metallic = get_string(j, path, "metallic");
  m.ambient_occlusion = get_string(j, path, "ambient_occlusion");
  m.uv_tiling = get_number(j, path, "uv_tiling");
  return m;
}

Json instance_json(const AssetInstance& inst) {
  Json overrides = Json::object();
  for (const auto& [k, v] : inst.overrides) overrides[k] = v;
  return Json{{"id", inst.id},
              {"asset_ref", inst.asset_ref},
              {"category", category_name(inst.category)},
              {"placement", placement_to_json(inst.placement)},
              {"overrides", overrides}};
}

Json record_json(const Json& command, const Json& inverse) {
  return Json{{"command", command}, {"inverse", inverse}};
}

Json content_parts(const SceneDocument& doc, const std::string& mesh_dir) {
  Json j;
  j["version"] = kFormatVersion;
  j["metadata"] = Json{{"name", doc.meta.name},
                       {"seed", doc.meta.seed},
                       {"meters_per_pixel", doc.meta.meters_per_pixel},
                       {"width_px", doc.meta.width_px},
                       {"height_px", doc.meta.height_px},
                       {"layout_hash", doc.meta.layout_hash},
                       {"height_hash", doc.meta.height_hash}};
  Json layers = Json::array();
  for (const Layer& l : doc.layers) {
    layers.push_back(Json{{"kind", layer_name(l.kind)}, {"material", l.material},
                          {"mesh", mesh_json_impl(l.mesh, mesh_dir)}});
  }
  j["layers"] = layers;
  Json instances = Json::array();
  for (const auto& [id, inst] : doc.instances) instances.push_back(instance_json(inst));
  j["instances"] = instances;
  Json assets = Json::array();
  for (const auto& [id, a] : doc.assets) {
    assets.push_back(Json{{"id", a.id}, {"category", category_name(a.category)}, {"style", a.style},
                          {"mesh", mesh_json_impl(a.mesh, mesh_dir)}});
  }
  j["assets"] = assets;
  Json materials = Json::array();
  for (const auto& [id, m] : doc.materials) materials.push_back(material_json(m));
  j["materials"] = materials;
  j["skybox"] = Json{{"id", doc.skybox.id}, {"hdr_ref", doc.skybox.hdr_ref}, {"rotation", doc.skybox.rotation}};
  return j;
}

std::vector<StackEntry> stack_from_json(const Json& arr, const std::string& path) {
  std::vector<StackEntry> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string p = sub(path, i);
    out.push_back({field(arr[i], p, "command"), field(arr[i], p, "inverse")});
  }
  return out;
}

}  // namespace

Json placement_to_json(const SimilarityPlacement& p) {
  return Json{{"translation", {p.translation.x, p.translation.y, p.translation.z}},
              {"yaw", p.yaw},
              {"xy_scale", p.xy_scale},
              {"z_scale", p.z_scale}};
}

Json mesh_to_json(const Mesh& mesh) { return mesh_json_impl(mesh, {}); }
Mesh mesh_from_json(const Json& j, const std::string& path) { return mesh_from_json_impl(j, path, {}); }

Json content_json(const SceneDocument& doc) { return content_parts(doc, {}); }

Json document_to_json(const SceneDocument& doc, const std::string& mesh_dir) {
  Json j = content_parts(doc, mesh_dir);
  j["revision"] = doc.revision;
  Json log = Json::array();
  for (const EditRecord& r : doc.edit_log) {
    log.push_back(Json{{"command", r.command}, {"inverse", r.inverse}, {"revision", r.revision},
                       {"origin", r.origin}});
  }
  j["edit_log"] = log;
  Json undo = Json::array(), redo = Json::array();
  for (const auto& e : doc.undo_stack) undo.push_back(record_json(e.command, e.inverse));
  for (const auto& e : doc.redo_stack) redo.push_back(record_json(e.command, e.inverse));
  j["undo_stack"] = undo;
  j["redo_stack"] = redo;
  return j;
}

SceneDocument document_from_json(const Json& j, const std::string& mesh_dir) {
  if (!j.is_object()) schema("", "document must be an object");
  auto vit = j.find("version");
  if (vit == j.end()) schema("version", "missing field");
  if (!vit->is_string() || vit->get<std::string>() != kFormatVersion) {
    throw Error(ErrorCode::UnknownVersion, vit->is_string() ? vit->get<std::string>() : vit->dump(),
                "unsupported scene document version");
  }
  SceneDocument doc;
  const Json& meta = field(j, "", "metadata");
  doc.meta.name = get_string(meta, "metadata", "name");
  const Json& seed = field(meta, "metadata", "seed");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0)) {
    schema("metadata.seed", "expected unsigned integer");
  }
  doc.meta.seed = seed.get<std::uint64_t>();
  doc.meta.meters_per_pixel = get_number(meta, "metadata", "meters_per_pixel");
  doc.meta.width_px = static_cast<int>(get_int(meta, "metadata", "width_px"));
  doc.meta.height_px = static_cast<int>(get_int(meta, "metadata", "height_px"));
  doc.meta.layout_hash = get_string(meta, "metadata", "layout_hash");
  doc.meta.height_hash = get_string(meta, "metadata", "height_hash");

  const Json& layers = get_array(j, "", "layers");
  if (layers.size() != 4) schema("layers", "expected exactly 4 layers");
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string p = sub("layers", i);
    const auto kind = layer_from_name(get_string(layers[i], p, "kind"));
    if (!kind || static_cast<std::size_t>(*kind) != i) schema(p + ".kind", "layers out of order");
    Layer& l = doc.layers[i];
    l.kind = *kind;
    l.material = get_string(layers[i], p, "material");
    l.mesh = mesh_from_json_impl(field(layers[i], p, "mesh"), p + ".mesh", mesh_dir);
  }

  const Json& instances = get_array(j, "", "instances");
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const std::string p = sub("instances", i);
    const Json& e = instances[i];
    AssetInstance inst;
    inst.id = get_string(e, p, "id");
    inst.asset_ref = get_string(e, p, "asset_ref");
    try {
      inst.category = category_from_name(get_string(e, p, "category"));
    } catch (const Error& err) {
      if (err.code() == ErrorCode::SchemaViolation && err.detail() == "category") schema(p + ".category", "unknown category");
      throw;
    }
    inst.placement = placement_from_json(field(e, p, "placement"), p + ".placement");
    const Json& ov = field(e, p, "overrides");
    if (!ov.is_object()) schema(p + ".overrides", "expected object");
    for (auto it = ov.begin(); it != ov.end(); ++it) {
      if (!it.value().is_string()) schema(p + ".overrides." + it.key(), "expected string");
      inst.overrides[it.key()] = it.value().get<std::string>();
    }
    if (!doc.instances.emplace(inst.id, inst).second) schema(p + ".id", "duplicate instance id");
  }

  const Json& assets = get_array(j, "", "assets");
  for (std::size_t i = 0; i < assets.size(); ++i) {
    const std::string p = sub("assets", i);
    AssetEntry a;
    a.id = get_string(assets[i], p, "id");
    a.category = category_from_name(get_string(assets[i], p, "category"));
    a.style = get_string(assets[i], p, "style");
    a.mesh = mesh_from_json_impl(field(assets[i], p, "mesh"), p + ".mesh", mesh_dir);
    if (!doc.assets.emplace(a.id, std::move(a)).second) schema(p + ".id", "duplicate asset id");
  }

  const Json& materials = get_array(j, "", "materials");
  for (std::size_t i = 0; i < materials.size(); ++i) {
    MaterialDef m = material_from_json(materials[i], sub("materials", i));
    if (!doc.materials.emplace(m.id, m).second) schema(sub("materials", i) + ".id", "duplicate material id");
  }

  const Json& sky = field(j, "", "skybox");
  doc.skybox.id = get_string(sky, "skybox", "id");
  doc.skybox.hdr_ref = get_string(sky, "skybox", "hdr_ref");
  doc.skybox.rotation = get_number(sky, "skybox", "rotation");

  doc.revision = get_int(j, "", "revision");
  const Json& log = get_array(j, "", "edit_log");
  for (std::size_t i = 0; i < log.size(); ++i) {
    const std::string p = sub("edit_log", i);
    EditRecord r;
    r.command = field(log[i], p, "command");
    r.inverse = field(log[i], p, "inverse");
    r.revision = get_int(log[i], p, "revision");
    r.origin = get_string(log[i], p, "origin");
    if (r.origin != "apply" && r.origin != "undo" && r.origin != "redo") schema(p + ".origin", "unknown origin");
    doc.edit_log.push_back(std::move(r));
  }
  doc.undo_stack = stack_from_json(get_array(j, "", "undo_stack"), "undo_stack");
  doc.redo_stack = stack_from_json(get_array(j, "", "redo_stack"), "redo_stack");
  return doc;
}

std::string save_document(const SceneDocument& doc, const std::string& mesh_dir) {
  return document_to_json(doc, mesh_dir).dump(1) + "\n";
}

SceneDocument load_document(std::string_view text, const std::string& mesh_dir) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::SchemaViolation, "", std::string("malformed JSON: ") + e.what());
  }
  return document_from_json(j, mesh_dir);
}

bool content_equal(const SceneDocument& a, const SceneDocument& b) {
  return a.meta == b.meta && a.layers == b.layers && a.instances == b.instances &&
         a.assets == b.assets && a.materials == b.materials && a.skybox == b.skybox;
}

std::vector<std::string> diff_documents(const SceneDocument& a, const SceneDocument& b) {
  std::vector<std::string> out;
  if (!(a.meta == b.meta)) out.push_back("metadata");
  for (LayerKind k : kLayerKinds)
    if (!(a.layer(k) == b.layer(k))) out.push_back("layers/" + std::string(layer_name(k)));
  auto keyed = [&out](const auto& ma, const auto& mb, const std::string& prefix) {
    auto ia = ma.begin(), ib = mb.begin();
    while (ia != ma.end() || ib != mb.end()) {
      if (ib == mb.end() || (ia != ma.end() && ia->first < ib->first)) {
        out.push_back(prefix + ia->first);
        ++ia;
      } else if (ia == ma.end() || ib->first < ia->first) {
        out.push_back(prefix + ib->first);
        ++ib;
      } else {
        if (!(ia->second == ib->second)) out.push_back(prefix + ia->first);
        ++ia;
        ++ib;
      }
    }
  };
  keyed(a.instances, b.instances, "instances/");
  keyed(a.assets, b.assets, "assets/");
  keyed(a.materials, b.materials, "materials/");
  if (!(a.skybox == b.skybox)) out.push_back("skybox");
  return out;
}

}  // namespace majutsu::scene
