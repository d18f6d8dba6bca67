#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numbers>

#include "majutsu/scene.hpp"

namespace majutsu::scene {

namespace {

constexpr std::uint32_t kGlbMagic = 0x46546C67;  // "glTF"
constexpr std::uint32_t kChunkJson = 0x4E4F534A;
constexpr std::uint32_t kChunkBin = 0x004E4942;
constexpr int kFloat = 5126;
constexpr int kUint32 = 5125;
constexpr int kArrayBuffer = 34962;
constexpr int kElementArrayBuffer = 34963;

// Map frame (z up) to glTF frame (y up, -z north): (x, y, z) -> (x, z, -y).
std::array<float, 3> to_gltf(Vec3 v) {
  return {static_cast<float>(v.x), static_cast<float>(v.z), static_cast<float>(-v.y)};
}

Vec3 from_gltf(double x, double y, double z) { return {x, -z, y}; }

Json quat_about_up(double yaw) {
  return Json::array({0.0, std::sin(0.5 * yaw), 0.0, std::cos(0.5 * yaw)});
}

class GlbBuilder {
 public:
  Json gltf;
  std::vector<std::uint8_t> bin;

  GlbBuilder() {
    gltf["asset"] = Json{{"version", "2.0"}, {"generator", "majutsu"}};
    for (const char* key : {"accessors", "bufferViews", "meshes", "nodes", "materials", "images",
                            "textures", "samplers"}) {
      gltf[key] = Json::array();
    }
    gltf["samplers"].push_back(Json{{"magFilter", 9729}, {"minFilter", 9987},
                                    {"wrapS", 10497}, {"wrapT", 10497}});
  }

  int view(const void* data, std::size_t bytes, int target) {
    while (bin.size() % 4) bin.push_back(0);
    const std::size_t offset = bin.size();
    const auto* p = static_cast<const std::uint8_t*>(data);
    bin.insert(bin.end(), p, p + bytes);
    gltf["bufferViews"].push_back(Json{{"buffer", 0}, {"byteOffset", offset},
                                       {"byteLength", bytes}, {"target", target}});
    return static_cast<int>(gltf["bufferViews"].size()) - 1;
  }

  int vec_accessor(const std::vector<float>& data, int comps, bool bounds) {
    const int v = view(data.data(), data.size() * sizeof(float), kArrayBuffer);
    Json acc{{"bufferView", v}, {"componentType", kFloat},
             {"count", data.size() / static_cast<std::size_t>(comps)},
             {"type", comps == 3 ? "VEC3" : "VEC2"}};
    if (bounds) {
      std::vector<float> lo(static_cast<std::size_t>(comps), INFINITY), hi(static_cast<std::size_t>(comps), -INFINITY);
      for (std::size_t i = 0; i < data.size(); ++i) {
        const std::size_t c = i % static_cast<std::size_t>(comps);
        lo[c] = std::min(lo[c], data[i]);
        hi[c] = std::max(hi[c], data[i]);
      }
      acc["min"] = lo;
      acc["max"] = hi;
    }
    gltf["accessors"].push_back(acc);
    return static_cast<int>(gltf["accessors"].size()) - 1;
  }

  int index_accessor(const Mesh& m) {
    std::vector<std::uint32_t> idx;
    idx.reserve(m.triangles.size() * 3);
    for (const auto& t : m.triangles) idx.insert(idx.end(), t.begin(), t.end());
    const int v = view(idx.data(), idx.size() * 4, kElementArrayBuffer);
    gltf["accessors"].push_back(Json{{"bufferView", v}, {"componentType", kUint32},
                                     {"count", idx.size()}, {"type", "SCALAR"}});
    return static_cast<int>(gltf["accessors"].size()) - 1;
  }

  /// Returns the primitive attributes object for a mesh; `uv_of` maps a
  /// vertex to its texture coordinate.
  template <typename UvFn>
  Json attributes(const Mesh& m, UvFn uv_of, int* indices) {
    std::vector<float> pos, nrm, uv;
    pos.reserve(m.vertices.size() * 3);
    for (std::size_t i = 0; i < m.vertices.size(); ++i) {
      const auto p = to_gltf(m.vertices[i]);
      pos.insert(pos.end(), p.begin(), p.end());
      const auto n = to_gltf(i < m.normals.size() ? m.normals[i] : Vec3{0, 0, 1});
      nrm.insert(nrm.end(), n.begin(), n.end());
      const Vec2 t = uv_of(i);
      uv.push_back(static_cast<float>(t.x));
      uv.push_back(static_cast<float>(t.y));
    }
    Json attrs{{"POSITION", vec_accessor(pos, 3, true)}, {"NORMAL", vec_accessor(nrm, 3, false)},
               {"TEXCOORD_0", vec_accessor(uv, 2, false)}};
    *indices = index_accessor(m);
    return attrs;
  }

  int mesh(const std::string& name, const Json& attrs, int indices, int material) {
    gltf["meshes"].push_back(Json{
        {"name", name},
        {"primitives", Json::array({Json{{"attributes", attrs}, {"indices", indices},
                                         {"material", material}, {"mode", 4}}})}});
    return static_cast<int>(gltf["meshes"].size()) - 1;
  }

  int texture(const std::string& uri) {
    auto it = textures_.find(uri);
    if (it != textures_.end()) return it->second;
    gltf["images"].push_back(Json{{"uri", uri}});
    gltf["textures"].push_back(Json{{"sampler", 0}, {"source", gltf["images"].size() - 1}});
    const int t = static_cast<int>(gltf["textures"].size()) - 1;
    textures_[uri] = t;
    return t;
  }

  int material(const std::string& key, Json def) {
    auto it = materials_.find(key);
    if (it != materials_.end()) return it->second;
    def["name"] = key;
    gltf["materials"].push_back(std::move(def));
    const int m = static_cast<int>(gltf["materials"].size()) - 1;
    materials_[key] = m;
    return m;
  }

  int pbr_material(const MaterialDef& m) {
    if (auto it = materials_.find("pbr:" + m.id); it != materials_.end()) return it->second;
    // Core glTF packs metalness into the blue channel of the roughness
    // texture; the library ships them separately, so the roughness map binds
    // here with metalness forced to 0 and the metallic map rides in extras.
    Json def{{"pbrMetallicRoughness",
              Json{{"baseColorTexture", Json{{"index", texture(m.base_color)}}},
                   {"metallicRoughnessTexture", Json{{"index", texture(m.roughness)}}},
                   {"metallicFactor", 0.0},
                   {"roughnessFactor", 1.0}}},
             {"normalTexture", Json{{"index", texture(m.normal)}}},
             {"occlusionTexture", Json{{"index", texture(m.ambient_occlusion)}}},
             {"extras", Json{{"metallic_uri", m.metallic}, {"uv_tiling", m.uv_tiling}}}};
    return material("pbr:" + m.id, std::move(def));
  }

  int node(Json n) {
    gltf["nodes"].push_back(std::move(n));
    return static_cast<int>(gltf["nodes"].size()) - 1;
  }

  std::vector<std::uint8_t> finish() {
    while (bin.size() % 4) bin.push_back(0);
    gltf["buffers"] = Json::array({Json{{"byteLength", bin.size()}}});
    for (const char* key : {"images", "textures"}) {
      if (gltf[key].empty()) gltf.erase(key);
    }
    std::string text = gltf.dump();
    while (text.size() % 4) text.push_back(' ');
    std::vector<std::uint8_t> out;
    auto put32 = [&out](std::uint32_t v) {
      for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    };
    const std::size_t total = 12 + 8 + text.size() + 8 + bin.size();
    if (total > 0xFFFFFFFFull) throw Error(ErrorCode::SerializationFailure, "size", "glb exceeds 4 GiB");
    put32(kGlbMagic);
    put32(2);
    put32(static_cast<std::uint32_t>(total));
    put32(static_cast<std::uint32_t>(text.size()));
    put32(kChunkJson);
    out.insert(out.end(), text.begin(), text.end());
    put32(static_cast<std::uint32_t>(bin.size()));
    put32(kChunkBin);
    out.insert(out.end(), bin.begin(), bin.end());
    return out;
  }

 private:
  std::map<std::string, int> textures_;
  std::map<std::string, int> materials_;
};

Json color_material(double r, double g, double b) {
  return Json{{"pbrMetallicRoughness",
               Json{{"baseColorFactor", Json::array({r, g, b, 1.0})},
                    {"metallicFactor", 0.0},
                    {"roughnessFactor", 0.8}}}};
}

bool parse_hex_color(const std::string& text, double rgb[3]) {
  std::string s = text;
  if (!s.empty() && s[0] == '#') s.erase(0, 1);
  if (s.size() != 6 || !std::all_of(s.begin(), s.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); })) {
    return false;
  }
  for (int i = 0; i < 3; ++i) rgb[i] = std::stoi(s.substr(static_cast<std::size_t>(2 * i), 2), nullptr, 16) / 255.0;
  return true;
}

// Material for an instance: an explicit material override wins, then a tint,
// then the per-category default.
int instance_material(GlbBuilder& b, const SceneDocument& doc, const AssetInstance& inst) {
  std::string material_id;
  if (auto it = inst.overrides.find("material"); it != inst.overrides.end()) {
    material_id = it->second;
  } else {
    for (const auto& [k, v] : inst.overrides) {
      if (k.rfind("material.", 0) == 0) {
        material_id = v;
        break;
      }
    }
  }
  if (!material_id.empty()) {
    auto it = doc.materials.find(material_id);
    if (it == doc.materials.end()) throw Error(ErrorCode::SerializationFailure, material_id, "unknown material override");
    return b.pbr_material(it->second);
  }
  if (auto it = inst.overrides.find("tint"); it != inst.overrides.end()) {
    double rgb[3];
    if (!parse_hex_color(it->second, rgb)) throw Error(ErrorCode::SerializationFailure, "tint", "bad tint color");
    return b.material("tint:" + it->second, color_material(rgb[0], rgb[1], rgb[2]));
  }
  switch (inst.category) {
    case Category::Building: return b.material("default:building", color_material(0.72, 0.70, 0.66));
    case Category::Tree: return b.material("default:tree", color_material(0.20, 0.45, 0.18));
    case Category::Streetlight: return b.material("default:streetlight", color_material(0.25, 0.25, 0.28));
  }
  return 0;
}

}  // namespace

Mesh make_sky_sphere(Vec3 center, double radius, int rings, int segments) {
  Mesh m;
  for (int r = 0; r <= rings; ++r) {
    const double v = static_cast<double>(r) / rings;
    const double phi = std::numbers::pi * v;  // from north pole (z up)
    for (int s = 0; s <= segments; ++s) {
      const double u = static_cast<double>(s) / segments;
      const double theta = 2.0 * std::numbers::pi * u;
      const Vec3 dir{std::sin(phi) * std::cos(theta), std::sin(phi) * std::sin(theta), std::cos(phi)};
      m.vertices.push_back(center + dir * radius);
      m.normals.push_back(dir * -1.0);
      m.uvs.push_back({u, v});
    }
  }
  const auto idx = [segments](int r, int s) { return static_cast<std::uint32_t>(r * (segments + 1) + s); };
  for (int r = 0; r < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      const auto a = idx(r, s), b = idx(r, s + 1), c = idx(r + 1, s), d = idx(r + 1, s + 1);
      // Clockwise seen from outside, i.e. facing the center.
      if (r != 0) m.triangles.push_back({a, b, c});
      if (r != rings - 1) m.triangles.push_back({b, d, c});
    }
  }
  return m;
}

std::vector<std::uint8_t> export_gltf(const SceneDocument& doc) {
  GlbBuilder b;
  std::vector<int> scene_nodes;

  for (const Layer& layer : doc.layers) {
    Json n{{"name", "layer:" + std::string(layer_name(layer.kind))}};
    if (!layer.mesh.empty()) {
      auto mat = doc.materials.find(layer.material);
      if (mat == doc.materials.end()) {
        throw Error(ErrorCode::SerializationFailure, std::string(layer_name(layer.kind)), "layer material missing");
      }
      const double tiling = mat->second.uv_tiling;
      int indices = -1;
      const Json attrs = b.attributes(layer.mesh, [&](std::size_t i) {
        return Vec2{layer.mesh.vertices[i].x * tiling, layer.mesh.vertices[i].y * tiling};
      }, &indices);
      n["mesh"] = b.mesh(n["name"], attrs, indices, b.pbr_material(mat->second));
    }
    scene_nodes.push_back(b.node(std::move(n)));
  }

  // Geometry accessors are shared per asset; glTF meshes per (asset, material).
  std::map<std::string, std::pair<Json, int>> asset_geometry;
  std::map<std::pair<std::string, int>, int> mesh_cache;
  for (const auto& [id, inst] : doc.instances) {
    auto asset = doc.assets.find(inst.asset_ref);
    if (asset == doc.assets.end()) throw Error(ErrorCode::SerializationFailure, inst.asset_ref, "instance asset missing");
    if (!inst.placement.valid()) throw Error(ErrorCode::SerializationFailure, id, "invalid placement");
    Json n{{"name", "instance:" + id}};
    if (!asset->second.mesh.empty()) {
      auto geo = asset_geometry.find(inst.asset_ref);
      if (geo == asset_geometry.end()) {
        const Mesh& m = asset->second.mesh;
        int indices = -1;
        Json attrs = b.attributes(m, [&](std::size_t i) {
          return i < m.uvs.size() ? m.uvs[i] : Vec2{m.vertices[i].x, m.vertices[i].y};
        }, &indices);
        geo = asset_geometry.emplace(inst.asset_ref, std::make_pair(std::move(attrs), indices)).first;
      }
      const int material = instance_material(b, doc, inst);
      const auto key = std::make_pair(inst.asset_ref, material);
      auto cached = mesh_cache.find(key);
      if (cached == mesh_cache.end()) {
        cached = mesh_cache.emplace(key, b.mesh("asset:" + inst.asset_ref, geo->second.first,
                                                geo->second.second, material)).first;
      }
      n["mesh"] = cached->second;
    }
    n["translation"] = Json::array({inst.placement.translation.x, inst.placement.translation.z,
                                    -inst.placement.translation.y});
    n["rotation"] = quat_about_up(inst.placement.yaw);
    n["scale"] = Json::array({inst.placement.xy_scale, inst.placement.z_scale, inst.placement.xy_scale});
    n["extras"] = Json{{"asset_ref", inst.asset_ref}, {"category", category_name(inst.category)}};
    scene_nodes.push_back(b.node(std::move(n)));
  }

  const double w = doc.width_m(), h = doc.height_m();
  const double radius = 2.0 * std::max(std::hypot(w, h), 1.0);
  const Mesh sky = make_sky_sphere({0.0, 0.0, 0.0}, radius);
  int sky_indices = -1;
  const Json sky_attrs = b.attributes(sky, [&](std::size_t i) { return sky.uvs[i]; }, &sky_indices);
  Json sky_material{{"pbrMetallicRoughness",
                     Json{{"baseColorTexture", Json{{"index", b.texture(doc.skybox.hdr_ref)}}},
                          {"metallicFactor", 0.0},
                          {"roughnessFactor", 1.0}}},
                    {"extensions", Json{{"KHR_materials_unlit", Json::object()}}},
                    {"extras", Json{{"skybox_id", doc.skybox.id}, {"hdr_uri", doc.skybox.hdr_ref}}}};
  const int sky_mat = b.material("sky:" + doc.skybox.id, std::move(sky_material));
  const auto c = to_gltf({0.5 * w, 0.5 * h, 0.0});
  scene_nodes.push_back(b.node(Json{
      {"name", "sky"},
      {"mesh", b.mesh("sky", sky_attrs, sky_indices, sky_mat)},
      {"translation", Json::array({static_cast<double>(c[0]), static_cast<double>(c[1]), static_cast<double>(c[2])})},
      {"rotation", quat_about_up(doc.skybox.rotation)}}));

  b.gltf["extensionsUsed"] = Json::array({"KHR_materials_unlit"});
  b.gltf["scenes"] = Json::array({Json{{"name", doc.meta.name}, {"nodes", scene_nodes}}});
  b.gltf["scene"] = 0;
  return b.finish();
}

// ---------------------------------------------------------------------------
// Reader / validator

namespace {

[[noreturn]] void invalid(const std::string& what) {
  throw Error(ErrorCode::SerializationFailure, what, "glb validation failed: " + what);
}

std::uint32_t read32(std::span<const std::uint8_t> b, std::size_t at) {
  if (at + 4 > b.size()) invalid("truncated");
  return static_cast<std::uint32_t>(b[at]) | static_cast<std::uint32_t>(b[at + 1]) << 8 |
         static_cast<std::uint32_t>(b[at + 2]) << 16 | static_cast<std::uint32_t>(b[at + 3]) << 24;
}

int component_size(int type) {
  switch (type) {
    case 5120: case 5121: return 1;
    case 5122: case 5123: return 2;
    case 5125: case 5126: return 4;
    default: return 0;
  }
}

int type_components(const std::string& type) {
  if (type == "SCALAR") return 1;
  if (type == "VEC2") return 2;
  if (type == "VEC3") return 3;
  if (type == "VEC4") return 4;
  if (type == "MAT4") return 16;
  return 0;
}

struct AccessorView {
  const std::uint8_t* data = nullptr;
  std::size_t count = 0;
  int comps = 0;
  int ctype = 0;
  std::size_t stride = 0;
};

bool valid_index(const Json& arr, const Json& idx) {
  return idx.is_number_integer() && idx.get<std::int64_t>() >= 0 &&
         static_cast<std::size_t>(idx.get<std::int64_t>()) < arr.size();
}

}  // namespace

GlbSummary inspect_glb(std::span<const std::uint8_t> glb) {
  if (glb.size() < 20) invalid("truncated");
  if (read32(glb, 0) != kGlbMagic) invalid("magic");
  if (read32(glb, 4) != 2) invalid("version");
  if (read32(glb, 8) != glb.size()) invalid("length");
  const std::uint32_t json_len = read32(glb, 12);
  if (read32(glb, 16) != kChunkJson) invalid("json chunk");
  if (20 + static_cast<std::size_t>(json_len) > glb.size() || json_len % 4) invalid("json chunk length");
  GlbSummary out;
  try {
    out.gltf = Json::parse(glb.begin() + 20, glb.begin() + 20 + json_len);
  } catch (const Json::parse_error&) {
    invalid("json parse");
  }
  std::span<const std::uint8_t> bin;
  const std::size_t bin_at = 20 + json_len;
  if (bin_at < glb.size()) {
    const std::uint32_t len = read32(glb, bin_at);
    if (read32(glb, bin_at + 4) != kChunkBin) invalid("bin chunk");
    if (bin_at + 8 + len != glb.size()) invalid("bin chunk length");
    bin = glb.subspan(bin_at + 8, len);
  }
  out.bin_bytes = bin.size();
  const Json& g = out.gltf;
  if (!g.contains("asset") || g["asset"].value("version", "") != "2.0") invalid("asset.version");

  const Json empty = Json::array();
  const Json& buffers = g.value("buffers", empty);
  const Json& views = g.value("bufferViews", empty);
  const Json& accessors = g.value("accessors", empty);
  const Json& meshes = g.value("meshes", empty);
  const Json& nodes = g.value("nodes", empty);
  const Json& materials = g.value("materials", empty);
  const Json& textures = g.value("textures", empty);
  const Json& images = g.value("images", empty);

  if (buffers.size() > 1) invalid("buffers");
  if (!buffers.empty() && buffers[0].value("byteLength", std::size_t{0}) > bin.size()) invalid("buffers[0].byteLength");
  for (std::size_t i = 0; i < views.size(); ++i) {
    const Json& v = views[i];
    if (v.value("buffer", -1) != 0) invalid("bufferViews[" + std::to_string(i) + "].buffer");
    const std::size_t off = v.value("byteOffset", std::size_t{0}), len = v.value("byteLength", std::size_t{0});
    if (off + len > bin.size()) invalid("bufferViews[" + std::to_string(i) + "] range");
  }

  std::vector<AccessorView> acc(accessors.size());
  for (std::size_t i = 0; i < accessors.size(); ++i) {
    const Json& a = accessors[i];
    const std::string where = "accessors[" + std::to_string(i) + "]";
    if (!valid_index(views, a.value("bufferView", Json(-1)))) invalid(where + ".bufferView");
    const Json& v = views[a["bufferView"].get<std::size_t>()];
    const int cs = component_size(a.value("componentType", 0));
    const int comps = type_components(a.value("type", ""));
    if (!cs || !comps) invalid(where + ".type");
    const std::size_t count = a.value("count", std::size_t{0});
    const std::size_t elem = static_cast<std::size_t>(cs * comps);
    const std::size_t stride = v.value("byteStride", elem);
    const std::size_t off = a.value("byteOffset", std::size_t{0});
    if (count > 0 && off + stride * (count - 1) + elem > v["byteLength"].get<std::size_t>()) invalid(where + " range");
    acc[i] = {bin.data() + v.value("byteOffset", std::size_t{0}) + off, count, comps, a["componentType"].get<int>(), stride};
    if (a.contains("min") && a.contains("max") && acc[i].ctype == kFloat) {
      for (int c = 0; c < comps; ++c) {
        float lo = INFINITY, hi = -INFINITY;
        for (std::size_t k = 0; k < count; ++k) {
          float f;
          std::memcpy(&f, acc[i].data + k * stride + static_cast<std::size_t>(c) * 4, 4);
          lo = std::min(lo, f);
          hi = std::max(hi, f);
        }
        if (count && (a["min"][static_cast<std::size_t>(c)].get<float>() != lo ||
                      a["max"][static_cast<std::size_t>(c)].get<float>() != hi)) {
          invalid(where + " min/max");
        }
      }
    }
  }

  auto read_index = [&](const AccessorView& a, std::size_t k) -> std::uint32_t {
    const std::uint8_t* p = a.data + k * a.stride;
    if (a.ctype == 5125) {
      std::uint32_t v;
      std::memcpy(&v, p, 4);
      return v;
    }
    if (a.ctype == 5123) {
      std::uint16_t v;
      std::memcpy(&v, p, 2);
      return v;
    }
    return *p;
  };

  struct MeshStats {
    std::size_t verts = 0, tris = 0;
    std::vector<std::pair<int, int>> prims;  // (position accessor, index accessor)
  };
  std::vector<MeshStats> stats(meshes.size());
  for (std::size_t m = 0; m < meshes.size(); ++m) {
    const std::string where = "meshes[" + std::to_string(m) + "]";
    const Json& prims = meshes[m].value("primitives", empty);
    if (prims.empty()) invalid(where + ".primitives");
    for (std::size_t p = 0; p < prims.size(); ++p) {
      const Json& prim = prims[p];
      const Json& attrs = prim.value("attributes", Json::object());
      if (!attrs.contains("POSITION") || !valid_index(accessors, attrs["POSITION"])) invalid(where + " POSITION");
      const int pos = attrs["POSITION"].get<int>();
      const AccessorView& pa = acc[static_cast<std::size_t>(pos)];
      if (pa.comps != 3 || pa.ctype != kFloat) invalid(where + " POSITION type");
      if (!accessors[static_cast<std::size_t>(pos)].contains("min")) invalid(where + " POSITION bounds");
      for (auto it = attrs.begin(); it != attrs.end(); ++it) {
        if (!valid_index(accessors, it.value())) invalid(where + " attribute " + it.key());
        if (acc[it.value().get<std::size_t>()].count != pa.count) invalid(where + " attribute count " + it.key());
      }
      if (prim.contains("material") && !valid_index(materials, prim["material"])) invalid(where + ".material");
      int ind = -1;
      if (prim.contains("indices")) {
        if (!valid_index(accessors, prim["indices"])) invalid(where + ".indices");
        ind = prim["indices"].get<int>();
        const AccessorView& ia = acc[static_cast<std::size_t>(ind)];
        if (ia.comps != 1 || ia.ctype == kFloat || ia.count % 3) invalid(where + " index type");
        for (std::size_t k = 0; k < ia.count; ++k)
          if (read_index(ia, k) >= pa.count) invalid(where + " index out of range");
        stats[m].tris += ia.count / 3;
      } else {
        stats[m].tris += pa.count / 3;
      }
      stats[m].verts += pa.count;
      stats[m].prims.emplace_back(pos, ind);
    }
  }
  for (std::size_t t = 0; t < textures.size(); ++t) {
    if (textures[t].contains("source") && !valid_index(images, textures[t]["source"])) invalid("textures[" + std::to_string(t) + "].source");
  }
  std::function<void(const Json&, const std::string&)> check_tex = [&](const Json& j, const std::string& where) {
    if (j.is_object()) {
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key().size() > 7 && it.key().ends_with("Texture")) {
          if (!valid_index(textures, it.value().value("index", Json(-1)))) invalid(where + "." + it.key());
        } else {
          check_tex(it.value(), where + "." + it.key());
        }
      }
    }
  };
  for (std::size_t m = 0; m < materials.size(); ++m) check_tex(materials[m], "materials[" + std::to_string(m) + "]");

  for (std::size_t n = 0; n < nodes.size(); ++n) {
    const Json& node = nodes[n];
    GlbNodeInfo info;
    info.name = node.value("name", "");
    if (node.contains("children")) invalid("nodes[" + std::to_string(n) + "].children unsupported");
    if (node.contains("mesh")) {
      if (!valid_index(meshes, node["mesh"])) invalid("nodes[" + std::to_string(n) + "].mesh");
      info.mesh = node["mesh"].get<int>();
      const MeshStats& st = stats[static_cast<std::size_t>(info.mesh)];
      info.vertex_count = st.verts;
      info.triangle_count = st.tris;
      std::array<double, 3> t{0, 0, 0}, s{1, 1, 1};
      std::array<double, 4> q{0, 0, 0, 1};
      if (node.contains("translation")) for (int i = 0; i < 3; ++i) t[static_cast<std::size_t>(i)] = node["translation"][static_cast<std::size_t>(i)].get<double>();
      if (node.contains("scale")) for (int i = 0; i < 3; ++i) s[static_cast<std::size_t>(i)] = node["scale"][static_cast<std::size_t>(i)].get<double>();
      if (node.contains("rotation")) for (int i = 0; i < 4; ++i) q[static_cast<std::size_t>(i)] = node["rotation"][static_cast<std::size_t>(i)].get<double>();
      const double qx = q[0], qy = q[1], qz = q[2], qw = q[3];
      const double r[3][3] = {
          {1 - 2 * (qy * qy + qz * qz), 2 * (qx * qy - qz * qw), 2 * (qx * qz + qy * qw)},
          {2 * (qx * qy + qz * qw), 1 - 2 * (qx * qx + qz * qz), 2 * (qy * qz - qx * qw)},
          {2 * (qx * qz - qy * qw), 2 * (qy * qz + qx * qw), 1 - 2 * (qx * qx + qy * qy)}};
      geometry::Aabb box{{INFINITY, INFINITY, INFINITY}, {-INFINITY, -INFINITY, -INFINITY}};
      for (const auto& [pos, ind] : st.prims) {
        const AccessorView& pa = acc[static_cast<std::size_t>(pos)];
        for (std::size_t k = 0; k < pa.count; ++k) {
          float f[3];
          std::memcpy(f, pa.data + k * pa.stride, 12);
          const double l[3] = {f[0] * s[0], f[1] * s[1], f[2] * s[2]};
          double w[3];
          for (int i = 0; i < 3; ++i) w[i] = r[i][0] * l[0] + r[i][1] * l[1] + r[i][2] * l[2] + t[static_cast<std::size_t>(i)];
          const Vec3 m = from_gltf(w[0], w[1], w[2]);
          box.min = {std::min(box.min.x, m.x), std::min(box.min.y, m.y), std::min(box.min.z, m.z)};
          box.max = {std::max(box.max.x, m.x), std::max(box.max.y, m.y), std::max(box.max.z, m.z)};
        }
      }
      info.has_bounds = true;
      info.world_bounds = box;
    }
    out.nodes.push_back(std::move(info));
  }
  const Json& scenes = g.value("scenes", empty);
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    for (const Json& n : scenes[s].value("nodes", empty))
      if (!valid_index(nodes, n)) invalid("scenes[" + std::to_string(s) + "].nodes");
  }
  if (g.contains("scene") && !valid_index(scenes, g["scene"])) invalid("scene");
  return out;
}

}  // namespace majutsu::scene
