#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "majutsu/providers.hpp"

namespace majutsu::providers {

namespace fs = std::filesystem;
using geometry::Mesh;

namespace {

// ---- builtin meshes ---------------------------------------------------------

void add_quad(Mesh& m, Vec3 a, Vec3 b, Vec3 c, Vec3 d) {
  const auto base = static_cast<std::uint32_t>(m.vertices.size());
  m.vertices.insert(m.vertices.end(), {a, b, c, d});
  m.triangles.push_back({base, base + 1, base + 2});
  m.triangles.push_back({base, base + 2, base + 3});
}

void add_tri(Mesh& m, Vec3 a, Vec3 b, Vec3 c) {
  const auto base = static_cast<std::uint32_t>(m.vertices.size());
  m.vertices.insert(m.vertices.end(), {a, b, c});
  m.triangles.push_back({base, base + 1, base + 2});
}

/// Closed, outward-wound box with flat-shaded faces.
void add_box(Mesh& m, double x0, double x1, double y0, double y1, double z0, double z1) {
  add_quad(m, {x0, y0, z0}, {x0, y1, z0}, {x1, y1, z0}, {x1, y0, z0});  // bottom
  add_quad(m, {x0, y0, z1}, {x1, y0, z1}, {x1, y1, z1}, {x0, y1, z1});  // top
  add_quad(m, {x0, y0, z0}, {x1, y0, z0}, {x1, y0, z1}, {x0, y0, z1});  // south
  add_quad(m, {x1, y1, z0}, {x0, y1, z0}, {x0, y1, z1}, {x1, y1, z1});  // north
  add_quad(m, {x1, y0, z0}, {x1, y1, z0}, {x1, y1, z1}, {x1, y0, z1});  // east
  add_quad(m, {x0, y1, z0}, {x0, y0, z0}, {x0, y0, z1}, {x0, y1, z1});  // west
}

/// Gable prism over [x0,x1]x[y0,y1] from z0 to ridge z1, ridge along y.
void add_gable(Mesh& m, double x0, double x1, double y0, double y1, double z0, double z1) {
  const double xm = 0.5 * (x0 + x1);
  add_quad(m, {x0, y0, z0}, {x0, y1, z0}, {x1, y1, z0}, {x1, y0, z0});
  add_quad(m, {x1, y0, z0}, {x1, y1, z0}, {xm, y1, z1}, {xm, y0, z1});
  add_quad(m, {x0, y1, z0}, {x0, y0, z0}, {xm, y0, z1}, {xm, y1, z1});
  add_tri(m, {x0, y0, z0}, {x1, y0, z0}, {xm, y0, z1});
  add_tri(m, {x1, y1, z0}, {x0, y1, z0}, {xm, y1, z1});
}

void add_pyramid(Mesh& m, double x0, double x1, double y0, double y1, double z0, double z1) {
  const Vec3 apex{0.5 * (x0 + x1), 0.5 * (y0 + y1), z1};
  add_quad(m, {x0, y0, z0}, {x0, y1, z0}, {x1, y1, z0}, {x1, y0, z0});
  add_tri(m, {x0, y0, z0}, {x1, y0, z0}, apex);
  add_tri(m, {x1, y0, z0}, {x1, y1, z0}, apex);
  add_tri(m, {x1, y1, z0}, {x0, y1, z0}, apex);
  add_tri(m, {x0, y1, z0}, {x0, y0, z0}, apex);
}

constexpr std::array<std::string_view, 4> kRoofs = {"flat", "gable", "setback", "tower"};

double style_height(std::string_view style) {
  static const std::map<std::string_view, double> h = {
      {"cyberpunk", 40}, {"ghibli", 10}, {"minecraft", 12}, {"netherlands", 16}, {"modern", 30},
      {"classical", 18}, {"east_asian", 12}, {"mediterranean", 10}, {"industrial", 14}, {"suburban", 8}};
  return h.at(style);
}

Mesh building_mesh(std::string_view style, int type) {
  const int roof = type % 4;
  const double aspect = 1.0 + 0.5 * (type / 4);
  const double w = 10.0, l = 10.0 * aspect, h = style_height(style);
  const double x0 = -w / 2, x1 = w / 2, y0 = -l / 2, y1 = l / 2;
  Mesh m;
  switch (roof) {
    case 0:
      add_box(m, x0, x1, y0, y1, 0, h);
      add_box(m, x0 + 1, x1 - 1, y0 + 1, y1 - 1, h, h + 0.8);  // roof plant
      break;
    case 1:
      add_box(m, x0, x1, y0, y1, 0, 0.8 * h);
      add_gable(m, x0, x1, y0, y1, 0.8 * h, h + 0.2 * w);
      break;
    case 2:
      add_box(m, x0, x1, y0, y1, 0, 0.6 * h);
      add_box(m, x0 + 1.5, x1 - 1.5, y0 + 1.5, y1 - 1.5, 0.6 * h, 0.85 * h);
      add_box(m, x0 + 3, x1 - 3, y0 + 3, y1 - 3, 0.85 * h, h);
      break;
    default:
      add_box(m, x0, x1, y0, y1, 0, 0.35 * h);
      add_box(m, -2.5, 2.5, y0 + 1, y0 + 6, 0.35 * h, 1.3 * h);
      add_pyramid(m, -2.5, 2.5, y0 + 1, y0 + 6, 1.3 * h, 1.45 * h);
      break;
  }
  geometry::compute_vertex_normals(m);
  return m;
}

Mesh tree_mesh() {
  Mesh m;
  add_box(m, -0.25, 0.25, -0.25, 0.25, 0, 2.5);
  add_pyramid(m, -2.0, 2.0, -2.0, 2.0, 2.0, 6.0);
  add_pyramid(m, -1.5, 1.5, -1.5, 1.5, 4.0, 8.0);
  geometry::compute_vertex_normals(m);
  return m;
}

Mesh streetlight_mesh() {
  Mesh m;
  add_box(m, -0.3, 0.3, -0.3, 0.3, 0, 0.4);
  add_box(m, -0.1, 0.1, -0.1, 0.1, 0.4, 6.0);
  add_box(m, -0.1, 1.4, -0.1, 0.1, 5.8, 6.0);
  add_box(m, 1.0, 1.6, -0.2, 0.2, 5.5, 5.8);
  geometry::compute_vertex_normals(m);
  return m;
}

struct Swatch {
  std::string_view id;
  std::array<std::uint8_t, 3> color;
  double roughness;
  double metallic;
  std::vector<std::string> tags;
  std::string_view description;
};

const std::vector<Swatch>& swatches() {
  static const std::vector<Swatch> s = {
      {"paving_01", {168, 160, 148}, 0.8, 0.0, {"ground", "paving", "stone", "classical", "mediterranean", "east_asian"}, "Light stone paving slabs"},
      {"dirt_01", {128, 104, 78}, 0.95, 0.0, {"ground", "dirt", "path", "rural", "ghibli", "suburban"}, "Packed dirt with pebbles"},
      {"concrete_01", {140, 140, 138}, 0.85, 0.0, {"ground", "concrete", "modern", "industrial", "cyberpunk", "bare"}, "Poured concrete sidewalk"},
      {"brick_paving_01", {150, 84, 64}, 0.85, 0.0, {"ground", "brick", "paving", "netherlands"}, "Red brick herringbone paving"},
      {"voxel_dirt_01", {121, 85, 58}, 0.9, 0.0, {"ground", "voxel", "dirt", "minecraft"}, "Chunky pixel dirt"},
      {"asphalt_01", {58, 58, 62}, 0.9, 0.0, {"road", "asphalt", "smooth", "modern", "suburban", "street"}, "Fresh asphalt"},
      {"asphalt_wet_01", {30, 32, 40}, 0.25, 0.0, {"road", "asphalt", "wet", "dark", "neon", "night", "cyberpunk", "rain"}, "Rain-soaked dark asphalt"},
      {"cobblestone_01", {120, 112, 104}, 0.85, 0.0, {"road", "cobblestone", "stone", "classical", "netherlands", "mediterranean"}, "Rounded cobblestones"},
      {"gravel_01", {150, 140, 120}, 0.95, 0.0, {"road", "gravel", "lane", "rural", "ghibli", "east_asian", "minecraft"}, "Loose gravel"},
      {"asphalt_worn_01", {82, 80, 78}, 0.92, 0.0, {"road", "asphalt", "worn", "industrial"}, "Patched, worn asphalt"},
      {"water_clear_01", {54, 120, 170}, 0.05, 0.0, {"water", "clear", "blue", "mediterranean", "ghibli", "modern", "minecraft", "suburban", "east_asian"}, "Clear blue water"},
      {"water_canal_01", {60, 92, 90}, 0.08, 0.0, {"water", "canal", "green", "netherlands", "classical"}, "Calm green canal water"},
      {"water_dark_01", {20, 28, 38}, 0.04, 0.0, {"water", "dark", "oily", "night", "cyberpunk", "industrial"}, "Dark reflective water"},
      {"grass_01", {86, 140, 62}, 0.9, 0.0, {"vegetation", "grass", "lawn", "trimmed", "modern", "suburban", "netherlands", "classical"}, "Trimmed lawn grass"},
      {"meadow_01", {112, 150, 70}, 0.95, 0.0, {"vegetation", "meadow", "flowers", "flowering", "ghibli", "east_asian", "dry", "mediterranean"}, "Wild meadow with flowers"},
      {"moss_01", {70, 100, 52}, 0.95, 0.0, {"vegetation", "moss", "forest", "industrial", "cyberpunk"}, "Dense moss"},
      {"voxel_grass_01", {94, 158, 56}, 0.9, 0.0, {"vegetation", "grass", "voxel", "blocky", "minecraft"}, "Chunky pixel grass"},
      {"facade_cyberpunk", {60, 64, 80}, 0.4, 0.6, {"facade", "cyberpunk"}, "Dark metal panels with neon strips"},
      {"facade_ghibli", {236, 214, 180}, 0.8, 0.0, {"facade", "ghibli"}, "Pastel plaster"},
      {"facade_minecraft", {160, 120, 80}, 0.9, 0.0, {"facade", "minecraft"}, "Pixel oak planks"},
      {"facade_netherlands", {140, 70, 50}, 0.85, 0.0, {"facade", "netherlands", "brick"}, "Dark red brick"},
      {"facade_modern", {150, 180, 200}, 0.15, 0.7, {"facade", "modern", "glass"}, "Blue glass curtain wall"},
      {"facade_classical", {214, 200, 176}, 0.7, 0.0, {"facade", "classical", "stone"}, "Cut limestone"},
      {"facade_east_asian", {150, 60, 40}, 0.7, 0.0, {"facade", "east_asian", "timber"}, "Lacquered red timber"},
      {"facade_mediterranean", {240, 236, 226}, 0.85, 0.0, {"facade", "mediterranean", "stucco"}, "Whitewashed stucco"},
      {"facade_industrial", {130, 72, 56}, 0.9, 0.1, {"facade", "industrial", "brick"}, "Sooty brick"},
      {"facade_suburban", {200, 190, 170}, 0.8, 0.0, {"facade", "suburban", "siding"}, "Painted wood siding"},
  };
  return s;
}

struct SkySwatch {
  std::string_view id;
  std::array<float, 3> zenith;
  std::array<float, 3> horizon;
  std::vector<std::string> tags;
  std::string_view description;
};

const std::vector<SkySwatch>& sky_swatches() {
  static const std::vector<SkySwatch> s = {
      {"sky_clear_noon", {0.25f, 0.45f, 0.95f}, {0.8f, 0.9f, 1.0f}, {"clear", "blue", "noon", "day", "sunny", "bright"}, "Clear midday sky"},
      {"sky_golden_hour", {0.35f, 0.4f, 0.7f}, {1.6f, 1.0f, 0.45f}, {"golden", "hour", "warm", "evening", "sunset", "dusk"}, "Low warm sun"},
      {"sky_pink_sunset", {0.45f, 0.35f, 0.65f}, {1.4f, 0.6f, 0.75f}, {"pink", "pastel", "sunset", "soft", "clouds"}, "Pink pastel sunset"},
      {"sky_overcast", {0.55f, 0.57f, 0.6f}, {0.75f, 0.76f, 0.78f}, {"overcast", "grey", "gray", "cloudy", "rain", "soft", "light"}, "Flat overcast light"},
      {"sky_night_neon", {0.02f, 0.02f, 0.06f}, {0.35f, 0.08f, 0.4f}, {"night", "neon", "haze", "dark", "glow"}, "Night sky lit by neon haze"},
      {"sky_starry_night", {0.01f, 0.01f, 0.04f}, {0.06f, 0.08f, 0.16f}, {"night", "starry", "stars", "moon", "dark"}, "Clear starry night"},
  };
  return s;
}

template <typename Record>
void index_record(Library<Record>& lib, Record rec, const std::vector<std::string>& tags) {
  const std::size_t i = lib.entries.size();
  lib.by_id[rec.def.id] = i;
  for (const auto& t : tags) lib.by_tag[t].push_back(i);
  lib.entries.push_back(std::move(rec));
}

void index_asset(AssetLibrary& lib, AssetRecord rec) {
  const std::size_t i = lib.entries.size();
  lib.by_id[rec.id] = i;
  lib.by_tag[rec.style].push_back(i);
  lib.by_tag[std::string(scene::category_name(rec.category))].push_back(i);
  if (!rec.building_type.empty()) lib.by_tag[rec.building_type].push_back(i);
  lib.entries.push_back(std::move(rec));
}

Libraries make_builtin() {
  Libraries libs;
  for (std::string_view style : kStyles) {
    for (int t = 0; t < 20; ++t) {
      AssetRecord a;
      char id[64];
      std::snprintf(id, sizeof id, "%s_%02d", std::string(style).c_str(), t + 1);
      a.id = id;
      a.style = std::string(style);
      a.building_type = std::string(kRoofs[static_cast<std::size_t>(t % 4)]) + "_" + std::to_string(t / 4 + 1);
      a.category = scene::Category::Building;
      a.mesh = building_mesh(style, t);
      a.bounds = a.mesh.bounds();
      a.mesh_uri = "builtin:meshes/" + a.id + ".obj";
      index_asset(libs.assets, std::move(a));
    }
  }
  AssetRecord tree{"lib_tree", "builtin:meshes/lib_tree.obj", "any", "tree", scene::Category::Tree, {}, tree_mesh()};
  tree.bounds = tree.mesh.bounds();
  index_asset(libs.assets, std::move(tree));
  AssetRecord light{"lib_streetlight", "builtin:meshes/lib_streetlight.obj", "any", "streetlight",
                    scene::Category::Streetlight, {}, streetlight_mesh()};
  light.bounds = light.mesh.bounds();
  index_asset(libs.assets, std::move(light));

  for (const Swatch& s : swatches()) {
    MaterialRecord m;
    m.def.id = std::string(s.id);
    const std::string stem = "builtin:textures/" + m.def.id + "_";
    m.def.base_color = stem + "base_color.png";
    m.def.normal = stem + "normal.png";
    m.def.roughness = stem + "roughness.png";
    m.def.metallic = stem + "metallic.png";
    m.def.ambient_occlusion = stem + "ambient_occlusion.png";
    m.def.uv_tiling = 0.25;
    m.tags = s.tags;
    m.description = std::string(s.description);
    index_record(libs.materials, std::move(m), s.tags);
  }
  for (const SkySwatch& s : sky_swatches()) {
    SkyboxRecord k;
    k.def.id = std::string(s.id);
    k.def.hdr_ref = "builtin:skyboxes/" + k.def.id + ".hdr";
    k.tags = s.tags;
    k.description = std::string(s.description);
    index_record(libs.skyboxes, std::move(k), s.tags);
  }
  return libs;
}

// ---- texture files ------------------------------------------------------------

std::vector<std::uint8_t> texture_png(const std::array<std::uint8_t, 3>& rgb, std::uint64_t seed, int size = 32) {
  std::vector<std::uint8_t> px(static_cast<std::size_t>(size) * size * 3);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < px.size(); i += 3) {
    const int jitter = static_cast<int>(rng() % 21) - 10;
    for (int c = 0; c < 3; ++c) px[i + c] = static_cast<std::uint8_t>(std::clamp(rgb[c] + jitter, 0, 255));
  }
  return layout::encode_rgb8_png(size, size, px);
}

void rgbe(float r, float g, float b, std::uint8_t* out) {
  const float v = std::max({r, g, b});
  if (v < 1e-32f) {
    out[0] = out[1] = out[2] = out[3] = 0;
    return;
  }
  int e = 0;
  const float scale = std::frexp(v, &e) * 256.0f / v;
  out[0] = static_cast<std::uint8_t>(r * scale);
  out[1] = static_cast<std::uint8_t>(g * scale);
  out[2] = static_cast<std::uint8_t>(b * scale);
  out[3] = static_cast<std::uint8_t>(e + 128);
}

/// Flat (non-RLE) Radiance RGBE panorama with a vertical gradient.
std::vector<std::uint8_t> sky_hdr(const SkySwatch& s, int w = 64, int h = 32) {
  std::string header = "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y " + std::to_string(h) + " +X " +
                       std::to_string(w) + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (int y = 0; y < h; ++y) {
    // Upper half blends zenith to horizon, lower half is a dim ground bounce.
    const float t = std::min(1.0f, static_cast<float>(y) / (0.5f * static_cast<float>(h)));
    std::array<float, 3> c{};
    for (int k = 0; k < 3; ++k) {
      c[k] = s.zenith[k] + (s.horizon[k] - s.zenith[k]) * t;
      if (y >= h / 2) c[k] *= 0.35f;
    }
    for (int x = 0; x < w; ++x) {
      std::uint8_t px[4];
      rgbe(c[0], c[1], c[2], px);
      out.insert(out.end(), px, px + 4);
    }
  }
  return out;
}

// ---- manifests ----------------------------------------------------------------

[[noreturn]] void schema(const std::string& path, const std::string& why) {
  throw Error(ErrorCode::SchemaViolation, path, why);
}

const Json& entries_of(const Json& manifest, const char* key) {
  if (manifest.is_array()) return manifest;
  if (manifest.is_object() && manifest.contains(key) && manifest.at(key).is_array()) return manifest.at(key);
  schema(key, "expected an array of entries");
}

std::string string_field(const Json& e, const std::string& path, const char* key, bool required = true) {
  const auto it = e.find(key);
  if (it == e.end()) {
    if (required) schema(path + "." + key, "missing");
    return {};
  }
  if (!it->is_string() || (required && it->get<std::string>().empty())) schema(path + "." + key, "expected a string");
  return it->get<std::string>();
}

std::vector<std::string> tag_list(const Json& e, const std::string& path) {
  std::vector<std::string> tags;
  if (!e.contains("tags")) return tags;
  if (!e.at("tags").is_array()) schema(path + ".tags", "expected an array");
  for (const auto& t : e.at("tags")) {
    if (!t.is_string()) schema(path + ".tags", "expected strings");
    std::string s = t.get<std::string>();
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    tags.push_back(std::move(s));
  }
  return tags;
}

bool is_builtin(const std::string& uri) { return uri.rfind("builtin:", 0) == 0; }

std::string resolve(const std::string& uri, const std::string& base_dir) {
  if (is_builtin(uri)) return uri;
  std::string path = uri;
  if (path.rfind("file://", 0) == 0) path = path.substr(7);
  fs::path p(path);
  if (p.is_relative() && !base_dir.empty()) p = fs::path(base_dir) / p;
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) throw Error(ErrorCode::DanglingURI, uri, "cannot resolve " + p.string());
  return p.string();
}

Vec3 vec3_of(const Json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) schema(path, "expected [x, y, z]");
  for (const auto& v : j) {
    if (!v.is_number()) schema(path, "expected numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Json vec3_json(Vec3 v) { return Json::array({v.x, v.y, v.z}); }

bool bounds_close(const geometry::Aabb& a, const geometry::Aabb& b, double tol) {
  const double d[] = {a.min.x - b.min.x, a.min.y - b.min.y, a.min.z - b.min.z,
                      a.max.x - b.max.x, a.max.y - b.max.y, a.max.z - b.max.z};
  return std::all_of(std::begin(d), std::end(d), [&](double x) { return std::abs(x) <= tol; });
}

}  // namespace

const Libraries& builtin_libraries() {
  static const Libraries libs = make_builtin();
  return libs;
}

std::string builtin_relative(const std::string& uri) {
  return is_builtin(uri) ? uri.substr(8) : uri;
}

std::vector<std::string> write_builtin_textures(const std::string& dir) {
  std::vector<std::string> written;
  const fs::path root(dir);
  fs::create_directories(root / "textures");
  fs::create_directories(root / "skyboxes");
  for (const Swatch& s : swatches()) {
    const std::string stem = "textures/" + std::string(s.id) + "_";
    const auto gray = [](double v) {
      const auto g = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      return std::array<std::uint8_t, 3>{g, g, g};
    };
    const std::pair<std::string, std::array<std::uint8_t, 3>> maps[] = {
        {"base_color", s.color},
        {"normal", {128, 128, 255}},
        {"roughness", gray(s.roughness)},
        {"metallic", gray(s.metallic)},
        {"ambient_occlusion", {235, 235, 235}}};
    for (const auto& [kind, rgb] : maps) {
      const std::string rel = stem + kind + ".png";
      const std::uint64_t seed = kind == "base_color" ? fnv1a64(rel) : 0;
      write_file((root / rel).string(), kind == "base_color" ? texture_png(rgb, seed) : texture_png(rgb, 0, 4));
      written.push_back(rel);
    }
  }
  for (const SkySwatch& s : sky_swatches()) {
    const std::string rel = "skyboxes/" + std::string(s.id) + ".hdr";
    write_file((root / rel).string(), sky_hdr(s));
    written.push_back(rel);
  }
  return written;
}

ManifestPaths ManifestPaths::in_directory(const std::string& dir) {
  const fs::path d(dir);
  return {(d / "assets.json").string(), (d / "materials.json").string(), (d / "skyboxes.json").string()};
}

Libraries ingest_manifests(const Json& assets, const Json& materials, const Json& skyboxes,
                           const std::string& base_dir) {
  Libraries libs;
  const Libraries& builtin = builtin_libraries();

  const Json& aj = entries_of(assets, "assets");
  for (std::size_t i = 0; i < aj.size(); ++i) {
    const Json& e = aj[i];
    const std::string path = "assets[" + std::to_string(i) + "]";
    if (!e.is_object()) schema(path, "expected an object");
    AssetRecord a;
    a.id = string_field(e, path, "id");
    if (libs.assets.by_id.count(a.id)) throw Error(ErrorCode::DuplicateId, a.id);
    a.mesh_uri = string_field(e, path, "mesh");
    a.style = string_field(e, path, "style");
    a.building_type = string_field(e, path, "building_type", false);
    const std::string category = e.value("category", std::string("building"));
    try {
      a.category = scene::category_from_name(category);
    } catch (const Error&) {
      schema(path + ".category", "unknown category " + category);
    }
    const std::string file = resolve(a.mesh_uri, base_dir);
    if (is_builtin(file)) {
      const AssetRecord* b = nullptr;
      for (const auto& cand : builtin.assets.entries) {
        if (cand.mesh_uri == file) b = &cand;
      }
      if (!b) throw Error(ErrorCode::DanglingURI, a.mesh_uri);
      a.mesh = b->mesh;
    } else {
      a.mesh = load_mesh_file(file);
    }
    if (a.mesh.empty()) throw Error(ErrorCode::DegenerateAsset, a.id, "asset mesh has no triangles");
    const geometry::Aabb actual = a.mesh.bounds();
    a.bounds = actual;
    if (e.contains("bounds")) {
      const Json& b = e.at("bounds");
      if (!b.is_object() || !b.contains("min") || !b.contains("max")) schema(path + ".bounds", "expected {min, max}");
      const geometry::Aabb declared{vec3_of(b.at("min"), path + ".bounds.min"), vec3_of(b.at("max"), path + ".bounds.max")};
      if (!bounds_close(declared, actual, 1e-3)) {
        libs.warnings.push_back("asset " + a.id + ": declared bounds differ from the mesh AABB; using the mesh AABB");
      }
    }
    index_asset(libs.assets, std::move(a));
  }

  const Json& mj = entries_of(materials, "materials");
  for (std::size_t i = 0; i < mj.size(); ++i) {
    const Json& e = mj[i];
    const std::string path = "materials[" + std::to_string(i) + "]";
    if (!e.is_object()) schema(path, "expected an object");
    MaterialRecord m;
    m.def.id = string_field(e, path, "id");
    if (libs.materials.by_id.count(m.def.id)) throw Error(ErrorCode::DuplicateId, m.def.id);
    if (!e.contains("maps") || !e.at("maps").is_object()) schema(path + ".maps", "expected an object");
    const Json& maps = e.at("maps");
    for (const auto& [kind, v] : maps.items()) {
      if (std::find(kMapKinds.begin(), kMapKinds.end(), kind) == kMapKinds.end()) {
        schema(path + ".maps." + kind, "unknown map kind");
      }
      if (!v.is_string()) schema(path + ".maps." + kind, "expected a URI");
    }
    for (auto kind : kMapKinds) {
      const std::string k(kind);
      if (!maps.contains(k) || maps.at(k).get<std::string>().empty()) {
        throw Error(ErrorCode::MissingMap, m.def.id + ":" + k);
      }
    }
    m.def.base_color = maps.at("base_color").get<std::string>();
    m.def.normal = maps.at("normal").get<std::string>();
    m.def.roughness = maps.at("roughness").get<std::string>();
    m.def.metallic = maps.at("metallic").get<std::string>();
    m.def.ambient_occlusion = maps.at("ambient_occlusion").get<std::string>();
    for (const auto* uri : {&m.def.base_color, &m.def.normal, &m.def.roughness, &m.def.metallic,
                            &m.def.ambient_occlusion}) {
      resolve(*uri, base_dir);
    }
    if (e.contains("uv_tiling")) {
      if (!e.at("uv_tiling").is_number() || !(e.at("uv_tiling").get<double>() > 0.0)) {
        schema(path + ".uv_tiling", "expected a positive number");
      }
      m.def.uv_tiling = e.at("uv_tiling").get<double>();
    }
    m.tags = tag_list(e, path);
    m.description = string_field(e, path, "description", false);
    const auto tags = m.tags;
    index_record(libs.materials, std::move(m), tags);
  }

  const Json& sj = entries_of(skyboxes, "skyboxes");
  for (std::size_t i = 0; i < sj.size(); ++i) {
    const Json& e = sj[i];
    const std::string path = "skyboxes[" + std::to_string(i) + "]";
    if (!e.is_object()) schema(path, "expected an object");
    SkyboxRecord s;
    s.def.id = string_field(e, path, "id");
    if (libs.skyboxes.by_id.count(s.def.id)) throw Error(ErrorCode::DuplicateId, s.def.id);
    s.def.hdr_ref = string_field(e, path, "hdr");
    resolve(s.def.hdr_ref, base_dir);
    if (e.contains("rotation")) {
      if (!e.at("rotation").is_number()) schema(path + ".rotation", "expected a number");
      s.def.rotation = e.at("rotation").get<double>();
    }
    s.tags = tag_list(e, path);
    s.description = string_field(e, path, "description", false);
    const auto tags = s.tags;
    index_record(libs.skyboxes, std::move(s), tags);
  }
  return libs;
}

Libraries ingest_libraries(const ManifestPaths& paths) {
  auto load = [](const std::string& file) {
    if (file.empty()) return Json::array();
    std::error_code ec;
    if (!fs::is_regular_file(file, ec)) throw Error(ErrorCode::DanglingURI, file, "manifest not found");
    const auto bytes = read_file(file);
    try {
      return Json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::SchemaViolation, file, e.what());
    }
  };
  const Json a = load(paths.assets), m = load(paths.materials), s = load(paths.skyboxes);
  // Each manifest resolves relative URIs against its own directory.
  auto dir_of = [](const std::string& f) { return fs::path(f).parent_path().string(); };
  Libraries out = ingest_manifests(a, Json::array(), Json::array(), dir_of(paths.assets));
  Libraries mats = ingest_manifests(Json::array(), m, Json::array(), dir_of(paths.materials));
  Libraries skies = ingest_manifests(Json::array(), Json::array(), s, dir_of(paths.skyboxes));
  out.materials = std::move(mats.materials);
  out.skyboxes = std::move(skies.skyboxes);
  return out;
}

Json assets_manifest(const AssetLibrary& lib) {
  Json arr = Json::array();
  for (const auto& a : lib.entries) {
    Json e{{"id", a.id},
           {"mesh", a.mesh_uri},
           {"style", a.style},
           {"category", scene::category_name(a.category)},
           {"bounds", {{"min", vec3_json(a.bounds.min)}, {"max", vec3_json(a.bounds.max)}}}};
    if (!a.building_type.empty()) e["building_type"] = a.building_type;
    arr.push_back(std::move(e));
  }
  return Json{{"assets", arr}};
}

Json materials_manifest(const MaterialLibrary& lib) {
  Json arr = Json::array();
  for (const auto& m : lib.entries) {
    arr.push_back({{"id", m.def.id},
                   {"maps",
                    {{"base_color", m.def.base_color},
                     {"normal", m.def.normal},
                     {"roughness", m.def.roughness},
                     {"metallic", m.def.metallic},
                     {"ambient_occlusion", m.def.ambient_occlusion}}},
                   {"uv_tiling", m.def.uv_tiling},
                   {"tags", m.tags},
                   {"description", m.description}});
  }
  return Json{{"materials", arr}};
}

Json skyboxes_manifest(const SkyboxLibrary& lib) {
  Json arr = Json::array();
  for (const auto& s : lib.entries) {
    arr.push_back({{"id", s.def.id},
                   {"hdr", s.def.hdr_ref},
                   {"rotation", s.def.rotation},
                   {"tags", s.tags},
                   {"description", s.description}});
  }
  return Json{{"skyboxes", arr}};
}

// ---- mesh import --------------------------------------------------------------

Mesh parse_obj(std::string_view text) {
  std::vector<Vec3> pos, nrm;
  std::vector<Vec2> tex;
  Mesh m;
  std::map<std::array<long, 3>, std::uint32_t> dedup;
  bool all_uv = true, all_n = true;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& why) -> void {
    throw Error(ErrorCode::SerializationFailure, "obj:" + std::to_string(line_no), why);
  };
  auto fix = [](long idx, std::size_t n) -> long { return idx < 0 ? static_cast<long>(n) + idx : idx - 1; };
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x >> v.y >> v.z)) fail("bad vertex");
      pos.push_back(v);
    } else if (tag == "vt") {
      Vec2 t;
      if (!(ls >> t.x >> t.y)) fail("bad texture coordinate");
      tex.push_back(t);
    } else if (tag == "vn") {
      Vec3 n;
      if (!(ls >> n.x >> n.y >> n.z)) fail("bad normal");
      nrm.push_back(n);
    } else if (tag == "f") {
      std::vector<std::uint32_t> poly;
      std::string tok;
      while (ls >> tok) {
        std::array<long, 3> key{-1, -1, -1};
        std::size_t start = 0;
        for (int k = 0; k < 3 && start <= tok.size(); ++k) {
          const std::size_t slash = tok.find('/', start);
          const std::string part = tok.substr(start, slash == std::string::npos ? std::string::npos : slash - start);
          if (!part.empty()) {
            long v = 0;
            const auto r = std::from_chars(part.data(), part.data() + part.size(), v);
            if (r.ec != std::errc{} || v == 0) fail("bad face index");
            key[static_cast<std::size_t>(k)] = fix(v, k == 0 ? pos.size() : k == 1 ? tex.size() : nrm.size());
          }
          if (slash == std::string::npos) break;
          start = slash + 1;
        }
        if (key[0] < 0 || key[0] >= static_cast<long>(pos.size())) fail("face index out of range");
        if (key[1] >= static_cast<long>(tex.size()) || key[2] >= static_cast<long>(nrm.size())) {
          fail("face index out of range");
        }
        auto [it, fresh] = dedup.try_emplace(key, static_cast<std::uint32_t>(m.vertices.size()));
        if (fresh) {
          m.vertices.push_back(pos[static_cast<std::size_t>(key[0])]);
          all_uv = all_uv && key[1] >= 0;
          all_n = all_n && key[2] >= 0;
          m.uvs.push_back(key[1] >= 0 ? tex[static_cast<std::size_t>(key[1])] : Vec2{});
          m.normals.push_back(key[2] >= 0 ? normalized(nrm[static_cast<std::size_t>(key[2])]) : Vec3{});
        }
        poly.push_back(it->second);
      }
      if (poly.size() < 3) fail("face with fewer than 3 vertices");
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) m.triangles.push_back({poly[0], poly[k], poly[k + 1]});
    }
  }
  if (!all_uv) m.uvs.clear();
  if (!all_n) geometry::compute_vertex_normals(m);
  return m;
}

namespace {

std::uint32_t rd32(const std::vector<std::uint8_t>& b, std::size_t at) {
  if (at + 4 > b.size()) throw Error(ErrorCode::SerializationFailure, "glb", "truncated");
  std::uint32_t v;
  std::memcpy(&v, b.data() + at, 4);
  return v;
}

Mesh parse_glb_mesh(const std::vector<std::uint8_t>& glb) {
  if (rd32(glb, 0) != 0x46546C67u) throw Error(ErrorCode::SerializationFailure, "glb", "bad magic");
  const std::uint32_t json_len = rd32(glb, 12);
  if (rd32(glb, 16) != 0x4E4F534Au || 20 + json_len > glb.size()) {
    throw Error(ErrorCode::SerializationFailure, "glb", "bad json chunk");
  }
  const Json g = Json::parse(glb.begin() + 20, glb.begin() + 20 + json_len);
  std::size_t bin_at = 20 + json_len;
  std::span<const std::uint8_t> bin;
  if (bin_at + 8 <= glb.size()) {
    const std::uint32_t len = rd32(glb, bin_at);
    if (bin_at + 8 + len > glb.size()) throw Error(ErrorCode::SerializationFailure, "glb", "bad bin chunk");
    bin = {glb.data() + bin_at + 8, len};
  }
  auto view_bytes = [&](const Json& acc, std::size_t elem, std::size_t& stride) {
    const Json& view = g.at("bufferViews").at(acc.at("bufferView").get<std::size_t>());
    const std::size_t off = view.value("byteOffset", std::size_t{0}) + acc.value("byteOffset", std::size_t{0});
    stride = view.value("byteStride", elem);
    const std::size_t count = acc.at("count").get<std::size_t>();
    if (count > 0 && off + stride * (count - 1) + elem > bin.size()) {
      throw Error(ErrorCode::SerializationFailure, "glb", "accessor out of range");
    }
    return bin.data() + off;
  };
  Mesh out;
  for (const Json& mesh : g.value("meshes", Json::array())) {
    for (const Json& prim : mesh.at("primitives")) {
      if (prim.value("mode", 4) != 4) continue;
      const Json& pacc = g.at("accessors").at(prim.at("attributes").at("POSITION").get<std::size_t>());
      if (pacc.at("componentType") != 5126 || pacc.at("type") != "VEC3") {
        throw Error(ErrorCode::SerializationFailure, "glb", "POSITION must be float VEC3");
      }
      std::size_t stride = 0;
      const std::uint8_t* p = view_bytes(pacc, 12, stride);
      const auto base = static_cast<std::uint32_t>(out.vertices.size());
      const std::size_t n = pacc.at("count").get<std::size_t>();
      for (std::size_t i = 0; i < n; ++i) {
        float xyz[3];
        std::memcpy(xyz, p + i * stride, 12);
        out.vertices.push_back({xyz[0], -static_cast<double>(xyz[2]), xyz[1]});  // y-up to z-up
      }
      std::vector<std::uint32_t> idx;
      if (prim.contains("indices")) {
        const Json& iacc = g.at("accessors").at(prim.at("indices").get<std::size_t>());
        const int ct = iacc.at("componentType").get<int>();
        const std::size_t sz = ct == 5121 ? 1 : ct == 5123 ? 2 : ct == 5125 ? 4 : 0;
        if (!sz) throw Error(ErrorCode::SerializationFailure, "glb", "bad index type");
        std::size_t istride = 0;
        const std::uint8_t* q = view_bytes(iacc, sz, istride);
        for (std::size_t i = 0; i < iacc.at("count").get<std::size_t>(); ++i) {
          std::uint32_t v = 0;
          std::memcpy(&v, q + i * istride, sz);
          idx.push_back(v);
        }
      } else {
        for (std::uint32_t i = 0; i < n; ++i) idx.push_back(i);
      }
      for (std::size_t t = 0; t + 2 < idx.size(); t += 3) {
        if (idx[t] >= n || idx[t + 1] >= n || idx[t + 2] >= n) {
          throw Error(ErrorCode::SerializationFailure, "glb", "index out of range");
        }
        out.triangles.push_back({base + idx[t], base + idx[t + 1], base + idx[t + 2]});
      }
    }
  }
  geometry::compute_vertex_normals(out);
  return out;
}

}  // namespace

Mesh load_mesh_file(const std::string& path) {
  const auto bytes = read_file(path);
  const std::string ext = fs::path(path).extension().string();
  if (ext == ".obj" || ext == ".OBJ") return parse_obj(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  if (ext == ".glb" || ext == ".GLB") {
    try {
      return parse_glb_mesh(bytes);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::SerializationFailure, "glb", e.what());
    }
  }
  throw Error(ErrorCode::SerializationFailure, path, "unsupported mesh format " + ext);
}

}  // namespace majutsu::providers
