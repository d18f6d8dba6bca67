#include <doctest.h>

#include <filesystem>
#include <set>

#include "fixtures.hpp"
#include "majutsu/scene.hpp"

using namespace majutsu;
using namespace majutsu::scene;

namespace {

double mesh_area(const Mesh& m) {
  double a = 0.0;
  for (std::size_t t = 0; t < m.triangles.size(); ++t) a += m.triangle_area(t);
  return a;
}

bool intersects_map(const geometry::Aabb& b, const SceneDocument& doc) {
  return b.max.x >= 0 && b.min.x <= doc.width_m() && b.max.y >= 0 && b.min.y <= doc.height_m();
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("majutsu_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("names round-trip") {
  for (LayerKind k : kLayerKinds) CHECK(layer_from_name(layer_name(k)) == k);
  CHECK_FALSE(layer_from_name("lava").has_value());
  for (Category c : {Category::Building, Category::Tree, Category::Streetlight})
    CHECK(category_from_name(category_name(c)) == c);
}

TEST_CASE("material validation") {
  MaterialDef m = fixture::material("m");
  CHECK_NOTHROW(m.validate());
  m.normal.clear();
  try {
    m.validate();
    FAIL("expected MissingMap");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingMap);
    CHECK(e.detail() == "m:normal");
  }
}

TEST_CASE("assemble: all-ground layout") {
  auto f = fixture::make_scene(0, 0, 0);
  f->layout = layout::LayoutMap(32, 32, layout::SemanticClass::Ground, 2.0);
  f->hmap = layout::HeightMap(32, 32, 0.0);
  f->inputs.buildings.clear();
  const SceneDocument doc = assemble_scene(f->inputs);
  CHECK_FALSE(doc.layer(LayerKind::Ground).mesh.empty());
  CHECK(doc.layer(LayerKind::Road).mesh.empty());
  CHECK(doc.layer(LayerKind::Water).mesh.empty());
  CHECK(doc.layer(LayerKind::Vegetation).mesh.empty());
  CHECK(doc.instances.empty());
  CHECK(doc.skybox.hdr_ref == "skyboxes/clear_noon.hdr");
  CHECK(doc.revision == 1);
  CHECK(doc.edit_log.empty());
}

TEST_CASE("assemble: 7 buildings + 12 trees + 4 lights") {
  auto f = fixture::make_scene(7, 12, 4);
  REQUIRE(f->inputs.buildings.size() == 7);
  const SceneDocument doc = assemble_scene(f->inputs);
  CHECK(doc.instances.size() == 23);
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& [id, inst] : doc.instances) counts[static_cast<int>(inst.category)]++;
  CHECK(counts[0] == 7);
  CHECK(counts[1] == 12);
  CHECK(counts[2] == 4);
  CHECK(doc.instances.count("bldg_0001"));
  CHECK(doc.instances.count("tree_0012"));
  CHECK(doc.instances.count("light_0004"));
  for (const auto& b : f->inputs.buildings) {
    const auto& inst = doc.instances.at(b.id);
    const auto box = instance_world_bounds(doc, inst);
    CHECK(box.max.z - box.min.z == doctest::Approx(b.target_height).epsilon(1e-9));
    CHECK(box.min.z == doctest::Approx(0.0).epsilon(1e-12));
    // Placement containment in the building's box.
    const Mesh& m = doc.assets.at(inst.asset_ref).mesh;
    for (const Vec3& v : m.vertices) {
      const Vec3 w = inst.placement.apply(v);
      CHECK(b.obb.contains({w.x, w.y}, 1e-6));
    }
  }
  for (const auto& [id, inst] : doc.instances) {
    CHECK(intersects_map(instance_world_bounds(doc, inst), doc));
    if (inst.category != Category::Building) {
      CHECK(inst.placement.xy_scale == 1.0);
      CHECK(inst.placement.z_scale == 1.0);
      CHECK(inst.placement.yaw >= 0.0);
      CHECK(inst.placement.yaw < 2.0 * 3.141592653589794);
    }
  }
  // Same inputs, same document.
  CHECK(assemble_scene(f->inputs) == doc);
}

TEST_CASE("assemble errors") {
  auto f = fixture::make_scene(2, 0, 0);
  SUBCASE("missing asset mapping") {
    f->inputs.building_assets.erase("bldg_0002");
    try {
      assemble_scene(f->inputs);
      FAIL("expected MissingAsset");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MissingAsset);
      CHECK(e.detail() == "bldg_0002");
    }
  }
  SUBCASE("missing layer material") {
    f->inputs.materials.erase("water_01");
    try {
      assemble_scene(f->inputs);
      FAIL("expected MaterialMissing");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MaterialMissing);
      CHECK(e.detail() == "water");
    }
  }
}

TEST_CASE("layer meshes and building pixels tile the map") {
  auto f = fixture::make_scene(9, 0, 0);
  const SceneDocument doc = assemble_scene(f->inputs);
  double covered = 0.0;
  for (const Layer& l : doc.layers) covered += mesh_area(l.mesh);
  const double building = static_cast<double>(count_set(f->layout.mask(layout::SemanticClass::Building))) * 4.0;
  const double total = doc.width_m() * doc.height_m();
  CHECK(covered + building == doctest::Approx(total).epsilon(0.02));
}

TEST_CASE("save/load round trip on a 100-instance document") {
  SceneDocument doc = fixture::make_document(30, 60, 10);
  REQUIRE(doc.instances.size() == 100);
  doc.instances.at("tree_0001").overrides["tint"] = "#ff8800";
  const std::string text = save_document(doc);
  const SceneDocument back = load_document(text);
  CHECK(back == doc);
  CHECK(save_document(back) == text);
}

TEST_CASE("load errors") {
  const SceneDocument doc = fixture::make_document(5, 0, 0);
  Json j = document_to_json(doc);
  SUBCASE("unknown version") {
    j["version"] = "99";
    try {
      load_document(j.dump());
      FAIL("expected UnknownVersion");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnknownVersion);
      CHECK(e.detail() == "99");
    }
  }
  SUBCASE("instance missing placement") {
    j["instances"][3].erase("placement");
    try {
      load_document(j.dump());
      FAIL("expected SchemaViolation");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SchemaViolation);
      CHECK(e.detail() == "instances[3].placement");
    }
  }
  SUBCASE("bad placement scale") {
    j["instances"][0]["placement"]["xy_scale"] = -1.0;
    try {
      load_document(j.dump());
      FAIL("expected SchemaViolation");
    } catch (const Error& e) {
      CHECK(e.detail() == "instances[0].placement");
    }
  }
  SUBCASE("wrong blob size") {
    j["layers"][0]["mesh"]["vertex_count"] = 1;
    CHECK_THROWS_AS(load_document(j.dump()), Error);
  }
  SUBCASE("not json") { CHECK_THROWS_AS(load_document("{oops"), Error); }
}

TEST_CASE("large meshes go to external files") {
  SceneDocument doc = fixture::make_document(1, 0, 0);
  // ~ 60k vertices * 48 bytes > 1 MiB
  Mesh big;
  for (int i = 0; i < 20000; ++i) {
    const auto base = static_cast<std::uint32_t>(big.vertices.size());
    big.vertices.push_back({i * 1.0, 0, 0});
    big.vertices.push_back({i * 1.0 + 1, 0, 0});
    big.vertices.push_back({i * 1.0, 1, 0});
    big.triangles.push_back({base, base + 1, base + 2});
  }
  geometry::compute_vertex_normals(big);
  doc.assets["big"] = {"big", Category::Building, "modern", big};
  const auto dir = temp_dir("external");
  const std::string text = save_document(doc, dir.string());
  CHECK(text.find("\"external\"") != std::string::npos);
  CHECK(text.size() < 200000);
  CHECK(load_document(text, dir.string()) == doc);
  // Without the directory the reference cannot be resolved.
  CHECK_THROWS_AS(load_document(text, (dir / "missing").string()), Error);
  // Embedded form is used when no directory is given.
  CHECK(save_document(doc).find("\"external\"") == std::string::npos);
}

TEST_CASE("content equality and diffs") {
  const SceneDocument a = fixture::make_document(3, 2, 1);
  SceneDocument b = a;
  b.revision = 9;
  b.edit_log.push_back({Json{{"op", "noop"}}, Json{{"op", "noop"}}, 2, "apply"});
  CHECK(content_equal(a, b));
  CHECK(diff_documents(a, b).empty());
  b.instances.at("bldg_0002").placement.translation.x += 1.0;
  b.instances.erase("tree_0001");
  b.layer(LayerKind::Road).material = "asphalt_02";
  CHECK_FALSE(content_equal(a, b));
  const auto d = diff_documents(a, b);
  CHECK(d == std::vector<std::string>{"layers/road", "instances/bldg_0002", "instances/tree_0001"});
}

TEST_CASE("glTF export: structure, node law and transforms") {
  auto f = fixture::make_scene(6, 5, 3);
  const SceneDocument doc = assemble_scene(f->inputs);
  const auto glb = export_gltf(doc);
  const GlbSummary s = inspect_glb(glb);
  REQUIRE(s.nodes.size() == 5 + doc.instances.size());
  CHECK(s.gltf["scenes"][0]["nodes"].size() == s.nodes.size());
  CHECK(s.nodes.front().name == "layer:ground");
  CHECK(s.nodes.back().name == "sky");

  for (std::size_t i = 0; i < 4; ++i) {
    const Mesh& m = doc.layers[i].mesh;
    CHECK(s.nodes[i].vertex_count == m.vertices.size());
    CHECK(s.nodes[i].triangle_count == m.triangles.size());
  }
  std::size_t n = 4;
  for (const auto& [id, inst] : doc.instances) {
    const GlbNodeInfo& node = s.nodes[n++];
    CHECK(node.name == "instance:" + id);
    const Mesh& m = doc.assets.at(inst.asset_ref).mesh;
    CHECK(node.vertex_count == m.vertices.size());
    CHECK(node.triangle_count == m.triangles.size());
    const auto want = instance_world_bounds(doc, inst);
    REQUIRE(node.has_bounds);
    CHECK(node.world_bounds.min.x == doctest::Approx(want.min.x).epsilon(1e-4));
    CHECK(node.world_bounds.max.y == doctest::Approx(want.max.y).epsilon(1e-4));
    CHECK(node.world_bounds.max.z - node.world_bounds.min.z ==
          doctest::Approx(want.max.z - want.min.z).epsilon(1e-5));
  }
  for (const auto& b : f->inputs.buildings) {
    std::size_t k = 4 + static_cast<std::size_t>(std::distance(doc.instances.begin(), doc.instances.find(b.id)));
    const auto& box = s.nodes[k].world_bounds;
    CHECK(std::abs((box.max.z - box.min.z) - b.target_height) <= 1e-3);
  }

  // Sky sphere radius is twice the map diagonal.
  const auto& sky = s.nodes.back().world_bounds;
  const double diag = std::hypot(doc.width_m(), doc.height_m());
  CHECK((sky.max.z - sky.min.z) / 2.0 == doctest::Approx(2.0 * diag).epsilon(1e-4));
  CHECK((sky.max.x + sky.min.x) / 2.0 == doctest::Approx(doc.width_m() / 2.0).epsilon(1e-4));

  // Layer PBR binding.
  const Json& mats = s.gltf["materials"];
  bool found = false;
  for (const Json& m : mats) {
    if (m["name"] == "pbr:asphalt_01") {
      found = true;
      CHECK(m["pbrMetallicRoughness"]["metallicFactor"] == 0.0);
      CHECK(m.contains("normalTexture"));
      CHECK(m.contains("occlusionTexture"));
      CHECK(m["extras"]["metallic_uri"] == "materials/asphalt_01/metallic.png");
    }
  }
  CHECK(found);
  // Deterministic bytes.
  CHECK(export_gltf(doc) == glb);
}

TEST_CASE("glTF export: empty scene still has the 5 fixed nodes") {
  auto f = fixture::make_scene(0, 0, 0);
  const auto s = inspect_glb(export_gltf(assemble_scene(f->inputs)));
  CHECK(s.nodes.size() == 5);
}

TEST_CASE("glTF export: overrides select materials") {
  SceneDocument doc = fixture::make_document(2, 0, 0);
  doc.instances.at("bldg_0001").overrides["material.facade"] = "brick_01";
  doc.instances.at("bldg_0002").overrides["tint"] = "#336699";
  const auto s = inspect_glb(export_gltf(doc));
  std::set<std::string> names;
  for (const Json& m : s.gltf["materials"]) names.insert(m["name"].get<std::string>());
  CHECK(names.count("pbr:brick_01"));
  CHECK(names.count("tint:#336699"));
  doc.instances.at("bldg_0001").overrides["material.facade"] = "nope";
  CHECK_THROWS_AS(export_gltf(doc), Error);
}

TEST_CASE("glb inspection rejects damage") {
  const auto glb = export_gltf(fixture::make_document(2, 1, 1));
  auto bad = glb;
  bad[0] = 'X';
  CHECK_THROWS_AS(inspect_glb(bad), Error);
  bad = glb;
  bad.resize(bad.size() - 4);
  CHECK_THROWS_AS(inspect_glb(bad), Error);
  // Corrupt one index past the vertex count: find the first index view.
  const GlbSummary s = inspect_glb(glb);
  const Json& acc = s.gltf["accessors"];
  for (const Json& a : acc) {
    if (a["componentType"] == 5125) {
      const Json& view = s.gltf["bufferViews"][a["bufferView"].get<std::size_t>()];
      const std::size_t json_len = glb[12] | glb[13] << 8 | glb[14] << 16 | static_cast<std::size_t>(glb[15]) << 24;
      const std::size_t at = 20 + json_len + 8 + view["byteOffset"].get<std::size_t>();
      bad = glb;
      bad[at] = bad[at + 1] = bad[at + 2] = bad[at + 3] = 0xFF;
      try {
        inspect_glb(bad);
        FAIL("expected failure");
      } catch (const Error& e) {
        CHECK(e.detail().find("index out of range") != std::string::npos);
      }
      break;
    }
  }
}

TEST_CASE("sky sphere faces inward") {
  const Mesh m = make_sky_sphere({1, 2, 3}, 10.0, 8, 16);
  CHECK(m.signed_volume() < 0.0);
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    CHECK(norm(m.vertices[i] - Vec3{1, 2, 3}) == doctest::Approx(10.0));
    CHECK(dot(m.normals[i], m.vertices[i] - Vec3{1, 2, 3}) < 0.0);
  }
}
