#include "fixtures.hpp"

namespace fixture {

using layout::SemanticClass;

scene::MaterialDef material(const std::string& id, double uv_tiling) {
  scene::MaterialDef m;
  m.id = id;
  m.base_color = "materials/" + id + "/basecolor.png";
  m.normal = "materials/" + id + "/normal.png";
  m.roughness = "materials/" + id + "/roughness.png";
  m.metallic = "materials/" + id + "/metallic.png";
  m.ambient_occlusion = "materials/" + id + "/ao.png";
  m.uv_tiling = uv_tiling;
  return m;
}

scene::AssetEntry box_asset(const std::string& id, scene::Category category, double w, double l,
                            double h, const std::string& style) {
  geometry::Polygon p;
  p.outer = {{-w / 2, -l / 2}, {w / 2, -l / 2}, {w / 2, l / 2}, {-w / 2, l / 2}};
  scene::AssetEntry a;
  a.id = id;
  a.category = category;
  a.style = style;
  a.mesh = geometry::extrude_footprint(p, h);
  return a;
}

std::unique_ptr<SceneFixture> make_scene(int buildings, int trees, int lights, std::uint64_t seed) {
  auto owned = std::make_unique<SceneFixture>();
  SceneFixture& f = *owned;
  f.layout = layout::LayoutMap(64, 64, SemanticClass::Ground, 2.0);
  f.hmap = layout::HeightMap(64, 64, 0.0);
  for (int y = 30; y < 34; ++y)
    for (int x = 0; x < 64; ++x) f.layout.set(x, y, SemanticClass::Road);
  for (int y = 50; y < 60; ++y)
    for (int x = 50; x < 60; ++x) f.layout.set(x, y, SemanticClass::Water);
  for (int y = 36; y < 46; ++y)
    for (int x = 40; x < 60; ++x) f.layout.set(x, y, SemanticClass::Vegetation);
  for (int b = 0; b < buildings; ++b) {
    const int x0 = 2 + (b % 7) * 5, y0 = 2 + (b / 7) * 5;
    for (int y = y0; y < y0 + 3; ++y)
      for (int x = x0; x < x0 + 3 + (b % 2); ++x) {
        f.layout.set(x, y, SemanticClass::Building);
        f.hmap.set(x, y, 10.0 + 3.0 * b);
      }
  }

  auto& in = f.inputs;
  in.layout = &f.layout;
  in.hmap = &f.hmap;
  in.buildings = layout::extract_building_instances(f.layout, f.hmap);
  in.assets["lib_box"] = box_asset("lib_box", scene::Category::Building, 1.0, 1.0, 1.0);
  in.assets["lib_tall"] = box_asset("lib_tall", scene::Category::Building, 1.0, 2.0, 3.0);
  in.assets["lib_tree"] = box_asset("lib_tree", scene::Category::Tree, 2.0, 2.0, 6.0, "any");
  in.assets["lib_light"] = box_asset("lib_light", scene::Category::Streetlight, 0.3, 0.3, 5.0, "any");
  in.tree_asset = "lib_tree";
  in.streetlight_asset = "lib_light";
  for (std::size_t i = 0; i < in.buildings.size(); ++i) {
    in.building_assets[in.buildings[i].id] = i % 2 ? "lib_tall" : "lib_box";
  }
  for (int t = 0; t < trees; ++t) {
    in.placements.push_back({{82.0 + 3.0 * (t % 10), 40.0 + 3.0 * (t / 10)},
                             placement::PlacementKind::Tree, placement::PlacementSource::VegetationFill});
  }
  for (int l = 0; l < lights; ++l) {
    in.placements.push_back({{5.0 + 10.0 * l, 57.0}, placement::PlacementKind::Streetlight,
                             placement::PlacementSource::Roadside});
  }
  for (const char* id : {"grass_01", "asphalt_01", "asphalt_02", "water_01", "moss_01", "brick_01"}) {
    in.materials[id] = material(id);
  }
  in.layer_materials = {{scene::LayerKind::Ground, "grass_01"},
                        {scene::LayerKind::Road, "asphalt_01"},
                        {scene::LayerKind::Water, "water_01"},
                        {scene::LayerKind::Vegetation, "moss_01"}};
  in.skybox = {"sky_clear", "skyboxes/clear_noon.hdr", 0.0};
  in.name = "fixture";
  in.seed = seed;
  return owned;
}

scene::SceneDocument make_document(int buildings, int trees, int lights, std::uint64_t seed) {
  return scene::assemble_scene(make_scene(buildings, trees, lights, seed)->inputs);
}

namespace {

template <typename Map>
std::string pick_key(const Map& m, std::mt19937_64& rng) {
  auto it = m.begin();
  std::advance(it, static_cast<long>(rng() % m.size()));
  return it->first;
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit_double(rng); }

std::string random_tint(std::mt19937_64& rng) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%06x", static_cast<unsigned>(rng() & 0xFFFFFF));
  return buf;
}

}  // namespace

edit::EditCommand random_command(const scene::SceneDocument& doc, std::mt19937_64& rng) {
  const int op = static_cast<int>(rng() % 5);
  const bool have = !doc.instances.empty();
  const std::string target = have && rng() % 20 ? pick_key(doc.instances, rng) : std::string("ghost");
  switch (op) {
    case 0: {
      edit::AddCmd a;
      a.asset_ref = pick_key(doc.assets, rng);
      a.placement.translation = {uniform(rng, -5.0, doc.width_m()), uniform(rng, 0.0, doc.height_m()), 0.0};
      a.placement.yaw = uniform(rng, 0.0, 6.0);
      a.placement.xy_scale = a.placement.z_scale = uniform(rng, 0.5, 2.0);
      if (rng() % 3 == 0) a.overrides["tint"] = random_tint(rng);
      return a;
    }
    case 1:
      return edit::DeleteCmd{target};
    case 2: {
      edit::EditCmd e{target, {}};
      const int n = 1 + static_cast<int>(rng() % 3);
      for (int i = 0; i < n; ++i) {
        switch (rng() % 7) {
          case 0: e.patch["tint"] = rng() % 4 ? std::optional(random_tint(rng)) : std::nullopt; break;
          case 1: e.patch["material"] = rng() % 4 ? std::optional(pick_key(doc.materials, rng)) : std::nullopt; break;
          case 2: e.patch["height"] = format_double(uniform(rng, 3.0, 120.0)); break;
          case 3: e.patch["placement.tx"] = format_double(uniform(rng, 0.0, doc.width_m())); break;
          case 4: e.patch["asset_ref"] = pick_key(doc.assets, rng); break;
          case 5: e.patch["material.roof"] = pick_key(doc.materials, rng); break;
          default: e.patch["placement.yaw"] = format_double(uniform(rng, -3.0, 3.0)); break;
        }
      }
      return e;
    }
    case 3: {
      edit::MoveCmd m;
      m.instance_id = target;
      m.d_translation = {uniform(rng, -20.0, 20.0), uniform(rng, -20.0, 20.0), rng() % 4 ? 0.0 : uniform(rng, -1.0, 1.0)};
      m.d_yaw = uniform(rng, -4.0, 4.0);
      m.d_scale = rng() % 3 ? 1.0 : uniform(rng, 0.5, 1.5);
      return m;
    }
    default: {
      edit::ReplaceCmd r;
      if (rng() % 2) {
        r.target.layer = scene::kLayerKinds[rng() % 4];
      } else {
        r.target.instance_id = target;
        r.target.surface = rng() % 2 ? "facade" : "";
      }
      r.material_id = rng() % 15 ? pick_key(doc.materials, rng) : std::string("unobtainium");
      return r;
    }
  }
}

}  // namespace fixture
