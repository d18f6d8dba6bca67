#pragma once

// Small hand-built scenes shared by the scene, edit and acceptance tests.

#include <memory>
#include <string>

#include <random>

#include "majutsu/edit.hpp"
#include "majutsu/scene.hpp"

namespace fixture {

using namespace majutsu;

scene::MaterialDef material(const std::string& id, double uv_tiling = 0.25);

/// Axis-aligned box asset centered on the origin in xy, base at z = 0.
scene::AssetEntry box_asset(const std::string& id, scene::Category category, double w, double l,
                            double h, const std::string& style = "modern");

struct SceneFixture {
  layout::LayoutMap layout;
  layout::HeightMap hmap;
  scene::AssemblyInputs inputs;
};

/// 64x64 px at 2 m/px: one road band, a pond, a park and `buildings` 3x3-px
/// blocks with distinct heights; `trees` and `lights` points on free ground.
/// Heap-allocated because `inputs` points into `layout` and `hmap`.
std::unique_ptr<SceneFixture> make_scene(int buildings, int trees, int lights, std::uint64_t seed = 1);

scene::SceneDocument make_document(int buildings, int trees, int lights, std::uint64_t seed = 1);

/// Random but mostly valid command against `doc` (may target unknown ids or
/// leave the map occasionally, which apply must reject cleanly).
edit::EditCommand random_command(const scene::SceneDocument& doc, std::mt19937_64& rng);

}  // namespace fixture
