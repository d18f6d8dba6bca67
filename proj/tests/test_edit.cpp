#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "majutsu/edit.hpp"

using namespace majutsu;
using namespace majutsu::edit;
using scene::LayerKind;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::PipelineFailure;
}

std::string touched(const EditCommand& cmd) {
  return std::visit(
      [](const auto& c) -> std::string {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, AddCmd>) return "instances/" + c.id;
        else if constexpr (std::is_same_v<T, ReplaceCmd>)
          return c.target.layer ? "layers/" + std::string(scene::layer_name(*c.target.layer))
                                : "instances/" + c.target.instance_id;
        else return "instances/" + c.instance_id;
      },
      cmd);
}

}  // namespace

TEST_CASE("grammar examples") {
  CHECK(parse_command("delete bldg_0007") == EditCommand{DeleteCmd{"bldg_0007"}});
  const auto mv = std::get<MoveCmd>(parse_command("move bldg_0007 by (10,0) rotate 0.5"));
  CHECK(mv.instance_id == "bldg_0007");
  CHECK(mv.d_translation == Vec3{10, 0, 0});
  CHECK(mv.d_yaw == 0.5);
  CHECK(mv.d_scale == 1.0);
  const auto rp = std::get<ReplaceCmd>(parse_command("replace road with asphalt_02"));
  CHECK(rp.target.layer == LayerKind::Road);
  CHECK(rp.material_id == "asphalt_02");
}

TEST_CASE("grammar: full forms") {
  const auto add = std::get<AddCmd>(parse_command("  ADD lib_tree at ( 12.5 , -3 ) yaw 1.25 scale 2 "));
  CHECK(add.asset_ref == "lib_tree");
  CHECK(add.placement.translation == Vec3{12.5, -3, 0});
  CHECK(add.placement.yaw == 1.25);
  CHECK(add.placement.xy_scale == 2.0);
  CHECK(add.placement.z_scale == 2.0);
  CHECK(add.id.empty());

  const auto ed = std::get<EditCmd>(parse_command("edit bldg_0001 set height=42.5, tint=#aabbcc"));
  CHECK(ed.patch.size() == 2);
  CHECK(ed.patch.at("height") == "42.5");
  CHECK(ed.patch.at("tint") == "#aabbcc");

  const auto mv = std::get<MoveCmd>(parse_command("move x by (1,2,3) scale 1.5 rotate -0.25"));
  CHECK(mv.d_translation == Vec3{1, 2, 3});
  CHECK(mv.d_scale == 1.5);
  CHECK(mv.d_yaw == -0.25);

  const auto rs = std::get<ReplaceCmd>(parse_command("replace bldg_0003.facade with brick_01"));
  CHECK_FALSE(rs.target.layer.has_value());
  CHECK(rs.target.instance_id == "bldg_0003");
  CHECK(rs.target.surface == "facade");
}

TEST_CASE("grammar errors carry position and expectation") {
  auto detail = [](std::string_view text) {
    try {
      parse_command(text);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ParseError);
      return e.detail();
    }
    FAIL("expected ParseError");
    return std::string();
  };
  CHECK(detail("explode bldg_1") == "0:one of add, delete, edit, move, replace");
  CHECK(detail("delete") == "6:instance id");
  CHECK(detail("move a by (1 2)") == "13:','");
  CHECK(detail("move a by (1,2) scale 0") == "23:positive scale");
  CHECK(detail("add t at (1,2) colour red") == "15:'yaw', 'scale' or end of command");
  CHECK(detail("replace road asphalt") == "13:'with'");
  CHECK(detail("delete a b") == "9:end of command");
  CHECK(detail("edit a set height") == "17:'='");
}

TEST_CASE("JSON form mirrors the grammar") {
  std::mt19937_64 rng(5);
  const auto doc = fixture::make_document(4, 3, 2);
  for (int i = 0; i < 200; ++i) {
    const EditCommand c = fixture::random_command(doc, rng);
    const Json j = command_to_json(c);
    CHECK(command_from_json(j) == c);
    CHECK(parse_command(j.dump()) == c);
  }
  CHECK(std::get<ReplaceCmd>(command_from_json(Json::parse(
            R"({"op":"replace","target":"water","material_id":"w"})"))).target.layer == LayerKind::Water);
  CHECK(code_of([] { command_from_json(Json{{"op", "teleport"}}); }) == ErrorCode::ParseError);
  CHECK(code_of([] { parse_command("{\"op\": "); }) == ErrorCode::ParseError);
}

TEST_CASE("text rendering parses back") {
  for (const char* text : {"delete bldg_0001", "move a by (1.5,-2) rotate 0.25 scale 2",
                           "replace road with asphalt_02", "replace b.facade with brick",
                           "add lib_tree at (3,4) yaw 1 scale 0.5", "edit a set height=3, tint=#000000"}) {
    CHECK(command_to_text(parse_command(text)) == text);
  }
}

TEST_CASE("Add then Delete restores the document content") {
  const auto doc = fixture::make_document(3, 2, 1);
  const auto added = execute(doc, parse_command("add lib_tree at (10,10) yaw 0.5"));
  const std::string id = std::get<AddCmd>(added.applied).id;
  CHECK(id == "inst_r1");
  CHECK(added.doc.revision == 2);
  CHECK(added.doc.instances.at(id).category == scene::Category::Tree);
  const auto removed = apply_command(added.doc, DeleteCmd{id});
  CHECK(scene::content_equal(removed, doc));
  CHECK(removed.revision == 3);
  CHECK(removed.edit_log.size() == 2);
}

TEST_CASE("Move composes additively") {
  const auto doc = fixture::make_document(2, 0, 0);
  const auto p0 = doc.instances.at("bldg_0001").placement;
  auto twice = apply_command(doc, parse_command("move bldg_0001 by (5,0,0)"));
  twice = apply_command(twice, parse_command("move bldg_0001 by (5,0,0)"));
  const auto once = apply_command(doc, parse_command("move bldg_0001 by (10,0,0)"));
  CHECK(twice.instances.at("bldg_0001").placement.translation.x ==
        doctest::Approx(once.instances.at("bldg_0001").placement.translation.x));
  CHECK(once.instances.at("bldg_0001").placement.translation.x == doctest::Approx(p0.translation.x + 10));

  const auto spun = apply_command(doc, MoveCmd{"bldg_0001", {}, 7.0, 2.0});
  const auto& p = spun.instances.at("bldg_0001").placement;
  CHECK(p.yaw == doctest::Approx(std::fmod(p0.yaw + 7.0, 2 * std::numbers::pi)));
  CHECK(p.xy_scale == doctest::Approx(p0.xy_scale * 2));
  CHECK(p.z_scale == doctest::Approx(p0.z_scale * 2));
}

TEST_CASE("apply errors") {
  const auto doc = fixture::make_document(2, 1, 0);
  CHECK(code_of([&] { apply_command(doc, parse_command("delete ghost")); }) == ErrorCode::UnknownInstance);
  CHECK(code_of([&] { apply_command(doc, parse_command("replace road with nope")); }) == ErrorCode::UnknownMaterial);
  CHECK(code_of([&] { apply_command(doc, parse_command("add lib_tree at (-1,5)")); }) == ErrorCode::OutOfBounds);
  CHECK(code_of([&] { apply_command(doc, parse_command("add lib_tree at (5,500)")); }) == ErrorCode::OutOfBounds);
  CHECK(code_of([&] { apply_command(doc, parse_command("move bldg_0001 by (1000,0)")); }) == ErrorCode::OutOfBounds);
  CHECK(code_of([&] { apply_command(doc, parse_command("edit bldg_0001 set colour=red")); }) == ErrorCode::InvalidPatch);
  CHECK(code_of([&] { apply_command(doc, parse_command("edit bldg_0001 set height=-3")); }) == ErrorCode::InvalidPatch);
  CHECK(code_of([&] { apply_command(doc, parse_command("edit bldg_0001 set tint=blue")); }) == ErrorCode::InvalidPatch);
  CHECK(code_of([&] { apply_command(doc, parse_command("edit bldg_0001 set material=nope")); }) == ErrorCode::UnknownMaterial);
  CHECK(code_of([&] { apply_command(doc, MoveCmd{"bldg_0001", {}, 0.0, 0.0}); }) == ErrorCode::InvalidPatch);
  CHECK(code_of([&] { apply_command(doc, AddCmd{"lib_tree", {}, {{1, 1, 0}}, "bldg_0001", {}}); }) == ErrorCode::DuplicateId);
}

TEST_CASE("edit attributes") {
  const auto doc = fixture::make_document(2, 0, 0);
  auto d = apply_command(doc, parse_command("edit bldg_0002 set height=42, tint=#102030, material.roof=brick_01"));
  const auto& inst = d.instances.at("bldg_0002");
  CHECK(scene::instance_world_bounds(d, inst).max.z == doctest::Approx(42.0));
  CHECK(inst.overrides.at("tint") == "#102030");
  CHECK(inst.overrides.at("material.roof") == "brick_01");
  d = undo(d);
  CHECK(scene::content_equal(d, doc));
  // Erasing via JSON null.
  d = apply_command(doc, parse_command("replace bldg_0001 with brick_01"));
  CHECK(d.instances.at("bldg_0001").overrides.at("material") == "brick_01");
  d = apply_command(d, command_from_json(Json::parse(R"({"op":"edit","instance_id":"bldg_0001","patch":{"material":null}})")));
  CHECK(d.instances.at("bldg_0001").overrides.empty());
}

TEST_CASE("undo / redo stack semantics") {
  const auto doc = fixture::make_document(2, 1, 1);
  CHECK(code_of([&] { undo(doc); }) == ErrorCode::NothingToUndo);
  CHECK(code_of([&] { redo(doc); }) == ErrorCode::NothingToRedo);

  const auto a = apply_command(doc, parse_command("move bldg_0001 by (3,4) rotate 1"));
  const auto ab = apply_command(a, parse_command("replace water with asphalt_02"));
  const auto back = undo(ab);
  CHECK(scene::content_equal(back, a));
  CHECK(back.instances.at("bldg_0001").placement == a.instances.at("bldg_0001").placement);
  const auto again = redo(back);
  CHECK(scene::content_equal(again, ab));
  CHECK(again.revision == 5);
  CHECK(scene::content_equal(undo(undo(again)), doc));
  // A fresh apply clears the redo stack.
  const auto branched = apply_command(back, parse_command("delete tree_0001"));
  CHECK(code_of([&] { redo(branched); }) == ErrorCode::NothingToRedo);
}

TEST_CASE("randomized algebra: inverse, locality, replay") {
  const auto base = fixture::make_document(6, 4, 3, 11);
  std::mt19937_64 rng(2024);
  for (int seq = 0; seq < 40; ++seq) {
    auto doc = base;
    for (int step = 0; step < 15; ++step) {
      const auto r = rng() % 10;
      if (r == 0 && !doc.undo_stack.empty()) {
        doc = undo(doc);
        continue;
      }
      if (r == 1 && !doc.redo_stack.empty()) {
        doc = redo(doc);
        continue;
      }
      const EditCommand cmd = fixture::random_command(doc, rng);
      ApplyResult res{doc, cmd, cmd, {}};
      try {
        res = execute(doc, cmd);
      } catch (const Error&) {
        continue;  // rejected commands leave `doc` untouched
      }
      const auto diff = scene::diff_documents(doc, res.doc);
      for (const auto& d : diff) CHECK(d == touched(res.applied));
      const auto restored = undo(res.doc);
      REQUIRE(scene::content_equal(restored, doc));
      CHECK(scene::save_document(restored).size() > 0);
      doc = res.doc;
    }
    const auto replayed = replay(base, doc.edit_log);
    REQUIRE(scene::save_document(replayed) == scene::save_document(doc));
    CHECK(doc.revision == static_cast<std::int64_t>(doc.edit_log.size()) + 1);
  }
}
