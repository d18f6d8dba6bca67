// majutsu: command-line driver for the scene pipeline, editor and evaluation.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "majutsu/edit.hpp"
#include "majutsu/eval.hpp"
#include "majutsu/layout.hpp"
#include "majutsu/orchestrator.hpp"

using namespace majutsu;
namespace fs = std::filesystem;
namespace orch = majutsu::orchestrator;
using Json = nlohmann::json;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool offline = false;
  std::string libs;
  std::string out;
  std::string config;
};

std::string read_text(const std::string& path) {
  const auto b = read_file(path);
  return std::string(b.begin(), b.end());
}

Json read_json(const std::string& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::SchemaViolation, path, std::string("invalid JSON: ") + e.what());
  }
}

/// Defaults, then the config file, then MAJUTSU_PROVIDER_URL, then flags.
orch::PipelineConfig build_config(const Globals& g) {
  orch::PipelineConfig cfg;
  if (!g.config.empty()) cfg = orch::pipeline_config_from_json(orch::load_config_file(g.config), cfg);
  if (const char* url = std::getenv("MAJUTSU_PROVIDER_URL"); url && *url) {
    cfg.providers.set_base_url(url);
    cfg.providers.mode = providers::ProviderMode::External;
  }
  if (g.offline) cfg.providers.mode = providers::ProviderMode::Offline;
  if (g.seed_set) cfg.seed = g.seed;
  if (!g.libs.empty()) cfg.libs_dir = g.libs;
  if (!g.out.empty()) cfg.out_dir = g.out;
  return cfg;
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  orch::write_file_atomic(path.string(), text);
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  write_text(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

scene::SceneDocument load_scene(const std::string& path) {
  return scene::load_document(read_text(path), fs::path(path).parent_path().string());
}

void print_report_summary(const orch::PipelineReport& rep, const std::string& out) {
  std::printf("wrote %zu artifacts to %s\n", rep.artifacts.size(), out.c_str());
  for (const auto& [k, v] : rep.counts) std::printf("  %-18s %zu\n", k.c_str(), v);
  for (const auto& w : rep.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

eval::FeatureSet features(const std::string& path) { return eval::load_features(path); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"majutsu: city-scene compiler, editor and evaluator"};
  app.require_subcommand(1);
  Globals g;
  auto add_globals = [&](CLI::App* sub) {
    sub->add_option("--seed", g.seed, "random seed")->each([&](const std::string&) { g.seed_set = true; });
    sub->add_flag("--offline", g.offline, "use the deterministic offline providers");
    sub->add_option("--libs", g.libs, "directory with assets.json, materials.json, skyboxes.json");
    sub->add_option("--out", g.out, "output directory");
    sub->add_option("--config", g.config, "config file (.json or flat .toml)");
  };

  // run
  auto* run = app.add_subcommand("run", "full pipeline: design, layout, assets, scene, export");
  add_globals(run);
  std::string prompt, layout_path, height_path, design_path, name;
  bool no_glb = false;
  int fan_out = 0;
  run->add_option("prompt", prompt, "scene description");
  run->add_option("--layout", layout_path, "semantic layout PNG (instead of a prompt)");
  run->add_option("--height", height_path, "height map PNG (with --layout)");
  run->add_option("--design", design_path, "design.json to pair with --layout");
  run->add_option("--name", name, "scene name");
  run->add_option("--fan-out", fan_out, "parallel asset requests");
  run->add_flag("--no-glb", no_glb, "skip the glTF export");

  // design
  auto* design = app.add_subcommand("design", "write design.json for a prompt");
  add_globals(design);
  design->add_option("prompt", prompt, "scene description")->required();

  // layout
  auto* lay = app.add_subcommand("layout", "write layout.png and height.png for a design");
  add_globals(lay);
  lay->add_option("--design", design_path, "design.json")->required();

  // assemble
  auto* assemble = app.add_subcommand("assemble", "assemble scene.majutsu.json and scene.glb");
  add_globals(assemble);
  assemble->add_option("--design", design_path, "design.json");
  assemble->add_option("--layout", layout_path, "layout PNG")->required();
  assemble->add_option("--height", height_path, "height PNG")->required();
  assemble->add_option("--name", name, "scene name");
  assemble->add_flag("--no-glb", no_glb, "skip the glTF export");

  // edit
  auto* ed = app.add_subcommand("edit", "apply edit commands to a scene document");
  add_globals(ed);
  std::string scene_path, glb_path;
  std::vector<std::string> commands;
  int undo_count = 0, redo_count = 0;
  ed->add_option("scene", scene_path, "scene.majutsu.json")->required();
  ed->add_option("-c,--command", commands, "command text or JSON (repeatable)");
  ed->add_option("--undo", undo_count, "undo N times after the commands");
  ed->add_option("--redo", redo_count, "redo N times after undoing");
  ed->add_option("--glb", glb_path, "also export the result as .glb");

  // inspect
  auto* inspect = app.add_subcommand("inspect", "validate a .glb and print its node table");
  std::string inspect_path;
  inspect->add_option("file", inspect_path, ".glb file")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "evaluation metrics and rankings");
  ev->require_subcommand(1);
  std::string fa, fb, input;
  auto* fid = ev->add_subcommand("fid", "Frechet distance between two feature files");
  fid->add_option("a", fa)->required();
  fid->add_option("b", fb)->required();
  auto* kid = ev->add_subcommand("kid", "kernel distance between two feature files");
  kid->add_option("a", fa)->required();
  kid->add_option("b", fb)->required();
  auto* is = ev->add_subcommand("is", "inception score of a class-probability file");
  is->add_option("probs", fa)->required();
  auto* aqs = ev->add_subcommand("aqs", "AQS table from score sheets JSON");
  aqs->add_option("sheets", input, "[{method, dimension, scores}]")->required();
  auto* rank = ev->add_subcommand("rank", "TrueSkill leaderboard from comparison records (JSON lines)");
  bool jsonl = false;
  rank->add_option("records", input)->required();
  rank->add_flag("--jsonl", jsonl, "one JSON object per line");
  auto* sched = ev->add_subcommand("schedule", "pairwise comparison schedule");
  std::string dim_name = "SVC";
  std::uint64_t sched_seed = 0;
  sched->add_option("images", input, "{method: [image ids]}")->required();
  sched->add_option("--dimension", dim_name);
  sched->add_option("--seed", sched_seed);

  // serve
  auto* serve = app.add_subcommand("serve", "HTTP API for sessions and judging");
  add_globals(serve);
  std::string bind = "127.0.0.1", state_dir, images_path;
  int port = 8080;
  serve->add_option("--bind", bind);
  serve->add_option("--port", port);
  serve->add_option("--state", state_dir, "persistence directory");
  serve->add_option("--images", images_path, "judging pool {method: [image ids]}");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      auto cfg = build_config(g);
      if (!prompt.empty()) cfg.prompt = prompt;
      if (!layout_path.empty()) cfg.layout_path = layout_path;
      if (!height_path.empty()) cfg.height_path = height_path;
      if (!design_path.empty()) cfg.design_path = design_path;
      if (!name.empty()) cfg.name = name;
      if (fan_out > 0) cfg.fan_out = fan_out;
      if (no_glb) cfg.export_glb = false;
      const auto r = orch::run_pipeline(cfg);
      print_report_summary(r.report, cfg.out_dir);
    } else if (design->parsed()) {
      auto cfg = build_config(g);
      cfg.prompt = prompt;
      const auto spec = orch::stage_design(cfg);
      write_text(fs::path(cfg.out_dir) / "design.json", providers::design_to_json(spec).dump(2) + "\n");
      std::printf("style %s -> %s\n", spec.style_tag.c_str(), (fs::path(cfg.out_dir) / "design.json").c_str());
    } else if (lay->parsed()) {
      auto cfg = build_config(g);
      const auto spec = providers::design_from_json(read_json(design_path));
      const auto pair = orch::stage_layout(spec, cfg);
      write_bytes(fs::path(cfg.out_dir) / "layout.png", layout::encode_layout_image(pair.first));
      write_bytes(fs::path(cfg.out_dir) / "height.png", layout::encode_height_image(pair.second));
      std::printf("%dx%d layout -> %s\n", pair.first.width(), pair.first.height(), cfg.out_dir.c_str());
    } else if (assemble->parsed()) {
      auto cfg = build_config(g);
      cfg.layout_path = layout_path;
      cfg.height_path = height_path;
      if (!design_path.empty()) cfg.design_path = design_path;
      if (!name.empty()) cfg.name = name;
      cfg.validate();
      orch::PipelineReport rep;
      const auto libs = orch::load_libraries(cfg);
      const auto spec = orch::stage_design(cfg);
      const auto pair = orch::stage_layout(spec, cfg);
      auto doc = orch::stage_assemble(spec, pair, cfg, libs, rep);
      fs::create_directories(cfg.out_dir);
      orch::stage_textures(doc, cfg, rep);
      write_text(fs::path(cfg.out_dir) / "scene.majutsu.json", scene::save_document(doc, cfg.out_dir));
      rep.artifacts.push_back("scene.majutsu.json");
      if (!no_glb) {
        write_bytes(fs::path(cfg.out_dir) / "scene.glb", scene::export_gltf(doc));
        rep.artifacts.push_back("scene.glb");
      }
      rep.artifacts.push_back("report.json");
      write_text(fs::path(cfg.out_dir) / "report.json", rep.to_json().dump(2) + "\n");
      print_report_summary(rep, cfg.out_dir);
    } else if (ed->parsed()) {
      auto doc = load_scene(scene_path);
      for (const auto& text : commands) {
        std::vector<std::string> warnings;
        const auto before = doc;
        doc = edit::apply_command(doc, edit::parse_command(text), &warnings);
        for (const auto& d : scene::diff_documents(before, doc)) std::printf("r%lld %s\n", static_cast<long long>(doc.revision), d.c_str());
        for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      }
      for (int i = 0; i < undo_count; ++i) doc = edit::undo(doc);
      for (int i = 0; i < redo_count; ++i) doc = edit::redo(doc);
      const fs::path target = g.out.empty() ? fs::path(scene_path) : fs::path(g.out) / "scene.majutsu.json";
      if (target.has_parent_path()) fs::create_directories(target.parent_path());
      write_text(target, scene::save_document(doc, target.parent_path().string()));
      if (!glb_path.empty()) write_bytes(glb_path, scene::export_gltf(doc));
      std::printf("revision %lld -> %s\n", static_cast<long long>(doc.revision), target.c_str());
    } else if (inspect->parsed()) {
      const auto s = scene::inspect_glb(read_file(inspect_path));
      std::printf("valid glb: %zu nodes, %zu bin bytes\n", s.nodes.size(), s.bin_bytes);
      for (const auto& n : s.nodes) {
        std::printf("  %-28s verts %-7zu tris %zu\n", n.name.c_str(), n.vertex_count, n.triangle_count);
      }
    } else if (fid->parsed()) {
      std::printf("%.10g\n", eval::compute_fid(features(fa), features(fb)));
    } else if (kid->parsed()) {
      std::printf("%.10g\n", eval::compute_kid(features(fa), features(fb)));
    } else if (is->parsed()) {
      std::printf("%.10g\n", eval::compute_is(features(fa)));
    } else if (aqs->parsed()) {
      std::vector<eval::ScoreSheet> sheets;
      for (const auto& j : read_json(input)) {
        sheets.push_back({j.at("method").get<std::string>(), eval::dimension_from_name(j.at("dimension").get<std::string>()),
                          j.at("scores").get<std::vector<double>>()});
      }
      std::fputs(eval::aggregate_aqs(sheets).format().c_str(), stdout);
    } else if (rank->parsed()) {
      const auto board = eval::rank_methods(eval::read_records_jsonl(read_text(input)));
      std::fputs(jsonl ? board.to_jsonl().c_str() : (board.to_json().dump(2) + "\n").c_str(), stdout);
    } else if (sched->parsed()) {
      const auto images = read_json(input).get<std::map<std::string, std::vector<std::string>>>();
      for (const auto& p : eval::schedule_comparisons(images, eval::dimension_from_name(dim_name), sched_seed)) {
        std::printf("%s\n", Json{{"dimension", eval::dimension_name(p.dimension)}, {"image_a", p.a.id},
                                 {"image_b", p.b.id}}.dump().c_str());
      }
    } else if (serve->parsed()) {
      auto cfg = build_config(g);
      orch::Service::Options opts;
      opts.pipeline = cfg;
      opts.state_dir = state_dir;
      opts.schedule_seed = cfg.seed;
      orch::Service service(opts);
      if (!images_path.empty()) {
        service.register_images(read_json(images_path).get<std::map<std::string, std::vector<std::string>>>());
      }
      orch::ApiServer server(service);
      std::printf("listening on http://%s:%d\n", bind.c_str(), port);
      std::fflush(stdout);
      if (!server.listen(bind, port)) {
        std::fprintf(stderr, "error: cannot listen on %s:%d\n", bind.c_str(), port);
        return 1;
      }
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s [%s: %s]\n", e.what(), std::string(to_string(e.code())).c_str(), e.detail().c_str());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
