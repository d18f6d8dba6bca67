#include "majutsu/orchestrator.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <sstream>
#include <thread>

#include "majutsu/layout.hpp"

namespace majutsu::orchestrator {

namespace fs = std::filesystem;
using providers::DesignSpec;
using providers::LayoutPair;

namespace {

/// Runs `fn`, re-raising library errors with the stage name in the message.
template <typename Fn>
auto staged(const char* stage, PipelineReport* report, Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  auto finish = [&] {
    if (report) {
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
      report->timings.push_back({stage, dt.count()});
    }
  };
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      finish();
    } else {
      auto out = fn();
      finish();
      return out;
    }
  } catch (const Error& e) {
    // what() is "<code>(<detail>): <message>"; keep only the message part.
    std::string inner = e.what();
    std::string head(to_string(e.code()));
    if (!e.detail().empty()) head += "(" + e.detail() + ")";
    if (inner.rfind(head, 0) == 0) inner = inner.substr(std::min(inner.size(), head.size() + 2));
    throw Error(e.code(), e.detail(), std::string(stage) + ": " + inner);
  }
}

std::string trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return std::string(s.substr(a, b - a + 1));
}

Json toml_value(const std::string& raw, std::size_t line) {
  const std::string where = "line " + std::to_string(line);
  if (raw.empty()) throw Error(ErrorCode::ConfigError, where, "missing value");
  if (raw.front() == '"' || raw.front() == '\'') {
    const char q = raw.front();
    std::string out;
    std::size_t i = 1;
    for (; i < raw.size() && raw[i] != q; ++i) {
      if (q == '"' && raw[i] == '\\' && i + 1 < raw.size()) {
        const char c = raw[++i];
        out += c == 'n' ? '\n' : c == 't' ? '\t' : c;
      } else {
        out += raw[i];
      }
    }
    if (i >= raw.size()) throw Error(ErrorCode::ConfigError, where, "unterminated string");
    const std::string rest = trim(std::string_view(raw).substr(i + 1));
    if (!rest.empty() && rest.front() != '#') throw Error(ErrorCode::ConfigError, where, "trailing text");
    return out;
  }
  std::string v = raw;
  if (const auto hash = v.find('#'); hash != std::string::npos) v = trim(v.substr(0, hash));
  if (v == "true") return true;
  if (v == "false") return false;
  std::string digits;
  for (char c : v) {
    if (c != '_') digits += c;
  }
  try {
    std::size_t used = 0;
    if (digits.find_first_of(".eE") == std::string::npos || digits.rfind("0x", 0) == 0) {
      if (!digits.empty() && digits.front() != '-') {
        const unsigned long long u = std::stoull(digits, &used, 0);
        if (used == digits.size()) return static_cast<std::uint64_t>(u);
      } else {
        const long long s = std::stoll(digits, &used, 0);
        if (used == digits.size()) return static_cast<std::int64_t>(s);
      }
    } else {
      const double d = std::stod(digits, &used);
      if (used == digits.size()) return d;
    }
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::ConfigError, where, "unsupported value '" + v + "'");
}

std::string read_text(const std::string& path) {
  const auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

placement::SamplingConfig sampling_from_json(const Json& j, placement::SamplingConfig c) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "sampling", "expected an object");
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "radius_r") c.radius_r = v.get<double>();
      else if (key == "max_attempts_k") c.max_attempts_k = v.get<int>();
      else if (key == "roadside_spacing_s") c.roadside_spacing_s = v.get<double>();
      else if (key == "roadside_offset_d") c.roadside_offset_d = v.get<double>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else throw Error(ErrorCode::ConfigError, "sampling." + key, "unknown sampling setting");
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorCode::ConfigError, "sampling." + key, "wrong type");
    }
  }
  return c;
}

/// The provider config carries the pipeline seed so every stage derives from it.
providers::ProviderConfig seeded_providers(const PipelineConfig& cfg) {
  providers::ProviderConfig p = cfg.providers;
  p.seed = cfg.seed;
  return p;
}

scene::AssetEntry to_entry(const providers::AssetRecord& r) {
  return {r.id, r.category, r.style, r.mesh};
}

/// First asset of a category, preferring the design's style.
const providers::AssetRecord* pick_prop(const providers::AssetLibrary& lib, scene::Category cat,
                                        const std::string& style) {
  const providers::AssetRecord* any = nullptr;
  for (const auto& a : lib.entries) {
    if (a.category != cat) continue;
    if (a.style == style) return &a;
    if (!any) any = &a;
  }
  return any;
}

/// Runs `job(i)` for i in [0, n) on up to `workers` threads. The first
/// exception (lowest index) is rethrown after all workers stop.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& job) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int count = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  std::vector<std::thread> pool;
  for (int t = 1; t < count; ++t) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Rewrites one texture reference: builtin URIs become their relative path,
/// relative library files are copied next to the outputs.
std::string stage_uri(const std::string& uri, const PipelineConfig& cfg, bool& need_builtin,
                      std::set<std::string>& copied) {
  if (uri.empty()) return uri;
  if (uri.rfind("builtin:", 0) == 0) {
    need_builtin = true;
    return providers::builtin_relative(uri);
  }
  const fs::path rel(uri);
  if (rel.is_absolute() || uri.find("://") != std::string::npos) return uri;
  const fs::path norm = rel.lexically_normal();
  if (norm.empty() || *norm.begin() == "..") return uri;
  if (copied.insert(norm.generic_string()).second && !cfg.libs_dir.empty()) {
    const fs::path src = fs::path(cfg.libs_dir) / norm;
    const fs::path dst = fs::path(cfg.out_dir) / norm;
    std::error_code ec;
    if (fs::weakly_canonical(src, ec) != fs::weakly_canonical(dst, ec)) {
      fs::create_directories(dst.parent_path());
      fs::copy_file(src, dst, fs::copy_options::overwrite_existing, ec);
      if (ec) throw Error(ErrorCode::DanglingURI, uri, "cannot copy " + src.string());
    }
  }
  return norm.generic_string();
}

}  // namespace

// ---- config -------------------------------------------------------------------

void PipelineConfig::validate() const {
  const bool has_layout = layout_path.has_value() || height_path.has_value();
  if (prompt && has_layout) {
    throw Error(ErrorCode::ConfigError, "prompt", "give either a prompt or a layout/height pair, not both");
  }
  if (!prompt && !has_layout) throw Error(ErrorCode::ConfigError, "prompt", "a prompt or a layout/height pair is required");
  if (has_layout && !(layout_path && height_path)) {
    throw Error(ErrorCode::ConfigError, layout_path ? "height" : "layout", "layout and height go together");
  }
  if (out_dir.empty()) throw Error(ErrorCode::ConfigError, "out", "output directory is empty");
  if (fan_out < 1) throw Error(ErrorCode::ConfigError, "fan_out", "must be at least 1");
  providers.validate();
  try {
    sampling.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, "sampling." + e.detail(), e.what());
  }
}

PipelineConfig pipeline_config_from_json(const Json& j, PipelineConfig c) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "config", "expected an object");
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "prompt") c.prompt = v.get<std::string>();
      else if (key == "layout") c.layout_path = v.get<std::string>();
      else if (key == "height") c.height_path = v.get<std::string>();
      else if (key == "design") c.design_path = v.get<std::string>();
      else if (key == "libs") c.libs_dir = v.get<std::string>();
      else if (key == "out") c.out_dir = v.get<std::string>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "export_glb") c.export_glb = v.get<bool>();
      else if (key == "fan_out") c.fan_out = v.get<int>();
      else if (key == "name") c.name = v.get<std::string>();
      else if (key == "offline") {
        if (v.get<bool>()) c.providers.mode = providers::ProviderMode::Offline;
      } else if (key == "providers") c.providers = providers::config_from_json(v, c.providers);
      else if (key == "sampling") c.sampling = sampling_from_json(v, c.sampling);
      else throw Error(ErrorCode::ConfigError, key, "unknown setting");
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorCode::ConfigError, key, "wrong type");
    }
  }
  return c;
}

Json pipeline_config_to_json(const PipelineConfig& c) {
  Json j = Json::object();
  if (c.prompt) j["prompt"] = *c.prompt;
  if (c.layout_path) j["layout"] = *c.layout_path;
  if (c.height_path) j["height"] = *c.height_path;
  if (c.design_path) j["design"] = *c.design_path;
  j["libs"] = c.libs_dir;
  j["out"] = c.out_dir;
  j["seed"] = c.seed;
  j["export_glb"] = c.export_glb;
  j["fan_out"] = c.fan_out;
  j["name"] = c.name;
  j["providers"] = providers::config_to_json(c.providers);
  j["sampling"] = {{"radius_r", c.sampling.radius_r},
                   {"max_attempts_k", c.sampling.max_attempts_k},
                   {"roadside_spacing_s", c.sampling.roadside_spacing_s},
                   {"roadside_offset_d", c.sampling.roadside_offset_d},
                   {"seed", c.sampling.seed}};
  return j;
}

Json parse_flat_toml(std::string_view text) {
  Json root = Json::object();
  Json* table = &root;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (t.front() == '[') {
      const auto close = t.find(']');
      const std::string name = close == std::string::npos ? "" : trim(t.substr(1, close - 1));
      if (name.empty() || name.find('.') != std::string::npos || name.front() == '[') {
        throw Error(ErrorCode::ConfigError, "line " + std::to_string(n), "only flat [section] headers are supported");
      }
      if (root.contains(name)) throw Error(ErrorCode::ConfigError, name, "duplicate section");
      root[name] = Json::object();
      table = &root[name];
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, "line " + std::to_string(n), "expected key = value");
    std::string key = trim(t.substr(0, eq));
    if (key.size() >= 2 && key.front() == '"' && key.back() == '"') key = key.substr(1, key.size() - 2);
    if (key.empty()) throw Error(ErrorCode::ConfigError, "line " + std::to_string(n), "empty key");
    if (table->contains(key)) throw Error(ErrorCode::ConfigError, key, "duplicate key");
    (*table)[key] = toml_value(trim(t.substr(eq + 1)), n);
  }
  return root;
}

Json load_config_file(const std::string& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::ConfigError, path, std::string("cannot read config: ") + e.what());
  }
  if (fs::path(path).extension() == ".toml") return parse_flat_toml(text);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, path, std::string("invalid JSON: ") + e.what());
  }
}

providers::Libraries load_libraries(const PipelineConfig& cfg) {
  if (cfg.libs_dir.empty()) return providers::builtin_libraries();
  return providers::ingest_libraries(providers::ManifestPaths::in_directory(cfg.libs_dir));
}

// ---- report ---------------------------------------------------------------------

Json PipelineReport::to_json() const {
  Json t = Json::array();
  double total = 0.0;
  for (const auto& s : timings) {
    t.push_back({{"stage", s.stage}, {"seconds", s.seconds}});
    total += s.seconds;
  }
  Json refine_j = Json::object();
  std::size_t accepted = 0;
  for (const auto& [id, trace] : refine) {
    refine_j[id] = providers::trace_to_json(trace);
    accepted += trace.accepted;
  }
  Json counts_j = Json::object();
  for (const auto& [k, v] : counts) counts_j[k] = v;
  return Json{{"timings", t},
              {"total_seconds", total},
              {"counts", counts_j},
              {"refine", {{"accepted", accepted}, {"fallbacks", fallbacks}, {"traces", refine_j}}},
              {"matches", matches},
              {"warnings", warnings},
              {"artifacts", artifacts}};
}

// ---- stages -----------------------------------------------------------------------

DesignSpec stage_design(const PipelineConfig& cfg) {
  const auto p = seeded_providers(cfg);
  if (cfg.prompt) return providers::design_scene(*cfg.prompt, p);
  if (cfg.design_path) {
    try {
      return providers::design_from_json(Json::parse(read_text(*cfg.design_path)));
    } catch (const nlohmann::json::parse_error&) {
      throw Error(ErrorCode::SchemaViolation, *cfg.design_path, "design file is not JSON");
    }
  }
  // A supplied layout with no design still needs style and material text.
  return providers::offline_design(cfg.name, cfg.seed);
}

LayoutPair stage_layout(const DesignSpec& spec, const PipelineConfig& cfg) {
  const auto p = seeded_providers(cfg);
  if (!cfg.layout_path) return providers::generate_layout_pair(spec, p);
  LayoutPair pair;
  pair.first = layout::decode_layout_image(read_file(*cfg.layout_path), p.meters_per_pixel);
  pair.second = layout::decode_height_image(read_file(*cfg.height_path), p.h_max);
  if (pair.first.width() != pair.second.width() || pair.first.height() != pair.second.height()) {
    throw Error(ErrorCode::DimensionMismatch, "height", "layout and height sizes differ");
  }
  layout::ValidationReport rep;
  pair.second = layout::repair_consistency(pair.first, pair.second, {}, &rep);
  return pair;
}

scene::SceneDocument stage_assemble(const DesignSpec& spec, const LayoutPair& pair, const PipelineConfig& cfg,
                                    const providers::Libraries& libs, PipelineReport& report) {
  const auto p = seeded_providers(cfg);
  const auto& [lmap, hmap] = pair;
  scene::AssemblyInputs in;
  in.layout = &lmap;
  in.hmap = &hmap;
  in.name = cfg.name.empty() ? (cfg.prompt ? *cfg.prompt : std::string("scene")) : cfg.name;
  in.seed = cfg.seed;

  staged("buildings", &report, [&] {
    in.buildings = layout::extract_building_instances(lmap, hmap, {}, &report.warnings);
  });
  report.matches = staged("match", &report, [&] {
    return providers::match_assets(in.buildings, spec, libs.assets, cfg.seed, &report.warnings);
  });

  // Generate one asset per building through the refine loop; a building whose
  // candidates never pass the threshold falls back to its matched library asset.
  staged("assets", &report, [&] {
    const std::size_t n = in.buildings.size();
    std::vector<std::optional<geometry::Mesh>> meshes(n);
    std::vector<providers::RefineTrace> traces(n);
    const auto generate = providers::asset_generator(p);
    const auto score = providers::shape_scorer(p);
    parallel_for(n, cfg.fan_out, [&](std::size_t i) {
      const auto& b = in.buildings[i];
      auto req = providers::make_asset_request(b, spec, p);
      if (const auto m = report.matches.find(b.id); m != report.matches.end()) {
        if (const auto* rec = libs.assets.find(m->second)) req.reference_image = rec->mesh_uri;
      }
      try {
        meshes[i] = providers::constrained_refine_loop(req, p, generate, score, &traces[i]).mesh;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::RefineExhausted) throw;
      }
    });
    for (std::size_t i = 0; i < n; ++i) {
      const auto& b = in.buildings[i];
      report.refine[b.id] = traces[i];
      if (meshes[i]) {
        const std::string id = "gen_" + b.id;
        in.assets[id] = {id, scene::Category::Building, spec.style_tag, std::move(*meshes[i])};
        in.building_assets[b.id] = id;
        continue;
      }
      const auto m = report.matches.find(b.id);
      const auto* rec = m == report.matches.end() ? nullptr : libs.assets.find(m->second);
      if (!rec) throw Error(ErrorCode::PipelineFailure, "assets:" + b.id, "no generated or library asset");
      in.assets[rec->id] = to_entry(*rec);
      in.building_assets[b.id] = rec->id;
      report.fallbacks.push_back(b.id);
      report.warnings.push_back("refine exhausted for " + b.id + " (best " +
                                format_double(traces[i].best_score) + "); using library asset " + rec->id);
    }
  });

  staged("placement", &report, [&] {
    auto sampling = cfg.sampling;
    sampling.seed = mix64(cfg.seed ^ cfg.sampling.seed ^ 0x706c6163656d656eULL);
    auto trees = placement::poisson_disk_sample(lmap.mask(layout::SemanticClass::Vegetation),
                                                lmap.meters_per_pixel, sampling);
    auto roadside = placement::sample_roadside_points(lmap, sampling);
    const auto* tree = pick_prop(libs.assets, scene::Category::Tree, spec.style_tag);
    const auto* light = pick_prop(libs.assets, scene::Category::Streetlight, spec.style_tag);
    for (auto* pts : {&trees, &roadside}) {
      for (const auto& pt : *pts) {
        const bool is_tree = pt.kind == placement::PlacementKind::Tree;
        if ((is_tree && !tree) || (!is_tree && !light)) continue;
        in.placements.push_back(pt);
      }
    }
    if (!tree && !trees.empty()) report.warnings.push_back("library has no tree asset; trees skipped");
    if (!light && !roadside.empty()) report.warnings.push_back("library has no streetlight asset; streetlights skipped");
    if (tree) {
      in.tree_asset = tree->id;
      in.assets[tree->id] = to_entry(*tree);
    }
    if (light) {
      in.streetlight_asset = light->id;
      in.assets[light->id] = to_entry(*light);
    }
  });

  staged("materials", &report, [&] {
    for (const auto& m : libs.materials.entries) in.materials[m.def.id] = m.def;
    for (int k = 0; k < 4; ++k) {
      const auto kind = static_cast<scene::LayerKind>(k);
      in.layer_materials[kind] = providers::choose_layer_material(kind, spec, libs.materials, cfg.seed);
    }
    const auto sky = providers::choose_skybox(spec, libs.skyboxes, cfg.seed);
    in.skybox = libs.skyboxes.find(sky)->def;
  });

  scene::SceneDocument doc = staged("assemble", &report, [&] { return scene::assemble_scene(in); });
  std::size_t n_trees = 0, n_lights = 0;
  for (const auto& [_, inst] : doc.instances) {
    n_trees += inst.category == scene::Category::Tree;
    n_lights += inst.category == scene::Category::Streetlight;
  }
  report.counts["buildings"] = in.buildings.size();
  report.counts["trees"] = n_trees;
  report.counts["streetlights"] = n_lights;
  report.counts["instances"] = doc.instances.size();
  report.counts["assets"] = doc.assets.size();
  report.counts["generated_assets"] = in.buildings.size() - report.fallbacks.size();
  report.counts["library_fallbacks"] = report.fallbacks.size();
  return doc;
}

void stage_textures(scene::SceneDocument& doc, const PipelineConfig& cfg, PipelineReport& report) {
  bool need_builtin = false;
  std::set<std::string> copied;
  for (auto& [_, m] : doc.materials) {
    for (std::string* uri : {&m.base_color, &m.normal, &m.roughness, &m.metallic, &m.ambient_occlusion}) {
      *uri = stage_uri(*uri, cfg, need_builtin, copied);
    }
  }
  doc.skybox.hdr_ref = stage_uri(doc.skybox.hdr_ref, cfg, need_builtin, copied);
  if (need_builtin) {
    for (const auto& f : providers::write_builtin_textures(cfg.out_dir)) copied.insert(f);
  }
  report.counts["texture_files"] = copied.size();
}

void write_file_atomic(const std::string& path, std::string_view bytes) {
  const std::string tmp = path + ".tmp";
  write_file(tmp, bytes);
  fs::rename(tmp, path);
}

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  staged("config", nullptr, [&] { cfg.validate(); });
  const auto t0 = std::chrono::steady_clock::now();
  PipelineResult r;
  PipelineReport& rep = r.report;
  fs::create_directories(cfg.out_dir);
  const fs::path out(cfg.out_dir);
  auto emit = [&](const char* name, std::string_view bytes) {
    write_file_atomic((out / name).string(), bytes);
    rep.artifacts.push_back(name);
  };
  auto emit_bytes = [&](const char* name, const std::vector<std::uint8_t>& bytes) {
    emit(name, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  };

  const auto libs = staged("libraries", &rep, [&] { return load_libraries(cfg); });
  rep.warnings.insert(rep.warnings.end(), libs.warnings.begin(), libs.warnings.end());
  r.spec = staged("design", &rep, [&] { return stage_design(cfg); });
  emit("design.json", providers::design_to_json(r.spec).dump(2) + "\n");
  r.layout = staged("layout", &rep, [&] { return stage_layout(r.spec, cfg); });
  emit_bytes("layout.png", layout::encode_layout_image(r.layout.first));
  emit_bytes("height.png", layout::encode_height_image(r.layout.second));

  r.doc = stage_assemble(r.spec, r.layout, cfg, libs, rep);
  staged("textures", &rep, [&] { stage_textures(r.doc, cfg, rep); });
  staged("save", &rep, [&] { emit("scene.majutsu.json", scene::save_document(r.doc, cfg.out_dir)); });
  if (cfg.export_glb) {
    staged("export", &rep, [&] {
      const auto glb = scene::export_gltf(r.doc);
      rep.counts["glb_nodes"] = scene::inspect_glb(glb).nodes.size();
      rep.counts["glb_bytes"] = glb.size();
      emit_bytes("scene.glb", glb);
    });
  }
  const std::chrono::duration<double> total = std::chrono::steady_clock::now() - t0;
  rep.artifacts.push_back("report.json");
  Json rj = rep.to_json();
  rj["wall_seconds"] = total.count();
  rj["seed"] = cfg.seed;
  rj["mode"] = cfg.providers.mode == providers::ProviderMode::Offline ? "offline" : "external";
  rj["style"] = r.spec.style_tag;
  write_file_atomic((out / "report.json").string(), rj.dump(2) + "\n");
  return r;
}

}  // namespace majutsu::orchestrator
