#include "majutsu/providers.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <limits>
#include <set>

namespace majutsu::providers {

namespace {

constexpr std::string_view kWireVersion = "majutsu-provider/1";

std::vector<std::string> words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

bool has_word(const std::vector<std::string>& ws, std::initializer_list<std::string_view> keys) {
  for (const auto& w : ws) {
    for (auto k : keys) {
      if (w == k || (w.size() > 1 && w.back() == 's' && std::string_view(w).substr(0, w.size() - 1) == k)) {
        return true;
      }
    }
  }
  return false;
}

std::uint64_t text_seed(std::string_view text, std::uint64_t seed) {
  return mix64(fnv1a64(text) ^ mix64(seed));
}

struct StyleInfo {
  std::string_view name;
  std::vector<std::string> tags;
  std::string_view label;
  std::string_view assets;
  std::string_view materials;
  std::string_view sky;
};

const std::vector<StyleInfo>& style_table() {
  static const std::vector<StyleInfo> table = {
      {"cyberpunk",
       {"cyberpunk", "neon", "futuristic", "dystopian", "cyber", "hologram", "megacity", "rain"},
       "cyberpunk", "stacked neon-lit towers with exposed conduits and holographic signage",
       "wet dark asphalt, bare concrete sidewalks, oily dark water", "neon night haze"},
      {"ghibli",
       {"ghibli", "anime", "whimsical", "fairytale", "storybook", "countryside", "pastoral"},
       "storybook", "small pastel houses with steep roofs, chimneys and climbing plants",
       "gravel lanes, dirt paths, clear blue water, flowering meadow", "pastel pink sunset with soft clouds"},
      {"minecraft",
       {"minecraft", "voxel", "blocky", "pixel", "cube", "cubic", "block"},
       "voxel", "blocky cube-built houses with flat and stepped roofs",
       "voxel grass, gravel roads, clear water", "clear blue noon"},
      {"netherlands",
       {"netherlands", "dutch", "amsterdam", "canal", "gabled", "holland", "riverside", "river"},
       "Dutch canal", "narrow brick canal houses with gabled fronts and tall windows",
       "cobblestone streets, brick paving, canal water, trimmed grass", "overcast grey sky with soft light"},
      {"modern",
       {"modern", "contemporary", "glass", "office", "business", "downtown", "skyscraper", "city"},
       "modern", "glass and steel towers with clean setbacks and podiums",
       "smooth asphalt, concrete paving, clear water, lawn grass", "clear blue noon"},
      {"classical",
       {"classical", "european", "baroque", "historic", "old", "renaissance", "paris", "palace"},
       "classical European", "stone facades with cornices, arches and mansard roofs",
       "cobblestone roads, stone paving, canal water, trimmed grass", "golden hour warm evening"},
      {"east_asian",
       {"chinese", "japanese", "pagoda", "asian", "temple", "kyoto", "oriental", "shrine"},
       "East Asian", "timber halls with curved tiled roofs and pagoda towers",
       "gravel lanes, stone paving, clear water, meadow with flowers", "golden hour warm evening"},
      {"mediterranean",
       {"mediterranean", "greek", "santorini", "coastal", "italian", "seaside", "coast", "beach"},
       "Mediterranean", "whitewashed stucco houses with terracotta roofs",
       "cobblestone lanes, stone paving, clear blue water, dry meadow", "clear blue noon"},
      {"industrial",
       {"industrial", "factory", "warehouse", "brick", "harbor", "harbour", "port", "brutalist"},
       "industrial", "brick warehouses, sawtooth sheds and concrete silos",
       "concrete yards, asphalt roads, dark water, moss", "overcast grey sky"},
      {"suburban",
       {"suburban", "suburb", "residential", "village", "house", "town", "quiet", "small"},
       "suburban", "detached family houses with pitched roofs and gardens",
       "asphalt streets, dirt paths, clear water, lawn grass", "clear blue noon"},
  };
  return table;
}

const StyleInfo& style_info(std::string_view style) {
  for (const auto& s : style_table()) {
    if (s.name == style) return s;
  }
  throw Error(ErrorCode::SchemaViolation, "style_tag", "unknown style " + std::string(style));
}

template <typename T>
const T& pick(const std::vector<T>& options, std::uint64_t h) {
  return options[h % options.size()];
}

}  // namespace

const std::vector<std::string>& style_tags(std::string_view style) { return style_info(style).tags; }

bool is_style(std::string_view style) {
  return std::find(kStyles.begin(), kStyles.end(), style) != kStyles.end();
}

std::string match_style(std::string_view text, std::uint64_t seed) {
  const auto ws = words(text);
  int best = 0;
  std::string_view best_name;
  for (const auto& s : style_table()) {
    int score = 0;
    for (const auto& w : ws) {
      std::string_view base = w;
      const bool plural = w.size() > 1 && w.back() == 's';
      for (const auto& t : s.tags) {
        if (base == t || (plural && base.substr(0, base.size() - 1) == t)) {
          score += t == s.name ? 2 : 1;
          break;
        }
      }
    }
    if (score > best) {
      best = score;
      best_name = s.name;
    }
  }
  if (best > 0) return std::string(best_name);
  return std::string(kStyles[text_seed(text, seed) % kStyles.size()]);
}

// ---- design ---------------------------------------------------------------

void DesignSpec::validate() const {
  if (layout_text.empty()) throw Error(ErrorCode::IncompleteSpec, "layout");
  if (assets_design.empty()) throw Error(ErrorCode::IncompleteSpec, "assets");
  if (materials_design.empty()) throw Error(ErrorCode::IncompleteSpec, "materials");
  if (skymap_design.empty()) throw Error(ErrorCode::IncompleteSpec, "skymap");
  if (!is_style(style_tag)) throw Error(ErrorCode::IncompleteSpec, "style_tag");
}

Json design_to_json(const DesignSpec& spec) {
  return Json{{"layout", spec.layout_text},     {"assets", spec.assets_design},
              {"materials", spec.materials_design}, {"skymap", spec.skymap_design},
              {"style_tag", spec.style_tag}};
}

DesignSpec design_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::IncompleteSpec, "layout", "design is not an object");
  auto section = [&](const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_string() || it->get<std::string>().empty()) {
      throw Error(ErrorCode::IncompleteSpec, key);
    }
    return it->get<std::string>();
  };
  DesignSpec spec;
  spec.layout_text = section("layout");
  spec.assets_design = section("assets");
  spec.materials_design = section("materials");
  spec.skymap_design = section("skymap");
  if (const auto it = j.find("style_tag"); it != j.end() && it->is_string() && is_style(it->get<std::string>())) {
    spec.style_tag = it->get<std::string>();
  } else {
    // Providers may omit the tag or invent one; resolve it from the asset text.
    spec.style_tag = match_style(spec.assets_design + " " + spec.layout_text, 0);
  }
  return spec;
}

DesignSpec offline_design(const std::string& prompt, std::uint64_t seed) {
  if (prompt.empty()) throw Error(ErrorCode::ConfigError, "prompt", "empty prompt");
  const std::uint64_t h = text_seed(prompt, seed);
  const auto ws = words(prompt);
  DesignSpec spec;
  spec.style_tag = match_style(prompt, seed);
  const StyleInfo& st = style_info(spec.style_tag);

  static const std::vector<std::string> grids = {
      "an orthogonal street grid with a dense core that thins toward the edges",
      "long avenues framing mid-rise blocks, with pocket parks between them",
      "a slightly irregular grid of blocks around a central square",
      "compact blocks on a jittered grid with a green belt along one side"};
  std::string layout = prompt + ". Plan " + pick(grids, h) + ".";
  if (has_word(ws, {"river", "riverside", "canal", "waterfront"})) {
    layout += " A river winds across the map, crossed by bridges.";
  } else if (has_word(ws, {"lake", "harbor", "harbour", "bay", "coast", "coastal", "seaside"})) {
    layout += " A body of water sits inside the city.";
  }
  spec.layout_text = layout;

  static const std::vector<std::string> variety = {
      "heights vary block by block", "a few landmark buildings rise above the rest",
      "uniform cornice lines along the main streets", "roofs step down toward open space"};
  spec.assets_design = "Buildings in the " + std::string(st.label) + " style: " + std::string(st.assets) +
                       "; " + pick(variety, mix64(h ^ 1));
  spec.materials_design = "Surfaces: " + std::string(st.materials) + ".";

  std::string sky(st.sky);
  if (has_word(ws, {"sunset", "dusk", "evening"})) sky = "warm golden sunset at dusk";
  if (has_word(ws, {"pink"})) sky = "pink pastel sunset";
  if (has_word(ws, {"night", "neon"})) sky = "dark night sky with neon glow";
  if (has_word(ws, {"rain", "rainy", "overcast", "foggy", "cloudy"})) sky = "overcast grey sky with rain clouds";
  spec.skymap_design = "Sky: " + sky + ".";
  return spec;
}

DesignSpec design_scene(const std::string& prompt, const ProviderConfig& cfg) {
  if (prompt.empty()) throw Error(ErrorCode::ConfigError, "prompt", "empty prompt");
  if (cfg.mode == ProviderMode::Offline) return offline_design(prompt, cfg.seed);
  if (cfg.design_url.empty()) throw Error(ErrorCode::ConfigError, "design_url");
  const Json reply = post_json(cfg.design_url,
                               Json{{"version", kWireVersion}, {"prompt", prompt}, {"seed", cfg.seed}}, cfg);
  DesignSpec spec = design_from_json(reply);
  spec.validate();
  return spec;
}

// ---- config ---------------------------------------------------------------

void ProviderConfig::validate() const {
  if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) throw Error(ErrorCode::ConfigError, "iou_threshold");
  if (retries < 0) throw Error(ErrorCode::ConfigError, "retries");
  if (max_refine_iters < 1) throw Error(ErrorCode::ConfigError, "max_refine_iters");
  if (!(timeout_s > 0.0)) throw Error(ErrorCode::ConfigError, "timeout_s");
  if (!(backoff_initial_s >= 0.0) || !(backoff_max_s >= backoff_initial_s)) {
    throw Error(ErrorCode::ConfigError, "backoff_initial_s");
  }
  if (steps < 1) throw Error(ErrorCode::ConfigError, "steps");
  if (!(cfg_scale > 0.0)) throw Error(ErrorCode::ConfigError, "cfg_scale");
  if (layout_size < 16) throw Error(ErrorCode::ConfigError, "layout_size");
  if (!(meters_per_pixel > 0.0)) throw Error(ErrorCode::ConfigError, "meters_per_pixel");
  if (!(h_max >= 5.0)) throw Error(ErrorCode::ConfigError, "h_max");
  if (silhouette_resolution < 8) throw Error(ErrorCode::ConfigError, "silhouette_resolution");
}

void ProviderConfig::set_base_url(const std::string& base) {
  std::string b = base;
  while (!b.empty() && b.back() == '/') b.pop_back();
  design_url = b + "/design";
  layout_url = b + "/layout";
  asset_url = b + "/asset";
  judge_url = b + "/judge";
}

Json config_to_json(const ProviderConfig& c) {
  return Json{{"mode", c.mode == ProviderMode::Offline ? "offline" : "external"},
              {"design_url", c.design_url},
              {"layout_url", c.layout_url},
              {"asset_url", c.asset_url},
              {"judge_url", c.judge_url},
              {"timeout_s", c.timeout_s},
              {"retries", c.retries},
              {"backoff_initial_s", c.backoff_initial_s},
              {"backoff_max_s", c.backoff_max_s},
              {"cfg_scale", c.cfg_scale},
              {"steps", c.steps},
              {"seed", c.seed},
              {"iou_threshold", c.iou_threshold},
              {"max_refine_iters", c.max_refine_iters},
              {"layout_size", c.layout_size},
              {"meters_per_pixel", c.meters_per_pixel},
              {"h_max", c.h_max},
              {"silhouette_resolution", c.silhouette_resolution},
              {"point_cloud_size", c.point_cloud_size}};
}

ProviderConfig config_from_json(const Json& j, ProviderConfig c) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "providers", "expected an object");
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "mode") {
        const auto m = v.get<std::string>();
        if (m == "offline") c.mode = ProviderMode::Offline;
        else if (m == "external") c.mode = ProviderMode::External;
        else throw Error(ErrorCode::ConfigError, key, "mode must be offline or external");
      } else if (key == "base_url") c.set_base_url(v.get<std::string>());
      else if (key == "design_url") c.design_url = v.get<std::string>();
      else if (key == "layout_url") c.layout_url = v.get<std::string>();
      else if (key == "asset_url") c.asset_url = v.get<std::string>();
      else if (key == "judge_url") c.judge_url = v.get<std::string>();
      else if (key == "timeout_s") c.timeout_s = v.get<double>();
      else if (key == "retries") c.retries = v.get<int>();
      else if (key == "backoff_initial_s") c.backoff_initial_s = v.get<double>();
      else if (key == "backoff_max_s") c.backoff_max_s = v.get<double>();
      else if (key == "cfg_scale") c.cfg_scale = v.get<double>();
      else if (key == "steps") c.steps = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "iou_threshold") c.iou_threshold = v.get<double>();
      else if (key == "max_refine_iters") c.max_refine_iters = v.get<int>();
      else if (key == "layout_size") c.layout_size = v.get<int>();
      else if (key == "meters_per_pixel") c.meters_per_pixel = v.get<double>();
      else if (key == "h_max") c.h_max = v.get<double>();
      else if (key == "silhouette_resolution") c.silhouette_resolution = v.get<int>();
      else if (key == "point_cloud_size") c.point_cloud_size = v.get<std::size_t>();
      else throw Error(ErrorCode::ConfigError, key, "unknown provider setting");
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorCode::ConfigError, key, "wrong type");
    }
  }
  c.validate();
  return c;
}

// ---- layout ---------------------------------------------------------------

LayoutKnobs layout_knobs(std::string_view text) {
  const auto ws = words(text);
  LayoutKnobs k;
  k.river = has_word(ws, {"river", "riverside", "canal", "waterfront", "stream"});
  if (has_word(ws, {"park", "green", "garden", "forest", "leafy", "wooded"})) k.park_share = 0.25;
  if (has_word(ws, {"downtown", "metropolis", "skyscraper", "dense", "megacity", "tower"})) {
    k.height_scale = 2.0;
  } else if (has_word(ws, {"town", "village", "small", "hamlet", "rural", "suburban"})) {
    k.height_scale = 0.5;
  }
  return k;
}

namespace {

using layout::SemanticClass;

struct Rect {
  int x0, y0, x1, y1;  // half-open
  int w() const { return x1 - x0; }
  int h() const { return y1 - y0; }
};

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

/// Road centerlines along one axis; returns [start, end) strips.
std::vector<std::pair<int, int>> road_strips(std::mt19937_64& rng, int size) {
  const int pitch = uniform_int(rng, 44, 64);
  std::vector<std::pair<int, int>> strips;
  int c = uniform_int(rng, pitch / 2 - 6, pitch / 2 + 6);
  int k = 0;
  while (c < size - 8) {
    const int width = (k % 3 == 1) ? 6 : 4;
    const int a = std::max(0, c - width / 2);
    strips.emplace_back(a, std::min(size, a + width));
    c += pitch + uniform_int(rng, -6, 6);
    ++k;
  }
  return strips;
}

std::vector<std::pair<int, int>> gaps_between(const std::vector<std::pair<int, int>>& strips, int size) {
  std::vector<std::pair<int, int>> out;
  int start = 0;
  for (const auto& [a, b] : strips) {
    if (a > start) out.emplace_back(start, a);
    start = b;
  }
  if (start < size) out.emplace_back(start, size);
  return out;
}

void split_lots(std::mt19937_64& rng, const Rect& r, int max_lot, std::vector<Rect>& out) {
  if (r.w() <= max_lot && r.h() <= max_lot) {
    out.push_back(r);
    return;
  }
  const double f = 0.35 + 0.3 * unit_double(rng);
  if (r.w() >= r.h()) {
    const int cut = r.x0 + std::max(1, static_cast<int>(r.w() * f));
    split_lots(rng, {r.x0, r.y0, cut, r.y1}, max_lot, out);
    split_lots(rng, {cut, r.y0, r.x1, r.y1}, max_lot, out);
  } else {
    const int cut = r.y0 + std::max(1, static_cast<int>(r.h() * f));
    split_lots(rng, {r.x0, r.y0, r.x1, cut}, max_lot, out);
    split_lots(rng, {r.x0, cut, r.x1, r.y1}, max_lot, out);
  }
}

}  // namespace

LayoutPair offline_layout(const DesignSpec& spec, std::uint64_t seed, int size, double mpp, double h_max) {
  if (size < 64) throw Error(ErrorCode::ConfigError, "layout_size", "offline layouts need at least 64 px");
  const LayoutKnobs knobs = layout_knobs(spec.layout_text);
  std::mt19937_64 rng(text_seed(spec.layout_text, seed));
  layout::LayoutMap lm(size, size, SemanticClass::Ground, mpp);
  layout::HeightMap hm(size, size, 0.0, h_max);

  // Water first so roads cross it as bridges.
  if (knobs.river) {
    const double y0 = size * (0.3 + 0.4 * unit_double(rng));
    const double amp = 10.0 + 20.0 * unit_double(rng);
    const double wavelength = size * (0.5 + 0.5 * unit_double(rng));
    const double phase = 6.283185307179586 * unit_double(rng);
    const double half = 8.0 + 6.0 * unit_double(rng);
    for (int x = 0; x < size; ++x) {
      const double yc = y0 + amp * std::sin(6.283185307179586 * x / wavelength + phase);
      for (int y = 0; y < size; ++y) {
        if (std::abs(y + 0.5 - yc) < half) lm.set(x, y, SemanticClass::Water);
      }
    }
  } else {
    const double cx = size * (0.2 + 0.6 * unit_double(rng));
    const double cy = size * (0.2 + 0.6 * unit_double(rng));
    const double rx = 15.0 + 20.0 * unit_double(rng);
    const double ry = 15.0 + 20.0 * unit_double(rng);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
        if (dx * dx + dy * dy < 1.0) lm.set(x, y, SemanticClass::Water);
      }
    }
  }

  const auto cols = road_strips(rng, size);
  const auto rows = road_strips(rng, size);
  for (const auto& [a, b] : cols) {
    for (int x = a; x < b; ++x) {
      for (int y = 0; y < size; ++y) lm.set(x, y, SemanticClass::Road);
    }
  }
  for (const auto& [a, b] : rows) {
    for (int y = a; y < b; ++y) {
      for (int x = 0; x < size; ++x) lm.set(x, y, SemanticClass::Road);
    }
  }

  std::vector<Rect> blocks;
  for (const auto& [ya, yb] : gaps_between(rows, size)) {
    for (const auto& [xa, xb] : gaps_between(cols, size)) blocks.push_back({xa, ya, xb, yb});
  }
  const double center = 0.5 * size;
  auto free_rect = [&](const Rect& r) {
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) {
        if (lm.at(x, y) != SemanticClass::Ground) return false;
      }
    }
    return true;
  };
  auto fill_vegetation = [&](const Rect& r) {
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) {
        if (lm.at(x, y) == SemanticClass::Ground) lm.set(x, y, SemanticClass::Vegetation);
      }
    }
  };

  const std::size_t forced_park = blocks.empty() ? 0 : rng() % blocks.size();
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const Rect& block = blocks[bi];
    const Rect inner{block.x0 + 2, block.y0 + 2, block.x1 - 2, block.y1 - 2};
    const bool park = unit_double(rng) < knobs.park_share;
    if (inner.w() < 6 || inner.h() < 6) continue;
    if (park || bi == forced_park) {
      fill_vegetation(inner);
      continue;
    }
    std::vector<Rect> lots;
    split_lots(rng, inner, uniform_int(rng, 16, 26), lots);
    for (const Rect& lot : lots) {
      const Rect b{lot.x0 + 1, lot.y0 + 1, lot.x1 - 1, lot.y1 - 1};
      if (b.w() < 3 || b.h() < 3 || !free_rect(b)) continue;
      const double u = unit_double(rng);
      if (u < 0.06) {
        fill_vegetation(b);
        continue;
      }
      // Occasional L shapes: drop one corner quadrant.
      const bool l_shape = u > 0.78 && b.w() >= 8 && b.h() >= 8;
      const int corner = static_cast<int>(rng() % 4);
      const int mx = b.x0 + b.w() / 2, my = b.y0 + b.h() / 2;
      const double dx = (0.5 * (b.x0 + b.x1) - center) / size;
      const double dy = (0.5 * (b.y0 + b.y1) - center) / size;
      const double core = std::exp(-(dx * dx + dy * dy) / (0.35 * 0.35));
      const double base = 4.0 + knobs.height_scale * (10.0 + 50.0 * core);
      double h = std::clamp(base * (0.6 + 0.8 * unit_double(rng)), 4.0, h_max);
      // Snap to the 16-bit code grid used by height.png.
      const auto code = std::lround(h / h_max * 65535.0);
      h = static_cast<double>(code) / 65535.0 * h_max;
      for (int y = b.y0; y < b.y1; ++y) {
        for (int x = b.x0; x < b.x1; ++x) {
          if (l_shape) {
            const bool right = x >= mx, bottom = y >= my;
            if ((corner == 0 && !right && !bottom) || (corner == 1 && right && !bottom) ||
                (corner == 2 && !right && bottom) || (corner == 3 && right && bottom)) {
              continue;
            }
          }
          lm.set(x, y, SemanticClass::Building);
          hm.set(x, y, h);
        }
      }
    }
  }

  const auto hist = lm.histogram();
  for (int c = 0; c < layout::kClassCount; ++c) {
    if (hist[static_cast<std::size_t>(c)] == 0) {
      throw Error(ErrorCode::PipelineFailure,
                  "layout:" + std::string(layout::class_name(static_cast<SemanticClass>(c))),
                  "offline layout generator missed a class");
    }
  }
  return {std::move(lm), std::move(hm)};
}

LayoutPair decode_layout_reply(const Json& reply, const ProviderConfig& cfg, std::vector<std::string>* warnings) {
  auto blob = [&](const char* key) {
    const auto it = reply.find(key);
    if (!reply.is_object() || it == reply.end() || !it->is_string()) {
      throw Error(ErrorCode::InvalidProviderOutput, key);
    }
    return base64_decode(it->get<std::string>());
  };
  const auto layout_png = blob("layout_png");
  const auto height_png = blob("height_png");
  const double mpp = reply.value("meters_per_pixel", cfg.meters_per_pixel);
  const double h_max = reply.value("h_max", cfg.h_max);
  LayoutPair pair;
  try {
    pair.first = layout::decode_layout_image(layout_png, mpp);
    pair.second = layout::decode_height_image(height_png, h_max);
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidProviderOutput, "decode", e.what());
  }
  const int n = cfg.layout_size;
  if (pair.first.width() != n || pair.first.height() != n || pair.second.width() != n ||
      pair.second.height() != n) {
    throw Error(ErrorCode::InvalidProviderOutput, "size",
                "expected " + std::to_string(n) + "x" + std::to_string(n) + ", got " +
                    std::to_string(pair.first.width()) + "x" + std::to_string(pair.first.height()));
  }
  layout::ValidationReport report;
  pair.second = layout::repair_consistency(pair.first, pair.second, {}, &report);
  if (warnings) warnings->insert(warnings->end(), report.warnings.begin(), report.warnings.end());
  return pair;
}

LayoutPair generate_layout_pair(const DesignSpec& spec, const ProviderConfig& cfg) {
  spec.validate();
  if (cfg.mode == ProviderMode::Offline) {
    return offline_layout(spec, cfg.seed, cfg.layout_size, cfg.meters_per_pixel, cfg.h_max);
  }
  if (cfg.layout_url.empty()) throw Error(ErrorCode::ConfigError, "layout_url");
  const Json reply = post_json(cfg.layout_url,
                               Json{{"version", kWireVersion},
                                    {"layout_text", spec.layout_text},
                                    {"style_tag", spec.style_tag},
                                    {"seed", cfg.seed},
                                    {"cfg_scale", cfg.cfg_scale},
                                    {"steps", cfg.steps},
                                    {"width", cfg.layout_size},
                                    {"height", cfg.layout_size}},
                               cfg);
  return decode_layout_reply(reply, cfg);
}

// ---- assets ---------------------------------------------------------------

geometry::Mesh coarse_building_mesh(const layout::BuildingInstance& inst) {
  geometry::Mesh mesh = geometry::extrude_footprint(inst.footprint, inst.target_height);
  const Vec2 aw = inst.obb.axis_w(), al = inst.obb.axis_l();
  for (Vec3& v : mesh.vertices) {
    const Vec2 d{v.x - inst.obb.center.x, v.y - inst.obb.center.y};
    v = {dot(d, aw), dot(d, al), v.z};
  }
  geometry::compute_vertex_normals(mesh);
  return mesh;
}

AssetRequest make_asset_request(const layout::BuildingInstance& instance, const DesignSpec& spec,
                                const ProviderConfig& cfg) {
  AssetRequest req;
  req.instance = instance;
  req.coarse_mesh = coarse_building_mesh(instance);
  req.iso_silhouette = geometry::render_iso_silhouette(req.coarse_mesh, cfg.silhouette_resolution);
  req.point_cloud = geometry::sample_mesh_surface(req.coarse_mesh, cfg.point_cloud_size,
                                                  mix64(cfg.seed ^ fnv1a64(instance.id)));
  req.prompt = spec.assets_design;
  req.style_tag = spec.style_tag;
  return req;
}

geometry::Mesh offline_asset(const AssetRequest& req) {
  geometry::Mesh mesh = req.coarse_mesh;
  mesh.uvs.resize(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& v = mesh.vertices[i];
    mesh.uvs[i] = {0.25 * (v.x + v.y), 0.25 * v.z};
  }
  return mesh;
}

namespace {

std::string silhouette_png(const geometry::SilhouetteMask& s) {
  std::vector<std::uint16_t> codes(s.bits.size());
  for (std::size_t i = 0; i < codes.size(); ++i) codes[i] = s.bits[i] ? 255 : 0;
  return base64_encode(layout::encode_gray_png(s.bits.width(), s.bits.height(), 8, codes));
}

std::string cloud_blob(const geometry::PointCloud& cloud) {
  std::vector<std::uint8_t> bytes(cloud.points.size() * 3 * sizeof(double));
  std::size_t o = 0;
  for (const Vec3& p : cloud.points) {
    for (double c : {p.x, p.y, p.z}) {
      std::memcpy(bytes.data() + o, &c, sizeof c);
      o += sizeof c;
    }
  }
  return base64_encode(bytes);
}

}  // namespace

geometry::Mesh request_asset(const AssetRequest& req, const ProviderConfig& cfg, int iteration) {
  if (cfg.mode == ProviderMode::Offline) return offline_asset(req);
  if (cfg.asset_url.empty()) throw Error(ErrorCode::ConfigError, "asset_url");
  Json body{{"version", kWireVersion},
            {"instance_id", req.instance.id},
            {"prompt", req.prompt},
            {"style_tag", req.style_tag},
            {"seed", mix64(cfg.seed ^ fnv1a64(req.instance.id)) + static_cast<std::uint64_t>(iteration)},
            {"iteration", iteration},
            {"cfg_scale", cfg.cfg_scale},
            {"steps", cfg.steps},
            {"target_height", req.instance.target_height},
            {"silhouette", {{"resolution", req.iso_silhouette.resolution}, {"png", silhouette_png(req.iso_silhouette)}}},
            {"point_cloud", {{"count", req.point_cloud.count()}, {"xyz_f64", cloud_blob(req.point_cloud)}}},
            {"coarse_mesh", scene::mesh_to_json(req.coarse_mesh)}};
  if (req.reference_image) body["reference_image"] = *req.reference_image;
  const Json reply = post_json(cfg.asset_url, body, cfg);
  if (!reply.is_object() || !reply.contains("mesh")) throw Error(ErrorCode::InvalidProviderOutput, "mesh");
  geometry::Mesh mesh;
  try {
    mesh = scene::mesh_from_json(reply.at("mesh"));
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidProviderOutput, "mesh", e.what());
  }
  if (mesh.empty()) throw Error(ErrorCode::InvalidProviderOutput, "empty");
  if (mesh.normals.size() != mesh.vertices.size()) geometry::compute_vertex_normals(mesh);
  return mesh;
}

AssetGenerator asset_generator(const ProviderConfig& cfg) {
  return [cfg](const AssetRequest& req, int iteration) { return request_asset(req, cfg, iteration); };
}

double silhouette_score(const geometry::Mesh& candidate, const AssetRequest& req) {
  if (candidate.empty()) return 0.0;
  const auto sil = geometry::render_iso_silhouette(candidate, req.iso_silhouette.resolution);
  return geometry::silhouette_iou(sil, req.iso_silhouette);
}

ShapeScorer shape_scorer(const ProviderConfig& cfg) {
  if (cfg.mode == ProviderMode::Offline || cfg.judge_url.empty()) return silhouette_score;
  return [cfg](const geometry::Mesh& candidate, const AssetRequest& req) {
    if (candidate.empty()) return 0.0;
    const auto sil = geometry::render_iso_silhouette(candidate, req.iso_silhouette.resolution);
    const Json reply = post_json(cfg.judge_url,
                                 Json{{"version", kWireVersion},
                                      {"kind", "shape_agreement"},
                                      {"candidate_png", silhouette_png(sil)},
                                      {"reference_png", silhouette_png(req.iso_silhouette)}},
                                 cfg);
    if (!reply.is_object() || !reply.contains("score") || !reply.at("score").is_number()) {
      throw Error(ErrorCode::InvalidProviderOutput, "score");
    }
    const double s = reply.at("score").get<double>();
    if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorCode::InvalidProviderOutput, "score");
    return s;
  };
}

Json trace_to_json(const RefineTrace& trace) {
  Json steps = Json::array();
  for (const auto& s : trace.steps) {
    steps.push_back({{"iteration", s.iteration}, {"score", s.score}, {"accepted", s.accepted}});
  }
  return Json{{"steps", steps}, {"accepted", trace.accepted}, {"best_score", trace.best_score}};
}

RefineResult constrained_refine_loop(const AssetRequest& req, const ProviderConfig& cfg,
                                     const AssetGenerator& generate, const ShapeScorer& score,
                                     RefineTrace* trace_out) {
  if (!(cfg.iou_threshold >= 0.0 && cfg.iou_threshold <= 1.0)) {
    throw Error(ErrorCode::ConfigError, "iou_threshold");
  }
  if (cfg.max_refine_iters < 1) throw Error(ErrorCode::ConfigError, "max_refine_iters");
  RefineResult result;
  RefineTrace& trace = result.trace;
  trace.best_score = -std::numeric_limits<double>::infinity();
  for (int it = 1; it <= cfg.max_refine_iters; ++it) {
    geometry::Mesh candidate = generate(req, it);
    const double s = score(candidate, req);
    const bool ok = s >= cfg.iou_threshold;
    trace.steps.push_back({it, s, ok});
    trace.best_score = std::max(trace.best_score, s);
    if (ok) {
      trace.accepted = true;
      result.mesh = std::move(candidate);
      if (trace_out) *trace_out = trace;
      return result;
    }
  }
  if (trace_out) *trace_out = trace;
  throw Error(ErrorCode::RefineExhausted, format_double(trace.best_score),
              "no candidate reached the shape threshold after " + std::to_string(cfg.max_refine_iters) +
                  " iterations");
}

// ---- matching ---------------------------------------------------------------

double footprint_aspect(const geometry::Aabb& b) {
  const Vec3 e = b.extent();
  const double lo = std::min(e.x, e.y), hi = std::max(e.x, e.y);
  return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

double footprint_aspect(const geometry::OrientedBox& box) {
  const double lo = std::min(box.half_w, box.half_l), hi = std::max(box.half_w, box.half_l);
  return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

std::map<std::string, std::string> match_assets(const std::vector<layout::BuildingInstance>& instances,
                                                const DesignSpec& spec, const AssetLibrary& lib,
                                                std::uint64_t seed, std::vector<std::string>* warnings) {
  std::vector<const AssetRecord*> pool;
  std::vector<const AssetRecord*> buildings;
  for (const auto& a : lib.entries) {
    if (a.category != scene::Category::Building) continue;
    buildings.push_back(&a);
    if (a.style == spec.style_tag) pool.push_back(&a);
  }
  if (buildings.empty()) throw Error(ErrorCode::EmptyLibrary, "assets", "no building assets");
  if (pool.empty()) {
    pool = buildings;
    if (warnings) {
      warnings->push_back("no asset with style " + spec.style_tag + "; matching against the full library");
    }
  }
  std::map<std::string, std::string> out;
  for (const auto& inst : instances) {
    const double target = footprint_aspect(inst.obb);
    const AssetRecord* best = nullptr;
    double best_d = 0.0;
    std::uint64_t best_key = 0;
    for (const AssetRecord* a : pool) {
      const double aspect = footprint_aspect(a->bounds);
      double d = std::abs(aspect - target);
      if (std::isnan(d)) d = std::numeric_limits<double>::infinity();
      const std::uint64_t key = mix64(seed ^ fnv1a64(inst.id + "|" + a->id));
      // Distances within kAspectTieTol count as equal (box fits carry rounding noise).
      const bool tie = best && std::abs(d - best_d) <= kAspectTieTol;
      if (!best || (!tie && d < best_d) || (tie && key < best_key)) {
        best = a;
        best_d = d;
        best_key = key;
      }
    }
    out[inst.id] = best->id;
  }
  return out;
}

namespace {

template <typename Record>
std::string rank_by_words(const std::vector<const Record*>& candidates, const std::vector<std::string>& ws,
                          std::string_view style, std::string_view salt, std::uint64_t seed) {
  const Record* best = nullptr;
  int best_score = -1;
  std::uint64_t best_key = 0;
  for (const Record* r : candidates) {
    int score = 0;
    for (const auto& t : r->tags) {
      if (t == style) score += 2;
      for (const auto& w : ws) {
        if (w == t || (w.size() > 1 && w.back() == 's' && std::string_view(w).substr(0, w.size() - 1) == t)) {
          ++score;
          break;
        }
      }
    }
    const std::uint64_t key = mix64(seed ^ fnv1a64(std::string(salt) + "|" + r->def.id));
    if (score > best_score || (score == best_score && key < best_key)) {
      best = r;
      best_score = score;
      best_key = key;
    }
  }
  return best->def.id;
}

}  // namespace

std::string choose_layer_material(scene::LayerKind layer, const DesignSpec& spec, const MaterialLibrary& lib,
                                  std::uint64_t seed) {
  const std::string name(scene::layer_name(layer));
  const auto candidates = lib.tagged(name);
  if (candidates.empty()) throw Error(ErrorCode::EmptyLibrary, "materials:" + name);
  return rank_by_words(candidates, words(spec.materials_design), spec.style_tag, name, seed);
}

std::string choose_skybox(const DesignSpec& spec, const SkyboxLibrary& lib, std::uint64_t seed) {
  if (lib.empty()) throw Error(ErrorCode::EmptyLibrary, "skyboxes");
  std::vector<const SkyboxRecord*> all;
  for (const auto& s : lib.entries) all.push_back(&s);
  return rank_by_words(all, words(spec.skymap_design), spec.style_tag, "sky", seed);
}

}  // namespace majutsu::providers
