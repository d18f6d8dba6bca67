#include "majutsu/edit.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>

namespace majutsu::edit {

using scene::AssetInstance;
using scene::Category;
using scene::LayerKind;

std::string_view op_name(const EditCommand& cmd) {
  static constexpr std::string_view names[] = {"add", "delete", "edit", "move", "replace"};
  return names[cmd.index()];
}

// ---------------------------------------------------------------------------
// Text grammar

namespace {

bool word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == ':' ||
         c == '/' || c == '.' || c == '#' || c == '+';
}

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  [[noreturn]] void fail(const std::string& expected) const {
    throw Error(ErrorCode::ParseError, std::to_string(pos_) + ":" + expected,
                "parse error at offset " + std::to_string(pos_) + ": expected " + expected);
  }

  void ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool at_end() {
    ws();
    return pos_ == s_.size();
  }

  bool keyword(std::string_view kw) {
    ws();
    if (s_.size() - pos_ < kw.size()) return false;
    for (std::size_t i = 0; i < kw.size(); ++i) {
      if (std::tolower(static_cast<unsigned char>(s_[pos_ + i])) != kw[i]) return false;
    }
    if (pos_ + kw.size() < s_.size() && word_char(s_[pos_ + kw.size()])) return false;
    pos_ += kw.size();
    return true;
  }

  void expect_keyword(std::string_view kw) {
    if (!keyword(kw)) fail("'" + std::string(kw) + "'");
  }

  std::string word(const std::string& what) {
    ws();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && word_char(s_[pos_])) ++pos_;
    if (pos_ == start) fail(what);
    return std::string(s_.substr(start, pos_ - start));
  }

  bool peek(char c) {
    ws();
    return pos_ < s_.size() && s_[pos_] == c;
  }

  void expect(char c) {
    if (!peek(c)) fail(std::string("'") + c + "'");
    ++pos_;
  }

  double number(const std::string& what) {
    ws();
    std::size_t p = pos_;
    if (p < s_.size() && s_[p] == '+') ++p;
    double v = 0.0;
    const auto res = std::from_chars(s_.data() + p, s_.data() + s_.size(), v);
    if (res.ec != std::errc() || !std::isfinite(v)) fail(what);
    pos_ = static_cast<std::size_t>(res.ptr - s_.data());
    return v;
  }

  std::size_t pos() const { return pos_; }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

double parse_double(const std::string& text, const std::string& key) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::InvalidPatch, key, "'" + text + "' is not a finite number");
  }
  return v;
}

}  // namespace

EditCommand parse_command(std::string_view text) {
  Parser p(text);
  p.ws();
  if (p.peek('{')) {
    Json j;
    try {
      j = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw Error(ErrorCode::ParseError, std::to_string(e.byte) + ":json", e.what());
    }
    return command_from_json(j);
  }

  EditCommand cmd;
  if (p.keyword("add")) {
    AddCmd a;
    a.asset_ref = p.word("asset reference");
    p.expect_keyword("at");
    p.expect('(');
    a.placement.translation.x = p.number("number");
    p.expect(',');
    a.placement.translation.y = p.number("number");
    p.expect(')');
    bool yaw = false, scale = false;
    while (!p.at_end()) {
      if (!yaw && p.keyword("yaw")) {
        a.placement.yaw = p.number("number");
        yaw = true;
      } else if (!scale && p.keyword("scale")) {
        const double s = p.number("number");
        if (!(s > 0.0)) p.fail("positive scale");
        a.placement.xy_scale = a.placement.z_scale = s;
        scale = true;
      } else {
        p.fail(!yaw ? "'yaw', 'scale' or end of command" : "'scale' or end of command");
      }
    }
    cmd = a;
  } else if (p.keyword("delete")) {
    cmd = DeleteCmd{p.word("instance id")};
  } else if (p.keyword("edit")) {
    EditCmd e;
    e.instance_id = p.word("instance id");
    p.expect_keyword("set");
    do {
      const std::string key = p.word("attribute key");
      p.expect('=');
      e.patch[key] = p.word("attribute value");
    } while (p.peek(',') && (p.expect(','), true));
    cmd = e;
  } else if (p.keyword("move")) {
    MoveCmd m;
    m.instance_id = p.word("instance id");
    p.expect_keyword("by");
    p.expect('(');
    m.d_translation.x = p.number("number");
    p.expect(',');
    m.d_translation.y = p.number("number");
    if (p.peek(',')) {
      p.expect(',');
      m.d_translation.z = p.number("number");
    }
    p.expect(')');
    bool rot = false, scale = false;
    while (!p.at_end()) {
      if (!rot && p.keyword("rotate")) {
        m.d_yaw = p.number("number");
        rot = true;
      } else if (!scale && p.keyword("scale")) {
        m.d_scale = p.number("number");
        if (!(m.d_scale > 0.0)) p.fail("positive scale");
        scale = true;
      } else {
        p.fail("'rotate', 'scale' or end of command");
      }
    }
    cmd = m;
  } else if (p.keyword("replace")) {
    ReplaceCmd r;
    const std::string target = p.word("layer or instance target");
    const std::size_t dot = target.find('.');
    const std::string head = target.substr(0, dot);
    const std::string surface = dot == std::string::npos ? "" : target.substr(dot + 1);
    if (auto layer = scene::layer_from_name(head)) {
      r.target.layer = layer;
    } else {
      r.target.instance_id = head;
      r.target.surface = surface;
    }
    if (head.empty() || (dot != std::string::npos && surface.empty())) p.fail("layer or instance target");
    p.expect_keyword("with");
    r.material_id = p.word("material id");
    cmd = r;
  } else {
    p.fail("one of add, delete, edit, move, replace");
  }
  if (!p.at_end()) p.fail("end of command");
  return cmd;
}

// ---------------------------------------------------------------------------
// JSON form

namespace {

[[noreturn]] void bad_json(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::ParseError, path, "invalid command JSON at '" + path + "': " + what);
}

const Json& jfield(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) bad_json(key, "missing");
  return j[key];
}

std::string jstring(const Json& j, const char* key) {
  const Json& v = jfield(j, key);
  if (!v.is_string()) bad_json(key, "expected string");
  return v.get<std::string>();
}

double jnumber(const Json& j, const char* key) {
  const Json& v = jfield(j, key);
  if (!v.is_number()) bad_json(key, "expected number");
  return v.get<double>();
}

}  // namespace

Json command_to_json(const EditCommand& cmd) {
  Json j;
  j["op"] = op_name(cmd);
  std::visit(
      [&j](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, AddCmd>) {
          j["asset_ref"] = c.asset_ref;
          if (c.category) j["category"] = scene::category_name(*c.category);
          j["placement"] = scene::placement_to_json(c.placement);
          if (!c.id.empty()) j["id"] = c.id;
          Json ov = Json::object();
          for (const auto& [k, v] : c.overrides) ov[k] = v;
          j["overrides"] = ov;
        } else if constexpr (std::is_same_v<T, DeleteCmd>) {
          j["instance_id"] = c.instance_id;
        } else if constexpr (std::is_same_v<T, EditCmd>) {
          j["instance_id"] = c.instance_id;
          Json patch = Json::object();
          for (const auto& [k, v] : c.patch) patch[k] = v ? Json(*v) : Json(nullptr);
          j["patch"] = patch;
        } else if constexpr (std::is_same_v<T, MoveCmd>) {
          j["instance_id"] = c.instance_id;
          j["d_translation"] = {c.d_translation.x, c.d_translation.y, c.d_translation.z};
          j["d_yaw"] = c.d_yaw;
          j["d_scale"] = c.d_scale;
        } else {
          Json t;
          if (c.target.layer) {
            t["layer"] = scene::layer_name(*c.target.layer);
          } else {
            t["instance_id"] = c.target.instance_id;
            if (!c.target.surface.empty()) t["surface"] = c.target.surface;
          }
          j["target"] = t;
          j["material_id"] = c.material_id;
        }
      },
      cmd);
  return j;
}

EditCommand command_from_json(const Json& j) {
  const std::string op = jstring(j, "op");
  if (op == "add") {
    AddCmd a;
    a.asset_ref = jstring(j, "asset_ref");
    if (j.contains("category")) {
      try {
        a.category = scene::category_from_name(jstring(j, "category"));
      } catch (const Error&) {
        bad_json("category", "unknown category");
      }
    }
    const Json& p = jfield(j, "placement");
    const Json& t = jfield(p, "translation");
    if (!t.is_array() || t.size() != 3 || !t[0].is_number() || !t[1].is_number() || !t[2].is_number()) {
      bad_json("placement.translation", "expected 3 numbers");
    }
    a.placement.translation = {t[0].get<double>(), t[1].get<double>(), t[2].get<double>()};
    a.placement.yaw = p.contains("yaw") ? jnumber(p, "yaw") : 0.0;
    a.placement.xy_scale = p.contains("xy_scale") ? jnumber(p, "xy_scale") : 1.0;
    a.placement.z_scale = p.contains("z_scale") ? jnumber(p, "z_scale") : 1.0;
    if (j.contains("id")) a.id = jstring(j, "id");
    if (j.contains("overrides")) {
      const Json& ov = j["overrides"];
      if (!ov.is_object()) bad_json("overrides", "expected object");
      for (auto it = ov.begin(); it != ov.end(); ++it) {
        if (!it.value().is_string()) bad_json("overrides." + it.key(), "expected string");
        a.overrides[it.key()] = it.value().get<std::string>();
      }
    }
    return a;
  }
  if (op == "delete") return DeleteCmd{jstring(j, "instance_id")};
  if (op == "edit") {
    EditCmd e;
    e.instance_id = jstring(j, "instance_id");
    const Json& patch = jfield(j, "patch");
    if (!patch.is_object() || patch.empty()) bad_json("patch", "expected non-empty object");
    for (auto it = patch.begin(); it != patch.end(); ++it) {
      if (it.value().is_null()) {
        e.patch[it.key()] = std::nullopt;
      } else if (it.value().is_string()) {
        e.patch[it.key()] = it.value().get<std::string>();
      } else if (it.value().is_number()) {
        e.patch[it.key()] = format_double(it.value().get<double>());
      } else {
        bad_json("patch." + it.key(), "expected string, number or null");
      }
    }
    return e;
  }
  if (op == "move") {
    MoveCmd m;
    m.instance_id = jstring(j, "instance_id");
    const Json& d = jfield(j, "d_translation");
    if (!d.is_array() || d.size() < 2 || d.size() > 3) bad_json("d_translation", "expected 2 or 3 numbers");
    for (const Json& v : d)
      if (!v.is_number()) bad_json("d_translation", "expected numbers");
    m.d_translation = {d[0].get<double>(), d[1].get<double>(), d.size() == 3 ? d[2].get<double>() : 0.0};
    m.d_yaw = j.contains("d_yaw") ? jnumber(j, "d_yaw") : 0.0;
    m.d_scale = j.contains("d_scale") ? jnumber(j, "d_scale") : 1.0;
    return m;
  }
  if (op == "replace") {
    ReplaceCmd r;
    const Json& t = jfield(j, "target");
    if (t.is_string()) {
      return parse_command("replace " + t.get<std::string>() + " with " + jstring(j, "material_id"));
    }
    if (t.contains("layer")) {
      r.target.layer = scene::layer_from_name(jstring(t, "layer"));
      if (!r.target.layer) bad_json("target.layer", "unknown layer");
    } else {
      r.target.instance_id = jstring(t, "instance_id");
      if (t.contains("surface")) r.target.surface = jstring(t, "surface");
    }
    r.material_id = jstring(j, "material_id");
    return r;
  }
  bad_json("op", "unknown op '" + op + "'");
}

std::string command_to_text(const EditCommand& cmd) {
  return std::visit(
      [](const auto& c) -> std::string {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, AddCmd>) {
          std::string s = "add " + c.asset_ref + " at (" + format_double(c.placement.translation.x) + "," +
                          format_double(c.placement.translation.y) + ")";
          if (c.placement.yaw != 0.0) s += " yaw " + format_double(c.placement.yaw);
          if (c.placement.xy_scale != 1.0) s += " scale " + format_double(c.placement.xy_scale);
          return s;
        } else if constexpr (std::is_same_v<T, DeleteCmd>) {
          return "delete " + c.instance_id;
        } else if constexpr (std::is_same_v<T, EditCmd>) {
          std::string s = "edit " + c.instance_id + " set ";
          bool first = true;
          for (const auto& [k, v] : c.patch) {
            if (!first) s += ", ";
            first = false;
            s += k + "=" + (v ? *v : std::string("null"));
          }
          return s;
        } else if constexpr (std::is_same_v<T, MoveCmd>) {
          std::string s = "move " + c.instance_id + " by (" + format_double(c.d_translation.x) + "," +
                          format_double(c.d_translation.y);
          if (c.d_translation.z != 0.0) s += "," + format_double(c.d_translation.z);
          s += ")";
          if (c.d_yaw != 0.0) s += " rotate " + format_double(c.d_yaw);
          if (c.d_scale != 1.0) s += " scale " + format_double(c.d_scale);
          return s;
        } else {
          std::string target = c.target.layer ? std::string(scene::layer_name(*c.target.layer))
                                              : c.target.instance_id;
          if (!c.target.layer && !c.target.surface.empty()) target += "." + c.target.surface;
          return "replace " + target + " with " + c.material_id;
        }
      },
      cmd);
}

// ---------------------------------------------------------------------------
// Application

namespace {

struct Outcome {
  EditCommand applied;
  EditCommand inverse;
  std::vector<std::string> warnings;
};

AssetInstance& find_instance(SceneDocument& doc, const std::string& id) {
  auto it = doc.instances.find(id);
  if (it == doc.instances.end()) throw Error(ErrorCode::UnknownInstance, id, "no instance '" + id + "'");
  return it->second;
}

void require_material(const SceneDocument& doc, const std::string& id) {
  if (!doc.materials.count(id)) throw Error(ErrorCode::UnknownMaterial, id, "no material '" + id + "'");
}

void require_in_bounds(const SceneDocument& doc, const geometry::SimilarityPlacement& p) {
  const Vec3 t = p.translation;
  if (!(t.x >= 0.0 && t.y >= 0.0 && t.x <= doc.width_m() && t.y <= doc.height_m())) {
    throw Error(ErrorCode::OutOfBounds, format_double(t.x) + "," + format_double(t.y),
                "placement outside the map");
  }
}

bool is_override_key(const std::string& key) {
  return key == "tint" || key == "material" || (key.rfind("material.", 0) == 0 && key.size() > 9);
}

bool valid_tint(const std::string& v) {
  std::string_view s = v;
  if (!s.empty() && s[0] == '#') s.remove_prefix(1);
  return s.size() == 6 &&
         std::all_of(s.begin(), s.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); });
}

double normalize_angle(double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(a, two_pi);
  if (r < 0.0) r += two_pi;
  if (r >= two_pi) r = 0.0;
  return r;
}

Patch placement_patch(const geometry::SimilarityPlacement& p) {
  return {{"placement.tx", format_double(p.translation.x)},
          {"placement.ty", format_double(p.translation.y)},
          {"placement.tz", format_double(p.translation.z)},
          {"placement.yaw", format_double(p.yaw)},
          {"placement.xy_scale", format_double(p.xy_scale)},
          {"placement.z_scale", format_double(p.z_scale)}};
}

void collision_warnings(const SceneDocument& doc, const AssetInstance& inst, std::vector<std::string>& out) {
  const auto a = scene::instance_world_bounds(doc, inst);
  for (const auto& [id, other] : doc.instances) {
    if (id == inst.id) continue;
    const auto b = scene::instance_world_bounds(doc, other);
    if (a.min.x < b.max.x && b.min.x < a.max.x && a.min.y < b.max.y && b.min.y < a.max.y) {
      out.push_back("collision:" + inst.id + ":" + id);
    }
  }
}

Outcome mutate(SceneDocument& doc, const EditCommand& cmd, bool check_bounds) {
  Outcome out{cmd, cmd, {}};
  if (const auto* add = std::get_if<AddCmd>(&cmd)) {
    AddCmd a = *add;
    auto asset = doc.assets.find(a.asset_ref);
    if (asset == doc.assets.end()) throw Error(ErrorCode::MissingAsset, a.asset_ref, "unknown asset");
    if (!a.placement.valid()) throw Error(ErrorCode::InvalidPatch, "placement", "invalid placement");
    if (check_bounds) require_in_bounds(doc, a.placement);
    for (const auto& [k, v] : a.overrides) {
      if (!is_override_key(k)) throw Error(ErrorCode::InvalidPatch, k, "unknown override key");
      if (k == "tint" ? !valid_tint(v) : !doc.materials.count(v)) {
        if (k == "tint") throw Error(ErrorCode::InvalidPatch, k, "tint must be #rrggbb");
        require_material(doc, v);
      }
    }
    if (!a.category) a.category = asset->second.category;
    if (a.id.empty()) a.id = "inst_r" + std::to_string(doc.revision);
    if (doc.instances.count(a.id)) throw Error(ErrorCode::DuplicateId, a.id, "instance id already used");
    AssetInstance inst{a.id, a.asset_ref, *a.category, a.placement, a.overrides};
    doc.instances.emplace(a.id, inst);
    collision_warnings(doc, inst, out.warnings);
    out.applied = a;
    out.inverse = DeleteCmd{a.id};
  } else if (const auto* del = std::get_if<DeleteCmd>(&cmd)) {
    const AssetInstance inst = find_instance(doc, del->instance_id);
    doc.instances.erase(inst.id);
    out.inverse = AddCmd{inst.asset_ref, inst.category, inst.placement, inst.id, inst.overrides};
  } else if (const auto* ed = std::get_if<EditCmd>(&cmd)) {
    AssetInstance& inst = find_instance(doc, ed->instance_id);
    if (ed->patch.empty()) throw Error(ErrorCode::InvalidPatch, "", "empty patch");
    const AssetInstance before = inst;
    EditCmd inverse{inst.id, {}};
    bool placement_touched = false;
    for (const auto& [key, value] : ed->patch) {
      if (is_override_key(key)) {
        if (value) {
          if (key == "tint") {
            if (!valid_tint(*value)) throw Error(ErrorCode::InvalidPatch, key, "tint must be #rrggbb");
          } else {
            require_material(doc, *value);
          }
          inst.overrides[key] = *value;
        } else {
          inst.overrides.erase(key);
        }
        auto old = before.overrides.find(key);
        inverse.patch[key] = old == before.overrides.end() ? std::nullopt : std::optional(old->second);
        continue;
      }
      if (!value) throw Error(ErrorCode::InvalidPatch, key, "only override keys can be erased");
      if (key == "asset_ref") {
        if (!doc.assets.count(*value)) throw Error(ErrorCode::MissingAsset, *value, "unknown asset");
        inst.asset_ref = *value;
        inverse.patch[key] = before.asset_ref;
      } else if (key == "height") {
        const double h = parse_double(*value, key);
        if (!(h > 0.0)) throw Error(ErrorCode::InvalidPatch, key, "height must be > 0");
        const auto bounds = doc.assets.at(inst.asset_ref).mesh.bounds();
        const double ext = bounds.max.z - bounds.min.z;
        if (!(ext > 0.0)) throw Error(ErrorCode::InvalidPatch, key, "asset has no height");
        inst.placement.z_scale = h / ext;
        inst.placement.translation.z = -bounds.min.z * inst.placement.z_scale;
        placement_touched = true;
      } else if (std::find(std::begin(kPlacementKeys), std::end(kPlacementKeys), key) != std::end(kPlacementKeys)) {
        const double v = parse_double(*value, key);
        auto& p = inst.placement;
        if (key == "placement.tx") p.translation.x = v;
        else if (key == "placement.ty") p.translation.y = v;
        else if (key == "placement.tz") p.translation.z = v;
        else if (key == "placement.yaw") p.yaw = v;
        else if (key == "placement.xy_scale") p.xy_scale = v;
        else p.z_scale = v;
        placement_touched = true;
      } else {
        throw Error(ErrorCode::InvalidPatch, key, "unknown attribute '" + key + "'");
      }
    }
    if (placement_touched) {
      if (!inst.placement.valid()) throw Error(ErrorCode::InvalidPatch, "placement", "invalid placement");
      if (check_bounds) require_in_bounds(doc, inst.placement);
      for (auto& [k, v] : placement_patch(before.placement)) inverse.patch[k] = v;
    }
    out.inverse = inverse;
  } else if (const auto* mv = std::get_if<MoveCmd>(&cmd)) {
    AssetInstance& inst = find_instance(doc, mv->instance_id);
    if (!(mv->d_scale > 0.0) || !std::isfinite(mv->d_scale)) throw Error(ErrorCode::InvalidPatch, "d_scale", "must be > 0");
    if (!std::isfinite(mv->d_yaw) || !std::isfinite(mv->d_translation.x) || !std::isfinite(mv->d_translation.y) ||
        !std::isfinite(mv->d_translation.z)) {
      throw Error(ErrorCode::InvalidPatch, "d_translation", "must be finite");
    }
    const geometry::SimilarityPlacement before = inst.placement;
    auto& p = inst.placement;
    p.translation = p.translation + mv->d_translation;
    p.yaw = normalize_angle(p.yaw + mv->d_yaw);
    p.xy_scale *= mv->d_scale;
    p.z_scale *= mv->d_scale;
    if (!p.valid()) throw Error(ErrorCode::InvalidPatch, "placement", "invalid placement");
    if (check_bounds) require_in_bounds(doc, p);
    collision_warnings(doc, inst, out.warnings);
    out.inverse = EditCmd{inst.id, placement_patch(before)};
  } else {
    const auto& rp = std::get<ReplaceCmd>(cmd);
    require_material(doc, rp.material_id);
    if (rp.target.layer) {
      scene::Layer& layer = doc.layer(*rp.target.layer);
      out.inverse = ReplaceCmd{rp.target, layer.material};
      layer.material = rp.material_id;
    } else {
      AssetInstance& inst = find_instance(doc, rp.target.instance_id);
      const std::string key = rp.target.surface.empty() ? "material" : "material." + rp.target.surface;
      auto old = inst.overrides.find(key);
      out.inverse = EditCmd{inst.id, {{key, old == inst.overrides.end() ? std::nullopt : std::optional(old->second)}}};
      inst.overrides[key] = rp.material_id;
    }
  }
  return out;
}

void bump(SceneDocument& doc, const EditCommand& command, const EditCommand& inverse, const char* origin) {
  doc.edit_log.push_back({command_to_json(command), command_to_json(inverse),
                          static_cast<std::int64_t>(doc.edit_log.size()) + 2, origin});
  doc.revision = static_cast<std::int64_t>(doc.edit_log.size()) + 1;
}

}  // namespace

ApplyResult execute(const SceneDocument& doc, const EditCommand& cmd) {
  ApplyResult r{doc, cmd, cmd, {}};
  Outcome o = mutate(r.doc, cmd, true);
  r.applied = o.applied;
  r.inverse = o.inverse;
  r.warnings = std::move(o.warnings);
  bump(r.doc, r.applied, r.inverse, "apply");
  r.doc.undo_stack.push_back({command_to_json(r.applied), command_to_json(r.inverse)});
  r.doc.redo_stack.clear();
  return r;
}

SceneDocument apply_command(const SceneDocument& doc, const EditCommand& cmd, std::vector<std::string>* warnings) {
  ApplyResult r = execute(doc, cmd);
  if (warnings) *warnings = std::move(r.warnings);
  return std::move(r.doc);
}

SceneDocument undo(const SceneDocument& doc) {
  if (doc.undo_stack.empty()) throw Error(ErrorCode::NothingToUndo, "", "nothing to undo");
  SceneDocument out = doc;
  const scene::StackEntry entry = out.undo_stack.back();
  out.undo_stack.pop_back();
  mutate(out, command_from_json(entry.inverse), false);
  bump(out, command_from_json(entry.inverse), command_from_json(entry.command), "undo");
  out.redo_stack.push_back(entry);
  return out;
}

SceneDocument redo(const SceneDocument& doc) {
  if (doc.redo_stack.empty()) throw Error(ErrorCode::NothingToRedo, "", "nothing to redo");
  SceneDocument out = doc;
  const scene::StackEntry entry = out.redo_stack.back();
  out.redo_stack.pop_back();
  mutate(out, command_from_json(entry.command), false);
  bump(out, command_from_json(entry.command), command_from_json(entry.inverse), "redo");
  out.undo_stack.push_back(entry);
  return out;
}

SceneDocument replay(const SceneDocument& base, const std::vector<scene::EditRecord>& log) {
  SceneDocument doc = base;
  for (const scene::EditRecord& r : log) {
    if (r.origin == "apply") doc = apply_command(doc, command_from_json(r.command));
    else if (r.origin == "undo") doc = undo(doc);
    else if (r.origin == "redo") doc = redo(doc);
    else throw Error(ErrorCode::SchemaViolation, "origin", "unknown log origin '" + r.origin + "'");
  }
  return doc;
}

}  // namespace majutsu::edit
