#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <thread>

#include <httplib.h>

#include "majutsu/edit.hpp"
#include "majutsu/orchestrator.hpp"

namespace majutsu::orchestrator {

namespace fs = std::filesystem;

namespace {

/// Unknown session, pair or image ids; maps to 404.
struct NotFound : std::runtime_error {
  std::string what_kind;
  std::string id;
  NotFound(std::string kind, std::string ident)
      : std::runtime_error("unknown " + kind + " '" + ident + "'"), what_kind(std::move(kind)), id(std::move(ident)) {}
};

/// Duplicate verdicts; maps to 409.
struct Duplicate : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check_base(const Session& s, std::optional<std::int64_t> base) {
  if (base && *base != s.doc.revision) throw RevisionConflict(s.doc.revision);
}

std::string session_name(std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%04llu", static_cast<unsigned long long>(n));
  return buf;
}

Json event_json(const scene::EditRecord& r) {
  return Json{{"revision", r.revision}, {"origin", r.origin}, {"command", r.command}};
}

}  // namespace

std::string image_token(const std::string& image_id) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "img_%016llx",
                static_cast<unsigned long long>(mix64(fnv1a64(image_id) ^ 0x6a75646765ULL)));
  return buf;
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownInstance:
    case ErrorCode::UnknownMaterial:
    case ErrorCode::MissingAsset:
      return 404;
    case ErrorCode::NothingToUndo:
    case ErrorCode::NothingToRedo:
      return 409;
    case ErrorCode::ProviderUnavailable:
      return 503;
    case ErrorCode::PipelineFailure:
    case ErrorCode::RefineExhausted:
    case ErrorCode::InvalidProviderOutput:
      return 502;
    default:
      return 400;
  }
}

// ---- service ------------------------------------------------------------------

Service::Service(Options opts) : opts_(std::move(opts)) {
  if (!opts_.state_dir.empty()) {
    fs::create_directories(fs::path(opts_.state_dir) / "sessions");
    fs::create_directories(fs::path(opts_.state_dir) / "eval");
    restore();
  }
}

void Service::persist(const Session& s) const {
  if (s.dir.empty()) return;
  fs::create_directories(s.dir);
  write_file_atomic((fs::path(s.dir) / "scene.majutsu.json").string(), scene::save_document(s.doc, s.dir));
}

void Service::restore() {
  const fs::path sessions = fs::path(opts_.state_dir) / "sessions";
  for (const auto& entry : fs::directory_iterator(sessions)) {
    const fs::path file = entry.path() / "scene.majutsu.json";
    if (!fs::is_regular_file(file)) continue;
    auto s = std::make_shared<Session>();
    s->id = entry.path().filename().string();
    s->dir = entry.path().string();
    const auto bytes = read_file(file.string());
    s->doc = scene::load_document(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), s->dir);
    sessions_[s->id] = s;
    if (s->id.size() > 1 && s->id[0] == 's') {
      try {
        next_session_ = std::max<std::uint64_t>(next_session_, std::stoull(s->id.substr(1)) + 1);
      } catch (const std::exception&) {
      }
    }
  }
  const fs::path eval_dir = fs::path(opts_.state_dir) / "eval";
  if (fs::is_regular_file(eval_dir / "images.json")) {
    const auto bytes = read_file((eval_dir / "images.json").string());
    register_images(Json::parse(bytes.begin(), bytes.end()).get<std::map<std::string, std::vector<std::string>>>());
  }
  if (fs::is_regular_file(eval_dir / "records.jsonl")) {
    const auto bytes = read_file((eval_dir / "records.jsonl").string());
    std::istringstream in(std::string(bytes.begin(), bytes.end()));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const Json j = Json::parse(line);
      records_.push_back(eval::record_from_json(j.at("record")));
      verdict_keys_.insert(j.at("key").get<std::string>());
    }
  }
}

std::shared_ptr<Session> Service::create_session(const Json& body) {
  if (!body.is_object()) throw Error(ErrorCode::SchemaViolation, "body", "expected a JSON object");
  auto s = std::make_shared<Session>();
  {
    std::lock_guard lock(mutex_);
    s->id = session_name(next_session_++);
  }
  if (!opts_.state_dir.empty()) s->dir = (fs::path(opts_.state_dir) / "sessions" / s->id).string();
  if (body.contains("document")) {
    s->doc = scene::document_from_json(body.at("document"));
  } else if (body.contains("path")) {
    if (!body.at("path").is_string()) throw Error(ErrorCode::SchemaViolation, "path", "expected a string");
    const std::string path = body.at("path").get<std::string>();
    const auto bytes = read_file(path);
    s->doc = scene::load_document(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                                  fs::path(path).parent_path().string());
  } else if (body.contains("prompt")) {
    PipelineConfig cfg = opts_.pipeline;
    cfg.layout_path.reset();
    cfg.height_path.reset();
    try {
      cfg.prompt = body.at("prompt").get<std::string>();
      if (body.contains("seed")) cfg.seed = body.at("seed").get<std::uint64_t>();
      if (body.contains("name")) cfg.name = body.at("name").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorCode::SchemaViolation, "prompt", "prompt must be a string and seed an integer");
    }
    cfg.out_dir = s->dir.empty() ? (fs::temp_directory_path() / ("majutsu-" + s->id + "-" +
                                                                 std::to_string(reinterpret_cast<std::uintptr_t>(s.get()))))
                                       .string()
                                 : s->dir;
    s->doc = run_pipeline(cfg).doc;
  } else {
    throw Error(ErrorCode::SchemaViolation, "prompt", "expected one of prompt, document or path");
  }
  persist(*s);
  std::lock_guard lock(mutex_);
  sessions_[s->id] = s;
  return s;
}

std::shared_ptr<Session> Service::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::vector<std::string> Service::session_ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, _] : sessions_) out.push_back(id);
  return out;
}

CommandOutcome Service::apply(Session& s, const Json& command, std::optional<std::int64_t> base) {
  const edit::EditCommand cmd =
      command.is_string() ? edit::parse_command(command.get<std::string>()) : edit::command_from_json(command);
  std::unique_lock lock(s.mutex);
  check_base(s, base);
  edit::ApplyResult r = edit::execute(s.doc, cmd);
  CommandOutcome out;
  out.diff = scene::diff_documents(s.doc, r.doc);
  out.warnings = std::move(r.warnings);
  out.applied = edit::command_to_json(r.applied);
  s.doc = std::move(r.doc);
  out.revision = s.doc.revision;
  persist(s);
  s.changed.notify_all();
  return out;
}

CommandOutcome Service::undo(Session& s, std::optional<std::int64_t> base) {
  std::unique_lock lock(s.mutex);
  check_base(s, base);
  scene::SceneDocument next = edit::undo(s.doc);
  CommandOutcome out;
  out.diff = scene::diff_documents(s.doc, next);
  out.applied = next.edit_log.back().command;
  s.doc = std::move(next);
  out.revision = s.doc.revision;
  persist(s);
  s.changed.notify_all();
  return out;
}

CommandOutcome Service::redo(Session& s, std::optional<std::int64_t> base) {
  std::unique_lock lock(s.mutex);
  check_base(s, base);
  scene::SceneDocument next = edit::redo(s.doc);
  CommandOutcome out;
  out.diff = scene::diff_documents(s.doc, next);
  out.applied = next.edit_log.back().command;
  s.doc = std::move(next);
  out.revision = s.doc.revision;
  persist(s);
  s.changed.notify_all();
  return out;
}

Json Service::events(Session& s, std::int64_t since, double timeout_s) {
  std::unique_lock lock(s.mutex);
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(std::max(0.0, timeout_s));
  s.changed.wait_until(lock, deadline, [&] { return s.doc.revision > since; });
  Json ev = Json::array();
  for (const auto& r : s.doc.edit_log) {
    if (r.revision > since) ev.push_back(event_json(r));
  }
  return Json{{"revision", s.doc.revision}, {"events", ev}};
}

// ---- judging ----------------------------------------------------------------------

void Service::register_images(const std::map<std::string, std::vector<std::string>>& images) {
  std::lock_guard lock(eval_mutex_);
  for (const auto& [method, ids] : images) {
    if (method.empty()) throw Error(ErrorCode::SchemaViolation, "methods", "empty method name");
    auto& list = images_[method];
    for (const auto& id : ids) {
      if (id.empty()) throw Error(ErrorCode::SchemaViolation, "methods." + method, "empty image id");
      const auto known = image_method_.find(id);
      if (known != image_method_.end()) {
        if (known->second != method) throw Error(ErrorCode::DuplicateId, id, "image registered under two methods");
        continue;
      }
      list.push_back(id);
      image_method_[id] = method;
      token_to_image_[image_token(id)] = id;
    }
  }
  schedules_.clear();
  if (!opts_.state_dir.empty()) {
    write_file_atomic((fs::path(opts_.state_dir) / "eval" / "images.json").string(), Json(images_).dump(2));
  }
}

const std::vector<eval::ScheduledPair>& Service::schedule_for(eval::Dimension dim) {
  auto it = schedules_.find(dim);
  if (it == schedules_.end()) {
    it = schedules_.emplace(dim, eval::schedule_comparisons(images_, dim, opts_.schedule_seed)).first;
  }
  return it->second;
}

Json Service::schedule(eval::Dimension dim, const std::string& judge) {
  std::lock_guard lock(eval_mutex_);
  const auto& pairs = schedule_for(dim);
  const std::string prefix = judge + "|" + std::string(eval::dimension_name(dim)) + "-";
  std::size_t position = 0;
  while (position < pairs.size() &&
         verdict_keys_.count(prefix + std::to_string(position)) != 0) {
    ++position;
  }
  Json list = Json::array();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    list.push_back({{"pair_id", std::string(eval::dimension_name(dim)) + "-" + std::to_string(i)},
                    {"position", i},
                    {"images", {image_token(pairs[i].a.id), image_token(pairs[i].b.id)}}});
  }
  return Json{{"dimension", eval::dimension_name(dim)},
              {"judge", judge},
              {"total", pairs.size()},
              {"position", position},
              {"pairs", list}};
}

eval::ComparisonRecord Service::submit_verdict(const Json& body) {
  if (!body.is_object()) throw Error(ErrorCode::SchemaViolation, "body", "expected a JSON object");
  std::lock_guard lock(eval_mutex_);
  eval::ComparisonRecord r;
  std::string key;
  auto str = [&](const char* k) -> std::string {
    if (!body.contains(k)) return {};
    if (!body.at(k).is_string()) throw Error(ErrorCode::SchemaViolation, k, "expected a string");
    return body.at(k).get<std::string>();
  };
  r.judge = str("judge");
  if (r.judge.empty()) r.judge = "anonymous";
  const std::string winner = str("winner");
  if (winner != "A" && winner != "B") throw Error(ErrorCode::SchemaViolation, "winner", "winner must be A or B");
  r.winner = winner == "A" ? eval::Winner::A : eval::Winner::B;
  if (body.contains("pair_id")) {
    const std::string pid = str("pair_id");
    const auto dash = pid.find('-');
    if (dash == std::string::npos) throw NotFound("pair", pid);
    eval::Dimension dim;
    std::size_t idx = 0;
    try {
      dim = eval::dimension_from_name(pid.substr(0, dash));
      std::size_t used = 0;
      idx = std::stoul(pid.substr(dash + 1), &used);
      if (used != pid.size() - dash - 1) throw NotFound("pair", pid);
    } catch (const std::exception&) {
      throw NotFound("pair", pid);
    }
    if (images_.size() < 2) throw NotFound("pair", pid);
    const auto& pairs = schedule_for(dim);
    if (idx >= pairs.size()) throw NotFound("pair", pid);
    r.dimension = dim;
    r.a = pairs[idx].a;
    r.b = pairs[idx].b;
    key = r.judge + "|" + pid;
  } else {
    r.dimension = eval::dimension_from_name(str("dimension"));
    auto resolve = [&](const std::string& field) {
      const std::string raw = str(field.c_str());
      if (raw.empty()) throw Error(ErrorCode::SchemaViolation, field, "missing image id");
      std::string id = raw;
      if (const auto t = token_to_image_.find(raw); t != token_to_image_.end()) id = t->second;
      const auto m = image_method_.find(id);
      if (m == image_method_.end()) throw NotFound("image", raw);
      return eval::ImageRef{id, m->second};
    };
    r.a = resolve("image_a");
    r.b = resolve("image_b");
    key = r.judge + "|" + std::string(eval::dimension_name(r.dimension)) + "|" + r.a.id + "|" + r.b.id;
    if (body.contains("timestamp")) key += "|" + body.at("timestamp").dump();
  }
  r.validate();
  if (verdict_keys_.count(key)) throw Duplicate("verdict already recorded for " + key);
  std::int64_t ts = 0;
  for (const auto& x : records_) ts = std::max(ts, x.timestamp);
  r.timestamp = ts + 1;
  if (body.contains("timestamp")) {
    if (!body.at("timestamp").is_number_integer()) throw Error(ErrorCode::SchemaViolation, "timestamp");
    r.timestamp = body.at("timestamp").get<std::int64_t>();
  }
  records_.push_back(r);
  verdict_keys_.insert(key);
  if (!opts_.state_dir.empty()) {
    const fs::path file = fs::path(opts_.state_dir) / "eval" / "records.jsonl";
    std::FILE* f = std::fopen(file.string().c_str(), "ab");
    if (f) {
      const std::string line = Json{{"key", key}, {"record", eval::record_to_json(r)}}.dump() + "\n";
      std::fwrite(line.data(), 1, line.size(), f);
      std::fclose(f);
    }
  }
  return r;
}

Json Service::leaderboard() const {
  std::lock_guard lock(eval_mutex_);
  std::vector<std::string> methods;
  for (const auto& [m, _] : images_) methods.push_back(m);
  Json j = eval::rank_methods(records_, methods).to_json();
  return Json{{"records", records_.size()}, {"dimensions", j}};
}

std::size_t Service::record_count() const {
  std::lock_guard lock(eval_mutex_);
  return records_.size();
}

std::optional<std::string> Service::image_id_for_token(const std::string& token) const {
  std::lock_guard lock(eval_mutex_);
  const auto it = token_to_image_.find(token);
  if (it == token_to_image_.end()) return std::nullopt;
  return it->second;
}

// ---- HTTP -----------------------------------------------------------------------

struct ApiServer::Impl {
  Service& service;
  httplib::Server server;
  std::thread thread;

  explicit Impl(Service& s) : service(s) { routes(); }

  static void send_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static std::optional<std::int64_t> base_revision(const httplib::Request& req, const Json& body) {
    if (body.is_object() && body.contains("base_revision")) {
      if (!body.at("base_revision").is_number_integer()) {
        throw Error(ErrorCode::SchemaViolation, "base_revision", "expected an integer");
      }
      return body.at("base_revision").get<std::int64_t>();
    }
    if (req.has_param("base_revision")) {
      try {
        return std::stoll(req.get_param_value("base_revision"));
      } catch (const std::exception&) {
        throw Error(ErrorCode::SchemaViolation, "base_revision", "expected an integer");
      }
    }
    return std::nullopt;
  }

  static Json parse_body(const httplib::Request& req, bool allow_empty) {
    if (req.body.empty()) {
      if (allow_empty) return Json::object();
      throw Error(ErrorCode::SchemaViolation, "body", "empty request body");
    }
    try {
      return Json::parse(req.body);
    } catch (const nlohmann::json::parse_error&) {
      throw Error(ErrorCode::SchemaViolation, "body", "request body is not JSON");
    }
  }

  static Json outcome_json(const Session& s, const CommandOutcome& o) {
    return Json{{"session", s.id},
                {"revision", o.revision},
                {"diff", o.diff},
                {"warnings", o.warnings},
                {"applied", o.applied}};
  }

  /// Wraps a handler with the error -> status mapping.
  template <typename Fn>
  httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const RevisionConflict& e) {
        send_json(res, 409, {{"error", "RevisionConflict"}, {"detail", std::to_string(e.current)},
                             {"message", e.what()}, {"revision", e.current}});
      } catch (const NotFound& e) {
        send_json(res, 404, {{"error", "NotFound"}, {"detail", e.id}, {"message", e.what()}});
      } catch (const Duplicate& e) {
        send_json(res, 409, {{"error", "Duplicate"}, {"detail", ""}, {"message", e.what()}});
      } catch (const Error& e) {
        send_json(res, http_status(e.code()),
                  {{"error", to_string(e.code())}, {"detail", e.detail()}, {"message", e.what()}});
      } catch (const std::exception& e) {
        send_json(res, 500, {{"error", "Internal"}, {"detail", ""}, {"message", e.what()}});
      }
    };
  }

  std::shared_ptr<Session> session(const httplib::Request& req) {
    const std::string id = req.matches[1];
    auto s = service.find(id);
    if (!s) throw NotFound("session", id);
    return s;
  }

  void routes() {
    server.Get("/healthz", guarded([this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"status", "ok"}, {"sessions", service.session_ids().size()}});
    }));
    server.Get("/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"sessions", service.session_ids()}});
    }));
    server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = service.create_session(parse_body(req, false));
      std::lock_guard lock(s->mutex);
      send_json(res, 201, {{"id", s->id},
                           {"revision", s->doc.revision},
                           {"instances", s->doc.instances.size()},
                           {"scene", "/sessions/" + s->id + "/scene"}});
    }));
    server.Get(R"(/sessions/([^/]+)/scene)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = session(req);
      const bool glb = req.get_param_value("format") == "glb" ||
                       req.get_header_value("Accept").find("model/gltf-binary") != std::string::npos;
      std::lock_guard lock(s->mutex);
      res.set_header("X-Majutsu-Revision", std::to_string(s->doc.revision));
      if (glb) {
        const auto bytes = scene::export_gltf(s->doc);
        res.status = 200;
        res.set_content(std::string(bytes.begin(), bytes.end()), "model/gltf-binary");
      } else {
        send_json(res, 200, scene::document_to_json(s->doc));
      }
    }));
    server.Post(R"(/sessions/([^/]+)/commands)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = session(req);
      Json command;
      Json body = Json::object();
      const std::string type = req.get_header_value("Content-Type");
      if (type.rfind("text/plain", 0) == 0) {
        command = req.body;
      } else {
        body = parse_body(req, false);
        if (body.is_string()) command = body;
        else if (body.is_object() && body.contains("command")) command = body.at("command");
        else if (body.is_object() && body.contains("op")) command = body;
        else throw Error(ErrorCode::SchemaViolation, "command", "expected command text or an EditCommand");
      }
      if (!command.is_string() && !command.is_object()) {
        throw Error(ErrorCode::SchemaViolation, "command", "expected command text or an EditCommand");
      }
      const auto out = service.apply(*s, command, base_revision(req, body));
      send_json(res, 200, outcome_json(*s, out));
    }));
    server.Post(R"(/sessions/([^/]+)/(undo|redo))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = session(req);
      const Json body = parse_body(req, true);
      const auto base = base_revision(req, body);
      const auto out = req.matches[2] == "undo" ? service.undo(*s, base) : service.redo(*s, base);
      send_json(res, 200, outcome_json(*s, out));
    }));
    server.Get(R"(/sessions/([^/]+)/events)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = session(req);
      std::int64_t since = 0;
      double timeout = 25.0;
      try {
        if (req.has_param("since")) since = std::stoll(req.get_param_value("since"));
        if (req.has_param("timeout")) timeout = std::min(60.0, std::stod(req.get_param_value("timeout")));
      } catch (const std::exception&) {
        throw Error(ErrorCode::SchemaViolation, "since", "since and timeout must be numbers");
      }
      send_json(res, 200, service.events(*s, since, timeout));
    }));
    server.Post("/eval/images", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const Json body = parse_body(req, false);
      if (!body.is_object() || !body.contains("methods") || !body.at("methods").is_object()) {
        throw Error(ErrorCode::SchemaViolation, "methods", "expected {\"methods\": {method: [image ids]}}");
      }
      std::map<std::string, std::vector<std::string>> images;
      try {
        images = body.at("methods").get<std::map<std::string, std::vector<std::string>>>();
      } catch (const nlohmann::json::exception&) {
        throw Error(ErrorCode::SchemaViolation, "methods", "image lists must hold strings");
      }
      service.register_images(images);
      Json tokens = Json::object();
      for (const auto& [m, ids] : images)
        for (const auto& id : ids) tokens[id] = image_token(id);
      send_json(res, 200, {{"registered", tokens.size()}, {"tokens", tokens}});
    }));
    server.Get("/eval/schedule", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string dim = req.has_param("dimension") ? req.get_param_value("dimension") : "SVC";
      const std::string judge = req.has_param("judge") ? req.get_param_value("judge") : "anonymous";
      send_json(res, 200, service.schedule(eval::dimension_from_name(dim), judge));
    }));
    server.Post("/eval/verdicts", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto r = service.submit_verdict(parse_body(req, false));
      send_json(res, 201, {{"record", eval::record_to_json(r)},
                           {"methods", {{"A", r.a.method}, {"B", r.b.method}}},
                           {"records", service.record_count()}});
    }));
    server.Get("/eval/leaderboard", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const Json board = service.leaderboard();
      if (req.get_param_value("format") == "jsonl") {
        std::string lines;
        for (const auto& [dim, rows] : board.at("dimensions").items()) {
          for (Json row : rows) {
            row["dimension"] = dim;
            lines += row.dump() + "\n";
          }
        }
        res.status = 200;
        res.set_content(lines, "application/x-ndjson");
        return;
      }
      send_json(res, 200, board);
    }));
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) {
        res.set_content(Json{{"error", "NotFound"}, {"detail", ""}, {"message", "no such route"}}.dump(),
                        "application/json");
      }
    });
  }
};

ApiServer::ApiServer(Service& service) : impl_(std::make_unique<Impl>(service)) {}

ApiServer::~ApiServer() { stop(); }

int ApiServer::start(const std::string& host, int port) {
  if (port == 0) {
    port_ = impl_->server.bind_to_any_port(host);
  } else {
    if (!impl_->server.bind_to_port(host, port)) port_ = -1;
    else port_ = port;
  }
  if (port_ < 0) throw Error(ErrorCode::ConfigError, host + ":" + std::to_string(port), "cannot bind");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port_;
}

bool ApiServer::listen(const std::string& host, int port) {
  port_ = port;
  return impl_->server.listen(host, port);
}

void ApiServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace majutsu::orchestrator
