#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>

#include "majutsu/providers.hpp"

namespace majutsu::providers {

namespace {

struct Url {
  std::string host;
  int port = 80;
  std::string path;
};

Url parse_url(const std::string& url) {
  constexpr std::string_view scheme = "http://";
  if (url.rfind(scheme, 0) != 0) throw Error(ErrorCode::ConfigError, url, "provider URLs must use http://");
  const std::string rest = url.substr(scheme.size());
  const std::size_t slash = rest.find('/');
  const std::string authority = rest.substr(0, slash);
  Url u;
  u.path = slash == std::string::npos ? "/" : rest.substr(slash);
  const std::size_t colon = authority.rfind(':');
  if (colon == std::string::npos) {
    u.host = authority;
  } else {
    u.host = authority.substr(0, colon);
    try {
      u.port = std::stoi(authority.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError, url, "bad port");
    }
  }
  if (u.host.empty()) throw Error(ErrorCode::ConfigError, url, "missing host");
  return u;
}

}  // namespace

Json post_json(const std::string& url, const Json& body, const ProviderConfig& cfg) {
  const Url u = parse_url(url);
  httplib::Client client(u.host, u.port);
  const auto secs = static_cast<time_t>(cfg.timeout_s);
  const auto usecs = static_cast<time_t>((cfg.timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  const std::string payload = body.dump();
  std::string last_failure = "no attempt";
  for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
    if (attempt > 0) {
      const double wait = std::min(cfg.backoff_max_s, cfg.backoff_initial_s * std::pow(2.0, attempt - 1));
      std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    }
    auto res = client.Post(u.path, payload, "application/json");
    if (!res) {
      last_failure = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_failure = "status " + std::to_string(res->status);
      continue;
    }
    if (res->status >= 400 || res->status < 200) {
      throw Error(ErrorCode::InvalidProviderOutput, "status " + std::to_string(res->status), res->body);
    }
    try {
      return Json::parse(res->body);
    } catch (const nlohmann::json::parse_error&) {
      throw Error(ErrorCode::InvalidProviderOutput, "json", "provider reply is not JSON");
    }
  }
  throw Error(ErrorCode::ProviderUnavailable, url,
              "gave up after " + std::to_string(cfg.retries + 1) + " attempts: " + last_failure);
}

}  // namespace majutsu::providers
