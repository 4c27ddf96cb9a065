#pragma once

// JSON HTTP API over an opened Engine:
//   POST /curate         {title, description, variant, k?} -> ranked artworks
//   GET  /artworks/{id}  -> artwork record
//   GET  /models         -> variants, availability, checkpoint metadata
//   GET  /health         -> status

#include <memory>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "curator/engine.hpp"

namespace curator {

namespace detail {

inline void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

inline void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, nlohmann::ordered_json{{"error", message}});
}

/// Validates a /curate body; returns an error message or fills `req`.
inline std::optional<std::string> read_curation_request(const std::string& body, CurationRequest& req) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error&) {
    return "body is not valid JSON";
  }
  if (!j.is_object()) return "body must be a JSON object";
  for (const char* key : {"title", "description", "variant"}) {
    if (!j.contains(key)) return std::string("missing field '") + key + "'";
    if (!j[key].is_string()) return std::string("field '") + key + "' must be a string";
  }
  req.title = j["title"].get<std::string>();
  req.description = j["description"].get<std::string>();
  req.variant = j["variant"].get<std::string>();
  if (trim_copy(req.title).empty() && trim_copy(req.description).empty()) return "title and description are both empty";
  if (!Engine::known_variant(req.variant)) return "unknown variant '" + req.variant + "'";
  if (j.contains("k") && !j["k"].is_null()) {
    if (!j["k"].is_number_integer() || j["k"].get<long long>() < 1) return "k must be a positive integer";
    req.k = j["k"].get<std::size_t>();
  }
  return std::nullopt;
}

}  // namespace detail

/// Registers the routes on `server`. The engine must outlive the server.
inline void install_routes(httplib::Server& server, const Engine& engine) {
  server.Post("/curate", [&engine](const httplib::Request& http_req, httplib::Response& res) {
    CurationRequest req;
    if (auto err = detail::read_curation_request(http_req.body, req)) return detail::send_error(res, 400, *err);
    try {
      const auto r = engine.curate(req);
      detail::send_json(res, 200, engine.response_json(r));
    } catch (const UnavailableError& e) {
      detail::send_error(res, 503, e.what());
    } catch (const ConfigError& e) {
      detail::send_error(res, 400, e.what());
    } catch (const ExhaustedError& e) {
      detail::send_error(res, 502, e.what());
    } catch (const ProviderError& e) {
      detail::send_error(res, 502, e.what());
    } catch (const std::exception& e) {
      detail::send_error(res, 500, e.what());
    }
  });

  server.Get(R"(/artworks/([^/]+))", [&engine](const httplib::Request& req, httplib::Response& res) {
    const auto id = parse_object_id(req.matches[1].str());
    if (!id) return detail::send_error(res, 400, "object id must be a positive integer");
    const auto* a = engine.catalog().find(*id);
    if (!a) return detail::send_error(res, 404, "unknown object id " + std::to_string(*id));
    detail::send_json(res, 200, artwork_payload(*a));
  });

  server.Get("/models", [&engine](const httplib::Request&, httplib::Response& res) {
    detail::send_json(res, 200, engine.models_json());
  });

  server.Get("/health", [&engine](const httplib::Request&, httplib::Response& res) {
    nlohmann::ordered_json j;
    j["status"] = "ok";
    j["catalog_size"] = engine.catalog().size();
    j["exhibitions"] = engine.corpus().exhibitions.size();
    detail::send_json(res, 200, j);
  });
}

/// "host:port" -> (host, port).
inline std::pair<std::string, int> split_bind(const std::string& bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) throw ConfigError("bind must look like host:port, got '" + bind + "'");
  int port = 0;
  try {
    port = std::stoi(bind.substr(colon + 1));
  } catch (const std::exception&) {
    throw ConfigError("bind port is not a number: '" + bind + "'");
  }
  if (port < 0 || port > 65535) throw ConfigError("bind port out of range: '" + bind + "'");
  return {bind.substr(0, colon), port};
}

}  // namespace curator
