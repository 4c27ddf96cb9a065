#pragma once

// Minimal JSON-over-HTTP POST abstraction so remote clients can be swapped
// for stubs in tests.

#include <chrono>
#include <map>
#include <memory>
#include <string>

#include <httplib.h>

#include "curator/errors.hpp"

namespace curator {

/// Connection-level failure (no HTTP status was received).
class TransportError : public Error {
 public:
  using Error::Error;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::multimap<std::string, std::string>;

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  /// POSTs a JSON body to an absolute URL. Throws TransportError when no
  /// response arrives; HTTP error statuses are returned, not thrown.
  virtual HttpResponse post_json(const std::string& url, const std::string& body, const HttpHeaders& headers) = 0;
};

struct ParsedUrl {
  std::string scheme_host_port;  // "https://api.example.com:443"
  std::string path;              // "/v1/embeddings"
};

inline ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("URL lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttplibTransport final : public HttpTransport {
 public:
  explicit HttplibTransport(std::chrono::seconds timeout = std::chrono::seconds(60)) : timeout_(timeout) {}

  HttpResponse post_json(const std::string& url, const std::string& body, const HttpHeaders& headers) override {
    const auto parts = split_url(url);
    httplib::Client client(parts.scheme_host_port);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers h(headers.begin(), headers.end());
    auto res = client.Post(parts.path, h, body, "application/json");
    if (!res) throw TransportError("POST " + url + " failed: " + httplib::to_string(res.error()));
    return {res->status, res->body};
  }

 private:
  std::chrono::seconds timeout_;
};

}  // namespace curator
