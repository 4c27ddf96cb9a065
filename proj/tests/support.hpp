#pragma once

// Shared test helpers: temp directories, network stubs, small fixtures.

#include <atomic>
#include <deque>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "curator/curator.hpp"
#include "curator/engine.hpp"
#include "curator/http_transport.hpp"

namespace curator::testing {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    const auto base = std::filesystem::temp_directory_path();
    for (;;) {
      path_ = base / ("curator-test-" + std::to_string(rd()) + std::to_string(rd()));
      if (std::filesystem::create_directory(path_)) break;
    }
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Thrown by FailingTransport; deliberately not a TransportError so that no
/// retry loop can swallow it.
class UnexpectedNetworkUse : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Counts and rejects every request.
class FailingTransport final : public HttpTransport {
 public:
  HttpResponse post_json(const std::string& url, const std::string&, const HttpHeaders&) override {
    ++calls_;
    throw UnexpectedNetworkUse("network call attempted: " + url);
  }
  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  std::atomic<std::size_t> calls_{0};
};

/// Replays a script of responses; an entry with status < 0 throws
/// TransportError instead.
class ScriptedTransport final : public HttpTransport {
 public:
  struct Request {
    std::string url, body;
    HttpHeaders headers;
  };

  void push(int status, std::string body) {
    std::lock_guard lock(mu_);
    script_.push_back({status, std::move(body)});
  }

  HttpResponse post_json(const std::string& url, const std::string& body, const HttpHeaders& headers) override {
    std::lock_guard lock(mu_);
    requests_.push_back({url, body, headers});
    if (script_.empty()) throw std::logic_error("scripted transport exhausted");
    auto r = script_.front();
    script_.pop_front();
    if (r.status < 0) throw TransportError("scripted connection failure");
    return r;
  }

  const std::vector<Request>& requests() const { return requests_; }

 private:
  std::mutex mu_;
  std::deque<HttpResponse> script_;
  std::vector<Request> requests_;
};

/// Chat client that replays canned answers.
class ScriptedChatClient final : public ChatClient {
 public:
  explicit ScriptedChatClient(std::vector<std::string> answers) : answers_(std::move(answers)) {}
  std::string complete(const std::vector<ChatMessage>& messages) override {
    seen_.push_back(messages);
    if (next_ >= answers_.size()) throw std::logic_error("scripted chat client exhausted");
    return answers_[next_++];
  }
  std::size_t calls() const noexcept { return next_; }
  const std::vector<std::vector<ChatMessage>>& seen() const noexcept { return seen_; }

 private:
  std::vector<std::string> answers_;
  std::size_t next_ = 0;
  std::vector<std::vector<ChatMessage>> seen_;
};

inline Sleeper no_sleep(std::vector<std::chrono::milliseconds>* log = nullptr) {
  return [log](std::chrono::milliseconds d) {
    if (log) log->push_back(d);
  };
}

inline ArtworkRecord make_artwork(ObjectId id, std::string department, std::vector<std::string> artists,
                                  std::string date, std::string medium, std::vector<std::string> classes,
                                  std::vector<std::string> tags) {
  ArtworkRecord a;
  a.object_id = id;
  if (!department.empty()) a.values(Field::department).push_back(std::move(department));
  a.values(Field::artist_display_name) = std::move(artists);
  if (!date.empty()) a.values(Field::object_begin_date).push_back(std::move(date));
  if (!medium.empty()) a.values(Field::medium).push_back(std::move(medium));
  a.values(Field::classification) = std::move(classes);
  a.values(Field::tags) = std::move(tags);
  return a;
}

inline std::string catalog_csv(const std::vector<ArtworkRecord>& records) {
  std::ostringstream s;
  write_artwork_catalog(s, records);
  return s.str();
}

inline Catalog make_catalog(std::vector<ArtworkRecord> records) { return Catalog(std::move(records)); }

inline ExhibitionRecord make_exhibition(const Catalog& catalog, const std::vector<ObjectId>& ids,
                                        std::string title = "T", std::string overview = "O") {
  ExhibitionRecord ex;
  ex.title = std::move(title);
  ex.overview_text = std::move(overview);
  ex.prompt_text = make_prompt_text(ex.title, ex.overview_text);
  for (auto id : ids) ex.artworks.push_back(catalog.find(id));
  return ex;
}

/// Writes catalog.csv / exhibitions.json into `dir` and returns a matching
/// local-provider config with artifacts under `dir`/artifacts.
inline EngineConfig write_corpus(const std::filesystem::path& dir, const std::vector<ArtworkRecord>& artworks,
                                 const std::string& exhibitions_json) {
  {
    std::ofstream csv(dir / "catalog.csv", std::ios::binary);
    write_artwork_catalog(csv, artworks);
    std::ofstream json(dir / "exhibitions.json", std::ios::binary);
    json << exhibitions_json;
  }
  EngineConfig cfg;
  cfg.catalog_csv = dir / "catalog.csv";
  cfg.exhibitions_json = dir / "exhibitions.json";
  cfg.artifacts_dir = dir / "artifacts";
  cfg.provider.kind = "local";
  cfg.provider.local_dim = 64;
  return cfg;
}

/// Random catalog over a pool of `n_tags` strings spread across the six
/// fields, with some strings shared between fields.
struct RandomCatalog {
  std::vector<ArtworkRecord> records;
  std::vector<std::string> pool;
};

inline RandomCatalog random_catalog(Rng& rng, std::size_t rows, std::size_t n_tags) {
  RandomCatalog rc;
  for (std::size_t i = 0; i < n_tags; ++i) rc.pool.push_back("t" + std::to_string(i));
  for (std::size_t r = 0; r < rows; ++r) {
    ArtworkRecord a;
    a.object_id = static_cast<ObjectId>(1000 + 3 * r + uniform_index(rng, 3));
    for (Field f : kAllFields) {
      const auto n = is_multi_valued(f) ? uniform_index(rng, 4) : uniform_index(rng, 2);
      for (std::uint64_t k = 0; k < n; ++k) a.values(f).push_back(rc.pool[uniform_index(rng, rc.pool.size())]);
    }
    rc.records.push_back(std::move(a));
  }
  return rc;
}

}  // namespace curator::testing
