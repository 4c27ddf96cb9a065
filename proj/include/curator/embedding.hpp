#pragma once

// Text embeddings: the deterministic local hashing embedder, the remote
// provider client, and the persistent content-keyed cache that every
// provider call goes through.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "curator/binary_io.hpp"
#include "curator/errors.hpp"
#include "curator/http_transport.hpp"
#include "curator/text.hpp"

namespace curator {

using EmbeddingVector = std::vector<double>;

inline constexpr std::size_t kRemoteEmbeddingDim = 3072;

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Feature hashing over word unigrams and bigrams of the standardized text,
/// signed +-1 accumulation, scaled to unit norm. Texts without tokens map
/// to the zero vector.
inline EmbeddingVector local_deterministic_embed(std::string_view text, std::size_t dim, std::uint64_t seed) {
  if (dim < 8) throw ConfigError("local embedder: dim must be at least 8");
  EmbeddingVector v(dim, 0.0);
  std::string seed_bytes(8, '\0');
  for (int i = 0; i < 8; ++i) seed_bytes[static_cast<std::size_t>(i)] = static_cast<char>((seed >> (8 * i)) & 0xFF);
  const std::uint64_t seeded = fnv1a64(seed_bytes);

  auto add = [&](std::string_view feature) {
    const std::uint64_t h = fnv1a64(feature, seeded);
    const auto slot = static_cast<std::size_t>(h % dim);
    v[slot] += (h >> 63) ? -1.0 : 1.0;
  };
  const auto words = tokenize(text);
  for (std::size_t i = 0; i < words.size(); ++i) {
    add(words[i]);
    if (i + 1 < words.size()) add(words[i] + ' ' + words[i + 1]);
  }
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (sq > 0.0) {
    const double inv = 1.0 / std::sqrt(sq);
    for (double& x : v) x *= inv;
  }
  return v;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

// ---------------------------------------------------------------------------
// Providers

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string provider_id() const = 0;
  virtual std::string model_id() const = 0;
  virtual std::size_t dimension() const = 0;
  /// True when embed_batch may touch the network.
  virtual bool is_remote() const = 0;
  virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) = 0;
};

class LocalEmbeddingProvider final : public EmbeddingProvider {
 public:
  LocalEmbeddingProvider(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim < 8) throw ConfigError("local embedder: dim must be at least 8");
  }

  std::string provider_id() const override { return "local"; }
  std::string model_id() const override {
    return "hash-ngram-v1/d" + std::to_string(dim_) + "/s" + std::to_string(seed_);
  }
  std::size_t dimension() const override { return dim_; }
  bool is_remote() const override { return false; }

  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(local_deterministic_embed(t, dim_, seed_));
    return out;
  }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

struct RemoteEmbeddingConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "text-embedding-3-large";
  std::size_t dimension = kRemoteEmbeddingDim;
  std::string api_key;
  std::size_t batch_size = 64;
  std::size_t max_attempts = 5;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::milliseconds max_backoff{30000};
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline Sleeper real_sleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

/// Calls `attempt` until it returns, doubling the delay after each
/// retryable failure. `attempt` signals a retryable failure by returning
/// std::nullopt and filling `last_error`.
template <typename T, typename Attempt>
T with_retries(std::size_t max_attempts, std::chrono::milliseconds initial_backoff,
               std::chrono::milliseconds max_backoff, const Sleeper& sleep, Attempt&& attempt) {
  std::string last_error = "no attempt made";
  auto delay = initial_backoff;
  for (std::size_t n = 1; n <= max_attempts; ++n) {
    if (auto r = attempt(n, last_error)) return std::move(*r);
    if (n < max_attempts) {
      sleep(delay);
      delay = std::min(max_backoff, delay * 2);
    }
  }
  throw ProviderError(last_error, max_attempts);
}

/// HTTP client for an embeddings endpoint: POST {model, input: [...]} to
/// {base_url}/embeddings, reading {data: [{index, embedding}]}.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
 public:
  RemoteEmbeddingProvider(std::shared_ptr<HttpTransport> transport, RemoteEmbeddingConfig config,
                          Sleeper sleep = real_sleeper())
      : transport_(std::move(transport)), config_(std::move(config)), sleep_(std::move(sleep)) {
    if (config_.batch_size == 0 || config_.max_attempts == 0) throw ConfigError("remote embedder: zero batch or attempts");
  }

  std::string provider_id() const override { return "remote:" + config_.base_url; }
  std::string model_id() const override { return config_.model; }
  std::size_t dimension() const override { return config_.dimension; }
  bool is_remote() const override { return true; }

  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t start = 0; start < texts.size(); start += config_.batch_size) {
      const auto chunk = texts.subspan(start, std::min(config_.batch_size, texts.size() - start));
      auto vectors = request(chunk);
      for (auto& v : vectors) out.push_back(std::move(v));
    }
    return out;
  }

 private:
  std::vector<EmbeddingVector> request(std::span<const std::string> chunk) {
    nlohmann::json body;
    body["model"] = config_.model;
    body["input"] = std::vector<std::string>(chunk.begin(), chunk.end());
    const std::string payload = body.dump();
    HttpHeaders headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
    const std::string url = config_.base_url + "/embeddings";

    return with_retries<std::vector<EmbeddingVector>>(
        config_.max_attempts, config_.initial_backoff, config_.max_backoff, sleep_,
        [&](std::size_t attempt, std::string& last_error) -> std::optional<std::vector<EmbeddingVector>> {
          HttpResponse res;
          try {
            res = transport_->post_json(url, payload, headers);
          } catch (const TransportError& e) {
            last_error = e.what();
            return std::nullopt;
          }
          if (res.status == 429 || res.status >= 500) {
            last_error = "embeddings endpoint returned HTTP " + std::to_string(res.status);
            return std::nullopt;
          }
          if (res.status != 200) {
            throw ProviderError("embeddings endpoint returned HTTP " + std::to_string(res.status) + ": " + res.body,
                                attempt);
          }
          return parse_response(res.body, chunk.size());
        });
  }

  std::vector<EmbeddingVector> parse_response(const std::string& body, std::size_t expected) const {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      throw ProviderError(std::string("embeddings response is not JSON: ") + e.what(), 1);
    }
    if (!doc.contains("data") || !doc["data"].is_array() || doc["data"].size() != expected) {
      throw ProviderError("embeddings response lacks a data array of the request's size", 1);
    }
    std::vector<EmbeddingVector> out(expected);
    for (const auto& item : doc["data"]) {
      const auto index = item.value("index", std::size_t{0});
      if (index >= expected || !item.contains("embedding")) throw ProviderError("embeddings response item malformed", 1);
      auto v = item["embedding"].get<std::vector<double>>();
      if (v.size() != config_.dimension) {
        throw DimensionError("embedding dimension " + std::to_string(v.size()) + " does not match profile dimension " +
                             std::to_string(config_.dimension));
      }
      out[index] = std::move(v);
    }
    return out;
  }

  std::shared_ptr<HttpTransport> transport_;
  RemoteEmbeddingConfig config_;
  Sleeper sleep_;
};

// ---------------------------------------------------------------------------
// Cache

inline std::array<unsigned char, 32> sha256(std::string_view bytes) {
  std::array<unsigned char, 32> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1 || len != 32) {
    throw Error("SHA-256 computation failed");
  }
  return digest;
}

/// Persistent store keyed by (provider id, model id, SHA-256 of the exact
/// text). Vectors are kept as 32-bit floats; a hit returns exactly the bits
/// that were stored.
///
/// File layout (little-endian):
///   header   "CURECACH" (8 bytes), u8 version
///   record*  u8 'R', str provider, str model, 32-byte digest, u32 dim, f32[dim]
///   footer   u8 'F', u64 count, u64 offset[count], u64 footer_offset, "CURECIDX"
/// Records are only ever appended; the footer is rewritten on flush. A file
/// whose footer is missing (e.g. after a crash) is recovered by scanning.
class EmbeddingCache {
 public:
  static constexpr std::string_view kMagic = "CURECACH";
  static constexpr std::string_view kFooterMagic = "CURECIDX";
  static constexpr std::uint8_t kVersion = 1;

  /// In-memory cache with no backing file.
  EmbeddingCache() = default;

  explicit EmbeddingCache(std::filesystem::path path) : path_(std::move(path)) { open(); }

  ~EmbeddingCache() {
    try {
      flush();
    } catch (...) {
    }
  }

  EmbeddingCache(const EmbeddingCache&) = delete;
  EmbeddingCache& operator=(const EmbeddingCache&) = delete;

  std::optional<EmbeddingVector> lookup(const std::string& provider, const std::string& model, std::string_view text) {
    const auto k = key(provider, model, text);
    std::lock_guard lock(mutex_);
    const auto it = entries_.find(k);
    if (it == entries_.end()) return std::nullopt;
    ++hits_;
    return widen(it->second);
  }

  /// Stores the vector (narrowed to f32) and returns the stored value.
  EmbeddingVector store(const std::string& provider, const std::string& model, std::string_view text,
                        const EmbeddingVector& v) {
    std::vector<float> narrowed(v.begin(), v.end());
    for (float x : narrowed) {
      if (!std::isfinite(x)) throw ConsistencyError("refusing to cache a non-finite embedding");
    }
    const auto k = key(provider, model, text);
    std::lock_guard lock(mutex_);
    if (auto it = entries_.find(k); it != entries_.end()) return widen(it->second);
    if (file_.is_open()) append_record(provider, model, k.substr(k.size() - 32), narrowed);
    auto [it, _] = entries_.emplace(k, std::move(narrowed));
    return widen(it->second);
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
  }
  std::size_t hits() const {
    std::lock_guard lock(mutex_);
    return hits_;
  }

  /// Writes the index footer. Called automatically on destruction.
  void flush() {
    std::lock_guard lock(mutex_);
    if (!file_.is_open() || !dirty_) return;
    file_.seekp(static_cast<std::streamoff>(records_end_));
    io::write_le<std::uint8_t>(file_, 'F');
    io::write_le<std::uint64_t>(file_, offsets_.size());
    for (auto off : offsets_) io::write_le<std::uint64_t>(file_, off);
    io::write_le<std::uint64_t>(file_, records_end_);
    file_.write(kFooterMagic.data(), static_cast<std::streamsize>(kFooterMagic.size()));
    file_.flush();
    const auto end = static_cast<std::uint64_t>(file_.tellp());
    file_.close();
    std::filesystem::resize_file(path_, end);
    file_.open(path_, std::ios::in | std::ios::out | std::ios::binary);
    dirty_ = false;
  }

 private:
  static std::string key(const std::string& provider, const std::string& model, std::string_view text) {
    const auto d = sha256(text);
    std::string k = provider;
    k.push_back('\0');
    k += model;
    k.push_back('\0');
    k.append(reinterpret_cast<const char*>(d.data()), d.size());
    return k;
  }

  static EmbeddingVector widen(const std::vector<float>& v) { return EmbeddingVector(v.begin(), v.end()); }

  void open() {
    if (!std::filesystem::exists(path_)) {
      if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
      std::ofstream out(path_, std::ios::binary);
      out.write(kMagic.data(), static_cast<std::streamsize>(kMagic.size()));
      io::write_le<std::uint8_t>(out, kVersion);
      if (!out) throw ConfigError("cannot create embedding cache " + path_.string());
    }
    file_.open(path_, std::ios::in | std::ios::out | std::ios::binary);
    if (!file_) throw ConfigError("cannot open embedding cache " + path_.string());
    io::expect_magic(file_, kMagic);
    const auto version = io::read_le<std::uint8_t>(file_);
    if (version != kVersion) throw ParseError("embedding cache version " + std::to_string(version) + " unsupported");
    const std::uint64_t header_end = kMagic.size() + 1;

    // Scanning is authoritative; the footer only tells us where records end.
    file_.seekg(0, std::ios::end);
    const auto file_end = static_cast<std::uint64_t>(file_.tellg());
    std::uint64_t scan_limit = file_end;
    if (file_end >= header_end + 16 + kFooterMagic.size()) {
      file_.seekg(static_cast<std::streamoff>(file_end - kFooterMagic.size() - 8));
      const auto footer_offset = io::read_le<std::uint64_t>(file_);
      std::string trailer(kFooterMagic.size(), '\0');
      file_.read(trailer.data(), static_cast<std::streamsize>(trailer.size()));
      if (trailer == kFooterMagic && footer_offset >= header_end && footer_offset < file_end) scan_limit = footer_offset;
    }
    file_.clear();
    file_.seekg(static_cast<std::streamoff>(header_end));
    records_end_ = header_end;
    while (records_end_ < scan_limit) {
      try {
        file_.seekg(static_cast<std::streamoff>(records_end_));
        if (io::read_le<std::uint8_t>(file_) != 'R') break;
        const auto provider = io::read_string(file_, 1u << 16);
        const auto model = io::read_string(file_, 1u << 16);
        std::string digest(32, '\0');
        if (!file_.read(digest.data(), 32)) break;
        const auto dim = io::read_le<std::uint32_t>(file_);
        if (dim > (1u << 20)) break;
        std::vector<float> v(dim);
        for (auto& x : v) x = io::read_le<float>(file_);
        std::string k = provider;
        k.push_back('\0');
        k += model;
        k.push_back('\0');
        k += digest;
        entries_.emplace(std::move(k), std::move(v));
        offsets_.push_back(records_end_);
        records_end_ = static_cast<std::uint64_t>(file_.tellg());
      } catch (const ParseError&) {
        break;  // truncated tail record
      }
    }
    file_.clear();
    if (scan_limit != records_end_ || scan_limit == file_end) dirty_ = true;  // footer absent or stale
  }

  void append_record(const std::string& provider, const std::string& model, const std::string& digest,
                     const std::vector<float>& v) {
    file_.seekp(static_cast<std::streamoff>(records_end_));
    io::write_le<std::uint8_t>(file_, 'R');
    io::write_string(file_, provider);
    io::write_string(file_, model);
    file_.write(digest.data(), 32);
    io::write_le<std::uint32_t>(file_, static_cast<std::uint32_t>(v.size()));
    for (float x : v) io::write_le<float>(file_, x);
    if (!file_) throw Error("failed to append to embedding cache " + path_.string());
    offsets_.push_back(records_end_);
    records_end_ = static_cast<std::uint64_t>(file_.tellp());
    dirty_ = true;
  }

  std::filesystem::path path_;
  std::fstream file_;
  std::uint64_t records_end_ = 0;
  std::vector<std::uint64_t> offsets_;
  bool dirty_ = false;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::vector<float>> entries_;
  std::size_t hits_ = 0;
};

/// Provider + cache. Identical (provider, model, text) always yields the
/// bit-identical cached vector.
class CachedEmbedder {
 public:
  CachedEmbedder(std::shared_ptr<EmbeddingProvider> provider, std::shared_ptr<EmbeddingCache> cache)
      : provider_(std::move(provider)), cache_(std::move(cache)) {
    if (!provider_ || !cache_) throw ConfigError("CachedEmbedder needs a provider and a cache");
  }

  std::size_t dimension() const { return provider_->dimension(); }
  const EmbeddingProvider& provider() const { return *provider_; }
  EmbeddingCache& cache() { return *cache_; }

  EmbeddingVector embed_text(const std::string& text) {
    auto v = embed_many({text});
    return std::move(v.front());
  }

  std::vector<EmbeddingVector> embed_many(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out(texts.size());
    std::vector<std::string> misses;
    std::unordered_map<std::string, std::vector<std::size_t>> miss_slots;
    const auto pid = provider_->provider_id();
    const auto mid = provider_->model_id();
    for (std::size_t i = 0; i < texts.size(); ++i) {
      if (trimmed_empty(texts[i])) {
        throw ConfigError("embed_text: text is empty");
      }
      if (auto hit = cache_->lookup(pid, mid, texts[i])) {
        out[i] = std::move(*hit);
        continue;
      }
      auto& slots = miss_slots[texts[i]];
      if (slots.empty()) misses.push_back(texts[i]);
      slots.push_back(i);
    }
    if (!misses.empty()) {
      auto fresh = provider_->embed_batch(misses);
      if (fresh.size() != misses.size()) throw ConsistencyError("provider returned the wrong number of vectors");
      for (std::size_t m = 0; m < misses.size(); ++m) {
        if (fresh[m].size() != provider_->dimension()) {
          throw DimensionError("provider returned dimension " + std::to_string(fresh[m].size()) + ", profile says " +
                               std::to_string(provider_->dimension()));
        }
        auto stored = cache_->store(pid, mid, misses[m], fresh[m]);
        for (auto slot : miss_slots[misses[m]]) out[slot] = stored;
      }
    }
    return out;
  }

 private:
  static bool trimmed_empty(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return is_ascii_space(c); });
  }

  std::shared_ptr<EmbeddingProvider> provider_;
  std::shared_ptr<EmbeddingCache> cache_;
};

}  // namespace curator
