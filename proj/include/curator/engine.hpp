#pragma once

// Configuration, artifact layout and the request-time curator shared by the
// CLI and the HTTP API.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "curator/corpus.hpp"
#include "curator/curation.hpp"
#include "curator/embedding.hpp"
#include "curator/errors.hpp"
#include "curator/finetune.hpp"
#include "curator/http_transport.hpp"
#include "curator/neural.hpp"
#include "curator/text.hpp"
#include "curator/vecindex.hpp"

namespace curator {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration

struct ProviderProfile {
  std::string kind = "local";  // "local" | "remote"
  std::size_t local_dim = 512;
  std::uint64_t local_seed = 0;
  RemoteEmbeddingConfig remote;

  std::size_t dimension() const { return kind == "remote" ? remote.dimension : local_dim; }
};

struct EngineConfig {
  fs::path catalog_csv;
  fs::path exhibitions_json;
  fs::path artifacts_dir = "artifacts";
  std::optional<fs::path> cache_file;  // default: <artifacts>/embeddings.cache
  ProviderProfile provider;
  ChatClientConfig chat;               // m4 is available when chat.model is set
  TrainingConfig training;
  std::size_t hidden = kDefaultHiddenWidth;
  double split_ratio = 0.8;
  std::uint64_t split_seed = 42;
  IvfBuildOptions index;
  std::size_t k_out_of_sample = kOutOfSampleK;
  std::size_t nprobe = kDefaultNprobe;
  std::string bind = "127.0.0.1:8080";

  fs::path cache_path() const { return cache_file ? *cache_file : artifacts_dir / "embeddings.cache"; }
  fs::path checkpoint_path(Variant v) const { return artifacts_dir / (std::string(variant_name(v)) + ".ckpt"); }
  fs::path final_checkpoint_path(Variant v) const {
    return artifacts_dir / (std::string(variant_name(v)) + ".final.ckpt");
  }
  fs::path history_path(Variant v) const { return artifacts_dir / (std::string(variant_name(v)) + ".history.csv"); }
  fs::path token_vocab_path() const { return artifacts_dir / "m1.tokens"; }
  fs::path index_path() const { return artifacts_dir / "index.ivf"; }

  void validate() const {
    if (k_out_of_sample == 0) throw ConfigError("rank.k must be >= 1");
    if (nprobe == 0) throw ConfigError("rank.nprobe must be >= 1");
    if (provider.kind != "local" && provider.kind != "remote") {
      throw ConfigError("provider must be 'local' or 'remote', got '" + provider.kind + "'");
    }
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("split.ratio must lie in (0, 1)");
    if (training.epochs == 0 || training.batch_size == 0) throw ConfigError("train.epochs and train.batch_size must be >= 1");
  }

  /// Read roles: the catalog and exhibitions files must exist.
  void require_inputs() const {
    for (const auto& p : {catalog_csv, exhibitions_json}) {
      if (p.empty()) throw ConfigError("catalog and exhibitions paths must be configured");
      if (!fs::exists(p)) throw ConfigError("input file not found: " + p.string());
    }
  }
};

namespace detail {

inline std::string trim_copy(std::string_view s) {
  while (!s.empty() && is_ascii_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_ascii_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (!in || !in.eof()) throw ConfigError("config: '" + key + "' expects a number, got '" + value + "'");
  return out;
}

}  // namespace detail

/// Applies one `key = value` setting. Relative paths resolve against `base`.
inline void apply_setting(EngineConfig& c, const std::string& key, const std::string& value, const fs::path& base = {}) {
  using detail::parse_number;
  auto path = [&] { return fs::path(value).is_absolute() || base.empty() ? fs::path(value) : base / value; };
  auto ms = [&] { return std::chrono::milliseconds(parse_number<long long>(key, value)); };
  if (key == "catalog") c.catalog_csv = path();
  else if (key == "exhibitions") c.exhibitions_json = path();
  else if (key == "artifacts") c.artifacts_dir = path();
  else if (key == "cache") c.cache_file = path();
  else if (key == "provider") c.provider.kind = value;
  else if (key == "local.dim") c.provider.local_dim = parse_number<std::size_t>(key, value);
  else if (key == "local.seed") c.provider.local_seed = parse_number<std::uint64_t>(key, value);
  else if (key == "remote.base_url") c.provider.remote.base_url = value;
  else if (key == "remote.model") c.provider.remote.model = value;
  else if (key == "remote.dim") c.provider.remote.dimension = parse_number<std::size_t>(key, value);
  else if (key == "remote.batch_size") c.provider.remote.batch_size = parse_number<std::size_t>(key, value);
  else if (key == "remote.max_attempts") c.provider.remote.max_attempts = parse_number<std::size_t>(key, value);
  else if (key == "remote.backoff_ms") c.provider.remote.initial_backoff = ms();
  else if (key == "chat.base_url") c.chat.base_url = value;
  else if (key == "chat.model") c.chat.model = value;
  else if (key == "chat.max_attempts") c.chat.max_attempts = parse_number<std::size_t>(key, value);
  else if (key == "chat.backoff_ms") c.chat.initial_backoff = ms();
  else if (key == "train.epochs") c.training.epochs = parse_number<std::size_t>(key, value);
  else if (key == "train.batch_size") c.training.batch_size = parse_number<std::size_t>(key, value);
  else if (key == "train.learning_rate") c.training.adam.learning_rate = parse_number<double>(key, value);
  else if (key == "train.seed") c.training.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "train.hidden") c.hidden = parse_number<std::size_t>(key, value);
  else if (key == "split.ratio") c.split_ratio = parse_number<double>(key, value);
  else if (key == "split.seed") c.split_seed = parse_number<std::uint64_t>(key, value);
  else if (key == "index.nlist") c.index.nlist = parse_number<std::size_t>(key, value);
  else if (key == "index.iters") c.index.kmeans_iters = parse_number<std::size_t>(key, value);
  else if (key == "index.seed") c.index.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "rank.k") c.k_out_of_sample = parse_number<std::size_t>(key, value);
  else if (key == "rank.nprobe") c.nprobe = parse_number<std::size_t>(key, value);
  else if (key == "bind") c.bind = value;
  else throw ConfigError("config: unknown key '" + key + "'");
}

/// `key = value` lines; blank lines and lines starting with '#' are ignored.
inline EngineConfig parse_config(std::istream& in, const fs::path& base = {}, EngineConfig c = {}) {
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto t = detail::trim_copy(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(n) + ": expected key = value");
    const auto key = detail::trim_copy(std::string_view(t).substr(0, eq));
    const auto value = detail::trim_copy(std::string_view(t).substr(eq + 1));
    apply_setting(c, key, value, base);
  }
  return c;
}

inline EngineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in, path.parent_path());
}

using EnvLookup = std::function<std::optional<std::string>(const char*)>;

inline EnvLookup process_env() {
  return [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    return v ? std::optional<std::string>(v) : std::nullopt;
  };
}

/// CURATOR_API_KEY feeds both remote clients; CURATOR_BIND the listen address.
inline void apply_env_overrides(EngineConfig& c, const EnvLookup& env = process_env()) {
  if (auto key = env("CURATOR_API_KEY")) {
    c.provider.remote.api_key = *key;
    c.chat.api_key = *key;
  }
  if (auto bind = env("CURATOR_BIND")) c.bind = *bind;
}

// ---------------------------------------------------------------------------
// Corpus loading

struct CorpusBundle {
  explicit CorpusBundle(Catalog c) : catalog(std::move(c)) {}

  Catalog catalog;
  std::vector<ExhibitionRecord> exhibitions;
  TagVocabulary vocab;
  DatasetSplit split;
  std::size_t skipped_rows = 0;
  std::size_t unresolved_object_ids = 0;
  std::size_t dropped_exhibitions = 0;
  std::vector<std::string> diagnostics;
};

/// Reads the catalog and exhibitions; exhibitions point into the returned
/// catalog, so the bundle stays on the heap.
inline std::unique_ptr<CorpusBundle> load_corpus(std::istream& catalog_csv, std::istream& exhibitions_json,
                                                 double split_ratio, std::uint64_t split_seed) {
  auto parsed = parse_artwork_catalog(catalog_csv);
  auto bundle = std::make_unique<CorpusBundle>(Catalog(std::move(parsed.records)));
  bundle->skipped_rows = parsed.skipped_rows;
  bundle->diagnostics = std::move(parsed.diagnostics);
  auto ex = parse_exhibitions(exhibitions_json, bundle->catalog);
  bundle->exhibitions = std::move(ex.exhibitions);
  bundle->unresolved_object_ids = ex.unresolved_object_ids;
  bundle->dropped_exhibitions = ex.dropped_exhibitions;
  for (auto& d : ex.diagnostics) bundle->diagnostics.push_back(std::move(d));
  if (bundle->exhibitions.empty()) throw ConfigError("no exhibition resolved against the catalog");
  bundle->vocab = build_tag_vocabulary(bundle->exhibitions);
  bundle->split = split_dataset(bundle->exhibitions.size(), split_ratio, split_seed);
  return bundle;
}

inline std::unique_ptr<CorpusBundle> load_corpus(const EngineConfig& config) {
  config.require_inputs();
  std::ifstream csv(config.catalog_csv, std::ios::binary);
  std::ifstream json(config.exhibitions_json, std::ios::binary);
  if (!csv || !json) throw ConfigError("cannot open catalog or exhibitions file");
  return load_corpus(csv, json, config.split_ratio, config.split_seed);
}

// ---------------------------------------------------------------------------
// Providers

/// Embedding provider for the configured profile. Remote profiles need a
/// transport and an API key.
inline std::shared_ptr<EmbeddingProvider> make_provider(const EngineConfig& config,
                                                        std::shared_ptr<HttpTransport> transport,
                                                        Sleeper sleep = real_sleeper()) {
  if (config.provider.kind == "local") {
    return std::make_shared<LocalEmbeddingProvider>(config.provider.local_dim, config.provider.local_seed);
  }
  if (config.provider.remote.api_key.empty()) throw ConfigError("remote provider needs CURATOR_API_KEY");
  if (!transport) transport = std::make_shared<HttplibTransport>();
  return std::make_shared<RemoteEmbeddingProvider>(std::move(transport), config.provider.remote, std::move(sleep));
}

inline std::shared_ptr<CachedEmbedder> make_embedder(const EngineConfig& config, std::shared_ptr<HttpTransport> transport,
                                                     Sleeper sleep = real_sleeper()) {
  auto provider = make_provider(config, std::move(transport), std::move(sleep));
  fs::create_directories(config.cache_path().parent_path().empty() ? fs::path(".") : config.cache_path().parent_path());
  auto cache = std::make_shared<EmbeddingCache>(config.cache_path());
  return std::make_shared<CachedEmbedder>(std::move(provider), std::move(cache));
}

// ---------------------------------------------------------------------------
// Training and index pipelines

inline std::vector<std::string> prompts_of(const std::vector<ExhibitionRecord>& exhibitions,
                                           const std::vector<std::size_t>& indices) {
  std::vector<std::string> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(exhibitions[i].prompt_text);
  return out;
}

inline std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

/// Inputs and targets for one variant over every exhibition.
inline std::vector<Example> build_examples(Variant variant, const CorpusBundle& corpus, const Vocabulary1D* tokens,
                                           CachedEmbedder* embedder) {
  const auto& exs = corpus.exhibitions;
  std::vector<Example> data(exs.size());
  if (takes_tokens(variant)) {
    if (!tokens) throw ConfigError("m1 needs a token vocabulary");
    for (std::size_t i = 0; i < exs.size(); ++i) data[i].input = vectorize(exs[i].prompt_text, *tokens);
  } else {
    if (!embedder) throw ConfigError(std::string(variant_name(variant)) + " needs an embedding provider");
    auto inputs = embedder->embed_many(prompts_of(exs, all_indices(exs.size())));
    for (std::size_t i = 0; i < exs.size(); ++i) data[i].input = std::move(inputs[i]);
  }
  if (variant == Variant::m3_embed_to_embed) {
    std::vector<std::string> metadata;
    metadata.reserve(exs.size());
    for (const auto& ex : exs) metadata.push_back(concat_metadata_string(ex.artworks));
    auto targets = embedder->embed_many(metadata);
    for (std::size_t i = 0; i < exs.size(); ++i) data[i].target = std::move(targets[i]);
  } else {
    for (std::size_t i = 0; i < exs.size(); ++i) data[i].target = flatten_exhibition_target(exs[i], corpus.vocab).values;
  }
  return data;
}

struct TrainRun {
  TrainingResult result;
  ModelSpec spec;
};

/// Trains one variant and writes <variant>.ckpt (best validation),
/// <variant>.final.ckpt, <variant>.history.csv and, for m1, m1.tokens.
inline TrainRun train_variant(const EngineConfig& config, const CorpusBundle& corpus, Variant variant,
                              CachedEmbedder* embedder, std::function<void(std::size_t, const EpochLoss&)> on_epoch = {}) {
  fs::create_directories(config.artifacts_dir);
  std::optional<Vocabulary1D> tokens;
  ModelSpec spec;
  if (takes_tokens(variant)) {
    tokens = fit_vocabulary(prompts_of(corpus.exhibitions, corpus.split.train), kDefaultMaxTokens);
    std::ofstream out(config.token_vocab_path(), std::ios::binary);
    tokens->save(out);
    if (!out) throw Error("cannot write " + config.token_vocab_path().string());
    spec = ModelSpec::m1(tokens->size(), corpus.vocab.size(), kTokenEmbeddingDim, config.hidden);
  } else if (variant == Variant::m2_embed_to_tags) {
    spec = ModelSpec::m2(embedder->dimension(), corpus.vocab.size(), config.hidden);
  } else {
    spec = ModelSpec::m3(embedder->dimension(), embedder->dimension(), config.hidden);
  }
  const auto data = build_examples(variant, corpus, tokens ? &*tokens : nullptr, embedder);
  auto model = Model::initialized(spec, config.training.seed);
  TrainOptions opts;
  opts.best_checkpoint = config.checkpoint_path(variant);
  opts.final_checkpoint = config.final_checkpoint_path(variant);
  opts.on_epoch = std::move(on_epoch);
  TrainRun run{train(model, data, corpus.split, config.training, opts), spec};
  std::ofstream hist(config.history_path(variant));
  run.result.history.write_csv(hist);
  return run;
}

/// Metadata embeddings of every catalog artwork.
inline FlatStore embed_catalog(const Catalog& catalog, CachedEmbedder& embedder, std::size_t batch = 512) {
  FlatStore store(embedder.dimension());
  std::vector<std::string> texts;
  for (std::size_t start = 0; start < catalog.size(); start += batch) {
    const auto end = std::min(catalog.size(), start + batch);
    texts.clear();
    for (std::size_t r = start; r < end; ++r) texts.push_back(concat_metadata_string(catalog[r]));
    const auto vecs = embedder.embed_many(texts);
    for (std::size_t r = start; r < end; ++r) store.add(catalog[r].object_id, vecs[r - start]);
  }
  return store;
}

inline IvfFlatIndex build_catalog_index(const EngineConfig& config, const Catalog& catalog, CachedEmbedder& embedder) {
  const auto store = embed_catalog(catalog, embedder);
  auto index = build_index(store, config.index);
  fs::create_directories(config.artifacts_dir);
  save_index(config.index_path(), index);
  embedder.cache().flush();
  return index;
}

// ---------------------------------------------------------------------------
// Request-time curation

inline constexpr std::array<std::string_view, 4> kServedVariants = {"m1", "m2", "m3", "m4"};

struct CurationRequest {
  std::string title;
  std::string description;
  std::string variant = "m2";
  std::optional<std::size_t> k;
};

struct ScoredArtwork {
  std::size_t row = 0;
  double score = 0.0;  // hit value (m1, m2, m4) or squared distance (m3)
};

struct CurationResponse {
  std::string variant;
  std::size_t k = 0;
  double elapsed_ms = 0.0;
  std::vector<ScoredArtwork> artworks;
  std::size_t attempts = 0;  // m4 only
};

/// An artwork as served: the six fields as lists plus title and image.
inline nlohmann::ordered_json artwork_payload(const ArtworkRecord& a) {
  nlohmann::ordered_json o;
  o["object_id"] = a.object_id;
  o["title"] = a.title ? nlohmann::ordered_json(*a.title) : nlohmann::ordered_json(nullptr);
  o["object_name"] = a.object_name ? nlohmann::ordered_json(*a.object_name) : nlohmann::ordered_json(nullptr);
  nlohmann::ordered_json fields = nlohmann::ordered_json::object();
  for (Field f : kAllFields) fields[std::string(field_name(f))] = a.values(f);
  o["fields"] = std::move(fields);
  o["public_image_url"] = a.public_image_url ? nlohmann::ordered_json(*a.public_image_url) : nlohmann::ordered_json(nullptr);
  return o;
}

class UnavailableError : public Error {
 public:
  using Error::Error;
};

struct VariantStatus {
  bool available = false;
  std::string reason;                // when unavailable
  std::optional<ModelSpec> spec;     // m1-m3
  fs::path checkpoint;
};

struct EngineDeps {
  std::shared_ptr<HttpTransport> transport;  // null: real HTTP client when a remote role needs it
  Sleeper sleeper = real_sleeper();
  std::shared_ptr<ChatClient> chat;          // overrides the configured m4 client
};

/// Immutable after open(); curate() may be called concurrently.
class Engine {
 public:
  static std::unique_ptr<Engine> open(const EngineConfig& config, EngineDeps deps = {}) {
    return open(config, load_corpus(config), std::move(deps));
  }

  static std::unique_ptr<Engine> open(const EngineConfig& config, std::unique_ptr<CorpusBundle> corpus,
                                      EngineDeps deps = {}) {
    config.validate();
    std::unique_ptr<Engine> e(new Engine(config, std::move(corpus)));
    e->load_artifacts(std::move(deps));
    return e;
  }

  const EngineConfig& config() const noexcept { return config_; }
  const CorpusBundle& corpus() const noexcept { return *corpus_; }
  const Catalog& catalog() const noexcept { return corpus_->catalog; }
  const TagVocabulary& vocab() const noexcept { return corpus_->vocab; }
  const HitScorer& scorer() const noexcept { return *scorer_; }
  const VariantStatus& status(std::string_view variant) const {
    const auto it = status_.find(std::string(variant));
    if (it == status_.end()) throw ConfigError("unknown variant '" + std::string(variant) + "'");
    return it->second;
  }
  static bool known_variant(std::string_view v) {
    return std::find(kServedVariants.begin(), kServedVariants.end(), v) != kServedVariants.end();
  }

  /// Ranked catalog rows for a prompt. m4 returns its native length (one
  /// artwork per predicted row) regardless of k.
  std::vector<ScoredArtwork> rank(std::string_view variant, const std::string& prompt_text, std::size_t k,
                                  std::size_t* attempts = nullptr) const {
    if (k == 0) throw ConfigError("k must be >= 1");
    const auto& st = status(variant);
    if (!st.available) throw UnavailableError(std::string(variant) + " unavailable: " + st.reason);
    std::vector<ScoredArtwork> out;
    if (variant == "m1" || variant == "m2") {
      const auto& model = variant == "m1" ? *m1_ : *m2_;
      const auto p = predict_tags(model, prompt_text, encoder_);
      for (const auto& h : scorer_->top_k(p, k)) out.push_back({h.row, h.hit});
    } else if (variant == "m3") {
      const auto input = encoder_.encode(Variant::m3_embed_to_embed, prompt_text);
      const auto y = forward(*m3_, input);
      for (const auto& n : curate_m3(y, *index_, k, config_.nprobe)) out.push_back({n.row, n.distance});
    } else {
      const auto q = query_finetuned(prompt_text, *chat_, config_.chat.max_attempts);
      if (attempts) *attempts = q.attempts;
      const auto mapped = map_prediction_to_artworks(q.prediction, corpus_->vocab, *scorer_);
      const auto hits = scorer_->scores(prediction_probabilities(q.prediction, corpus_->vocab));
      for (auto id : mapped.object_ids) {
        const auto row = *catalog().row_of(id);
        out.push_back({row, hits[row]});
      }
    }
    return out;
  }

  CurationResponse curate(const CurationRequest& req) const {
    const auto start = std::chrono::steady_clock::now();
    if (!known_variant(req.variant)) throw ConfigError("unknown variant '" + req.variant + "'");
    if (detail::trim_copy(req.title).empty() && detail::trim_copy(req.description).empty()) {
      throw ConfigError("title and description are both empty");
    }
    CurationResponse r;
    r.variant = req.variant;
    r.k = req.k.value_or(config_.k_out_of_sample);
    r.artworks = rank(req.variant, make_prompt_text(req.title, req.description), r.k, &r.attempts);
    if (r.artworks.size() > r.k) r.artworks.resize(r.k);
    r.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return r;
  }

  nlohmann::ordered_json response_json(const CurationResponse& r) const {
    nlohmann::ordered_json j;
    j["variant"] = r.variant;
    j["k"] = r.k;
    j["elapsed_ms"] = r.elapsed_ms;
    if (r.variant == "m4") j["attempts"] = r.attempts;
    j["artworks"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < r.artworks.size(); ++i) {
      auto a = artwork_payload(catalog()[r.artworks[i].row]);
      a["rank"] = i + 1;
      a["score"] = r.artworks[i].score;
      j["artworks"].push_back(std::move(a));
    }
    return j;
  }

  nlohmann::ordered_json models_json() const {
    nlohmann::ordered_json j;
    j["catalog_size"] = catalog().size();
    j["tag_vocabulary_size"] = vocab().size();
    j["default_k"] = config_.k_out_of_sample;
    j["nprobe"] = config_.nprobe;
    j["variants"] = nlohmann::ordered_json::array();
    for (auto v : kServedVariants) {
      const auto& st = status(v);
      nlohmann::ordered_json m;
      m["variant"] = v;
      m["available"] = st.available;
      if (!st.available) m["reason"] = st.reason;
      if (st.spec) {
        m["input_dim"] = st.spec->input_dim;
        m["output_dim"] = st.spec->output_dim();
        m["hidden"] = st.spec->layers.front().out_dim;
        m["checkpoint"] = st.checkpoint.string();
      }
      if (v == "m3" && index_) {
        m["index"] = {{"nlist", index_->nlist()}, {"size", index_->size()}, {"dim", index_->dim()}};
      }
      if (v == "m4" && st.available) m["model"] = config_.chat.model;
      j["variants"].push_back(std::move(m));
    }
    return j;
  }

 private:
  Engine(EngineConfig config, std::unique_ptr<CorpusBundle> corpus)
      : config_(std::move(config)), corpus_(std::move(corpus)) {
    scorer_ = std::make_unique<HitScorer>(corpus_->vocab, corpus_->catalog);
  }

  void load_artifacts(EngineDeps deps) {
    try {
      embedder_ = make_embedder(config_, deps.transport, deps.sleeper);
      encoder_.embedder = embedder_.get();
    } catch (const ConfigError& e) {
      embedder_error_ = e.what();
    }

    auto load_model = [&](Variant v, std::size_t expected_out) -> std::unique_ptr<Model> {
      auto& st = status_[std::string(variant_name(v))];
      st.checkpoint = config_.checkpoint_path(v);
      if (!fs::exists(st.checkpoint)) {
        st.reason = "checkpoint " + st.checkpoint.string() + " not found";
        return nullptr;
      }
      auto m = std::make_unique<Model>(load_checkpoint(st.checkpoint));
      st.spec = m->spec();
      if (m->spec().variant != v) {
        st.reason = "checkpoint holds " + std::string(variant_name(m->spec().variant));
        return nullptr;
      }
      if (m->spec().output_dim() != expected_out) {
        st.reason = "checkpoint output width " + std::to_string(m->spec().output_dim()) + " does not match " +
                    std::to_string(expected_out);
        return nullptr;
      }
      if (!takes_tokens(v)) {
        if (!embedder_) {
          st.reason = "no embedding provider: " + embedder_error_;
          return nullptr;
        }
        if (m->spec().input_dim != embedder_->dimension()) {
          st.reason = "checkpoint input width does not match the provider profile";
          return nullptr;
        }
      }
      return m;
    };

    m1_ = load_model(Variant::m1_selfcontained, vocab().size());
    if (m1_) {
      std::ifstream in(config_.token_vocab_path(), std::ios::binary);
      if (!in) {
        status_["m1"].reason = "token vocabulary " + config_.token_vocab_path().string() + " not found";
        m1_.reset();
      } else {
        tokens_ = Vocabulary1D::load(in);
        encoder_.tokens = &*tokens_;
        if (tokens_->size() != m1_->spec().input_dim) {
          status_["m1"].reason = "token vocabulary does not match the checkpoint";
          m1_.reset();
        }
      }
    }
    status_["m1"].available = static_cast<bool>(m1_);

    m2_ = load_model(Variant::m2_embed_to_tags, vocab().size());
    status_["m2"].available = static_cast<bool>(m2_);

    const std::size_t emb_dim = embedder_ ? embedder_->dimension() : config_.provider.dimension();
    m3_ = load_model(Variant::m3_embed_to_embed, emb_dim);
    if (m3_) {
      if (!fs::exists(config_.index_path())) {
        status_["m3"].reason = "index " + config_.index_path().string() + " not found";
        m3_.reset();
      } else {
        index_ = std::make_unique<IvfFlatIndex>(load_index(config_.index_path()));
        if (index_->dim() != emb_dim) {
          status_["m3"].reason = "index dimension does not match the provider profile";
          m3_.reset();
        }
      }
    }
    status_["m3"].available = static_cast<bool>(m3_);

    auto& m4 = status_["m4"];
    if (deps.chat) {
      chat_ = std::move(deps.chat);
    } else if (!config_.chat.model.empty()) {
      auto transport = deps.transport ? deps.transport : std::make_shared<HttplibTransport>();
      chat_ = std::make_shared<HttpChatClient>(std::move(transport), config_.chat, deps.sleeper);
    }
    m4.available = static_cast<bool>(chat_);
    if (!chat_) m4.reason = "no fine-tuned chat model configured (chat.model)";
  }

  EngineConfig config_;
  std::unique_ptr<CorpusBundle> corpus_;
  std::unique_ptr<HitScorer> scorer_;
  std::shared_ptr<CachedEmbedder> embedder_;
  std::string embedder_error_;
  std::optional<Vocabulary1D> tokens_;
  PromptEncoder encoder_;
  std::unique_ptr<Model> m1_, m2_, m3_;
  std::unique_ptr<IvfFlatIndex> index_;
  std::shared_ptr<ChatClient> chat_;
  std::map<std::string, VariantStatus, std::less<>> status_;
};

/// Validation-split evaluation through the engine (k = exhibition size).
inline EvaluationReport evaluate_variant(const Engine& engine, std::string_view variant) {
  const CuratorFn curator = [&](const ExhibitionRecord& ex, std::size_t k) {
    std::vector<ObjectId> ids;
    for (const auto& s : engine.rank(variant, ex.prompt_text, k)) ids.push_back(engine.catalog()[s.row].object_id);
    return ids;
  };
  return evaluate_model(curator, engine.corpus().exhibitions, engine.corpus().split, engine.catalog(),
                        std::string(variant));
}

}  // namespace curator
