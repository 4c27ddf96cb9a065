#pragma once

// Chat-format fine-tuning dataset export, tolerant parsing of the model's
// stringified-mapping answers, retry-until-parseable querying, and mapping
// of predicted metadata rows back onto catalog artworks.

#include <algorithm>
#include <array>
#include <cctype>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "curator/corpus.hpp"
#include "curator/curation.hpp"
#include "curator/embedding.hpp"
#include "curator/errors.hpp"
#include "curator/http_transport.hpp"

namespace curator {

inline constexpr std::string_view kCuratorSystemPrompt =
    "ArtCurator is a factual chatbot that is an expert in JSON format and in artworks and exhibitions from The "
    "Metropolitan Museum of Art.";

inline constexpr std::string_view kNoneValue = "None";

/// Python-style repr of an ASCII string: single quotes unless the text
/// contains a single quote and no double quote.
inline std::string python_repr(std::string_view s) {
  const bool has_single = s.find('\'') != std::string_view::npos;
  const bool has_double = s.find('"') != std::string_view::npos;
  const char q = (has_single && !has_double) ? '"' : '\'';
  std::string out(1, q);
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c == q) out.push_back('\\');
        out.push_back(c);
    }
  }
  out.push_back(q);
  return out;
}

/// One cell of the assistant table: values joined by '|', or "None".
inline std::string table_cell(const std::vector<std::string>& values) {
  if (values.empty()) return std::string(kNoneValue);
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += '|';
    s += values[i];
  }
  return s;
}

/// The stringified mapping of six lists, one entry per artwork, wrapped in
/// literal double quotes.
inline std::string assistant_content(const std::vector<const ArtworkRecord*>& artworks) {
  std::string s = "\"{";
  for (std::size_t fi = 0; fi < kFieldCount; ++fi) {
    if (fi) s += ", ";
    s += python_repr(kFieldNames[fi]);
    s += ": [";
    for (std::size_t a = 0; a < artworks.size(); ++a) {
      if (a) s += ", ";
      s += python_repr(table_cell(artworks[a]->fields[fi]));
    }
    s += ']';
  }
  s += "}\"";
  return s;
}

struct ChatMessage {
  std::string role;
  std::string content;
  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatExample {
  std::string system_content;
  std::string user_content;
  std::string assistant_content;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json msgs = nlohmann::ordered_json::array();
    msgs.push_back({{"role", "system"}, {"content", system_content}});
    msgs.push_back({{"role", "user"}, {"content", user_content}});
    msgs.push_back({{"role", "assistant"}, {"content", assistant_content}});
    nlohmann::ordered_json j;
    j["messages"] = std::move(msgs);
    return j;
  }
};

inline ChatExample make_chat_example(const ExhibitionRecord& ex) {
  return {std::string(kCuratorSystemPrompt), ex.prompt_text, assistant_content(ex.artworks)};
}

struct ExportStats {
  std::size_t written = 0;
  std::size_t skipped = 0;
  std::vector<std::string> diagnostics;
};

/// One JSON object per line for every training exhibition, in corpus order.
inline ExportStats export_finetune_jsonl(const std::vector<ExhibitionRecord>& exhibitions, const DatasetSplit& split,
                                         std::ostream& out) {
  if (split.train.empty()) throw ConfigError("export_finetune_jsonl: empty training split");
  std::vector<std::size_t> order = split.train;
  std::sort(order.begin(), order.end());
  ExportStats stats;
  for (auto i : order) {
    if (i >= exhibitions.size()) throw ConfigError("export_finetune_jsonl: split index out of range");
    const auto& ex = exhibitions[i];
    if (ex.artworks.empty()) {
      ++stats.skipped;
      stats.diagnostics.push_back("exhibition '" + ex.title + "' skipped: no artworks");
      continue;
    }
    out << make_chat_example(ex).to_json().dump() << '\n';
    ++stats.written;
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Parsing model output

/// The model's text could not be turned into a rectangular table. Signals
/// the retry policy to ask again.
class ParseFailure : public ParseError {
 public:
  using ParseError::ParseError;
};

/// One predicted artwork: per field, its values (empty for "None").
using PredictedRow = std::array<std::vector<std::string>, kFieldCount>;

struct ParsedPrediction {
  std::vector<PredictedRow> rows;
};

namespace detail {

/// Recursive-descent reader for the subset of Python literals / JSON the
/// model emits: dicts, lists, quoted strings, None/null, bare numbers.
class LiteralReader {
 public:
  struct Value {
    enum class Kind { none, string, list, dict } kind = Kind::none;
    std::string text;
    std::vector<Value> items;
    std::vector<std::pair<std::string, Value>> entries;
  };

  explicit LiteralReader(std::string_view s) : s_(s) {}

  Value parse_document() {
    skip_ws();
    Value v = parse_value(0);
    skip_ws();
    if (pos_ != s_.size()) fail("trailing characters");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw ParseFailure("unparseable prediction at offset " + std::to_string(pos_) + ": " + why);
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Value parse_value(int depth) {
    if (depth > 8) fail("nesting too deep");
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end");
    const char c = s_[pos_];
    if (c == '{') return parse_dict(depth);
    if (c == '[') return parse_list(depth);
    if (c == '\'' || c == '"') return {Value::Kind::string, parse_string(), {}, {}};
    return parse_bare();
  }

  Value parse_dict(int depth) {
    ++pos_;
    Value v;
    v.kind = Value::Kind::dict;
    if (eat('}')) return v;
    for (;;) {
      skip_ws();
      if (pos_ >= s_.size() || (s_[pos_] != '\'' && s_[pos_] != '"')) fail("expected a quoted key");
      std::string key = parse_string();
      if (!eat(':')) fail("expected ':'");
      v.entries.emplace_back(std::move(key), parse_value(depth + 1));
      if (eat(',')) {
        if (eat('}')) return v;
        continue;
      }
      if (eat('}')) return v;
      fail("expected ',' or '}'");
    }
  }

  Value parse_list(int depth) {
    ++pos_;
    Value v;
    v.kind = Value::Kind::list;
    if (eat(']')) return v;
    for (;;) {
      v.items.push_back(parse_value(depth + 1));
      if (eat(',')) {
        if (eat(']')) return v;
        continue;
      }
      if (eat(']')) return v;
      fail("expected ',' or ']'");
    }
  }

  std::string parse_string() {
    const char q = s_[pos_++];
    std::string out;
    while (pos_ < s_.size()) {
      const char c = s_[pos_++];
      if (c == q) return out;
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      if (pos_ >= s_.size()) break;
      const char e = s_[pos_++];
      switch (e) {
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case 'r': out.push_back('\r'); break;
        case 'u': {
          if (pos_ + 4 > s_.size()) fail("short \\u escape");
          const auto cp = std::stoul(std::string(s_.substr(pos_, 4)), nullptr, 16);
          pos_ += 4;
          if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
          } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
          } else {
            out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
          }
          break;
        }
        default: out.push_back(e);
      }
    }
    fail("unterminated string");
  }

  Value parse_bare() {
    const auto start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
                                s_[pos_] == '-' || s_[pos_] == '+' || s_[pos_] == '_')) {
      ++pos_;
    }
    const auto word = s_.substr(start, pos_ - start);
    if (word.empty()) fail("unexpected character");
    if (word == "None" || word == "null") return {};
    return {Value::Kind::string, std::string(word), {}, {}};
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

/// Removes code fences and one layer of outer quoting.
inline std::string unwrap_prediction_text(std::string_view text) {
  auto s = trim(text);
  if (s.starts_with("```")) {
    const auto nl = s.find('\n');
    s = nl == std::string_view::npos ? std::string_view{} : s.substr(nl + 1);
    if (const auto fence = s.rfind("```"); fence != std::string_view::npos) s = s.substr(0, fence);
    s = trim(s);
  }
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    // Either a JSON-encoded string or plain quotes around a literal.
    try {
      const auto inner = nlohmann::json::parse(s);
      if (inner.is_string()) return std::string(trim(inner.get<std::string>()));
    } catch (const nlohmann::json::exception&) {
    }
    return std::string(trim(s.substr(1, s.size() - 2)));
  }
  if (s.size() >= 2 && s.front() == '\'' && s.back() == '\'' && trim(s.substr(1)).starts_with("{")) {
    return std::string(trim(s.substr(1, s.size() - 2)));
  }
  return std::string(s);
}

}  // namespace detail

/// Accepts strict JSON and the quasi-literal mapping syntax. Keys that are
/// not one of the six field names are ignored; a missing field reads as a
/// column of "None". At least one field must be present and all present
/// lists must have the same length.
inline ParsedPrediction parse_prediction(std::string_view text) {
  using Value = detail::LiteralReader::Value;
  const std::string body = detail::unwrap_prediction_text(text);
  if (body.empty() || body.front() != '{') throw ParseFailure("prediction is not a mapping");
  const Value doc = detail::LiteralReader(body).parse_document();
  if (doc.kind != Value::Kind::dict) throw ParseFailure("prediction is not a mapping");

  std::array<const Value*, kFieldCount> columns{};
  std::optional<std::size_t> length;
  for (const auto& [key, value] : doc.entries) {
    const auto f = field_from_name(key);
    if (!f) continue;
    if (value.kind != Value::Kind::list) throw ParseFailure("field '" + key + "' is not a list");
    if (length && *length != value.items.size()) {
      throw ParseFailure("ragged table: '" + key + "' has " + std::to_string(value.items.size()) + " rows, expected " +
                         std::to_string(*length));
    }
    length = value.items.size();
    columns[index_of(*f)] = &value;
  }
  if (!length) throw ParseFailure("prediction has none of the six field lists");

  ParsedPrediction out;
  out.rows.resize(*length);
  for (Field f : kAllFields) {
    const Value* col = columns[index_of(f)];
    if (!col) continue;
    for (std::size_t r = 0; r < *length; ++r) {
      const Value& cell = col->items[r];
      if (cell.kind == Value::Kind::none) continue;
      if (cell.kind != Value::Kind::string) throw ParseFailure("non-scalar cell in '" + std::string(field_name(f)) + "'");
      if (cell.text.empty() || cell.text == kNoneValue) continue;
      auto& slot = out.rows[r][index_of(f)];
      if (is_multi_valued(f)) slot = split_multi_value(cell.text);
      else slot.push_back(cell.text);
    }
  }
  return out;
}

inline PredictedRow row_of(const ArtworkRecord& a) { return a.fields; }

// ---------------------------------------------------------------------------
// Remote chat model

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  /// Returns the first choice's message content. Throws ProviderError on
  /// transport failure.
  virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
};

struct ChatClientConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model;  // the fine-tuned model id
  std::string api_key;
  std::size_t max_attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
  std::chrono::milliseconds max_backoff{30000};
};

/// POST {model, messages} to {base_url}/chat/completions.
class HttpChatClient final : public ChatClient {
 public:
  HttpChatClient(std::shared_ptr<HttpTransport> transport, ChatClientConfig config, Sleeper sleep = real_sleeper())
      : transport_(std::move(transport)), config_(std::move(config)), sleep_(std::move(sleep)) {}

  std::string complete(const std::vector<ChatMessage>& messages) override {
    nlohmann::json body;
    body["model"] = config_.model;
    body["messages"] = nlohmann::json::array();
    for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    const std::string payload = body.dump();
    HttpHeaders headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
    const std::string url = config_.base_url + "/chat/completions";
    return with_retries<std::string>(
        config_.max_attempts, config_.initial_backoff, config_.max_backoff, sleep_,
        [&](std::size_t attempt, std::string& last_error) -> std::optional<std::string> {
          HttpResponse res;
          try {
            res = transport_->post_json(url, payload, headers);
          } catch (const TransportError& e) {
            last_error = e.what();
            return std::nullopt;
          }
          if (res.status == 429 || res.status >= 500) {
            last_error = "chat endpoint returned HTTP " + std::to_string(res.status);
            return std::nullopt;
          }
          if (res.status != 200) {
            throw ProviderError("chat endpoint returned HTTP " + std::to_string(res.status) + ": " + res.body, attempt);
          }
          try {
            const auto doc = nlohmann::json::parse(res.body);
            return doc.at("choices").at(0).at("message").at("content").get<std::string>();
          } catch (const nlohmann::json::exception& e) {
            throw ProviderError(std::string("chat response malformed: ") + e.what(), attempt);
          }
        });
  }

 private:
  std::shared_ptr<HttpTransport> transport_;
  ChatClientConfig config_;
  Sleeper sleep_;
};

/// Every attempt produced unparseable text.
class ExhaustedError : public Error {
 public:
  ExhaustedError(std::size_t attempts, std::string last_raw)
      : Error("no parseable prediction after " + std::to_string(attempts) + " attempt(s)"),
        attempts_(attempts),
        last_raw_(std::move(last_raw)) {}

  std::size_t attempts() const noexcept { return attempts_; }
  const std::string& last_raw() const noexcept { return last_raw_; }

 private:
  std::size_t attempts_;
  std::string last_raw_;
};

struct QueryResult {
  ParsedPrediction prediction;
  std::size_t attempts = 0;
  std::string raw;
};

inline std::vector<ChatMessage> curator_messages(const std::string& prompt_text) {
  return {{"system", std::string(kCuratorSystemPrompt)}, {"user", prompt_text}};
}

/// Reissues the identical request until the answer parses.
inline QueryResult query_finetuned(const std::string& prompt_text, ChatClient& client, std::size_t max_attempts) {
  if (max_attempts == 0) throw ConfigError("query_finetuned: max_attempts must be >= 1");
  const auto messages = curator_messages(prompt_text);
  std::string raw;
  for (std::size_t attempt = 1; attempt <= max_attempts; ++attempt) {
    raw = client.complete(messages);
    try {
      return {parse_prediction(raw), attempt, raw};
    } catch (const ParseFailure&) {
    }
  }
  throw ExhaustedError(max_attempts, std::move(raw));
}

struct MappingResult {
  std::vector<ObjectId> object_ids;
  std::size_t out_of_vocabulary = 0;  // predicted values dropped
};

/// Per-field relative frequencies of the in-vocabulary predicted values,
/// merged into one vector aligned to the vocabulary.
inline TagProbabilityVector prediction_probabilities(const ParsedPrediction& pred, const TagVocabulary& vocab,
                                                     std::size_t* out_of_vocabulary = nullptr) {
  TagProbabilityVector p{std::vector<double>(vocab.size(), 0.0)};
  for (Field f : kAllFields) {
    std::vector<std::size_t> hits;
    for (const auto& row : pred.rows) {
      for (const auto& v : row[index_of(f)]) {
        if (auto i = vocab.find(v)) hits.push_back(*i);
        else if (out_of_vocabulary) ++*out_of_vocabulary;
      }
    }
    for (auto i : hits) p.values[i] += 1.0 / static_cast<double>(hits.size());
  }
  return p;
}

/// Ranks the catalog with the hit score of prediction_probabilities;
/// k = number of predicted rows.
inline MappingResult map_prediction_to_artworks(const ParsedPrediction& pred, const TagVocabulary& vocab,
                                                const HitScorer& scorer) {
  MappingResult result;
  const auto p = prediction_probabilities(pred, vocab, &result.out_of_vocabulary);
  const bool any = std::any_of(p.values.begin(), p.values.end(), [](double x) { return x > 0.0; });
  if (!any || pred.rows.empty()) return result;
  result.object_ids = select_topk(scorer.top_k(p, pred.rows.size()), pred.rows.size());
  return result;
}

inline MappingResult map_prediction_to_artworks(const ParsedPrediction& pred, const TagVocabulary& vocab,
                                                const Catalog& catalog) {
  return map_prediction_to_artworks(pred, vocab, HitScorer(vocab, catalog));
}

// ---------------------------------------------------------------------------
// Fine-tuning job contract (not exercised offline)

struct FineTuneJobParams {
  std::string base_model = "gpt-4o-mini-2024-07-18";
  std::size_t batch_size = 16;
  double learning_rate_multiplier = 0.3;
  std::optional<std::size_t> n_epochs;
  std::string suffix = "art-curator";
};

inline nlohmann::json fine_tune_job_request(const FineTuneJobParams& params, const std::string& training_file_id,
                                            const std::optional<std::string>& validation_file_id = std::nullopt) {
  nlohmann::json body;
  body["model"] = params.base_model;
  body["training_file"] = training_file_id;
  if (validation_file_id) body["validation_file"] = *validation_file_id;
  body["suffix"] = params.suffix;
  body["hyperparameters"]["batch_size"] = params.batch_size;
  body["hyperparameters"]["learning_rate_multiplier"] = params.learning_rate_multiplier;
  if (params.n_epochs) body["hyperparameters"]["n_epochs"] = *params.n_epochs;
  return body;
}

/// Creates a fine-tuning job for an already uploaded JSONL file; returns the job id.
inline std::string create_fine_tune_job(HttpTransport& transport, const std::string& base_url, const std::string& api_key,
                                        const FineTuneJobParams& params, const std::string& training_file_id) {
  HttpHeaders headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
  const auto res = transport.post_json(base_url + "/fine_tuning/jobs",
                                       fine_tune_job_request(params, training_file_id).dump(), headers);
  if (res.status != 200) throw ProviderError("fine-tuning job creation returned HTTP " + std::to_string(res.status), 1);
  return nlohmann::json::parse(res.body).at("id").get<std::string>();
}

}  // namespace curator
