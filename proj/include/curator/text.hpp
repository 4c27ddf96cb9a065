#pragma once

// Self-contained text vectorization: standardization, frequency-ranked token
// vocabulary, fixed-length integer sequences.

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "curator/corpus.hpp"
#include "curator/errors.hpp"

namespace curator {

inline constexpr std::size_t kDefaultMaxTokens = 32768;
inline constexpr std::size_t kSequenceLength = 256;
inline constexpr std::int32_t kPaddingId = 0;
inline constexpr std::int32_t kOutOfVocabularyId = 1;

inline bool is_ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u >= 33 && u <= 47) || (u >= 58 && u <= 64) || (u >= 91 && u <= 96) || (u >= 123 && u <= 126);
}

inline bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

/// Lowercase, drop ASCII punctuation, collapse whitespace runs, trim.
inline std::string standardize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_ascii_punct(c)) continue;
    if (is_ascii_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
  }
  return out;
}

inline std::vector<std::string> split_words(std::string_view standardized) {
  std::vector<std::string> words;
  std::size_t start = 0;
  while (start < standardized.size()) {
    auto end = standardized.find(' ', start);
    if (end == std::string_view::npos) end = standardized.size();
    if (end > start) words.emplace_back(standardized.substr(start, end - start));
    start = end + 1;
  }
  return words;
}

inline std::vector<std::string> tokenize(std::string_view text) { return split_words(standardize(text)); }

/// Token -> id map. Ids 0 and 1 are reserved for padding and unknown tokens.
class Vocabulary1D {
 public:
  Vocabulary1D() = default;

  std::size_t max_tokens() const noexcept { return max_tokens_; }
  /// Total id space including the two reserved ids.
  std::size_t size() const noexcept { return tokens_.size() + 2; }
  /// Tokens in id order starting at id 2.
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  std::int32_t id_of(std::string_view token) const {
    const auto it = ids_.find(std::string(token));
    return it == ids_.end() ? kOutOfVocabularyId : it->second;
  }

  void save(std::ostream& out) const {
    out << "vocab1d " << max_tokens_ << ' ' << tokens_.size() << '\n';
    for (const auto& t : tokens_) out << t << '\n';
  }

  static Vocabulary1D load(std::istream& in) {
    std::string tag;
    std::size_t max_tokens = 0, n = 0;
    if (!(in >> tag >> max_tokens >> n) || tag != "vocab1d") throw ParseError("token vocabulary: bad header");
    std::string line;
    std::getline(in, line);
    std::vector<std::string> tokens;
    tokens.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::getline(in, line)) throw ParseError("token vocabulary: truncated");
      tokens.push_back(line);
    }
    return from_tokens(std::move(tokens), max_tokens);
  }

  static Vocabulary1D from_tokens(std::vector<std::string> tokens, std::size_t max_tokens) {
    if (tokens.size() + 2 > max_tokens) throw ConsistencyError("token vocabulary exceeds max_tokens");
    Vocabulary1D v;
    v.max_tokens_ = max_tokens;
    v.tokens_ = std::move(tokens);
    for (std::size_t i = 0; i < v.tokens_.size(); ++i) v.ids_.emplace(v.tokens_[i], static_cast<std::int32_t>(i + 2));
    return v;
  }

 private:
  std::size_t max_tokens_ = kDefaultMaxTokens;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> ids_;
};

/// Tokens ranked by descending corpus frequency, ties lexicographic,
/// truncated to max_tokens - 2.
inline Vocabulary1D fit_vocabulary(const std::vector<std::string>& corpus, std::size_t max_tokens = kDefaultMaxTokens) {
  if (corpus.empty()) throw ConfigError("fit_vocabulary: empty corpus");
  if (max_tokens < 3) throw ConfigError("fit_vocabulary: max_tokens must leave room for one token");
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : corpus) {
    for (auto& w : tokenize(doc)) ++counts[std::move(w)];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > max_tokens - 2) ranked.resize(max_tokens - 2);
  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& [t, _] : ranked) tokens.push_back(std::move(t));
  return Vocabulary1D::from_tokens(std::move(tokens), max_tokens);
}

/// Exactly kSequenceLength ids: right-padded with 0 or truncated.
struct TokenSequence {
  std::vector<std::int32_t> ids;
  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

inline TokenSequence vectorize(std::string_view text, const Vocabulary1D& vocab, std::size_t length = kSequenceLength) {
  TokenSequence seq{std::vector<std::int32_t>(length, kPaddingId)};
  std::size_t i = 0;
  for (const auto& w : tokenize(text)) {
    if (i == length) break;
    seq.ids[i++] = vocab.id_of(w);
  }
  return seq;
}

/// Metadata of the artworks as one string: an artwork's non-empty field
/// values joined by "; ", artworks joined by " | ".
inline std::string concat_metadata_string(const std::vector<const ArtworkRecord*>& artworks) {
  std::string out;
  for (std::size_t k = 0; k < artworks.size(); ++k) {
    if (k) out += " | ";
    bool first = true;
    for (Field f : kAllFields) {
      for (const auto& v : artworks[k]->values(f)) {
        if (v.empty()) continue;
        if (!first) out += "; ";
        out += v;
        first = false;
      }
    }
  }
  return out;
}

inline std::string concat_metadata_string(const ArtworkRecord& artwork) { return concat_metadata_string({&artwork}); }

}  // namespace curator
