#pragma once

// Catalog and exhibitions ingestion, generalized-tag vocabulary, probability
// flattening of exhibition targets and dataset splits.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "curator/csv.hpp"
#include "curator/errors.hpp"
#include "curator/fields.hpp"
#include "curator/random.hpp"

namespace curator {

using ObjectId = std::int64_t;

/// One catalog row. The six modeled fields are stored uniformly as lists;
/// single-valued fields hold at most one entry.
struct ArtworkRecord {
  ObjectId object_id = 0;
  std::array<std::vector<std::string>, kFieldCount> fields;
  // Display only; never used for modeling.
  std::optional<std::string> title;
  std::optional<std::string> object_name;
  std::optional<std::string> public_image_url;

  const std::vector<std::string>& values(Field f) const { return fields[index_of(f)]; }
  std::vector<std::string>& values(Field f) { return fields[index_of(f)]; }

  std::optional<std::string> single(Field f) const {
    const auto& v = values(f);
    if (v.empty()) return std::nullopt;
    return v.front();
  }

  std::optional<std::string> department() const { return single(Field::department); }
  const std::vector<std::string>& artist_display_name() const { return values(Field::artist_display_name); }
  std::optional<std::string> object_begin_date() const { return single(Field::object_begin_date); }
  std::optional<std::string> medium() const { return single(Field::medium); }
  const std::vector<std::string>& classification() const { return values(Field::classification); }
  const std::vector<std::string>& tags() const { return values(Field::tags); }

  friend bool operator==(const ArtworkRecord&, const ArtworkRecord&) = default;
};

/// Splits a pipe-separated cell, dropping empty pieces.
inline std::vector<std::string> split_multi_value(std::string_view cell) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= cell.size()) {
    const auto bar = cell.find('|', start);
    const auto piece = cell.substr(start, bar == std::string_view::npos ? std::string_view::npos : bar - start);
    if (!piece.empty()) out.emplace_back(piece);
    if (bar == std::string_view::npos) break;
    start = bar + 1;
  }
  return out;
}

inline std::optional<ObjectId> parse_object_id(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (s.empty() || s.size() > 18) return std::nullopt;
  ObjectId v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + (c - '0');
  }
  if (v <= 0) return std::nullopt;
  return v;
}

/// Immutable catalog indexed by object id. Records never move after
/// construction, so pointers into it stay valid for its lifetime.
class Catalog {
 public:
  Catalog() = default;
  explicit Catalog(std::vector<ArtworkRecord> records) : records_(std::move(records)) {
    by_id_.reserve(records_.size());
    for (std::size_t i = 0; i < records_.size(); ++i) {
      if (!by_id_.emplace(records_[i].object_id, i).second) {
        throw ConsistencyError("duplicate object id " + std::to_string(records_[i].object_id) + " in catalog");
      }
    }
  }

  Catalog(const Catalog&) = delete;
  Catalog& operator=(const Catalog&) = delete;
  Catalog(Catalog&&) noexcept = default;
  Catalog& operator=(Catalog&&) noexcept = default;

  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const std::vector<ArtworkRecord>& records() const noexcept { return records_; }
  const ArtworkRecord& operator[](std::size_t row) const { return records_[row]; }

  const ArtworkRecord* find(ObjectId id) const {
    const auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &records_[it->second];
  }
  std::optional<std::size_t> row_of(ObjectId id) const {
    const auto it = by_id_.find(id);
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<ArtworkRecord> records_;
  std::unordered_map<ObjectId, std::size_t> by_id_;
};

struct CatalogParseResult {
  std::vector<ArtworkRecord> records;
  std::size_t skipped_rows = 0;       // bad object id or too few cells
  std::size_t duplicate_ids = 0;
  std::vector<std::string> diagnostics;  // first few skip reasons
};

/// Parses the museum Open Access CSV. Only the object id and the six
/// modeled fields are required; Title, Object Name and an image URL column
/// are picked up when present.
inline CatalogParseResult parse_artwork_catalog(std::istream& in) {
  constexpr std::size_t kMaxDiagnostics = 32;
  CsvReader reader(in);
  std::vector<std::string> header;
  if (!reader.next(header)) throw ConfigError("catalog CSV is empty (no header row)");

  auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  };

  std::vector<std::string> missing;
  const auto id_col = column("Object ID");
  if (!id_col) missing.emplace_back("Object ID");
  std::array<std::size_t, kFieldCount> field_cols{};
  for (Field f : kAllFields) {
    if (auto c = column(field_name(f))) field_cols[index_of(f)] = *c;
    else missing.emplace_back(field_name(f));
  }
  if (!missing.empty()) {
    std::string msg = "catalog CSV is missing required column(s):";
    for (const auto& m : missing) msg += " '" + m + "'";
    throw ConfigError(msg);
  }
  const auto title_col = column("Title");
  const auto name_col = column("Object Name");
  auto image_col = column("Public Image URL");
  if (!image_col) image_col = column("Primary Image");

  std::size_t needed = *id_col;
  for (auto c : field_cols) needed = std::max(needed, c);

  CatalogParseResult result;
  std::unordered_set<ObjectId> seen;
  std::vector<std::string> row;
  auto skip = [&](std::string reason) {
    ++result.skipped_rows;
    if (result.diagnostics.size() < kMaxDiagnostics) result.diagnostics.push_back(std::move(reason));
  };
  while (reader.next(row)) {
    if (row.size() == 1 && row[0].empty()) continue;  // blank line
    if (row.size() <= needed) {
      skip("record " + std::to_string(reader.record_number()) + ": only " + std::to_string(row.size()) + " cells");
      continue;
    }
    const auto id = parse_object_id(row[*id_col]);
    if (!id) {
      skip("record " + std::to_string(reader.record_number()) + ": unparseable object id '" + row[*id_col] + "'");
      continue;
    }
    if (!seen.insert(*id).second) {
      ++result.duplicate_ids;
      skip("record " + std::to_string(reader.record_number()) + ": duplicate object id " + std::to_string(*id));
      continue;
    }
    ArtworkRecord rec;
    rec.object_id = *id;
    for (Field f : kAllFields) {
      const std::string& cell = row[field_cols[index_of(f)]];
      if (is_multi_valued(f)) {
        rec.values(f) = split_multi_value(cell);
      } else if (!cell.empty()) {
        rec.values(f).push_back(cell);
      }
    }
    auto optional_cell = [&](std::optional<std::size_t> col) -> std::optional<std::string> {
      if (!col || *col >= row.size() || row[*col].empty()) return std::nullopt;
      return row[*col];
    };
    rec.title = optional_cell(title_col);
    rec.object_name = optional_cell(name_col);
    rec.public_image_url = optional_cell(image_col);
    result.records.push_back(std::move(rec));
  }
  return result;
}

/// Writes records back out as a catalog CSV with the columns the parser reads.
inline void write_artwork_catalog(std::ostream& out, const std::vector<ArtworkRecord>& records) {
  out << "Object ID,Object Name,Title";
  for (Field f : kAllFields) out << ',' << csv_escape(std::string(field_name(f)));
  out << ",Public Image URL\n";
  for (const auto& r : records) {
    out << r.object_id << ',' << csv_escape(r.object_name.value_or("")) << ',' << csv_escape(r.title.value_or(""));
    for (Field f : kAllFields) {
      std::string joined;
      for (std::size_t i = 0; i < r.values(f).size(); ++i) {
        if (i) joined += '|';
        joined += r.values(f)[i];
      }
      out << ',' << csv_escape(joined);
    }
    out << ',' << csv_escape(r.public_image_url.value_or("")) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Exhibitions

inline std::string make_prompt_text(std::string_view title, std::string_view overview) {
  std::string s = "Title of exhibition is: ";
  s += title;
  s += " and the description is: ";
  s += overview;
  return s;
}

struct ExhibitionRecord {
  std::string title;
  std::string overview_text;
  std::vector<const ArtworkRecord*> artworks;  // into the owning Catalog
  std::string prompt_text;

  std::vector<ObjectId> object_ids() const {
    std::vector<ObjectId> ids;
    ids.reserve(artworks.size());
    for (const auto* a : artworks) ids.push_back(a->object_id);
    return ids;
  }
};

struct ExhibitionsParseResult {
  std::vector<ExhibitionRecord> exhibitions;
  std::size_t dropped_exhibitions = 0;   // no resolvable artwork at all
  std::size_t unresolved_object_ids = 0;
  std::vector<std::string> diagnostics;
};

/// Parses the exhibitions document and resolves its object ids against the
/// catalog. Object id order inside each exhibition is preserved.
inline ExhibitionsParseResult parse_exhibitions(std::istream& in, const Catalog& catalog) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("exhibitions JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("exhibitions") || !doc["exhibitions"].is_array()) {
    throw ParseError("exhibitions JSON: expected a top-level object with an \"exhibitions\" array");
  }

  ExhibitionsParseResult result;
  std::size_t index = 0;
  for (const auto& item : doc["exhibitions"]) {
    const auto where = "exhibition #" + std::to_string(index++);
    if (!item.is_object() || !item.contains("title") || !item["title"].is_string() ||
        !item.contains("overview_text") || !item["overview_text"].is_string() || !item.contains("object_ids") ||
        !(item["object_ids"].is_object() || item["object_ids"].is_array())) {
      throw ParseError("exhibitions JSON: " + where + " lacks title/overview_text/object_ids");
    }
    ExhibitionRecord ex;
    ex.title = item["title"].get<std::string>();
    ex.overview_text = item["overview_text"].get<std::string>();
    ex.prompt_text = make_prompt_text(ex.title, ex.overview_text);

    std::vector<std::string> keys;
    if (item["object_ids"].is_object()) {
      for (const auto& [key, _] : item["object_ids"].items()) keys.push_back(key);
    } else {
      for (const auto& v : item["object_ids"]) keys.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    }
    for (const auto& key : keys) {
      const auto id = parse_object_id(key);
      const ArtworkRecord* rec = id ? catalog.find(*id) : nullptr;
      if (!rec) {
        ++result.unresolved_object_ids;
        if (result.diagnostics.size() < 64) result.diagnostics.push_back(where + ": unresolved object id '" + key + "'");
        continue;
      }
      ex.artworks.push_back(rec);
    }
    if (ex.artworks.empty()) {
      ++result.dropped_exhibitions;
      if (result.diagnostics.size() < 64) result.diagnostics.push_back(where + " ('" + ex.title + "') dropped: no artworks resolved");
      continue;
    }
    result.exhibitions.push_back(std::move(ex));
  }
  return result;
}

/// The per-artwork metadata object used inside the exhibitions document.
inline nlohmann::ordered_json artwork_to_json(const ArtworkRecord& a) {
  nlohmann::ordered_json o;
  auto opt = [](const std::optional<std::string>& s) { return s ? nlohmann::ordered_json(*s) : nlohmann::ordered_json(""); };
  o["Department"] = opt(a.department());
  o["Object Name"] = opt(a.object_name);
  o["Title"] = opt(a.title);
  o["Artist Display Name"] = a.artist_display_name();
  o["Object Begin Date"] = opt(a.object_begin_date());
  o["Medium"] = opt(a.medium());
  o["Classification"] = a.classification();
  o["Tags"] = a.tags();
  return o;
}

inline nlohmann::ordered_json exhibitions_to_json(const std::vector<ExhibitionRecord>& exhibitions) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& ex : exhibitions) {
    nlohmann::ordered_json e;
    e["title"] = ex.title;
    e["overview_text"] = ex.overview_text;
    nlohmann::ordered_json ids = nlohmann::ordered_json::object();
    for (const auto* a : ex.artworks) ids[std::to_string(a->object_id)] = artwork_to_json(*a);
    e["object_ids"] = std::move(ids);
    arr.push_back(std::move(e));
  }
  nlohmann::ordered_json doc;
  doc["exhibitions"] = std::move(arr);
  return doc;
}

// ---------------------------------------------------------------------------
// Generalized-tag vocabulary

/// Ordered (code point order) set of generalized-tag strings observed in the
/// exhibited artworks, each annotated with the fields it was seen in.
class TagVocabulary {
 public:
  TagVocabulary() = default;

  static TagVocabulary from_entries(std::vector<std::pair<std::string, FieldMask>> entries) {
    std::sort(entries.begin(), entries.end());
    TagVocabulary v;
    for (auto& [tag, mask] : entries) {
      if (!v.entries_.empty() && v.entries_.back() == tag) {
        v.masks_.back() |= mask;
        continue;
      }
      v.entries_.push_back(std::move(tag));
      v.masks_.push_back(mask);
    }
    v.index_.reserve(v.entries_.size());
    for (std::size_t i = 0; i < v.entries_.size(); ++i) v.index_.emplace(v.entries_[i], i);
    return v;
  }

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::vector<std::string>& entries() const noexcept { return entries_; }
  const std::string& operator[](std::size_t i) const { return entries_[i]; }
  FieldMask source_fields(std::size_t i) const { return masks_[i]; }

  std::optional<std::size_t> find(std::string_view tag) const {
    const auto it = index_.find(std::string(tag));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> entries_;
  std::vector<FieldMask> masks_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline TagVocabulary build_tag_vocabulary(const std::vector<ExhibitionRecord>& exhibitions) {
  std::map<std::string, FieldMask> seen;
  for (const auto& ex : exhibitions) {
    for (const auto* a : ex.artworks) {
      for (Field f : kAllFields) {
        for (const auto& v : a->values(f)) {
          if (!v.empty()) seen[v] |= field_bit(f);
        }
      }
    }
  }
  std::vector<std::pair<std::string, FieldMask>> entries(seen.begin(), seen.end());
  return TagVocabulary::from_entries(std::move(entries));
}

// ---------------------------------------------------------------------------
// Probability flattening

/// Relative frequency of each value within one field, in first-appearance order.
using FieldDistribution = std::vector<std::pair<std::string, double>>;

/// Per-field relative frequencies over an exhibition's artworks. Empty
/// entries are excluded from both numerator and denominator.
inline std::array<FieldDistribution, kFieldCount> field_distributions(const std::vector<const ArtworkRecord*>& artworks) {
  std::array<FieldDistribution, kFieldCount> out;
  for (Field f : kAllFields) {
    std::vector<std::pair<std::string, std::size_t>> counts;
    std::unordered_map<std::string, std::size_t> pos;
    std::size_t total = 0;
    for (const auto* a : artworks) {
      for (const auto& v : a->values(f)) {
        if (v.empty()) continue;
        ++total;
        auto [it, inserted] = pos.emplace(v, counts.size());
        if (inserted) counts.emplace_back(v, 0);
        ++counts[it->second].second;
      }
    }
    auto& dist = out[index_of(f)];
    dist.reserve(counts.size());
    for (auto& [v, c] : counts) dist.emplace_back(std::move(v), static_cast<double>(c) / static_cast<double>(total));
  }
  return out;
}

inline std::array<FieldDistribution, kFieldCount> field_distributions(const ExhibitionRecord& ex) {
  return field_distributions(ex.artworks);
}

/// Real vector aligned to a TagVocabulary.
struct TagProbabilityVector {
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
};

/// Dense flattened target. A string seen in several fields occupies one slot
/// and receives the sum of its per-field probabilities.
inline TagProbabilityVector flatten_exhibition_target(const ExhibitionRecord& ex, const TagVocabulary& vocab) {
  TagProbabilityVector p{std::vector<double>(vocab.size(), 0.0)};
  const auto dists = field_distributions(ex);
  for (Field f : kAllFields) {
    for (const auto& [tag, prob] : dists[index_of(f)]) {
      const auto i = vocab.find(tag);
      if (!i) throw ConsistencyError("tag '" + tag + "' (" + std::string(field_name(f)) + ") is not in the vocabulary");
      p.values[*i] += prob;
    }
  }
  return p;
}

/// One exhibition in the flattened {"x", "y", "z"} export shape.
inline nlohmann::ordered_json flattened_exhibition_json(const ExhibitionRecord& ex) {
  nlohmann::ordered_json o;
  o["x"] = ex.prompt_text;
  nlohmann::ordered_json y = nlohmann::ordered_json::object();
  for (const auto& dist : field_distributions(ex)) {
    for (const auto& [tag, prob] : dist) {
      if (y.contains(tag)) y[tag] = y[tag].get<double>() + prob;
      else y[tag] = prob;
    }
  }
  o["y"] = std::move(y);
  nlohmann::ordered_json z = nlohmann::ordered_json::array();
  for (const auto* a : ex.artworks) z.push_back(std::to_string(a->object_id));
  o["z"] = std::move(z);
  return o;
}

inline nlohmann::ordered_json flattened_exhibitions_json(const std::vector<ExhibitionRecord>& exhibitions) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& ex : exhibitions) arr.push_back(flattened_exhibition_json(ex));
  nlohmann::ordered_json doc;
  doc["exhibitions"] = std::move(arr);
  return doc;
}

// ---------------------------------------------------------------------------
// Splits

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::uint64_t seed = 0;
};

/// Seeded shuffle, then the first n - ceil((1 - ratio) * n) indices train.
inline DatasetSplit split_dataset(std::size_t n, double ratio, std::uint64_t seed) {
  if (n == 0) throw ConfigError("split_dataset: empty dataset");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split_dataset: ratio must lie in (0, 1)");
  const double held_out = (1.0 - ratio) * static_cast<double>(n);
  auto n_validation = static_cast<std::size_t>(std::ceil(held_out - 1e-9));
  n_validation = std::min(n_validation, n);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  shuffle(std::span<std::size_t>(order), rng);

  DatasetSplit s;
  s.seed = seed;
  const std::size_t n_train = n - n_validation;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return s;
}

// ---------------------------------------------------------------------------
// Reports

struct ValueCount {
  std::string value;
  std::size_t count = 0;
  friend bool operator==(const ValueCount&, const ValueCount&) = default;
};

/// Per-field value counts over all exhibited artworks (with repeats),
/// sorted by descending count then value. top_k == 0 keeps everything.
inline std::array<std::vector<ValueCount>, kFieldCount> tag_frequency_report(
    const std::vector<ExhibitionRecord>& exhibitions, std::size_t top_k = 0) {
  std::array<std::vector<ValueCount>, kFieldCount> report;
  for (Field f : kAllFields) {
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& ex : exhibitions) {
      for (const auto* a : ex.artworks) {
        for (const auto& v : a->values(f)) ++counts[v];
      }
    }
    auto& out = report[index_of(f)];
    for (auto& [v, c] : counts) out.push_back({v, c});
    std::sort(out.begin(), out.end(), [](const ValueCount& a, const ValueCount& b) {
      return a.count != b.count ? a.count > b.count : a.value < b.value;
    });
    if (top_k > 0 && out.size() > top_k) out.resize(top_k);
  }
  return report;
}

/// Non-empty counts for the eight tracked catalog fields.
struct CatalogStats {
  std::size_t records = 0;
  std::size_t department = 0, object_name = 0, title = 0, artist_display_name = 0, object_begin_date = 0,
              medium = 0, classification = 0, tags = 0;
  std::size_t all_fields_non_empty = 0;
};

inline CatalogStats catalog_stats(const std::vector<ArtworkRecord>& records) {
  CatalogStats s;
  s.records = records.size();
  for (const auto& r : records) {
    const bool has[8] = {
        !r.values(Field::department).empty(), r.object_name.has_value(), r.title.has_value(),
        !r.values(Field::artist_display_name).empty(), !r.values(Field::object_begin_date).empty(),
        !r.values(Field::medium).empty(), !r.values(Field::classification).empty(), !r.values(Field::tags).empty(),
    };
    s.department += has[0];
    s.object_name += has[1];
    s.title += has[2];
    s.artist_display_name += has[3];
    s.object_begin_date += has[4];
    s.medium += has[5];
    s.classification += has[6];
    s.tags += has[7];
    if (std::all_of(std::begin(has), std::end(has), [](bool b) { return b; })) ++s.all_fields_non_empty;
  }
  return s;
}

inline std::size_t count_words(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

struct ExhibitionStats {
  std::size_t exhibitions = 0;
  std::size_t artwork_slots = 0;
  std::size_t unique_artworks = 0;
  std::size_t words = 0;           // title + overview text
  std::size_t tag_occurrences = 0;  // non-empty field values over all slots
  std::size_t unique_tags = 0;
};

inline ExhibitionStats exhibition_stats(const std::vector<ExhibitionRecord>& exhibitions) {
  ExhibitionStats s;
  s.exhibitions = exhibitions.size();
  std::unordered_set<ObjectId> unique;
  std::unordered_set<std::string> tags;
  for (const auto& ex : exhibitions) {
    s.words += count_words(ex.title) + count_words(ex.overview_text);
    s.artwork_slots += ex.artworks.size();
    for (const auto* a : ex.artworks) {
      unique.insert(a->object_id);
      for (Field f : kAllFields) {
        for (const auto& v : a->values(f)) {
          if (v.empty()) continue;
          ++s.tag_occurrences;
          tags.insert(v);
        }
      }
    }
  }
  s.unique_artworks = unique.size();
  s.unique_tags = tags.size();
  return s;
}

/// Reference figures for the full museum snapshot; not used for computation.
namespace reference {
inline constexpr std::size_t kCatalogRecords = 484956;
inline constexpr std::size_t kCatalogAllFieldsNonEmpty = 120713;
inline constexpr std::size_t kExhibitions = 236;
inline constexpr std::size_t kArtworkSlots = 10470;
inline constexpr std::size_t kUniqueArtworks = 9289;
inline constexpr std::size_t kPromptWords = 26388;
inline constexpr std::size_t kTagOccurrences = 69566;
inline constexpr std::size_t kUniqueTags = 8591;
inline constexpr std::size_t kReportedOutputWidth = 8615;
}  // namespace reference

}  // namespace curator
