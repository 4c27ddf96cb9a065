#pragma once

// From predictions to ranked artworks (hit score over posting lists, nearest
// neighbours for embedding outputs) and the validation metrics.

#include <algorithm>
#include <array>
#include <functional>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "curator/corpus.hpp"
#include "curator/csv.hpp"
#include "curator/errors.hpp"
#include "curator/vecindex.hpp"

namespace curator {

inline constexpr std::size_t kOutOfSampleK = 16;
inline constexpr std::size_t kDefaultNprobe = 4;

struct Hit {
  ObjectId object_id = 0;
  double hit = 0.0;
  std::size_t row = 0;  // catalog row
  friend bool operator==(const Hit&, const Hit&) = default;
};

/// Non-increasing hit, ties by ascending object id.
using HitRanking = std::vector<Hit>;

inline bool ranks_before(const Hit& a, const Hit& b) {
  return a.hit != b.hit ? a.hit > b.hit : a.object_id < b.object_id;
}

/// Posting lists from vocabulary entry to the catalog rows whose six fields
/// contain it (each row listed once per entry). Immutable after construction.
class HitScorer {
 public:
  HitScorer(const TagVocabulary& vocab, const Catalog& catalog) : vocab_size_(vocab.size()), catalog_(&catalog) {
    postings_.resize(vocab.size());
    std::vector<std::size_t> hits;
    for (std::size_t row = 0; row < catalog.size(); ++row) {
      hits.clear();
      for (Field f : kAllFields) {
        for (const auto& v : catalog[row].values(f)) {
          if (auto i = vocab.find(v)) hits.push_back(*i);
        }
      }
      std::sort(hits.begin(), hits.end());
      hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
      for (auto i : hits) postings_[i].push_back(row);
    }
  }

  std::size_t vocabulary_size() const noexcept { return vocab_size_; }
  const Catalog& catalog() const noexcept { return *catalog_; }
  const std::vector<std::size_t>& posting(std::size_t tag) const { return postings_[tag]; }

  /// hit_j = sum_i max(p_i, 0) * delta_ij, accumulated in ascending i.
  std::vector<double> scores(const TagProbabilityVector& p) const {
    if (p.size() != vocab_size_) {
      throw DimensionError("hit scores: probability vector has " + std::to_string(p.size()) + " entries, vocabulary " +
                           std::to_string(vocab_size_));
    }
    std::vector<double> hit(catalog_->size(), 0.0);
    for (std::size_t i = 0; i < vocab_size_; ++i) {
      const double w = p.values[i];
      if (!(w > 0.0)) continue;
      for (auto row : postings_[i]) hit[row] += w;
    }
    return hit;
  }

  HitRanking rank(const TagProbabilityVector& p) const { return top_k(p, catalog_->size()); }

  /// The first k entries of the full ranking.
  HitRanking top_k(const TagProbabilityVector& p, std::size_t k) const {
    const auto hit = scores(p);
    HitRanking all(hit.size());
    for (std::size_t row = 0; row < hit.size(); ++row) all[row] = {(*catalog_)[row].object_id, hit[row], row};
    k = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), ranks_before);
    all.resize(k);
    return all;
  }

 private:
  std::size_t vocab_size_;
  const Catalog* catalog_;
  std::vector<std::vector<std::size_t>> postings_;
};

inline HitRanking hit_scores(const TagProbabilityVector& p, const TagVocabulary& vocab, const Catalog& catalog) {
  return HitScorer(vocab, catalog).rank(p);
}

inline std::vector<ObjectId> select_topk(const HitRanking& ranking, std::size_t k) {
  if (k == 0) throw ConfigError("select_topk: k must be >= 1");
  std::vector<ObjectId> ids;
  const auto n = std::min(k, ranking.size());
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ids.push_back(ranking[i].object_id);
  return ids;
}

/// The k nearest artwork embeddings to the model output.
inline SearchResult curate_m3(std::span<const double> output_embedding, const IvfFlatIndex& index, std::size_t k,
                              std::size_t nprobe = kDefaultNprobe) {
  return ivf_search(index, output_embedding, k, std::min(nprobe, index.nlist()));
}

// ---------------------------------------------------------------------------
// Metrics

using SubgroupScores = std::array<std::optional<double>, kFieldCount>;

inline std::set<std::string> unique_values(const std::vector<const ArtworkRecord*>& artworks, Field f) {
  std::set<std::string> s;
  for (const auto* a : artworks) {
    for (const auto& v : a->values(f)) {
      if (!v.empty()) s.insert(v);
    }
  }
  return s;
}

/// Per field: |unique(predicted) & unique(actual)| / |unique(actual)|.
/// Fields with no value on the actual side are absent.
inline SubgroupScores tag_intersection(const std::vector<const ArtworkRecord*>& actual,
                                       const std::vector<const ArtworkRecord*>& predicted) {
  SubgroupScores out;
  for (Field f : kAllFields) {
    const auto a = unique_values(actual, f);
    if (a.empty()) continue;
    const auto p = unique_values(predicted, f);
    std::size_t common = 0;
    for (const auto& v : p) common += a.count(v);
    out[index_of(f)] = static_cast<double>(common) / static_cast<double>(a.size());
  }
  return out;
}

inline double artwork_intersection(const std::vector<ObjectId>& actual, const std::vector<ObjectId>& predicted) {
  const std::unordered_set<ObjectId> a(actual.begin(), actual.end());
  if (a.empty()) throw ConfigError("artwork_intersection: empty actual list");
  const std::unordered_set<ObjectId> p(predicted.begin(), predicted.end());
  std::size_t common = 0;
  for (auto id : p) common += a.count(id);
  return static_cast<double>(common) / static_cast<double>(a.size());
}

/// Expected overlap fraction when picking k of n artworks uniformly.
inline double random_baseline(double k, std::size_t n) {
  if (n == 0) throw ConfigError("random_baseline: empty catalog");
  if (k < 0.0 || k > static_cast<double>(n)) throw ConfigError("random_baseline: k must lie in [0, n]");
  return k / static_cast<double>(n);
}

struct ExhibitionEvaluation {
  std::size_t exhibition_index = 0;
  std::string title;
  std::size_t k = 0;
  std::size_t predicted = 0;
  SubgroupScores tags;
  double artworks = 0.0;
};

struct EvaluationReport {
  std::string model;
  SubgroupScores subgroup_means;
  double artwork_mean = 0.0;
  double mean_k = 0.0;
  std::size_t catalog_size = 0;
  double random_baseline = 0.0;
  std::vector<ExhibitionEvaluation> rows;

  nlohmann::ordered_json to_json() const {
    auto scores = [](const SubgroupScores& s) {
      nlohmann::ordered_json o = nlohmann::ordered_json::object();
      for (Field f : kAllFields) {
        const auto& v = s[index_of(f)];
        o[std::string(field_name(f))] = v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
      }
      return o;
    };
    nlohmann::ordered_json j;
    j["model"] = model;
    j["validation_exhibitions"] = rows.size();
    j["tag_intersection_means"] = scores(subgroup_means);
    j["artwork_intersection_mean"] = artwork_mean;
    j["mean_k"] = mean_k;
    j["catalog_size"] = catalog_size;
    j["random_baseline"] = random_baseline;
    j["exhibitions"] = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
      nlohmann::ordered_json e;
      e["index"] = r.exhibition_index;
      e["title"] = r.title;
      e["k"] = r.k;
      e["predicted"] = r.predicted;
      e["tag_intersection"] = scores(r.tags);
      e["artwork_intersection"] = r.artworks;
      j["exhibitions"].push_back(std::move(e));
    }
    return j;
  }

  void write_csv(std::ostream& out) const {
    out << "index,title,k,predicted";
    for (Field f : kAllFields) out << ',' << csv_escape(std::string(field_name(f)));
    out << ",artworks\n";
    out.precision(10);
    for (const auto& r : rows) {
      out << r.exhibition_index << ',' << csv_escape(r.title) << ',' << r.k << ',' << r.predicted;
      for (const auto& v : r.tags) {
        out << ',';
        if (v) out << *v;
      }
      out << ',' << r.artworks << '\n';
    }
  }
};

/// Curator under evaluation: exhibition plus requested k to a list of ids.
/// Curators with their own output length (fine-tuned model) may ignore k.
using CuratorFn = std::function<std::vector<ObjectId>(const ExhibitionRecord&, std::size_t k)>;

/// Runs the curator over the validation exhibitions with k = exhibition size.
inline EvaluationReport evaluate_model(const CuratorFn& curator, const std::vector<ExhibitionRecord>& exhibitions,
                                       const DatasetSplit& split, const Catalog& catalog, std::string model_name = {}) {
  if (split.validation.empty()) throw ConfigError("evaluate_model: empty validation split");
  EvaluationReport report;
  report.model = std::move(model_name);
  report.catalog_size = catalog.size();
  std::array<double, kFieldCount> sums{};
  std::array<std::size_t, kFieldCount> counts{};
  double k_sum = 0.0;
  for (auto idx : split.validation) {
    if (idx >= exhibitions.size()) throw ConfigError("evaluate_model: split index out of range");
    const auto& ex = exhibitions[idx];
    const std::size_t k = ex.artworks.size();
    const auto predicted_ids = curator(ex, k);
    std::vector<const ArtworkRecord*> predicted;
    for (auto id : predicted_ids) {
      if (const auto* a = catalog.find(id)) predicted.push_back(a);
    }
    ExhibitionEvaluation row;
    row.exhibition_index = idx;
    row.title = ex.title;
    row.k = k;
    row.predicted = predicted_ids.size();
    row.tags = tag_intersection(ex.artworks, predicted);
    row.artworks = artwork_intersection(ex.object_ids(), predicted_ids);
    for (std::size_t f = 0; f < kFieldCount; ++f) {
      if (row.tags[f]) {
        sums[f] += *row.tags[f];
        ++counts[f];
      }
    }
    report.artwork_mean += row.artworks;
    k_sum += static_cast<double>(k);
    report.rows.push_back(std::move(row));
  }
  const double n = static_cast<double>(report.rows.size());
  report.artwork_mean /= n;
  for (std::size_t f = 0; f < kFieldCount; ++f) {
    if (counts[f]) report.subgroup_means[f] = sums[f] / static_cast<double>(counts[f]);
  }
  report.mean_k = k_sum / n;
  report.random_baseline = random_baseline(std::min(report.mean_k, static_cast<double>(catalog.size())), catalog.size());
  return report;
}

}  // namespace curator
