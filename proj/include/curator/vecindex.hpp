#pragma once

// Exact and inverted-file (IVF-Flat) nearest neighbour search over squared
// Euclidean distance. Stored vectors are 32-bit floats; distances are
// accumulated in double. Ties are broken by ascending row id everywhere.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "curator/binary_io.hpp"
#include "curator/corpus.hpp"
#include "curator/errors.hpp"
#include "curator/random.hpp"

namespace curator {

struct Neighbor {
  ObjectId object_id = 0;
  double distance = 0.0;  // squared Euclidean
  std::size_t row = 0;
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

using SearchResult = std::vector<Neighbor>;

template <typename A, typename B>
double squared_l2(std::span<const A> a, std::span<const B> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

/// Row-major float vectors with one object id per row.
class FlatStore {
 public:
  explicit FlatStore(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }

  void add(ObjectId id, std::span<const double> v) {
    if (v.size() != dim_) throw DimensionError("FlatStore::add: vector dimension mismatch");
    ids_.push_back(id);
    for (double x : v) data_.push_back(static_cast<float>(x));
  }

  void add(ObjectId id, std::span<const float> v) {
    if (v.size() != dim_) throw DimensionError("FlatStore::add: vector dimension mismatch");
    ids_.push_back(id);
    data_.insert(data_.end(), v.begin(), v.end());
  }

  ObjectId id(std::size_t row) const { return ids_[row]; }
  std::span<const float> vector(std::size_t row) const { return {data_.data() + row * dim_, dim_}; }
  std::span<const float> data() const noexcept { return data_; }
  const std::vector<ObjectId>& ids() const noexcept { return ids_; }

 private:
  std::size_t dim_;
  std::vector<ObjectId> ids_;
  std::vector<float> data_;
};

namespace detail {

inline bool closer(const Neighbor& a, const Neighbor& b) {
  return a.distance != b.distance ? a.distance < b.distance : a.row < b.row;
}

/// Keeps the k best candidates under `closer`.
class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) {}

  void offer(const Neighbor& n) {
    if (k_ == 0) return;
    if (heap_.size() < k_) {
      heap_.push_back(n);
      std::push_heap(heap_.begin(), heap_.end(), closer);
    } else if (closer(n, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), closer);
      heap_.back() = n;
      std::push_heap(heap_.begin(), heap_.end(), closer);
    }
  }

  SearchResult take() {
    std::sort(heap_.begin(), heap_.end(), closer);
    return std::move(heap_);
  }

 private:
  std::size_t k_;
  std::vector<Neighbor> heap_;
};

}  // namespace detail

inline SearchResult exact_search(const FlatStore& store, std::span<const double> query, std::size_t k) {
  if (k == 0) throw ConfigError("exact_search: k must be >= 1");
  if (store.empty()) return {};
  if (query.size() != store.dim()) throw DimensionError("exact_search: query dimension mismatch");
  detail::TopK top(k);
  for (std::size_t r = 0; r < store.size(); ++r) {
    top.offer({store.id(r), squared_l2(store.vector(r), query), r});
  }
  return top.take();
}

// ---------------------------------------------------------------------------
// k-means

struct KMeansResult {
  std::vector<double> centroids;      // row-major [nlist x dim]
  std::vector<std::size_t> assignment;
  std::vector<double> distortion;     // after each assignment step
};

namespace detail {

template <typename T>
std::size_t nearest_centroid(std::span<const T> x, std::span<const double> centroids, std::size_t dim,
                             double* best_distance = nullptr) {
  const std::size_t k = centroids.size() / dim;
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < k; ++c) {
    const double d = squared_l2(x, centroids.subspan(c * dim, dim));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (best_distance) *best_distance = best_d;
  return best;
}

}  // namespace detail

/// Lloyd's algorithm from a seeded k-means++ start. Empty clusters are
/// re-seeded with the point farthest from its centroid.
template <typename T>
KMeansResult kmeans_train(std::span<const T> data, std::size_t dim, std::size_t nlist, std::size_t iters,
                          std::uint64_t seed) {
  if (dim == 0) throw DimensionError("kmeans_train: zero dimension");
  const std::size_t n = data.size() / dim;
  if (nlist == 0) throw ConfigError("kmeans_train: nlist must be >= 1");
  if (n < nlist) {
    throw ConfigError("kmeans_train: " + std::to_string(n) + " points cannot train " + std::to_string(nlist) + " lists");
  }
  auto point = [&](std::size_t i) { return data.subspan(i * dim, dim); };

  Rng rng(seed);
  KMeansResult r;
  r.centroids.reserve(nlist * dim);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::vector<char> chosen(n, 0);
  auto add_center = [&](std::size_t i) {
    chosen[i] = 1;
    for (std::size_t k = 0; k < dim; ++k) r.centroids.push_back(static_cast<double>(point(i)[k]));
    const auto c = std::span<const double>(r.centroids).subspan(r.centroids.size() - dim, dim);
    for (std::size_t j = 0; j < n; ++j) d2[j] = std::min(d2[j], squared_l2(point(j), c));
  };
  add_center(static_cast<std::size_t>(uniform_index(rng, n)));
  while (r.centroids.size() < nlist * dim) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += chosen[j] ? 0.0 : d2[j];
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = uniform01(rng) * total;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (chosen[j]) continue;
        acc += d2[j];
        if (acc > target && d2[j] > 0.0) {
          pick = j;
          break;
        }
      }
      if (pick == n) {  // rounding at the tail
        for (std::size_t j = n; j-- > 0;) {
          if (!chosen[j] && d2[j] > 0.0) {
            pick = j;
            break;
          }
        }
      }
    }
    if (pick == n) {  // all remaining points coincide with centers
      std::vector<std::size_t> free;
      for (std::size_t j = 0; j < n; ++j) {
        if (!chosen[j]) free.push_back(j);
      }
      pick = free[static_cast<std::size_t>(uniform_index(rng, free.size()))];
    }
    add_center(pick);
  }

  r.assignment.assign(n, 0);
  std::vector<double> dist(n);
  std::vector<double> sums(nlist * dim);
  std::vector<std::size_t> counts(nlist);
  for (std::size_t it = 0;; ++it) {
    double distortion = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      r.assignment[j] = detail::nearest_centroid(point(j), std::span<const double>(r.centroids), dim, &dist[j]);
      distortion += dist[j];
    }
    r.distortion.push_back(distortion);
    if (it == iters) break;

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t j = 0; j < n; ++j) {
      const auto c = r.assignment[j];
      ++counts[c];
      for (std::size_t k = 0; k < dim; ++k) sums[c * dim + k] += static_cast<double>(point(j)[k]);
    }
    bool moved = false;
    for (std::size_t c = 0; c < nlist; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t k = 0; k < dim; ++k) {
        const double m = sums[c * dim + k] / static_cast<double>(counts[c]);
        moved |= m != r.centroids[c * dim + k];
        r.centroids[c * dim + k] = m;
      }
    }
    for (std::size_t c = 0; c < nlist; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t j = 0; j < n; ++j) {
        const auto a = r.assignment[j];
        if (counts[a] <= 1) continue;
        const double d = squared_l2(point(j), std::span<const double>(r.centroids).subspan(a * dim, dim));
        if (d > far_d) {
          far_d = d;
          far = j;
        }
      }
      if (far_d <= 0.0) continue;
      --counts[r.assignment[far]];
      r.assignment[far] = c;
      counts[c] = 1;
      for (std::size_t k = 0; k < dim; ++k) r.centroids[c * dim + k] = static_cast<double>(point(far)[k]);
      moved = true;
    }
    if (!moved) {
      // Converged; the final assignment is unchanged.
      break;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// IVF-Flat

inline std::size_t default_nlist(std::size_t n) {
  const auto root = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  return std::clamp<std::size_t>(root, 1, 4096);
}

struct IvfBuildOptions {
  std::size_t nlist = 0;  // 0 -> default_nlist(n)
  std::size_t kmeans_iters = 25;
  std::size_t max_training_points_per_list = 256;
  std::uint64_t seed = 1234;
};

class IvfFlatIndex {
 public:
  struct List {
    std::vector<std::size_t> rows;
    std::vector<ObjectId> ids;
    std::vector<float> vectors;
    std::size_t size() const noexcept { return rows.size(); }
  };

  IvfFlatIndex() = default;

  bool trained() const noexcept { return trained_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t nlist() const noexcept { return lists_.size(); }
  std::size_t size() const noexcept { return n_; }
  const List& list(std::size_t c) const { return lists_[c]; }
  std::span<const double> centroid(std::size_t c) const { return {centroids_.data() + c * dim_, dim_}; }

  /// Centroid lists ordered by distance to the query, nearest first.
  std::vector<std::size_t> probe_order(std::span<const double> query) const {
    std::vector<std::pair<double, std::size_t>> d(lists_.size());
    for (std::size_t c = 0; c < lists_.size(); ++c) d[c] = {squared_l2(centroid(c), query), c};
    std::sort(d.begin(), d.end());
    std::vector<std::size_t> order(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) order[i] = d[i].second;
    return order;
  }

  /// Builds from a trained centroid set: every store row goes to the list of
  /// its nearest centroid.
  static IvfFlatIndex from_centroids(const FlatStore& store, std::vector<double> centroids) {
    IvfFlatIndex idx;
    idx.dim_ = store.dim();
    // Centroids are stored at the same precision as they are persisted.
    for (double& c : centroids) c = static_cast<double>(static_cast<float>(c));
    idx.centroids_ = std::move(centroids);
    idx.lists_.resize(idx.centroids_.size() / idx.dim_);
    for (std::size_t r = 0; r < store.size(); ++r) {
      const auto c = detail::nearest_centroid(store.vector(r), std::span<const double>(idx.centroids_), idx.dim_);
      auto& l = idx.lists_[c];
      l.rows.push_back(r);
      l.ids.push_back(store.id(r));
      const auto v = store.vector(r);
      l.vectors.insert(l.vectors.end(), v.begin(), v.end());
    }
    idx.n_ = store.size();
    idx.trained_ = true;
    return idx;
  }

  void save(std::ostream& out) const;
  static IvfFlatIndex load(std::istream& in);

 private:
  bool trained_ = false;
  std::size_t dim_ = 0;
  std::size_t n_ = 0;
  std::vector<double> centroids_;
  std::vector<List> lists_;
};

inline IvfFlatIndex build_index(const FlatStore& store, const IvfBuildOptions& options = {}) {
  if (store.empty()) throw ConfigError("build_index: empty store");
  const std::size_t nlist = options.nlist ? options.nlist : default_nlist(store.size());
  const std::size_t cap = std::max<std::size_t>(nlist, nlist * options.max_training_points_per_list);
  if (store.size() <= cap) {
    auto km = kmeans_train(store.data(), store.dim(), nlist, options.kmeans_iters, options.seed);
    return IvfFlatIndex::from_centroids(store, std::move(km.centroids));
  }
  std::vector<std::size_t> rows(store.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  Rng rng(options.seed ^ 0x5bd1e995ULL);
  shuffle(std::span<std::size_t>(rows), rng);
  rows.resize(cap);
  std::sort(rows.begin(), rows.end());
  std::vector<float> sample;
  sample.reserve(cap * store.dim());
  for (auto r : rows) {
    const auto v = store.vector(r);
    sample.insert(sample.end(), v.begin(), v.end());
  }
  auto km = kmeans_train(std::span<const float>(sample), store.dim(), nlist, options.kmeans_iters, options.seed);
  return IvfFlatIndex::from_centroids(store, std::move(km.centroids));
}

/// Scans exactly the nprobe lists whose centroids are nearest the query.
inline SearchResult ivf_search(const IvfFlatIndex& index, std::span<const double> query, std::size_t k,
                               std::size_t nprobe) {
  if (!index.trained()) throw ConfigError("ivf_search: index is not trained");
  if (k == 0) throw ConfigError("ivf_search: k must be >= 1");
  if (nprobe == 0 || nprobe > index.nlist()) throw ConfigError("ivf_search: nprobe must lie in [1, nlist]");
  if (query.size() != index.dim()) throw DimensionError("ivf_search: query dimension mismatch");
  const auto order = index.probe_order(query);
  detail::TopK top(k);
  const std::size_t dim = index.dim();
  for (std::size_t p = 0; p < nprobe; ++p) {
    const auto& l = index.list(order[p]);
    for (std::size_t i = 0; i < l.size(); ++i) {
      const std::span<const float> v(l.vectors.data() + i * dim, dim);
      top.offer({l.ids[i], squared_l2(v, query), l.rows[i]});
    }
  }
  return top.take();
}

// Index file (little-endian): "CURIVFFL", u8 version, u64 dim, u64 nlist,
// u64 n, f32 centroids[nlist x dim], then per list: u64 length,
// u64 rows[length], i64 ids[length], f32 vectors[length x dim].
inline constexpr std::string_view kIndexMagic = "CURIVFFL";
inline constexpr std::uint8_t kIndexVersion = 1;

inline void IvfFlatIndex::save(std::ostream& out) const {
  if (!trained_) throw ConfigError("cannot save an untrained index");
  out.write(kIndexMagic.data(), static_cast<std::streamsize>(kIndexMagic.size()));
  io::write_le<std::uint8_t>(out, kIndexVersion);
  io::write_le<std::uint64_t>(out, dim_);
  io::write_le<std::uint64_t>(out, lists_.size());
  io::write_le<std::uint64_t>(out, n_);
  for (double c : centroids_) io::write_le<float>(out, static_cast<float>(c));
  for (const auto& l : lists_) {
    io::write_le<std::uint64_t>(out, l.size());
    for (auto r : l.rows) io::write_le<std::uint64_t>(out, r);
    for (auto id : l.ids) io::write_le<std::int64_t>(out, id);
    for (float v : l.vectors) io::write_le<float>(out, v);
  }
}

inline IvfFlatIndex IvfFlatIndex::load(std::istream& in) {
  io::expect_magic(in, kIndexMagic);
  if (io::read_le<std::uint8_t>(in) != kIndexVersion) throw ParseError("unsupported index version");
  IvfFlatIndex idx;
  idx.dim_ = io::read_le<std::uint64_t>(in);
  const auto nlist = io::read_le<std::uint64_t>(in);
  idx.n_ = io::read_le<std::uint64_t>(in);
  if (idx.dim_ == 0 || nlist == 0 || idx.dim_ > (1u << 20) || nlist > (1u << 24)) throw ParseError("index header out of range");
  idx.centroids_.resize(nlist * idx.dim_);
  for (double& c : idx.centroids_) c = static_cast<double>(io::read_le<float>(in));
  idx.lists_.resize(nlist);
  std::size_t total = 0;
  for (auto& l : idx.lists_) {
    const auto len = io::read_le<std::uint64_t>(in);
    if (len > idx.n_) throw ParseError("inverted list longer than the index");
    l.rows.resize(len);
    l.ids.resize(len);
    l.vectors.resize(len * idx.dim_);
    for (auto& r : l.rows) r = io::read_le<std::uint64_t>(in);
    for (auto& id : l.ids) id = io::read_le<std::int64_t>(in);
    for (auto& v : l.vectors) v = io::read_le<float>(in);
    total += len;
  }
  if (total != idx.n_) throw ParseError("inverted lists do not add up to the stored count");
  idx.trained_ = true;
  return idx;
}

inline void save_index(const std::filesystem::path& path, const IvfFlatIndex& index) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write index " + path.string());
  index.save(out);
}

inline IvfFlatIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open index " + path.string());
  return IvfFlatIndex::load(in);
}

}  // namespace curator
