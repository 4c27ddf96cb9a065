#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "support.hpp"

using namespace curator;
using namespace curator::testing;

namespace {

TagVocabulary vocab_of(const std::vector<std::string>& tags) {
  std::vector<std::pair<std::string, FieldMask>> e;
  for (const auto& t : tags) e.emplace_back(t, field_bit(Field::tags));
  return TagVocabulary::from_entries(std::move(e));
}

TagProbabilityVector random_prediction(Rng& rng, std::size_t n) {
  TagProbabilityVector p{std::vector<double>(n)};
  // Mix of negative, zero and positive entries.
  for (auto& x : p.values) {
    const auto kind = uniform_index(rng, 4);
    x = kind == 0 ? -uniform01(rng) : kind == 1 ? 0.0 : uniform01(rng);
  }
  return p;
}

}  // namespace

TEST(HitScore, MatchesNestedLoopOracle) {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const auto rc = random_catalog(rng, 1 + uniform_index(rng, 300), 1 + uniform_index(rng, 120));
    const auto catalog = make_catalog(rc.records);
    // Vocabulary: a subset of the pool plus strings that occur nowhere.
    std::vector<std::string> tags;
    for (const auto& t : rc.pool) {
      if (uniform_index(rng, 3) != 0) tags.push_back(t);
    }
    tags.push_back("absent");
    const auto vocab = vocab_of(tags);
    const auto p = random_prediction(rng, vocab.size());
    const auto got = hit_scores(p, vocab, catalog);
    const auto want = oracle::brute_force_hits(p.values, vocab.entries(), rc.records);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].object_id, want[i].first);
      EXPECT_NEAR(got[i].hit, want[i].second, 1e-12);
    }
  }
}

TEST(HitScore, DuplicateValuesInOneRowCountOnce) {
  const auto catalog = make_catalog({make_artwork(1, "Arms", {"Arms", "Arms"}, "", "", {"Arms"}, {"Arms"})});
  const auto vocab = vocab_of({"Arms"});
  EXPECT_EQ(hit_scores(TagProbabilityVector{{0.7}}, vocab, catalog)[0].hit, 0.7);
}

TEST(HitScore, TiesRankByAscendingObjectId) {
  const auto catalog = make_catalog({make_artwork(30, "", {}, "", "", {}, {"x"}), make_artwork(10, "", {}, "", "", {}, {"x"}),
                                     make_artwork(20, "", {}, "", "", {}, {"y"})});
  const auto vocab = vocab_of({"x", "y"});
  const HitScorer scorer(vocab, catalog);
  const auto r = scorer.rank(TagProbabilityVector{{0.5, 0.5}});
  EXPECT_EQ(select_topk(r, 3), (std::vector<ObjectId>{10, 20, 30}));
  EXPECT_EQ(select_topk(r, 10).size(), 3u);
  EXPECT_THROW(select_topk(r, 0), ConfigError);
  const auto zeros = scorer.rank(TagProbabilityVector{{0.0, -1.0}});
  EXPECT_EQ(select_topk(zeros, 3), (std::vector<ObjectId>{10, 20, 30}));
  EXPECT_EQ(scorer.top_k(TagProbabilityVector{{0.1, 0.9}}, 1)[0].object_id, 20);
  EXPECT_THROW(scorer.scores(TagProbabilityVector{{1.0}}), DimensionError);
}

TEST(HitScore, TopKIsPrefixOfFullRanking) {
  Rng rng(11);
  const auto rc = random_catalog(rng, 200, 40);
  const auto catalog = make_catalog(rc.records);
  const auto vocab = vocab_of(rc.pool);
  const HitScorer scorer(vocab, catalog);
  const auto p = random_prediction(rng, vocab.size());
  const auto full = scorer.rank(p);
  for (std::size_t k : {1u, 5u, 16u, 200u}) {
    const auto top = scorer.top_k(p, k);
    EXPECT_TRUE(std::equal(top.begin(), top.end(), full.begin()));
  }
}

TEST(Metrics, TagIntersectionPerField) {
  const auto a = make_artwork(1, "Arms", {"A", "B"}, "1900", "", {"c"}, {"x"});
  const auto b = make_artwork(2, "Arms", {"B"}, "1901", "", {"c"}, {"y"});
  const auto c = make_artwork(3, "Egypt", {"Z"}, "1900", "", {}, {"x", "y", "q"});
  const auto s = tag_intersection({&a, &b}, {&c});
  EXPECT_EQ(*s[index_of(Field::department)], 0.0);
  EXPECT_EQ(*s[index_of(Field::artist_display_name)], 0.0);
  EXPECT_EQ(*s[index_of(Field::object_begin_date)], 0.5);
  EXPECT_FALSE(s[index_of(Field::medium)]);
  EXPECT_EQ(*s[index_of(Field::classification)], 0.0);
  EXPECT_EQ(*s[index_of(Field::tags)], 1.0);
  const auto self = tag_intersection({&a, &b}, {&b, &a});
  for (Field f : kAllFields) {
    if (self[index_of(f)]) {
      EXPECT_EQ(*self[index_of(f)], 1.0);
    }
  }
}

TEST(Metrics, ArtworkIntersection) {
  EXPECT_EQ(artwork_intersection({1, 2, 3, 4}, {4, 9, 1}), 0.5);
  EXPECT_EQ(artwork_intersection({1, 2}, {}), 0.0);
  EXPECT_EQ(artwork_intersection({1, 2}, {1, 1, 1}), 0.5);
  EXPECT_THROW(artwork_intersection({}, {1}), ConfigError);
}

TEST(Metrics, RandomBaseline) {
  EXPECT_NEAR(random_baseline(44, 484956), 9.072988e-5, 1e-11);
  EXPECT_EQ(random_baseline(16, 16), 1.0);
  EXPECT_THROW(random_baseline(1, 0), ConfigError);
  EXPECT_THROW(random_baseline(5, 4), ConfigError);
}

TEST(Metrics, RandomBaselineAgreesWithSimulation) {
  // Expected overlap of a uniform k-subset with a fixed k-subset of n.
  Rng rng(12);
  const std::size_t n = 400, k = 20, trials = 4000;
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  double total = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    shuffle(std::span<std::size_t>(rows), rng);
    std::size_t common = 0;
    for (std::size_t i = 0; i < k; ++i) common += rows[i] < k;
    total += static_cast<double>(common) / static_cast<double>(k);
  }
  const double sd = std::sqrt(random_baseline(k, n) / k / trials);
  EXPECT_NEAR(total / trials, random_baseline(k, n), 4 * sd);
}

TEST(Evaluate, PerfectCuratorScoresOne) {
  const auto artworks = fixtures::spanish_artworks();
  const auto catalog = make_catalog(artworks);
  std::vector<ExhibitionRecord> exhibitions;
  exhibitions.push_back(make_exhibition(catalog, {artworks[0].object_id, artworks[1].object_id}, "a"));
  exhibitions.push_back(make_exhibition(catalog, {artworks[2].object_id, artworks[3].object_id, artworks[4].object_id}, "b"));
  const DatasetSplit split{{}, {0, 1}, 0};
  std::vector<std::size_t> ks;
  const auto perfect = [&](const ExhibitionRecord& ex, std::size_t k) {
    ks.push_back(k);
    return ex.object_ids();
  };
  const auto r = evaluate_model(perfect, exhibitions, split, catalog, "oracle");
  EXPECT_EQ(ks, (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(r.artwork_mean, 1.0);
  EXPECT_EQ(r.mean_k, 2.5);
  EXPECT_EQ(r.random_baseline, 2.5 / 11.0);
  for (const auto& s : r.subgroup_means) {
    if (s) {
      EXPECT_EQ(*s, 1.0);
    }
  }
  EXPECT_EQ(r.to_json()["model"], "oracle");
  std::ostringstream csv;
  r.write_csv(csv);
  const auto text = csv.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);

  const auto unknown = [](const ExhibitionRecord&, std::size_t) { return std::vector<ObjectId>{42}; };
  const auto z = evaluate_model(unknown, exhibitions, split, catalog);
  EXPECT_EQ(z.artwork_mean, 0.0);
  EXPECT_EQ(z.rows[0].predicted, 1u);
  EXPECT_THROW(evaluate_model(unknown, exhibitions, DatasetSplit{{0}, {}, 0}, catalog), ConfigError);
}

TEST(CurateM3, ReturnsNearestArtworkEmbeddings) {
  FlatStore store(2);
  store.add(7, std::vector<double>{0, 0});
  store.add(8, std::vector<double>{5, 5});
  store.add(9, std::vector<double>{1, 0});
  const auto index = build_index(store, {1, 5, 256, 0});
  const auto r = curate_m3(std::vector<double>{0.9, 0.1}, index, 2, 16);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].object_id, 9);
  EXPECT_EQ(r[1].object_id, 7);
}
