#include <gtest/gtest.h>

#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "support.hpp"

using namespace curator;
using namespace curator::testing;

namespace {

std::vector<std::vector<std::string>> read_all(const std::string& text) {
  std::istringstream in(text);
  CsvReader r(in);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  while (r.next(row)) rows.push_back(row);
  return rows;
}

std::string header_line() {
  return "Object ID,Department,Artist Display Name,Object Begin Date,Medium,Classification,Tags\n";
}

std::string printed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.8f", v);
  return buf;
}

struct SpanishCorpus {
  Catalog catalog{fixtures::spanish_artworks()};
  std::vector<ExhibitionRecord> exhibitions;
  SpanishCorpus() {
    std::istringstream in(fixtures::spanish_exhibitions_json());
    exhibitions = parse_exhibitions(in, catalog).exhibitions;
  }
};

}  // namespace

TEST(Csv, QuotedCellsEmbeddedNewlinesAndDoubledQuotes) {
  const auto rows = read_all("a,\"b,c\",\"say \"\"hi\"\"\"\r\n\"line1\nline2\",,x\n");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"a", "b,c", "say \"hi\""}));
  EXPECT_EQ(rows[1], (std::vector<std::string>{"line1\nline2", "", "x"}));
}

TEST(Csv, SkipsByteOrderMark) {
  const auto rows = read_all("\xEF\xBB\xBFObject ID,x\n1,2\n");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0][0], "Object ID");
}

TEST(Csv, EscapeRoundTrips) {
  for (std::string s : {"plain", "a,b", "q\"uote", "multi\nline", ""}) {
    const auto rows = read_all(csv_escape(s) + "\n");
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0][0], s);
  }
}

TEST(Catalog, SplitsPipeSeparatedValuesAndDropsEmpties) {
  EXPECT_EQ(split_multi_value("a|b||c"), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_TRUE(split_multi_value("").empty());
}

TEST(Catalog, ObjectIdsArePositiveIntegers) {
  EXPECT_EQ(parse_object_id("187702"), 187702);
  EXPECT_FALSE(parse_object_id(""));
  EXPECT_FALSE(parse_object_id("-3"));
  EXPECT_FALSE(parse_object_id("12a"));
  EXPECT_FALSE(parse_object_id("0"));
}

TEST(Catalog, MissingRequiredColumnIsFatal) {
  std::istringstream in("Object ID,Department,Artist Display Name,Object Begin Date,Medium,Classification\n1,a,b,c,d,e\n");
  EXPECT_THROW(parse_artwork_catalog(in), ConfigError);
}

TEST(Catalog, MalformedRowsAreSkippedAndCounted) {
  std::istringstream in(header_line() + "1,Asian Art,,1600,Ink,,\n" + "oops,Asian Art,,1600,Ink,,\n" + "2,short\n" +
                        "1,Asian Art,,1600,Ink,,\n" + "3,Photographs,A|B,1900,Silver,Photo|Print,Cats\n");
  const auto r = parse_artwork_catalog(in);
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.skipped_rows, 3u);
  EXPECT_EQ(r.duplicate_ids, 1u);
  EXPECT_EQ(r.records[1].artist_display_name(), (std::vector<std::string>{"A", "B"}));
  EXPECT_EQ(r.records[1].classification(), (std::vector<std::string>{"Photo", "Print"}));
  EXPECT_TRUE(r.records[0].artist_display_name().empty());
}

TEST(Catalog, WriteThenParseRoundTrips) {
  auto artworks = fixtures::spanish_artworks();
  artworks[2].public_image_url = "https://images.example.org/196434.jpg";
  artworks[3].title = "Ewer, \"gilt\"";
  std::istringstream in(catalog_csv(artworks));
  const auto r = parse_artwork_catalog(in);
  EXPECT_EQ(r.skipped_rows, 0u);
  EXPECT_EQ(r.records, artworks);
}

TEST(Catalog, DuplicateIdsRejectedByCatalog) {
  auto a = fixtures::spanish_artworks();
  a.push_back(a.front());
  EXPECT_THROW(Catalog{std::move(a)}, ConsistencyError);
}

TEST(Exhibitions, ParsesTheJugFromTheWorkedExhibition) {
  SpanishCorpus c;
  ASSERT_EQ(c.exhibitions.size(), 1u);
  const auto& ex = c.exhibitions[0];
  EXPECT_EQ(ex.title, fixtures::kSpanishTitle);
  EXPECT_EQ(ex.prompt_text, "Title of exhibition is: " + std::string(fixtures::kSpanishTitle) +
                                " and the description is: " + std::string(fixtures::kSpanishOverview));
  ASSERT_EQ(ex.artworks.size(), 11u);
  const auto* jug = ex.artworks[0];
  EXPECT_EQ(jug->object_id, 187702);
  EXPECT_EQ(jug->title, "Jug");
  EXPECT_EQ(jug->object_begin_date(), "1600");
  EXPECT_EQ(jug->medium(), "Tin-glazed earthenware");
  EXPECT_EQ(jug->classification(), (std::vector<std::string>{"Ceramics-Faience"}));
  EXPECT_EQ(jug->tags(), (std::vector<std::string>{"Cranes", "Donkeys", "Trees"}));
  EXPECT_EQ(ex.object_ids(), fixtures::spanish_object_ids());
}

TEST(Exhibitions, UnresolvedIdsAreCountedAndEmptyExhibitionsDropped) {
  const Catalog catalog(fixtures::spanish_artworks());
  std::istringstream in(R"({"exhibitions": [
    {"title": "A", "overview_text": "x", "object_ids": ["187702", "999", 187863]},
    {"title": "B", "overview_text": "y", "object_ids": {"424242": {}}}]})");
  const auto r = parse_exhibitions(in, catalog);
  ASSERT_EQ(r.exhibitions.size(), 1u);
  EXPECT_EQ(r.exhibitions[0].object_ids(), (std::vector<ObjectId>{187702, 187863}));
  EXPECT_EQ(r.unresolved_object_ids, 2u);
  EXPECT_EQ(r.dropped_exhibitions, 1u);
}

TEST(Exhibitions, MalformedDocumentIsAParseError) {
  const Catalog catalog(fixtures::spanish_artworks());
  std::istringstream a("{not json");
  EXPECT_THROW(parse_exhibitions(a, catalog), ParseError);
  std::istringstream b(R"({"exhibitions": [{"title": "A"}]})");
  EXPECT_THROW(parse_exhibitions(b, catalog), ParseError);
}

TEST(Exhibitions, SerializeAndReparseIsStructurallyEqual) {
  SpanishCorpus c;
  std::istringstream in(exhibitions_to_json(c.exhibitions).dump());
  const auto again = parse_exhibitions(in, c.catalog).exhibitions;
  ASSERT_EQ(again.size(), c.exhibitions.size());
  EXPECT_EQ(again[0].title, c.exhibitions[0].title);
  EXPECT_EQ(again[0].overview_text, c.exhibitions[0].overview_text);
  EXPECT_EQ(again[0].object_ids(), c.exhibitions[0].object_ids());
}

TEST(TagVocabulary, SameStringInTwoFieldsIsOneSlot) {
  const auto catalog = make_catalog({make_artwork(1, "A", {}, "", "", {}, {"A"})});
  const auto ex = make_exhibition(catalog, {1});
  const auto vocab = build_tag_vocabulary({ex});
  ASSERT_EQ(vocab.size(), 1u);
  EXPECT_EQ(vocab[0], "A");
  EXPECT_EQ(vocab.source_fields(0), field_bit(Field::department) | field_bit(Field::tags));
  const auto p = flatten_exhibition_target(ex, vocab);
  EXPECT_DOUBLE_EQ(p[0], 2.0);
}

TEST(TagVocabulary, EqualsIndependentSetUnion) {
  Rng rng(5);
  auto rc = random_catalog(rng, 40, 30);
  const Catalog catalog(rc.records);
  const auto e1 = make_exhibition(catalog, {catalog[0].object_id, catalog[3].object_id, catalog[7].object_id});
  const auto e2 = make_exhibition(catalog, {catalog[3].object_id, catalog[11].object_id});
  std::set<std::string> oracle;
  for (std::size_t row : {0, 3, 7, 11}) {
    for (const auto& vals : catalog[row].fields) oracle.insert(vals.begin(), vals.end());
  }
  const auto vocab = build_tag_vocabulary({e1, e2});
  EXPECT_EQ(vocab.entries(), std::vector<std::string>(oracle.begin(), oracle.end()));
  for (std::size_t i = 0; i < vocab.size(); ++i) EXPECT_EQ(vocab.find(vocab[i]), i);
  EXPECT_FALSE(vocab.find("absent"));
}

TEST(TagVocabulary, OrderIsByCodePoint) {
  const auto catalog = make_catalog({make_artwork(1, "b", {"B", "a"}, "1600", "\xC3\xA9", {}, {"Z"})});
  const auto vocab = build_tag_vocabulary({make_exhibition(catalog, {1})});
  EXPECT_EQ(vocab.entries(), (std::vector<std::string>{"1600", "B", "Z", "a", "b", "\xC3\xA9"}));
}

TEST(Flattening, WorkedExhibitionReproducesPrintedValues) {
  SpanishCorpus c;
  const auto& ex = c.exhibitions[0];
  const auto dists = field_distributions(ex);
  std::map<std::string, double> dept(dists[index_of(Field::department)].begin(), dists[index_of(Field::department)].end());
  std::map<std::string, double> cls(dists[index_of(Field::classification)].begin(),
                                    dists[index_of(Field::classification)].end());
  EXPECT_EQ(printed(dept.at("European Sculpture and Decorative Arts")), "0.90909091");
  EXPECT_EQ(printed(cls.at("Ceramics-Pottery")), "0.30000000");
  for (const auto& [artist, p] : dists[index_of(Field::artist_display_name)]) EXPECT_DOUBLE_EQ(p, 0.25) << artist;

  const auto j = flattened_exhibition_json(ex);
  EXPECT_EQ(j["x"], ex.prompt_text);
  std::vector<std::string> z;
  for (const auto& v : j["z"]) z.push_back(v.get<std::string>());
  EXPECT_EQ(z, (std::vector<std::string>{"187702", "187863", "196434", "197089", "199674", "210828", "210826",
                                         "201910", "202718", "205084", "197090"}));
  EXPECT_NEAR(j["y"]["The American Wing"].get<double>(), 1.0 / 11.0, 1e-15);
}

TEST(Flattening, PerFieldSumsAreOneOnTheSyntheticCorpus) {
  const auto sc = fixtures::make_synthetic_corpus({.artworks = 2000, .exhibitions = 30, .themes = 6});
  const Catalog catalog(sc.artworks);
  std::istringstream in(sc.exhibitions_json);
  const auto exs = parse_exhibitions(in, catalog).exhibitions;
  ASSERT_EQ(exs.size(), 30u);
  const auto vocab = build_tag_vocabulary(exs);
  for (const auto& ex : exs) {
    for (const auto& dist : field_distributions(ex)) {
      if (dist.empty()) continue;
      double s = 0.0;
      for (const auto& [_, p] : dist) s += p;
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
    EXPECT_NO_THROW(flatten_exhibition_target(ex, vocab));
  }
}

TEST(Flattening, TagOutsideVocabularyIsAConsistencyError) {
  const auto catalog = make_catalog({make_artwork(1, "A", {}, "", "", {}, {}), make_artwork(2, "B", {}, "", "", {}, {})});
  const auto vocab = build_tag_vocabulary({make_exhibition(catalog, {1})});
  EXPECT_THROW(flatten_exhibition_target(make_exhibition(catalog, {2}), vocab), ConsistencyError);
}

TEST(Split, ReferenceCorpusSizes) {
  const auto s = split_dataset(236, 0.8, 7);
  EXPECT_EQ(s.train.size(), 188u);
  EXPECT_EQ(s.validation.size(), 48u);
}

TEST(Split, DeterministicDisjointAndCovering) {
  for (std::size_t n = 2; n <= 60; ++n) {
    const auto a = split_dataset(n, 0.8, 99);
    const auto b = split_dataset(n, 0.8, 99);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.validation, b.validation);
    std::set<std::size_t> all(a.train.begin(), a.train.end());
    for (auto i : a.validation) EXPECT_TRUE(all.insert(i).second) << "n=" << n;
    EXPECT_EQ(all.size(), n);
    EXPECT_EQ(*all.rbegin(), n - 1);
  }
  EXPECT_NE(split_dataset(50, 0.8, 1).train, split_dataset(50, 0.8, 2).train);
}

TEST(Split, RejectsBadArguments) {
  EXPECT_THROW(split_dataset(0, 0.8, 1), ConfigError);
  EXPECT_THROW(split_dataset(10, 1.0, 1), ConfigError);
  EXPECT_THROW(split_dataset(10, 0.0, 1), ConfigError);
}

TEST(Reports, TagFrequenciesMatchHandTally) {
  const auto catalog = make_catalog({
      make_artwork(1, "Asian Art", {"Hokusai"}, "1830", "Woodblock", {"Prints"}, {"Waves", "Boats"}),
      make_artwork(2, "Asian Art", {}, "1830", "Ink", {"Paintings"}, {"Boats"}),
      make_artwork(3, "Photographs", {"Hokusai"}, "1900", "Ink", {"Prints"}, {}),
  });
  const auto report = tag_frequency_report({make_exhibition(catalog, {1, 2, 3}), make_exhibition(catalog, {1})});
  EXPECT_EQ(report[index_of(Field::department)], (std::vector<ValueCount>{{"Asian Art", 3}, {"Photographs", 1}}));
  EXPECT_EQ(report[index_of(Field::tags)], (std::vector<ValueCount>{{"Boats", 3}, {"Waves", 2}}));
  EXPECT_EQ(report[index_of(Field::medium)], (std::vector<ValueCount>{{"Ink", 2}, {"Woodblock", 2}}));
  const auto top1 = tag_frequency_report({make_exhibition(catalog, {1, 2, 3})}, 1);
  EXPECT_EQ(top1[index_of(Field::artist_display_name)], (std::vector<ValueCount>{{"Hokusai", 2}}));
  for (const auto& f : tag_frequency_report({})) EXPECT_TRUE(f.empty());
}

TEST(Reports, CatalogAndExhibitionStatsMatchHandTally) {
  auto artworks = fixtures::spanish_artworks();
  const auto cs = catalog_stats(artworks);
  EXPECT_EQ(cs.records, 11u);
  EXPECT_EQ(cs.department, 11u);
  EXPECT_EQ(cs.artist_display_name, 4u);
  EXPECT_EQ(cs.classification, 10u);
  EXPECT_EQ(cs.tags, 2u);
  EXPECT_EQ(cs.title, 2u);
  EXPECT_EQ(cs.all_fields_non_empty, 0u);

  SpanishCorpus c;
  const auto es = exhibition_stats(c.exhibitions);
  EXPECT_EQ(es.exhibitions, 1u);
  EXPECT_EQ(es.artwork_slots, 11u);
  EXPECT_EQ(es.unique_artworks, 11u);
  // 11 departments + 4 artists + 11 dates + 11 media + 10 classifications + 4 tags
  EXPECT_EQ(es.tag_occurrences, 51u);
  EXPECT_EQ(es.words, count_words(fixtures::kSpanishTitle) + count_words(fixtures::kSpanishOverview));
  EXPECT_EQ(count_words("  a  b\tc\n"), 3u);
}

TEST(Reports, ReferenceFiguresAreRecorded) {
  EXPECT_EQ(reference::kCatalogRecords, 484956u);
  EXPECT_EQ(reference::kExhibitions, 236u);
  EXPECT_EQ(reference::kUniqueTags, 8591u);
  EXPECT_EQ(reference::kReportedOutputWidth, 8615u);
}
