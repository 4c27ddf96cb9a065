#pragma once

// Deterministic corpora for tests, demos and the desk-scale experiment:
// the worked "Spanish Renaissance" exhibition and a synthetic catalog with
// planted prompt <-> tag structure.

#include <algorithm>
#include <cmath>
#include <set>
#include <span>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "curator/corpus.hpp"
#include "curator/random.hpp"

namespace curator::fixtures {

inline constexpr std::string_view kSpanishTitle = "Sculpture and Decorative Arts of the Spanish Renaissance";
inline constexpr std::string_view kSpanishOverview =
    "The Metropolitan Museum of Art's small but excellent collection of Spanish polychrome sculpture, including "
    "sacred reliefs and freestanding carved figures once housed in the churches of Spain, is displayed in the gallery "
    "adjacent to the newly reopened Velez Blanco Patio. The selection, which displays the unique blending of early "
    "western European and Islamic stylistic and technical influences, emphasizes the diversity in the material "
    "culture of Renaissance Spain after the Catholic reconquest by Ferdinand and Isabella.";

/// Reference assistant answer for the worked exhibition, verbatim
/// (it carries five of the six field lists).
inline constexpr std::string_view kWorkedAssistantContent =
    R"("{'Department': ['European Sculpture and Decorative Arts', 'European Sculpture and Decorative Arts', 'European Sculpture and Decorative Arts', 'The American Wing', 'European Sculpture and Decorative Arts', 'European Sculpture and Decorative Arts', 'European Sculpture and Decorative Arts', 'European Sculpture and Decorative Arts', 'European Sculpture and Decorative Arts', 'European Sculpture and Decorative Arts', 'European Sculpture and Decorative Arts'], 'Artist Display Name': ['None', 'None', 'None', 'None', 'Diego de Pesquera', 'None', 'None', 'None', 'Juan Martinez Montanes', 'Juan de Ancheta', 'Diego de Atienza'], 'Object Begin Date': ['1600', '1500', '1585', '1630', '1567', '1585', '1585', '1600', '1615', '1575', '1646'], 'Medium': ['Tin-glazed earthenware', 'Tin-glazed and luster-painted earthenware', 'Tin-glazed and luster-painted earthenware', 'Silver gilt, enamel', 'Wood, painted and gilt', 'Wool, silk, metal thread on canvas', 'Wool, silk, metal thread on canvas', 'Tin-glazed and luster-painted earthenware', 'Polychromed wood with gilding', 'Wood, polychromed and gilded', 'Silver gilt with enamel, cast, chased, and engraved'], 'Classification': ['Ceramics-Faience', 'Ceramics-Pottery', 'Ceramics-Pottery', 'None', 'Sculpture', 'Textiles-Embroidered', 'Textiles-Embroidered', 'Ceramics-Pottery', 'Sculpture', 'Sculpture', 'Metalwork-Silver']}")";

inline const std::vector<ObjectId>& spanish_object_ids() {
  static const std::vector<ObjectId> ids = {187702, 187863, 196434, 197089, 199674, 210828,
                                            210826, 201910, 202718, 205084, 197090};
  return ids;
}

/// The eleven artworks of the worked exhibition, in exhibition order.
inline std::vector<ArtworkRecord> spanish_artworks() {
  const std::string esda = "European Sculpture and Decorative Arts";
  const std::vector<std::string> artists = {"", "", "", "", "Diego de Pesquera", "", "", "", "Juan Martinez Montanes",
                                            "Juan de Ancheta", "Diego de Atienza"};
  const std::vector<std::string> dates = {"1600", "1500", "1585", "1630", "1567", "1585",
                                          "1585", "1600", "1615", "1575", "1646"};
  const std::vector<std::string> media = {"Tin-glazed earthenware",
                                          "Tin-glazed and luster-painted earthenware",
                                          "Tin-glazed and luster-painted earthenware",
                                          "Silver gilt, enamel",
                                          "Wood, painted and gilt",
                                          "Wool, silk, metal thread on canvas",
                                          "Wool, silk, metal thread on canvas",
                                          "Tin-glazed and luster-painted earthenware",
                                          "Polychromed wood with gilding",
                                          "Wood, polychromed and gilded",
                                          "Silver gilt with enamel, cast, chased, and engraved"};
  const std::vector<std::string> classes = {"Ceramics-Faience",     "Ceramics-Pottery", "Ceramics-Pottery", "",
                                            "Sculpture",            "Textiles-Embroidered", "Textiles-Embroidered",
                                            "Ceramics-Pottery",     "Sculpture",        "Sculpture",
                                            "Metalwork-Silver"};
  std::vector<ArtworkRecord> out;
  const auto& ids = spanish_object_ids();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    ArtworkRecord a;
    a.object_id = ids[i];
    a.values(Field::department).push_back(i == 3 ? "The American Wing" : esda);
    if (!artists[i].empty()) a.values(Field::artist_display_name).push_back(artists[i]);
    a.values(Field::object_begin_date).push_back(dates[i]);
    a.values(Field::medium).push_back(media[i]);
    if (!classes[i].empty()) a.values(Field::classification).push_back(classes[i]);
    out.push_back(std::move(a));
  }
  out[0].title = "Jug";
  out[0].object_name = "Jug";
  out[0].values(Field::tags) = {"Cranes", "Donkeys", "Trees"};
  out[1].title = "Bottle (Refredador)";
  out[1].object_name = "Bottle";
  out[1].values(Field::tags) = {"Coat of Arms"};
  return out;
}

/// Exhibitions document holding just the worked exhibition.
inline std::string spanish_exhibitions_json() {
  nlohmann::ordered_json ex;
  ex["title"] = kSpanishTitle;
  ex["overview_text"] = kSpanishOverview;
  nlohmann::ordered_json ids = nlohmann::ordered_json::object();
  for (const auto& a : spanish_artworks()) ids[std::to_string(a.object_id)] = artwork_to_json(a);
  ex["object_ids"] = std::move(ids);
  nlohmann::ordered_json doc;
  doc["exhibitions"] = nlohmann::ordered_json::array({ex});
  return doc.dump(2);
}

// ---------------------------------------------------------------------------
// Synthetic corpus

struct SyntheticConfig {
  std::size_t artworks = 10000;
  std::size_t exhibitions = 60;
  std::size_t themes = 12;
  std::size_t core_per_theme = 40;   // artworks carrying the theme's distinctive tags
  std::size_t min_exhibition = 8;
  std::size_t max_exhibition = 20;
  double off_core_fraction = 0.1;    // share of an exhibition drawn from the theme's non-core artworks
  std::uint64_t seed = 7;
};

struct SyntheticCorpus {
  std::vector<ArtworkRecord> artworks;
  std::string exhibitions_json;       // exhibitions document
  std::vector<std::size_t> exhibition_theme;
};

namespace detail {

inline std::string pseudo_word(Rng& rng, std::size_t syllables) {
  static constexpr std::string_view onsets[] = {"b", "c", "d", "f", "g", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
  static constexpr std::string_view nuclei[] = {"a", "e", "i", "o", "u", "ai", "ou"};
  std::string w;
  for (std::size_t s = 0; s < syllables; ++s) {
    w += onsets[uniform_index(rng, std::size(onsets))];
    w += nuclei[uniform_index(rng, std::size(nuclei))];
  }
  return w;
}

inline std::string capitalize(std::string w) {
  if (!w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[static_cast<std::size_t>(uniform_index(rng, v.size()))];
}

}  // namespace detail

/// Catalog plus exhibitions where each exhibition draws mostly from one
/// theme's core artworks and its text repeats that theme's keywords.
inline SyntheticCorpus make_synthetic_corpus(const SyntheticConfig& cfg = {}) {
  using detail::pick;
  Rng rng(cfg.seed);
  static const std::vector<std::string> departments = {
      "Asian Art", "Photographs", "Drawings and Prints", "European Sculpture and Decorative Arts",
      "Modern and Contemporary Art", "Egyptian Art", "The American Wing", "Arms and Armor"};
  static const std::vector<std::string> filler = {
      "exhibition", "presents", "works", "collection", "gallery", "museum", "selection", "artists", "objects",
      "featuring", "explores", "history", "rare", "display", "rooms", "loans", "visitors", "period", "century",
      "tradition", "new", "view", "celebrates", "including", "major", "important", "examples", "several"};

  struct Theme {
    std::string department;
    std::vector<std::string> keywords, artists, media, classes, tags, dates;
  };
  std::vector<Theme> themes(cfg.themes);
  std::set<std::string> used;
  auto fresh = [&](std::size_t syllables) {
    for (;;) {
      auto w = detail::pseudo_word(rng, syllables);
      if (used.insert(w).second) return w;
    }
  };
  for (std::size_t t = 0; t < cfg.themes; ++t) {
    auto& th = themes[t];
    th.department = departments[t % departments.size()];
    for (int i = 0; i < 6; ++i) th.keywords.push_back(fresh(3));
    for (int i = 0; i < 4; ++i) th.artists.push_back(detail::capitalize(fresh(2)) + " " + detail::capitalize(fresh(3)));
    for (int i = 0; i < 3; ++i) th.media.push_back(detail::capitalize(fresh(2)) + " on " + fresh(2));
    for (int i = 0; i < 2; ++i) th.classes.push_back(detail::capitalize(fresh(3)));
    for (int i = 0; i < 6; ++i) th.tags.push_back(detail::capitalize(fresh(2)));
    const int base = 1400 + static_cast<int>(t) * 40;
    for (int i = 0; i < 4; ++i) th.dates.push_back(std::to_string(base + 10 * i));
  }
  std::vector<std::string> bg_artists, bg_media, bg_classes, bg_tags;
  for (int i = 0; i < 300; ++i) bg_artists.push_back(detail::capitalize(fresh(2)) + " " + detail::capitalize(fresh(2)));
  for (int i = 0; i < 60; ++i) bg_media.push_back(detail::capitalize(fresh(2)) + " and " + fresh(2));
  for (int i = 0; i < 20; ++i) bg_classes.push_back(detail::capitalize(fresh(2)) + "-" + fresh(1));
  for (int i = 0; i < 120; ++i) bg_tags.push_back(detail::capitalize(fresh(3)));

  // Theme membership: round-robin over a shuffled row order.
  std::vector<std::size_t> rows(cfg.artworks);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  shuffle(std::span<std::size_t>(rows), rng);
  std::vector<std::vector<std::size_t>> core(cfg.themes), off_core(cfg.themes);
  std::vector<std::size_t> theme_of(cfg.artworks), slot_in_theme(cfg.artworks);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    theme_of[rows[k]] = k % cfg.themes;
    slot_in_theme[rows[k]] = k / cfg.themes;
  }

  SyntheticCorpus out;
  out.artworks.reserve(cfg.artworks);
  for (std::size_t i = 0; i < cfg.artworks; ++i) {
    const auto t = theme_of[i];
    const auto& th = themes[t];
    const bool is_core = slot_in_theme[i] < cfg.core_per_theme;
    ArtworkRecord a;
    a.object_id = static_cast<ObjectId>(100000 + 7 * i);
    a.values(Field::department).push_back(th.department);
    if (is_core) {
      core[t].push_back(i);
      a.values(Field::artist_display_name).push_back(pick(rng, th.artists));
      a.values(Field::object_begin_date).push_back(pick(rng, th.dates));
      a.values(Field::medium).push_back(pick(rng, th.media));
      a.values(Field::classification).push_back(pick(rng, th.classes));
      std::vector<std::string> tags = th.tags;
      shuffle(std::span<std::string>(tags), rng);
      tags.resize(2 + uniform_index(rng, 2));
      a.values(Field::tags) = std::move(tags);
    } else {
      off_core[t].push_back(i);
      if (uniform01(rng) < 0.6) a.values(Field::artist_display_name).push_back(pick(rng, bg_artists));
      a.values(Field::object_begin_date).push_back(std::to_string(1300 + uniform_index(rng, 700)));
      a.values(Field::medium).push_back(pick(rng, bg_media));
      if (uniform01(rng) < 0.8) a.values(Field::classification).push_back(pick(rng, bg_classes));
      const auto n_tags = uniform_index(rng, 3);
      for (std::uint64_t k = 0; k < n_tags; ++k) a.values(Field::tags).push_back(pick(rng, bg_tags));
      std::sort(a.values(Field::tags).begin(), a.values(Field::tags).end());
      a.values(Field::tags).erase(std::unique(a.values(Field::tags).begin(), a.values(Field::tags).end()),
                                  a.values(Field::tags).end());
    }
    a.title = "Untitled " + std::to_string(i);
    a.object_name = is_core ? th.classes[0] : "Object";
    if (i % 3 == 0) a.public_image_url = "https://images.example.org/" + std::to_string(a.object_id) + ".jpg";
    out.artworks.push_back(std::move(a));
  }

  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (std::size_t e = 0; e < cfg.exhibitions; ++e) {
    const auto t = e % cfg.themes;
    const auto& th = themes[t];
    out.exhibition_theme.push_back(t);
    auto kw = th.keywords;
    shuffle(std::span<std::string>(kw), rng);
    const std::string title = detail::capitalize(kw[0]) + " and " + detail::capitalize(kw[1]) + ": " +
                              detail::capitalize(pick(rng, filler)) + " " + std::to_string(e + 1);
    std::string overview;
    const std::size_t words = 30 + uniform_index(rng, 20);
    for (std::size_t w = 0; w < words; ++w) {
      if (w) overview += ' ';
      overview += uniform01(rng) < 0.35 ? pick(rng, th.keywords) : pick(rng, filler);
    }
    overview += '.';

    const std::size_t size = cfg.min_exhibition + uniform_index(rng, cfg.max_exhibition - cfg.min_exhibition + 1);
    auto n_off = static_cast<std::size_t>(std::floor(cfg.off_core_fraction * static_cast<double>(size)));
    n_off = std::min(n_off, off_core[t].size());
    const std::size_t n_core = std::min(size - n_off, core[t].size());
    auto core_pool = core[t];
    shuffle(std::span<std::size_t>(core_pool), rng);
    std::vector<std::size_t> chosen(core_pool.begin(), core_pool.begin() + static_cast<std::ptrdiff_t>(n_core));
    for (std::size_t k = 0; k < n_off; ++k) chosen.push_back(pick(rng, off_core[t]));
    std::sort(chosen.begin(), chosen.end());
    chosen.erase(std::unique(chosen.begin(), chosen.end()), chosen.end());
    shuffle(std::span<std::size_t>(chosen), rng);

    nlohmann::ordered_json ex;
    ex["title"] = title;
    ex["overview_text"] = overview;
    nlohmann::ordered_json ids = nlohmann::ordered_json::object();
    for (auto row : chosen) ids[std::to_string(out.artworks[row].object_id)] = artwork_to_json(out.artworks[row]);
    ex["object_ids"] = std::move(ids);
    arr.push_back(std::move(ex));
  }
  nlohmann::ordered_json doc;
  doc["exhibitions"] = std::move(arr);
  out.exhibitions_json = doc.dump();
  return out;
}

}  // namespace curator::fixtures
