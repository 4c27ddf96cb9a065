// Command-line front end: ingestion reports, training, evaluation, index
// building, fine-tune export, one-off curation and the HTTP service.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "curator/curator.hpp"
#include "curator/engine.hpp"
#include "curator/http_api.hpp"

namespace {

using namespace curator;

struct Common {
  std::string config_file;
  std::string catalog;
  std::string exhibitions;
  std::string artifacts;
  std::vector<std::string> settings;  // key=value
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_file, "Config file (key = value lines)");
  cmd->add_option("--catalog", c.catalog, "Catalog CSV");
  cmd->add_option("--exhibitions", c.exhibitions, "Exhibitions JSON");
  cmd->add_option("--artifacts", c.artifacts, "Artifacts directory");
  cmd->add_option("--set", c.settings, "Override a config key (key=value), repeatable");
}

EngineConfig resolve(const Common& c) {
  EngineConfig cfg = c.config_file.empty() ? EngineConfig{} : load_config(c.config_file);
  if (!c.catalog.empty()) cfg.catalog_csv = c.catalog;
  if (!c.exhibitions.empty()) cfg.exhibitions_json = c.exhibitions;
  if (!c.artifacts.empty()) cfg.artifacts_dir = c.artifacts;
  for (const auto& kv : c.settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_setting(cfg, detail::trim_copy(kv.substr(0, eq)), detail::trim_copy(kv.substr(eq + 1)));
  }
  apply_env_overrides(cfg);
  cfg.validate();
  return cfg;
}

Variant trainable_variant(const std::string& name) {
  const auto v = parse_variant(name);
  if (!v) throw ConfigError("variant must be m1, m2 or m3, got '" + name + "'");
  return *v;
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw Error("cannot write " + path.string());
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

// ---------------------------------------------------------------------------

int cmd_ingest(const EngineConfig& cfg, std::size_t top, const std::string& report_path,
               const std::string& flattened_path) {
  const auto corpus = load_corpus(cfg);
  const auto cs = catalog_stats(corpus->catalog.records());
  const auto es = exhibition_stats(corpus->exhibitions);

  nlohmann::ordered_json report;
  report["catalog"] = {{"records", cs.records},
                       {"skipped_rows", corpus->skipped_rows},
                       {"all_tracked_fields_non_empty", cs.all_fields_non_empty}};
  report["catalog"]["non_empty_per_field"] = {{"Department", cs.department},
                                              {"Object Name", cs.object_name},
                                              {"Title", cs.title},
                                              {"Artist Display Name", cs.artist_display_name},
                                              {"Object Begin Date", cs.object_begin_date},
                                              {"Medium", cs.medium},
                                              {"Classification", cs.classification},
                                              {"Tags", cs.tags}};
  report["exhibitions"] = {{"exhibitions", es.exhibitions},
                           {"artwork_slots", es.artwork_slots},
                           {"unique_artworks", es.unique_artworks},
                           {"prompt_words", es.words},
                           {"tag_occurrences", es.tag_occurrences},
                           {"unique_tags", es.unique_tags},
                           {"unresolved_object_ids", corpus->unresolved_object_ids},
                           {"dropped_exhibitions", corpus->dropped_exhibitions}};
  report["tag_vocabulary_size"] = corpus->vocab.size();
  report["split"] = {{"train", corpus->split.train.size()}, {"validation", corpus->split.validation.size()}};
  nlohmann::ordered_json tops = nlohmann::ordered_json::object();
  const auto freq = tag_frequency_report(corpus->exhibitions, top);
  for (Field f : kAllFields) {
    auto& arr = tops[std::string(field_name(f))] = nlohmann::ordered_json::array();
    for (const auto& vc : freq[index_of(f)]) arr.push_back({{"value", vc.value}, {"count", vc.count}});
  }
  report["top_values"] = std::move(tops);

  std::cout << "Catalog records:                 " << cs.records << " (" << corpus->skipped_rows << " rows skipped)\n"
            << "All tracked fields non-empty:    " << cs.all_fields_non_empty << "\n"
            << "Exhibitions:                     " << es.exhibitions << "\n"
            << "Artwork slots / unique artworks: " << es.artwork_slots << " / " << es.unique_artworks << "\n"
            << "Prompt words:                    " << es.words << "\n"
            << "Tag occurrences / unique tags:   " << es.tag_occurrences << " / " << es.unique_tags << "\n"
            << "Split train / validation:        " << corpus->split.train.size() << " / "
            << corpus->split.validation.size() << "\n";
  for (Field f : kAllFields) {
    std::cout << "\nTop " << field_name(f) << ":\n";
    for (const auto& vc : freq[index_of(f)]) std::cout << "  " << std::setw(7) << vc.count << "  " << vc.value << "\n";
  }
  for (const auto& d : corpus->diagnostics) std::cerr << "note: " << d << "\n";
  if (!report_path.empty()) write_file(report_path, report.dump(2) + "\n");
  if (!flattened_path.empty()) write_file(flattened_path, flattened_exhibitions_json(corpus->exhibitions).dump(2) + "\n");
  return 0;
}

int cmd_build_vocab(const EngineConfig& cfg) {
  const auto corpus = load_corpus(cfg);
  fs::create_directories(cfg.artifacts_dir);
  std::ostringstream tags;
  for (std::size_t i = 0; i < corpus->vocab.size(); ++i) {
    std::string fields;
    for (Field f : kAllFields) {
      if (corpus->vocab.source_fields(i) & field_bit(f)) {
        if (!fields.empty()) fields += '|';
        fields += field_name(f);
      }
    }
    tags << corpus->vocab[i] << '\t' << fields << '\n';
  }
  write_file(cfg.artifacts_dir / "tags.tsv", tags.str());
  const auto tokens = fit_vocabulary(prompts_of(corpus->exhibitions, corpus->split.train), kDefaultMaxTokens);
  std::ofstream out(cfg.token_vocab_path(), std::ios::binary);
  tokens.save(out);
  std::cout << "tag vocabulary: " << corpus->vocab.size() << " entries -> " << (cfg.artifacts_dir / "tags.tsv").string()
            << "\ntoken vocabulary: " << tokens.size() << " ids -> " << cfg.token_vocab_path().string() << "\n";
  return 0;
}

int cmd_train(EngineConfig cfg, const std::string& variant_name_arg, std::size_t every) {
  const auto variant = trainable_variant(variant_name_arg);
  const auto corpus = load_corpus(cfg);
  std::shared_ptr<CachedEmbedder> embedder;
  if (!takes_tokens(variant)) embedder = make_embedder(cfg, nullptr);
  const auto run = train_variant(cfg, *corpus, variant, embedder.get(), [every](std::size_t epoch, const EpochLoss& l) {
    if (every && (epoch == 1 || epoch % every == 0)) {
      std::cout << "epoch " << std::setw(5) << epoch << "  train_mse " << std::scientific << std::setprecision(6)
                << l.train_mse << "  validation_mse " << l.validation_mse << std::defaultfloat << "\n";
    }
  });
  const auto& h = run.result.history;
  std::cout << "best validation epoch: " << (h.best_epoch() + 1) << " (mse " << h.epochs[h.best_epoch()].validation_mse
            << ")\ncheckpoint: " << cfg.checkpoint_path(variant).string()
            << "\nhistory: " << cfg.history_path(variant).string() << "\n";
  return 0;
}

int cmd_build_index(const EngineConfig& cfg) {
  const auto corpus = load_corpus(cfg);
  const auto embedder = make_embedder(cfg, nullptr);
  const auto index = build_catalog_index(cfg, corpus->catalog, *embedder);
  std::cout << "index: " << index.size() << " vectors, dim " << index.dim() << ", nlist " << index.nlist() << " -> "
            << cfg.index_path().string() << "\n";
  return 0;
}

int cmd_evaluate(const EngineConfig& cfg, const std::string& variant, const std::string& out_path) {
  if (!Engine::known_variant(variant)) throw ConfigError("unknown variant '" + variant + "'");
  const auto engine = Engine::open(cfg);
  const auto report = evaluate_variant(*engine, variant);
  const fs::path json_path = out_path.empty() ? cfg.artifacts_dir / (variant + ".evaluation.json") : fs::path(out_path);
  write_file(json_path, report.to_json().dump(2) + "\n");
  std::ostringstream csv;
  report.write_csv(csv);
  auto csv_path = json_path;
  csv_path.replace_extension(".csv");
  write_file(csv_path, csv.str());

  std::cout << "model " << variant << " on " << report.rows.size() << " validation exhibitions\n";
  for (Field f : kAllFields) {
    const auto& m = report.subgroup_means[index_of(f)];
    std::cout << "  " << std::left << std::setw(22) << field_name(f) << std::right
              << (m ? fmt(100.0 * *m, 2) + " %" : std::string("n/a")) << "\n";
  }
  std::cout << "  artwork intersection  " << fmt(100.0 * report.artwork_mean, 3) << " %  (random "
            << fmt(100.0 * report.random_baseline, 5) << " %, k = " << fmt(report.mean_k, 2) << ")\n"
            << "report: " << json_path.string() << "\n";
  return 0;
}

int cmd_curate(const EngineConfig& cfg, const CurationRequest& req, bool as_json) {
  const auto engine = Engine::open(cfg);
  const auto r = engine->curate(req);
  if (as_json) {
    std::cout << engine->response_json(r).dump(2) << "\n";
    return 0;
  }
  std::cout << "variant " << r.variant << ", k " << r.k << ", " << fmt(r.elapsed_ms, 1) << " ms\n";
  std::cout << std::left << std::setw(5) << "rank" << std::setw(11) << "object_id" << std::setw(11) << "score";
  for (Field f : kAllFields) std::cout << " | " << field_name(f);
  std::cout << "\n";
  for (std::size_t i = 0; i < r.artworks.size(); ++i) {
    const auto& a = engine->catalog()[r.artworks[i].row];
    std::cout << std::setw(5) << (i + 1) << std::setw(11) << a.object_id << std::setw(11) << fmt(r.artworks[i].score);
    for (Field f : kAllFields) std::cout << " | " << table_cell(a.values(f));
    std::cout << "\n";
  }
  std::cout << std::right;
  return 0;
}

int cmd_export_finetune(const EngineConfig& cfg, const std::string& out_path) {
  const auto corpus = load_corpus(cfg);
  const fs::path path = out_path.empty() ? cfg.artifacts_dir / "finetune.train.jsonl" : fs::path(out_path);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  const auto stats = export_finetune_jsonl(corpus->exhibitions, corpus->split, out);
  if (!out) throw Error("cannot write " + path.string());
  std::cout << "exported " << stats.written << " chat examples -> " << path.string() << "\n";
  return 0;
}

int cmd_serve(const EngineConfig& cfg) {
  const auto engine = Engine::open(cfg);
  httplib::Server server;
  install_routes(server, *engine);
  const auto [host, port] = split_bind(cfg.bind);
  for (auto v : kServedVariants) {
    const auto& st = engine->status(v);
    std::cerr << v << ": " << (st.available ? "available" : "unavailable (" + st.reason + ")") << "\n";
  }
  std::cerr << "listening on " << host << ":" << port << "\n";
  if (!server.listen(host, port)) throw Error("cannot listen on " + cfg.bind);
  return 0;
}

int cmd_make_fixture(const std::string& kind, const fs::path& dir, const fixtures::SyntheticConfig& sc) {
  fs::create_directories(dir);
  std::vector<ArtworkRecord> artworks;
  std::string exhibitions;
  if (kind == "synthetic") {
    auto corpus = fixtures::make_synthetic_corpus(sc);
    artworks = std::move(corpus.artworks);
    exhibitions = std::move(corpus.exhibitions_json);
  } else if (kind == "spanish") {
    artworks = fixtures::spanish_artworks();
    exhibitions = fixtures::spanish_exhibitions_json();
  } else {
    throw ConfigError("fixture kind must be synthetic or spanish");
  }
  std::ostringstream csv;
  write_artwork_catalog(csv, artworks);
  write_file(dir / "catalog.csv", csv.str());
  write_file(dir / "exhibitions.json", exhibitions + "\n");
  write_file(dir / "curator.conf",
             "# paths are relative to this file\n"
             "catalog = catalog.csv\n"
             "exhibitions = exhibitions.json\n"
             "artifacts = artifacts\n"
             "provider = local\n"
             "local.dim = 512\n"
             "train.epochs = 500\n"
             "split.ratio = " + std::string(kind == "spanish" ? "0.5" : "0.8") + "\n");
  std::cout << "wrote " << artworks.size() << " artworks to " << (dir / "catalog.csv").string() << " and "
            << (dir / "exhibitions.json").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exhibition curation engine"};
  app.require_subcommand(1);

  Common common;
  std::size_t top = 5;
  std::string report_path, flattened_path, variant = "m2", out_path, kind = "synthetic";
  std::size_t epochs = 0, every = 50;
  std::uint64_t seed = 0;
  bool seed_set = false, as_json = false;
  CurationRequest creq;
  std::size_t k = 0;
  fixtures::SyntheticConfig sc;
  std::string fixture_dir = "fixture";

  auto* ingest = app.add_subcommand("ingest", "Parse the corpus and print collection statistics");
  add_common(ingest, common);
  ingest->add_option("--top", top, "Values per field in the frequency table");
  ingest->add_option("--report", report_path, "Write the statistics as JSON");
  ingest->add_option("--flattened", flattened_path, "Write the flattened targets (x/y/z JSON)");

  auto* vocab = app.add_subcommand("build-vocab", "Write the tag vocabulary and the m1 token vocabulary");
  add_common(vocab, common);

  auto* trainc = app.add_subcommand("train", "Train m1, m2 or m3");
  add_common(trainc, common);
  trainc->add_option("--variant", variant, "m1 | m2 | m3")->required();
  trainc->add_option("--epochs", epochs, "Epochs (default from config)");
  auto* seed_opt = trainc->add_option("--seed", seed, "Training seed");
  trainc->add_option("--log-every", every, "Print losses every N epochs (0: quiet)");

  auto* evalc = app.add_subcommand("evaluate", "Score a variant on the validation exhibitions");
  add_common(evalc, common);
  evalc->add_option("--variant", variant, "m1 | m2 | m3 | m4")->required();
  evalc->add_option("--out", out_path, "Report path (JSON; a CSV is written alongside)");

  auto* curate = app.add_subcommand("curate", "Rank artworks for a new exhibition prompt");
  add_common(curate, common);
  curate->add_option("--variant", creq.variant, "m1 | m2 | m3 | m4");
  curate->add_option("--title", creq.title, "Exhibition title");
  curate->add_option("--description", creq.description, "Exhibition description");
  auto* k_opt = curate->add_option("--k", k, "Number of artworks (default from config)");
  curate->add_flag("--json", as_json, "Print the JSON response");

  auto* index = app.add_subcommand("build-index", "Embed the catalog and build the IVF-Flat index");
  add_common(index, common);

  auto* exportc = app.add_subcommand("export-finetune", "Write the training split as chat JSONL");
  add_common(exportc, common);
  exportc->add_option("--out", out_path, "Output JSONL path");

  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  add_common(serve, common);

  auto* fixture = app.add_subcommand("make-fixture", "Write a fixture corpus and config");
  fixture->add_option("--kind", kind, "synthetic | spanish");
  fixture->add_option("--out-dir", fixture_dir, "Output directory");
  fixture->add_option("--artworks", sc.artworks, "Synthetic catalog size");
  fixture->add_option("--exhibitions", sc.exhibitions, "Synthetic exhibition count");
  fixture->add_option("--seed", sc.seed, "Synthetic generator seed");

  CLI11_PARSE(app, argc, argv);
  seed_set = seed_opt->count() > 0;

  try {
    if (*fixture) return cmd_make_fixture(kind, fixture_dir, sc);
    auto cfg = resolve(common);
    if (*ingest) return cmd_ingest(cfg, top, report_path, flattened_path);
    if (*vocab) return cmd_build_vocab(cfg);
    if (*trainc) {
      if (epochs) cfg.training.epochs = epochs;
      if (seed_set) cfg.training.seed = seed;
      return cmd_train(cfg, variant, every);
    }
    if (*evalc) return cmd_evaluate(cfg, variant, out_path);
    if (*curate) {
      if (k_opt->count()) creq.k = k;
      return cmd_curate(cfg, creq, as_json);
    }
    if (*index) return cmd_build_index(cfg);
    if (*exportc) return cmd_export_finetune(cfg, out_path);
    if (*serve) return cmd_serve(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
