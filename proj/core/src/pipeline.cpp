#include "mulr/pipeline.hpp"

#include "mulr/error.hpp"
#include "mulr/io.hpp"
#include "mulr/text.hpp"

namespace mulr {

namespace {

template <typename F>
auto stage(const std::string &name, F &&f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error &e) {
    throw Error(e.kind(), "stage '" + name + "': " + e.what());
  } catch (const std::exception &e) {
    throw DataError("stage '" + name + "': " + e.what());
  }
}

void note(const Logger &log, const std::string &msg) {
  if (log) log(msg);
}

bool needs_entities(const RepresentationSpec &spec) {
  return spec.has(Level::Elr) || spec.has(Level::Tc) || spec.has(Level::Wwlr) || spec.has(Level::AvgDes);
}

std::string key_of(const std::string &text) { return io::hex64(io::fnv1a(text)); }

std::string data_key(const ExperimentConfig &cfg) {
  auto canon = cfg.canonical();
  // The data lines come first in the canonical text.
  std::string data;
  for (const auto &line : text::split(canon, '\n')) {
    if (line.rfind("data.", 0) == 0) data += line + '\n';
  }
  return key_of(data);
}

std::string embed_key(const ExperimentConfig &cfg, const std::string &what) {
  const auto &e = cfg.embed;
  std::string s = what + '|' + data_key(cfg) + '|' + std::to_string(e.dim) + '|' + std::to_string(e.negatives) + '|' +
                  std::to_string(e.window) + '|' + std::to_string(e.epochs) + '|' + std::to_string(e.min_count) + '|' +
                  std::to_string(cfg.seed) + '|';
  io::append_double(s, e.learning_rate);
  if (what == "subword") {
    s += '|' + std::to_string(e.subword_min_n) + '|' + std::to_string(e.subword_max_n) + '|' +
         std::to_string(e.ngram_min_count);
  } else {
    s += '|' + std::string(to_string(e.entity_mode));
  }
  return key_of(s);
}

// Writes via a temporary name so an interrupted stage never looks finished.
void write_atomic(const std::filesystem::path &path, const std::string &content) {
  auto tmp = path;
  tmp += ".tmp";
  io::write_file(tmp, content);
  std::filesystem::rename(tmp, path);
}

void save_store_atomic(const EmbeddingStore &store, const std::filesystem::path &path) {
  auto tmp = path;
  tmp += ".tmp";
  store.save(tmp);
  if (store.subwords()) {
    std::filesystem::rename(tmp.string() + ".ngrams", path.string() + ".ngrams");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

Inputs load_inputs(const ExperimentConfig &cfg, bool with_corpus) {
  Inputs in;
  if (cfg.hierarchy.empty() || cfg.dataset.empty()) throw UsageError("config needs data.hierarchy and data.dataset");
  in.types = TypeSystem::load(cfg.hierarchy);
  in.split = close_under_parents(load_dataset(cfg.dataset, in.types), in.types);
  validate(in.split, in.types);
  if (with_corpus) {
    if (cfg.corpus.empty() || cfg.notable.empty()) throw UsageError("config needs data.corpus and data.notable");
    in.corpus = load_corpus(cfg.corpus);
    in.notable = load_notable_types(cfg.notable);
  }
  if (!cfg.descriptions.empty()) {
    in.descriptions = load_descriptions(cfg.descriptions);
    in.idf = compute_idf(in.descriptions);
  }
  return in;
}

Inputs inputs_from(SyntheticData data) {
  Inputs in;
  in.types = std::move(data.types);
  in.split = std::move(data.split);
  in.corpus = std::move(data.corpus);
  in.notable = std::move(data.notable);
  in.descriptions = std::move(data.descriptions);
  if (!in.descriptions.empty()) in.idf = compute_idf(in.descriptions);
  return in;
}

TokenStream build_training_stream(const Inputs &in) {
  std::unordered_set<std::string> exclude;
  for (const auto *part : {&in.split.dev, &in.split.test}) {
    for (const auto &e : *part) exclude.insert(e.id);
  }
  return build_three_copy_corpus(in.corpus, in.notable, exclude);
}

TokenStream surface_stream(const AnnotatedCorpus &corpus) {
  TokenStream s;
  for (const auto &sent : corpus.sentences) s.sentences.push_back(sent.tokens);
  return s;
}

EmbeddingStore train_entity_store(const TokenStream &stream, const EmbedSettings &s, std::uint64_t seed,
                                  int threads) {
  auto vocab = build_vocabulary(stream, s.min_count);
  return train_sgns(stream, vocab, s.sgns(seed, threads, s.entity_mode == EmbeddingKind::Sskip));
}

EmbeddingStore train_subword_store(const TokenStream &stream, const EmbedSettings &s, std::uint64_t seed,
                                   int threads) {
  auto vocab = build_vocabulary(stream, s.min_count);
  auto index = SubwordIndex::build(vocab, s.subword_min_n, s.subword_max_n, s.ngram_min_count);
  return train_subword_sgns(stream, vocab, index, s.sgns(seed, threads, false));
}

LoadedStores prepare_stores(const ExperimentConfig &cfg, const Inputs &in, const Logger &log) {
  LoadedStores out;
  const bool ent = needs_entities(cfg.repr);
  const bool sub = cfg.repr.has(Level::Swlr);
  if (!ent && !sub) return out;

  std::filesystem::path corpus_dir = cfg.work_dir / ("corpus-" + data_key(cfg));
  std::filesystem::path stream_path = corpus_dir / "stream.txt";
  auto stream = stage("build-corpus", [&] {
    if (std::filesystem::exists(stream_path)) {
      note(log, "build-corpus: cached " + stream_path.string());
      return load_token_stream(stream_path);
    }
    note(log, "build-corpus: " + std::to_string(in.corpus.sentences.size()) + " sentences");
    auto s = build_training_stream(in);
    std::filesystem::create_directories(corpus_dir);
    auto tmp = stream_path;
    tmp += ".tmp";
    save_token_stream(tmp, s);
    std::filesystem::rename(tmp.string() + ".exempt", stream_path.string() + ".exempt");
    std::filesystem::rename(tmp, stream_path);
    return s;
  });

  auto train_or_load = [&](const std::string &what, EmbeddingKind kind, auto &&train) {
    const auto key = embed_key(cfg, what);
    std::filesystem::path dir = cfg.work_dir / (what + "-" + key);
    std::filesystem::path path = dir / "vectors.vec";
    return stage("embed", [&] {
      if (std::filesystem::exists(path)) {
        note(log, "embed: cached " + path.string());
        return EmbeddingStore::load(path, kind);
      }
      note(log, "embed: training " + what + " vectors");
      EmbeddingStore store = train();
      store.metadata["config"] = key;
      store.metadata["seed"] = std::to_string(cfg.seed);
      std::filesystem::create_directories(dir);
      save_store_atomic(store, path);
      return store;
    });
  };
  if (ent) {
    out.entities = train_or_load("entities", cfg.embed.entity_mode,
                                 [&] { return train_entity_store(stream, cfg.embed, cfg.seed, cfg.threads); });
  }
  if (sub) {
    out.subwords = train_or_load("subword", EmbeddingKind::Subword, [&] {
      return train_subword_store(surface_stream(in.corpus), cfg.embed, cfg.seed, cfg.threads);
    });
  }
  return out;
}

RepresentationSources sources_for(const LoadedStores &stores, const Inputs &in) {
  RepresentationSources src;
  if (stores.entities) {
    src.entities = &*stores.entities;
    src.words = &*stores.entities;
  }
  if (stores.subwords) src.subwords = &*stores.subwords;
  src.types = &in.types;
  if (!in.descriptions.empty()) {
    src.descriptions = &in.descriptions;
    src.idf = &in.idf;
  }
  return src;
}

FitResult fit_and_evaluate(const Inputs &in, const RepresentationSources &src, const RepresentationSpec &spec,
                           const TrainConfig &cfg, std::size_t threads, const Logger &log) {
  auto trained = stage("train", [&] { return train_typer(in.split, in.types, spec, src, cfg); });
  FitResult out{.model = std::move(trained.model)};
  out.epochs = trained.history.size();
  out.best_epoch = trained.best_epoch;
  out.best_dev_micro_f1 = trained.best_dev_micro_f1;
  note(log, "train: " + std::to_string(out.epochs) + " epochs, best epoch " + std::to_string(out.best_epoch) +
                ", dev micro F1 " + std::to_string(out.best_dev_micro_f1));
  stage("calibrate", [&] {
    auto dev = build_instances(in.split.dev, out.model.layout(), src, in.types.size(), 1);
    out.flagged_types = calibrate_thresholds(out.model, dev).flagged;
  });
  out.predictions = stage("predict", [&] {
    auto test = build_instances(in.split.test, out.model.layout(), src, in.types.size(), 1);
    return format_predictions(out.model, test, score_instances(out.model, test, threads));
  });
  out.report = stage("evaluate", [&] { return evaluate(parse_predictions(out.predictions, in.types), in.split, in.types); });
  return out;
}

namespace {

std::string header_line(const ExperimentConfig &cfg, const std::string &hash) {
  return "config=" + hash + " seed=" + std::to_string(cfg.seed) + " name=" + cfg.name;
}

std::string meta_rows(const ExperimentConfig &cfg, const std::string &hash) {
  return "meta\tconfig\t" + hash + "\nmeta\tseed\t" + std::to_string(cfg.seed) + "\nmeta\tname\t" + cfg.name + '\n';
}

}  // namespace

RunResult run_experiment(const ExperimentConfig &cfg, const Logger &log) {
  RunResult result;
  result.name = cfg.name;
  result.config_hash = stage("load", [&] { return cfg.hash(); });
  result.seed = cfg.seed;
  result.dir = cfg.work_dir / ("typer-" + result.config_hash);
  const auto model_path = result.dir / "model.bin";
  const auto pred_path = result.dir / "predictions.tsv";
  const auto tsv_path = result.dir / "report.tsv";
  const auto txt_path = result.dir / "report.txt";

  const bool need_corpus = needs_entities(cfg.repr) || cfg.repr.has(Level::Swlr);
  auto in = stage("load", [&] { return load_inputs(cfg, need_corpus); });

  if (std::filesystem::exists(tsv_path) && std::filesystem::exists(pred_path) && std::filesystem::exists(model_path)) {
    note(log, "evaluate: cached " + result.dir.string());
    result.cached = true;
    result.report = stage("evaluate", [&] {
      return evaluate(parse_predictions(io::read_file(pred_path), in.types, pred_path.string()), in.split, in.types);
    });
    return result;
  }

  auto stores = prepare_stores(cfg, in, log);
  auto src = sources_for(stores, in);
  std::filesystem::create_directories(result.dir);

  if (std::filesystem::exists(model_path)) {
    // A finished model without outputs: predict again from the checkpoint.
    note(log, "train: cached " + model_path.string());
    Typer model = stage("train", [&] { return load_model(model_path, src); });
    auto predictions = stage("predict", [&] {
      auto test = build_instances(in.split.test, model.layout(), src, in.types.size(), 1);
      return format_predictions(model, test, score_instances(model, test, static_cast<std::size_t>(cfg.threads)));
    });
    write_atomic(pred_path, "# " + header_line(cfg, result.config_hash) + '\n' + predictions);
    result.report = stage("evaluate", [&] { return evaluate(parse_predictions(predictions, in.types), in.split, in.types); });
  } else {
    auto fit = fit_and_evaluate(in, src, cfg.repr, cfg.train, static_cast<std::size_t>(cfg.threads), log);
    if (fit.flagged_types) {
      note(log, "calibrate: " + std::to_string(fit.flagged_types) + " types without dev positives kept 0.5");
    }
    fit.model.metadata["config"] = result.config_hash;
    fit.model.metadata["seed"] = std::to_string(cfg.seed);
    fit.model.metadata["name"] = cfg.name;
    fit.model.metadata["best_epoch"] = std::to_string(fit.best_epoch);
    if (stores.entities) fit.model.metadata["entities"] = stores.entities->metadata.at("config");
    if (stores.subwords) fit.model.metadata["subwords"] = stores.subwords->metadata.at("config");
    write_atomic(model_path, serialize_model(fit.model));
    write_atomic(pred_path, "# " + header_line(cfg, result.config_hash) + '\n' + fit.predictions);
    result.report = std::move(fit.report);
  }
  write_atomic(txt_path, "# " + header_line(cfg, result.config_hash) + '\n' + report_table(result.report));
  write_atomic(tsv_path, meta_rows(cfg, result.config_hash) + report_tsv(result.report));
  return result;
}

PipelineResult run_pipeline(const std::vector<ExperimentConfig> &configs, const std::filesystem::path &out_dir,
                            const Logger &log) {
  if (configs.empty()) throw UsageError("pipeline needs at least one config");
  PipelineResult out;
  for (const auto &cfg : configs) {
    note(log, "== " + cfg.name + " (" + cfg.hash() + ")");
    out.runs.push_back(run_experiment(cfg, log));
  }
  std::vector<std::size_t> correct;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < out.runs.size(); ++i) {
    const auto &r = out.runs[i];
    const auto &cfg = configs[i];
    out.report_text += "## " + r.name + "  " + header_line(cfg, r.config_hash) + '\n' + report_table(r.report) + '\n';
    out.report_tsv += meta_rows(cfg, r.config_hash);
    for (const auto &line : text::split(report_tsv(r.report), '\n')) {
      if (!line.empty()) out.report_tsv += r.name + '/' + line + '\n';
    }
    correct.push_back(r.report.slice("all").strict_correct);
    names.push_back(std::to_string(i + 1) + ". " + r.name);
  }
  const std::size_t n = out.runs.front().report.slice("all").count;
  if (out.runs.size() > 1 && n > 0) {
    out.significance = significance_matrix(correct, n);
    out.report_text += "Significance (equal proportions, alpha 0.05, strict accuracy):\n" +
                       format_significance(names, out.significance);
    for (std::size_t i = 0; i < names.size(); ++i) {
      for (std::size_t j = 0; j < names.size(); ++j) {
        out.report_tsv += "significance\t" + out.runs[i].name + ":" + out.runs[j].name + '\t' +
                          (out.significance[i][j] ? "1" : "0") + '\n';
      }
    }
  }
  std::filesystem::create_directories(out_dir);
  write_atomic(out_dir / "report.txt", out.report_text);
  write_atomic(out_dir / "report.tsv", out.report_tsv);
  return out;
}

}  // namespace mulr
