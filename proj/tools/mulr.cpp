// mulr: command-line front end for corpus building, embedding training,
// typing and evaluation.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mulr/config.hpp"
#include "mulr/error.hpp"
#include "mulr/io.hpp"
#include "mulr/pipeline.hpp"
#include "mulr/synthetic.hpp"
#include "mulr/typer.hpp"

namespace {

using namespace mulr;

void log_line(const std::string &msg) { std::fprintf(stderr, "[mulr] %s\n", msg.c_str()); }

// Data sources shared by several subcommands: a config file, a directory in
// the generator's layout, or individual paths. Later sources override.
struct DataOptions {
  std::string config;
  std::string data_dir;
  std::string corpus, dataset, hierarchy, notable, descriptions;
  std::string levels;
  std::optional<int> threads;

  void add(CLI::App &app, bool with_levels) {
    app.add_option("--config", config, "Experiment config (key=value with [sections])");
    app.add_option("--data", data_dir, "Directory with hierarchy.tsv, dataset.tsv, corpus.txt, notable.tsv");
    app.add_option("--corpus", corpus, "Annotated corpus");
    app.add_option("--dataset", dataset, "Dataset TSV");
    app.add_option("--hierarchy", hierarchy, "Type hierarchy TSV");
    app.add_option("--notable", notable, "Notable type per entity");
    app.add_option("--descriptions", descriptions, "Entity descriptions");
    app.add_option("--threads", threads, "Worker threads");
    if (with_levels) app.add_option("--levels", levels, "Comma separated levels, e.g. elr,swlr,clr-cnn,tc");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg = config.empty() ? ExperimentConfig{} : ExperimentConfig::load(config);
    if (!data_dir.empty()) {
      std::filesystem::path d = data_dir;
      cfg.hierarchy = d / "hierarchy.tsv";
      cfg.dataset = d / "dataset.tsv";
      cfg.corpus = d / "corpus.txt";
      cfg.notable = d / "notable.tsv";
      if (std::filesystem::exists(d / "descriptions.tsv")) cfg.descriptions = d / "descriptions.tsv";
    }
    if (!corpus.empty()) cfg.corpus = corpus;
    if (!dataset.empty()) cfg.dataset = dataset;
    if (!hierarchy.empty()) cfg.hierarchy = hierarchy;
    if (!notable.empty()) cfg.notable = notable;
    if (!descriptions.empty()) cfg.descriptions = descriptions;
    if (!levels.empty()) cfg.repr.levels = RepresentationSpec::parse(levels).levels;
    if (threads) cfg.threads = *threads;
    cfg.threads = effective_threads(cfg.threads);
    if (cfg.threads < 1) throw UsageError("--threads must be at least 1");
    return cfg;
  }
};

void write_output(const std::string &path, const std::string &content) {
  if (path.empty() || path == "-") {
    std::cout << content;
  } else {
    io::write_file(path, content);
  }
}

int cmd_gen_synthetic(const std::string &preset, const std::string &out, std::optional<std::size_t> entities,
                      std::optional<std::size_t> corpus_only, std::optional<double> unknown, std::uint64_t seed) {
  SyntheticSpec spec = synthetic_preset(preset);
  if (entities) spec.entities = *entities;
  if (corpus_only) spec.corpus_only_entities = *corpus_only;
  if (unknown) spec.unknown_fraction = *unknown;
  spec.seed = seed;
  auto data = generate_synthetic(spec);
  save_synthetic(data, out);
  log_line("wrote " + std::to_string(data.split.train.size() + data.split.dev.size() + data.split.test.size()) +
           " entities, " + std::to_string(data.corpus.sentences.size()) + " sentences to " + out);
  return 0;
}

int cmd_build_corpus(const DataOptions &data, const std::string &out, bool surface) {
  auto cfg = data.resolve();
  auto in = load_inputs(cfg, true);
  TokenStream stream = surface ? surface_stream(in.corpus) : build_training_stream(in);
  save_token_stream(out, stream);
  log_line("wrote " + std::to_string(stream.sentences.size()) + " sentences, " +
           std::to_string(stream.token_count()) + " tokens to " + out);
  return 0;
}

struct EmbedOptions {
  std::string mode = "sskip";
  EmbedSettings settings;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string corpus, out;
};

int cmd_embed(EmbedOptions o) {
  o.threads = effective_threads(o.threads);
  auto stream = load_token_stream(o.corpus);
  EmbeddingStore store;
  if (o.mode == "subword") {
    store = train_subword_store(stream, o.settings, o.seed, o.threads);
  } else {
    o.settings.entity_mode = parse_embedding_kind(o.mode);
    if (o.settings.entity_mode == EmbeddingKind::Subword) throw UsageError("unknown mode '" + o.mode + "'");
    store = train_entity_store(stream, o.settings, o.seed, o.threads);
  }
  store.metadata["mode"] = o.mode;
  store.metadata["seed"] = std::to_string(o.seed);
  store.save(o.out);
  log_line("wrote " + std::to_string(store.size()) + " vectors of dim " + std::to_string(store.dim()) + " to " +
           o.out);
  return 0;
}

// Inputs, stores and the sources pointing into them; built in place and
// never moved so the pointers stay valid.
struct Loaded {
  ExperimentConfig cfg;
  Inputs in;
  LoadedStores stores;
  RepresentationSources src;

  explicit Loaded(const DataOptions &data) : cfg(data.resolve()) {
    const auto &r = cfg.repr;
    const bool need_corpus = r.has(Level::Elr) || r.has(Level::Tc) || r.has(Level::Wwlr) ||
                             r.has(Level::AvgDes) || r.has(Level::Swlr);
    in = load_inputs(cfg, need_corpus);
    stores = prepare_stores(cfg, in, log_line);
    src = sources_for(stores, in);
  }
  Loaded(const Loaded &) = delete;
  Loaded &operator=(const Loaded &) = delete;
};

int cmd_train(const DataOptions &data, const std::string &out, bool calibrate) {
  Loaded l(data);
  auto r = train_typer(l.in.split, l.in.types, l.cfg.repr, l.src, l.cfg.train);
  log_line("trained " + std::to_string(r.history.size()) + " epochs, best epoch " + std::to_string(r.best_epoch) +
           ", dev micro F1 " + std::to_string(r.best_dev_micro_f1));
  if (calibrate) {
    auto dev = build_instances(l.in.split.dev, r.model.layout(), l.src, l.in.types.size(), 1);
    auto cal = calibrate_thresholds(r.model, dev);
    if (cal.flagged) log_line(std::to_string(cal.flagged) + " types without dev positives kept threshold 0.5");
  }
  r.model.metadata["config"] = l.cfg.hash();
  r.model.metadata["seed"] = std::to_string(l.cfg.seed);
  save_model(r.model, out);
  return 0;
}

// Levels come from the checkpoint so the matching stores get prepared.
DataOptions with_model_levels(DataOptions data, const std::string &model_path) {
  data.levels = read_model_metadata(model_path).at("levels");
  return data;
}

int cmd_calibrate(const DataOptions &data, const std::string &model_path, const std::string &out) {
  Loaded l(with_model_levels(data, model_path));
  Typer model = load_model(model_path, l.src);
  auto dev = build_instances(l.in.split.dev, model.layout(), l.src, model.types().size(), 1);
  auto cal = calibrate_thresholds(model, dev);
  for (std::size_t t = 0; t < cal.types.size(); ++t) {
    const auto &c = cal.types[t];
    std::printf("%s\t%.6f\t%.4f%s\n", model.types().name(t).c_str(), c.threshold, c.f1, c.flagged ? "\tflagged" : "");
  }
  save_model(model, out.empty() ? model_path : out);
  return 0;
}

struct PredictOptions {
  DataOptions data;
  std::string model, entities, out;
  std::string entity_vectors, subword_vectors;
};

int cmd_predict(const PredictOptions &o) {
  std::optional<EmbeddingStore> ent, sub;
  Descriptions desc;
  IdfTable idf;
  RepresentationSources src;
  int threads = effective_threads(o.data.threads.value_or(1));
  std::optional<Loaded> loaded;
  if (!o.data.config.empty() || !o.data.data_dir.empty()) {
    if (!o.entity_vectors.empty() || !o.subword_vectors.empty()) {
      throw UsageError("--entity-vectors and --subword-vectors only apply without --config or --data");
    }
    loaded.emplace(with_model_levels(o.data, o.model));
    src = loaded->src;
    threads = loaded->cfg.threads;
  } else {
    if (!o.entity_vectors.empty()) ent = EmbeddingStore::load(o.entity_vectors, EmbeddingKind::Sskip);
    if (!o.subword_vectors.empty()) sub = EmbeddingStore::load(o.subword_vectors, EmbeddingKind::Subword);
    if (!o.data.descriptions.empty()) {
      desc = load_descriptions(o.data.descriptions);
      idf = compute_idf(desc);
      src.descriptions = &desc;
      src.idf = &idf;
    }
    if (ent) src.entities = src.words = &*ent;
    if (sub) src.subwords = &*sub;
  }
  src.types = nullptr;  // the checkpoint's own type system
  Typer model = load_model(o.model, src);
  src.types = &model.types();
  auto split = load_dataset(o.entities, model.types());
  std::vector<EntityRecord> records;
  for (const auto *part : {&split.train, &split.dev, &split.test}) records.insert(records.end(), part->begin(), part->end());
  auto inst = build_instances(records, model.layout(), src, model.types().size(), 1);
  auto scores = score_instances(model, inst, static_cast<std::size_t>(threads));
  std::string header = "# config=" + (model.metadata.count("config") ? model.metadata.at("config") : "-") +
                       " seed=" + (model.metadata.count("seed") ? model.metadata.at("seed") : "-") + '\n';
  write_output(o.out, header + format_predictions(model, inst, scores));
  return 0;
}

int cmd_evaluate(const DataOptions &data, const std::string &predictions, const std::string &tsv) {
  auto cfg = data.resolve();
  auto in = load_inputs(cfg, false);
  auto preds = parse_predictions(io::read_file(predictions), in.types, predictions);
  auto report = evaluate(preds, in.split, in.types);
  std::cout << report_table(report);
  if (!tsv.empty()) io::write_file(tsv, report_tsv(report));
  return 0;
}

int cmd_pipeline(const std::vector<std::string> &configs, const std::string &out, std::optional<int> threads) {
  std::vector<ExperimentConfig> cfgs;
  for (const auto &c : configs) {
    auto cfg = ExperimentConfig::load(c);
    if (threads) cfg.threads = effective_threads(*threads);
    cfgs.push_back(std::move(cfg));
  }
  auto result = run_pipeline(cfgs, out, log_line);
  std::cout << result.report_text;
  return 0;
}

int cmd_report(const DataOptions &data, const std::vector<std::string> &predictions) {
  auto cfg = data.resolve();
  auto in = load_inputs(cfg, false);
  std::vector<std::size_t> correct;
  std::vector<std::string> names;
  std::size_t n = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    auto preds = parse_predictions(io::read_file(predictions[i]), in.types, predictions[i]);
    auto report = evaluate(preds, in.split, in.types);
    std::cout << "## " << predictions[i] << '\n' << report_table(report) << '\n';
    correct.push_back(report.slice("all").strict_correct);
    n = report.slice("all").count;
    names.push_back(std::to_string(i + 1) + ". " + predictions[i]);
  }
  if (predictions.size() > 1 && n > 0) {
    std::cout << "Significance (equal proportions, alpha 0.05, strict accuracy):\n"
              << format_significance(names, significance_matrix(correct, n));
  }
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Fine-grained entity typing from multi-level representations"};
  app.require_subcommand(1);

  std::string preset = "mixed", out;
  std::optional<std::size_t> entities, corpus_only;
  std::optional<double> unknown;
  std::uint64_t seed = 1;
  auto *gen = app.add_subcommand("gen-synthetic", "Generate a synthetic typed-entity world");
  gen->add_option("--preset", preset, "mixed, context, suffix or subword")->capture_default_str();
  gen->add_option("--entities", entities, "Entity count");
  gen->add_option("--corpus-only", corpus_only, "Extra entities mentioned in the corpus but in no split");
  gen->add_option("--unknown-fraction", unknown, "Share of test entities with unseen name words");
  gen->add_option("--seed", seed)->capture_default_str();
  gen->add_option("--out", out, "Output directory")->required();

  DataOptions data;
  bool surface = false;
  auto *corpus = app.add_subcommand("build-corpus", "Write the three-copy token stream");
  data.add(*corpus, false);
  corpus->add_flag("--surface", surface, "Write surface sentences only (for subword training)");
  corpus->add_option("--out", out, "Output token stream")->required();

  EmbedOptions eo;
  auto *embed = app.add_subcommand("embed", "Train SKIP, SSKIP or subword vectors on a token stream");
  embed->add_option("--mode", eo.mode, "skip, sskip or subword")
      ->check(CLI::IsMember({"skip", "sskip", "subword"}))
      ->capture_default_str();
  embed->add_option("--dim", eo.settings.dim)->capture_default_str();
  embed->add_option("--neg", eo.settings.negatives)->capture_default_str();
  embed->add_option("--window", eo.settings.window)->capture_default_str();
  embed->add_option("--epochs", eo.settings.epochs)->capture_default_str();
  embed->add_option("--lr", eo.settings.learning_rate)->capture_default_str();
  embed->add_option("--min-count", eo.settings.min_count)->capture_default_str();
  embed->add_option("--minn", eo.settings.subword_min_n)->capture_default_str();
  embed->add_option("--maxn", eo.settings.subword_max_n)->capture_default_str();
  embed->add_option("--seed", eo.seed)->capture_default_str();
  embed->add_option("--threads", eo.threads)->capture_default_str();
  embed->add_option("corpus", eo.corpus, "Token stream, one sentence per line")->required();
  embed->add_option("out", eo.out, "Output vectors")->required();

  bool no_calibrate = false;
  auto *train = app.add_subcommand("train", "Train a typer");
  data.add(*train, true);
  train->add_flag("--no-calibrate", no_calibrate, "Keep every threshold at 0.5");
  train->add_option("--out", out, "Model file")->required();

  std::string model;
  auto *calibrate = app.add_subcommand("calibrate", "Tune per-type thresholds on dev");
  data.add(*calibrate, false);
  calibrate->add_option("--model", model)->required();
  calibrate->add_option("--out", out, "Output model (default: overwrite)");

  PredictOptions po;
  auto *predict = app.add_subcommand("predict", "Type the entities of a dataset file");
  po.data.add(*predict, false);
  predict->add_option("--model", po.model)->required();
  predict->add_option("--entities", po.entities, "Dataset TSV; every section is typed")->required();
  predict->add_option("--entity-vectors", po.entity_vectors, "Entity/word vectors (without --config)");
  predict->add_option("--subword-vectors", po.subword_vectors, "Subword vectors (without --config)");
  predict->add_option("--out", po.out, "Predictions (default: stdout)");

  std::string predictions, tsv;
  auto *evaluate = app.add_subcommand("evaluate", "Score predictions on the test split");
  data.add(*evaluate, false);
  evaluate->add_option("--predictions", predictions)->required();
  evaluate->add_option("--tsv", tsv, "Also write the report as TSV");

  std::vector<std::string> configs;
  std::optional<int> threads;
  auto *pipeline = app.add_subcommand("pipeline", "Run configs end to end with caching");
  pipeline->add_option("configs", configs, "Experiment configs")->required();
  pipeline->add_option("--out", out, "Directory for the combined report")->required();
  pipeline->add_option("--threads", threads, "Override run.threads");

  std::vector<std::string> pred_files;
  auto *report = app.add_subcommand("report", "Compare prediction files with significance tests");
  data.add(*report, false);
  report->add_option("predictions", pred_files, "Prediction files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::Usage);
  }

  try {
    if (*gen) return cmd_gen_synthetic(preset, out, entities, corpus_only, unknown, seed);
    if (*corpus) return cmd_build_corpus(data, out, surface);
    if (*embed) return cmd_embed(eo);
    if (*train) return cmd_train(data, out, !no_calibrate);
    if (*calibrate) return cmd_calibrate(data, model, out);
    if (*predict) return cmd_predict(po);
    if (*evaluate) return cmd_evaluate(data, predictions, tsv);
    if (*pipeline) return cmd_pipeline(configs, out, threads);
    if (*report) return cmd_report(data, pred_files);
  } catch (const Error &e) {
    std::fprintf(stderr, "mulr: %s\n", e.what());
    return static_cast<int>(e.kind());
  } catch (const std::exception &e) {
    std::fprintf(stderr, "mulr: %s\n", e.what());
    return static_cast<int>(ErrorKind::Data);
  }
  return static_cast<int>(ErrorKind::Usage);
}
