#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mulr/config.hpp"
#include "mulr/corpus.hpp"
#include "mulr/dataset.hpp"
#include "mulr/embed.hpp"
#include "mulr/eval.hpp"
#include "mulr/repr.hpp"
#include "mulr/synthetic.hpp"
#include "mulr/typer.hpp"

namespace mulr {

using Logger = std::function<void(const std::string &)>;

struct Inputs {
  TypeSystem types;
  DatasetSplit split;  // gold sets closed under parents
  AnnotatedCorpus corpus;
  NotableTypes notable;
  Descriptions descriptions;
  IdfTable idf;
};

// The corpus is only read when `with_corpus` is set.
Inputs load_inputs(const ExperimentConfig &cfg, bool with_corpus = true);
Inputs inputs_from(SyntheticData data);

// Three-copy corpus; dev and test entities keep their surface words in the
// notable-type copy.
TokenStream build_training_stream(const Inputs &in);
// Surface tokens only, for the subword model.
TokenStream surface_stream(const AnnotatedCorpus &corpus);

EmbeddingStore train_entity_store(const TokenStream &stream, const EmbedSettings &s, std::uint64_t seed,
                                  int threads);
EmbeddingStore train_subword_store(const TokenStream &stream, const EmbedSettings &s, std::uint64_t seed,
                                   int threads);

// Train, calibrate on dev, predict test, evaluate.
struct FitResult {
  Typer model;
  std::size_t epochs = 0;
  std::size_t best_epoch = 0;
  double best_dev_micro_f1 = 0.0;
  std::size_t flagged_types = 0;
  std::string predictions{};  // prediction file body
  EvalReport report{};
};
FitResult fit_and_evaluate(const Inputs &in, const RepresentationSources &src, const RepresentationSpec &spec,
                           const TrainConfig &cfg, std::size_t threads, const Logger &log = {});

struct RunResult {
  std::string name;
  std::string config_hash;
  std::uint64_t seed = 0;
  EvalReport report{};
  std::filesystem::path dir;  // holds model.bin, predictions.tsv, report.tsv, report.txt
  bool cached = false;
};

// Runs corpus -> embeddings -> train -> calibrate -> predict -> evaluate.
// Each stage's output is cached under cfg.work_dir in a directory named by
// the hash of everything it depends on; finished stages are reused. Errors
// are rethrown with the stage name prefixed.
RunResult run_experiment(const ExperimentConfig &cfg, const Logger &log = {});

struct PipelineResult {
  std::vector<RunResult> runs;
  std::vector<std::vector<bool>> significance;  // strict accuracy, all slice
  std::string report_text;
  std::string report_tsv;
};

// Runs every config and writes report.txt / report.tsv to `out_dir`.
PipelineResult run_pipeline(const std::vector<ExperimentConfig> &configs, const std::filesystem::path &out_dir,
                            const Logger &log = {});

// Stores needed by `cfg`'s levels, loaded from (or trained into) the cache.
struct LoadedStores {
  std::optional<EmbeddingStore> entities;
  std::optional<EmbeddingStore> subwords;
};
LoadedStores prepare_stores(const ExperimentConfig &cfg, const Inputs &in, const Logger &log = {});
RepresentationSources sources_for(const LoadedStores &stores, const Inputs &in);

}  // namespace mulr
