// Trend criteria on synthetic worlds, and pipeline determinism.

#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>

#include "acceptance.hpp"
#include "mulr/io.hpp"
#include "mulr/pipeline.hpp"
#include "support.hpp"

namespace mulr::acceptance {

namespace {

struct World {
  Inputs in;
  EmbeddingStore entities;
  std::optional<EmbeddingStore> subwords;
  RepresentationSources src;

  World(const SyntheticSpec &spec, const EmbedSettings &embed, bool with_subwords) : in(inputs_from(generate_synthetic(spec))) {
    entities = train_entity_store(build_training_stream(in), embed, spec.seed, 1);
    if (with_subwords) subwords = train_subword_store(surface_stream(in.corpus), embed, spec.seed, 1);
    src.entities = &entities;
    src.words = &entities;
    src.types = &in.types;
    src.subwords = subwords ? &*subwords : nullptr;
    src.descriptions = &in.descriptions;
    src.idf = &in.idf;
  }
  World(const World &) = delete;

  EvalReport fit(const std::string &levels, const TrainConfig &cfg) const {
    auto spec = RepresentationSpec::parse(levels);
    spec.name_length = 24;
    spec.cnn_widths = {1, 2, 3, 4, 5};
    spec.cnn_filters = 20;
    spec.char_min_count = 1;
    return fit_and_evaluate(in, src, spec, cfg, 1).report;
  }
};

EmbedSettings embed_settings() {
  EmbedSettings s;
  s.dim = 50;
  s.epochs = 5;
  s.min_count = 1;
  s.ngram_min_count = 1;
  return s;
}

TrainConfig train_config() {
  TrainConfig cfg;
  cfg.hidden = 100;
  cfg.epochs = 30;
  cfg.batch_size = 32;
  cfg.learning_rate = 0.05;
  cfg.patience = 6;
  return cfg;
}

std::string f3(double x, const char *f = "%.3f") {
  char buf[32];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

}  // namespace

Outcome complementarity() {
  const World world(synthetic_preset("mixed"), embed_settings(), false);
  const char *ladder[] = {"elr", "elr,clr-cnn", "elr,wwlr,clr-cnn", "elr,wwlr,clr-cnn,tc"};
  std::vector<double> micro, tail;
  for (const char *levels : ladder) {
    auto r = world.fit(levels, train_config());
    micro.push_back(r.slice("all").micro_f1);
    tail.push_back(r.slice("tail").micro_f1);
  }
  auto step = [](double gain, double margin) { return std::string(gain >= margin ? " ok" : " SHORT"); };
  bool pass = tail[1] - tail[0] >= 0.05;
  std::string detail = "micro " + std::string(ladder[0]) + " " + f3(micro[0]);
  for (std::size_t k = 1; k < micro.size(); ++k) {
    const double gain = micro[k] - micro[k - 1];
    detail += ", " + std::string(ladder[k]) + " " + f3(micro[k]) + " (" + f3(gain, "%+.3f") + step(gain, 0.02) + ")";
    pass = pass && gain >= 0.02;
  }
  detail += "; tail " + f3(tail[0]) + " -> " + f3(tail[1]) + " (" + f3(tail[1] - tail[0], "%+.3f") +
            step(tail[1] - tail[0], 0.05) + "); margins 0.02 / 0.05";
  return {pass, detail};
}

Outcome subword_robustness() {
  const World world(synthetic_preset("subword"), embed_settings(), true);
  const auto swlr = world.fit("swlr", train_config());
  const auto bow = world.fit("bow", train_config());
  const double s = swlr.slice("unknown").micro_f1, b = bow.slice("unknown").micro_f1;
  return {s - b >= 0.2, "unknown slice (" + std::to_string(swlr.slice("unknown").count) + " entities) swlr " + f3(s) +
                            " vs bow " + f3(b) + " (margin 0.2)"};
}

Outcome cnn_vs_forward() {
  const World world(synthetic_preset("suffix"), embed_settings(), false);
  const double cnn = world.fit("clr-cnn", train_config()).slice("all").micro_f1;
  const double fwd = world.fit("clr-forward", train_config()).slice("all").micro_f1;
  return {cnn - fwd >= 0.1, "micro clr-cnn " + f3(cnn) + " vs clr-forward " + f3(fwd) + " (margin 0.1)"};
}

Outcome determinism() {
  auto spec = synthetic_preset("mixed");
  spec.entities = 400;
  spec.corpus_only_entities = 400;
  const char *configs[][2] = {
      {"full", "elr,swlr,clr-cnn,tc"},
      {"sparse", "bow,clr-bilstm,avg-des"},
  };
  std::vector<std::filesystem::path> roots;
  for (int run = 0; run < 2; ++run) {
    auto root = testing::scratch_dir("acceptance_determinism_" + std::to_string(run));
    save_synthetic(generate_synthetic(spec), root / "data");
    std::vector<ExperimentConfig> cfgs;
    for (const auto &[name, levels] : configs) {
      io::write_file(root / (std::string(name) + ".cfg"),
                     std::string("[run]\nseed = 3\nthreads = 1\nwork_dir = work\n[data]\ndir = data\n"
                                 "[embed]\ndim = 24\nepochs = 2\nmin_count = 1\nngram_min_count = 1\n"
                                 "[typer]\nhidden = 32\nepochs = 5\nbatch_size = 16\nlearning_rate = 0.05\n"
                                 "name_length = 20\ncnn_widths = 1,2,3\ncnn_filters = 8\nchar_min_count = 1\n"
                                 "levels = ") + levels + "\n");
      cfgs.push_back(ExperimentConfig::load(root / (std::string(name) + ".cfg")));
    }
    run_pipeline(cfgs, root / "report");
    roots.push_back(root);
  }
  // Every file produced under work/ and report/, compared by relative path.
  std::map<std::string, std::string> files[2];
  for (int run = 0; run < 2; ++run) {
    for (const char *sub : {"work", "report"}) {
      for (const auto &entry : std::filesystem::recursive_directory_iterator(roots[run] / sub)) {
        if (entry.is_regular_file()) {
          files[run][std::filesystem::relative(entry.path(), roots[run]).string()] = io::read_file(entry.path());
        }
      }
    }
  }
  std::size_t models = 0, reports = 0, differing = 0;
  for (const auto &[path, bytes] : files[0]) {
    auto it = files[1].find(path);
    differing += it == files[1].end() || it->second != bytes;
    models += path.ends_with("model.bin");
    reports += path.ends_with("report.tsv") || path.ends_with("report.txt");
  }
  differing += files[1].size() != files[0].size();
  return {differing == 0 && models == 2 && reports == 6,
          std::to_string(files[0].size()) + " files (" + std::to_string(models) + " models, " + std::to_string(reports) +
              " reports), " + std::to_string(differing) + " differ"};
}

}  // namespace mulr::acceptance
