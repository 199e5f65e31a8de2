#include <chrono>

#include "doctest.h"
#include "mulr/error.hpp"
#include "mulr/io.hpp"
#include "mulr/pipeline.hpp"
#include "support.hpp"

using namespace mulr;

namespace {

SyntheticSpec tiny_world() {
  SyntheticSpec s = synthetic_preset("mixed");
  s.entities = 300;
  s.corpus_only_entities = 200;
  s.name_words = 20;
  s.filler_words = 60;
  s.background_words = 100;
  return s;
}

std::string config_text(const std::string &levels, std::uint64_t seed = 1) {
  return "[run]\nseed = " + std::to_string(seed) +
         "\nwork_dir = work\n[data]\ndir = data\n"
         "[embed]\ndim = 16\nepochs = 2\nmin_count = 1\nngram_min_count = 1\n"
         "[typer]\nlevels = " + levels +
         "\nhidden = 20\nepochs = 4\nbatch_size = 16\nlearning_rate = 0.05\n"
         "name_length = 20\ncnn_widths = 1,2,3\ncnn_filters = 8\nchar_min_count = 1\n";
}

// A project directory holding data/ and one config per entry.
std::vector<ExperimentConfig> project(const std::string &name, const std::vector<std::pair<std::string, std::string>> &configs) {
  auto root = testing::scratch_dir(name);
  save_synthetic(generate_synthetic(tiny_world()), root / "data");
  std::vector<ExperimentConfig> out;
  for (const auto &[file, text] : configs) {
    io::write_file(root / (file + ".cfg"), text);
    out.push_back(ExperimentConfig::load(root / (file + ".cfg")));
  }
  return out;
}

}  // namespace

TEST_CASE("single experiment writes tagged outputs") {
  auto cfgs = project("pipeline_single", {{"elr", config_text("elr,clr-cnn", 5)}});
  const auto &cfg = cfgs[0];
  auto r = run_experiment(cfg);
  CHECK_FALSE(r.cached);
  CHECK(r.name == "elr");
  CHECK(r.seed == 5);
  CHECK(r.report.slice("all").count == 180);
  const std::string tag = "config=" + cfg.hash() + " seed=5";

  auto preds = io::read_file(r.dir / "predictions.tsv");
  CHECK(preds.rfind("# " + tag, 0) == 0);
  CHECK(io::read_file(r.dir / "report.txt").rfind("# " + tag, 0) == 0);
  auto tsv = io::read_file(r.dir / "report.tsv");
  CHECK(tsv.find("meta\tconfig\t" + cfg.hash() + "\n") != std::string::npos);
  CHECK(tsv.find("meta\tseed\t5\n") != std::string::npos);
  auto meta = read_model_metadata(r.dir / "model.bin");
  CHECK(meta.at("meta.config") == cfg.hash());
  CHECK(meta.at("meta.seed") == "5");
  CHECK(meta.at("levels") == "elr,clr-cnn");

  // Embedding stores carry their key and seed too.
  bool found = false;
  for (const auto &entry : std::filesystem::directory_iterator(cfg.work_dir)) {
    if (entry.path().filename().string().rfind("entities-", 0) != 0) continue;
    auto store = EmbeddingStore::load(entry.path() / "vectors.vec", EmbeddingKind::Sskip);
    CHECK(store.metadata.at("seed") == "5");
    found = true;
  }
  CHECK(found);
}

TEST_CASE("warm cache reproduces the report") {
  auto cfgs = project("pipeline_cache", {{"run", config_text("elr,swlr")}});
  auto t0 = std::chrono::steady_clock::now();
  auto cold = run_experiment(cfgs[0]);
  auto t1 = std::chrono::steady_clock::now();
  const auto tsv = io::read_file(cold.dir / "report.tsv");
  auto warm = run_experiment(cfgs[0]);
  auto t2 = std::chrono::steady_clock::now();
  CHECK(warm.cached);
  CHECK(report_tsv(warm.report) == report_tsv(cold.report));
  CHECK(io::read_file(warm.dir / "report.tsv") == tsv);
  CHECK(t2 - t1 < t1 - t0);

  // A lost report is rebuilt from the cached model with identical bytes.
  std::filesystem::remove(cold.dir / "report.tsv");
  auto again = run_experiment(cfgs[0]);
  CHECK_FALSE(again.cached);
  CHECK(io::read_file(again.dir / "report.tsv") == tsv);
}

TEST_CASE("identical configs in separate trees give identical bytes") {
  auto a = project("pipeline_det_a", {{"run", config_text("elr,wwlr,clr-cnn,tc")}});
  auto b = project("pipeline_det_b", {{"run", config_text("elr,wwlr,clr-cnn,tc")}});
  CHECK(a[0].hash() == b[0].hash());
  auto ra = run_experiment(a[0]);
  auto rb = run_experiment(b[0]);
  for (const char *f : {"model.bin", "predictions.tsv", "report.tsv", "report.txt"}) {
    CAPTURE(f);
    CHECK(io::read_file(ra.dir / f) == io::read_file(rb.dir / f));
  }
}

TEST_CASE("two configs give a 2x2 significance matrix with zero diagonal") {
  auto cfgs = project("pipeline_pair", {{"a", config_text("elr")}, {"b", config_text("elr,clr-cnn")}});
  auto out = cfgs[0].work_dir.parent_path() / "report";
  auto result = run_pipeline(cfgs, out);
  REQUIRE(result.significance.size() == 2);
  REQUIRE(result.significance[0].size() == 2);
  CHECK_FALSE(result.significance[0][0]);
  CHECK_FALSE(result.significance[1][1]);
  CHECK(result.significance[0][1] == result.significance[1][0]);
  auto text = io::read_file(out / "report.txt");
  CHECK(text.find("## a") != std::string::npos);
  CHECK(text.find("## b") != std::string::npos);
  CHECK(text.find("Significance") != std::string::npos);
  auto tsv = io::read_file(out / "report.tsv");
  CHECK(tsv.find("a/all\tmicro_f1\t") != std::string::npos);
  CHECK(tsv.find("b/tail\tcount\t") != std::string::npos);
  CHECK(tsv.find("significance\ta:a\t0\n") != std::string::npos);
  CHECK_THROWS_AS(run_pipeline({}, out), UsageError);
}

TEST_CASE("levels without embeddings skip the corpus stages") {
  auto cfgs = project("pipeline_sparse", {{"bow", config_text("bow,clr-nsl")}});
  run_experiment(cfgs[0]);
  for (const auto &entry : std::filesystem::directory_iterator(cfgs[0].work_dir)) {
    CHECK(entry.path().filename().string().rfind("typer-", 0) == 0);
  }
}

TEST_CASE("stage failures name the stage and keep the error kind") {
  auto cfgs = project("pipeline_errors", {{"run", config_text("elr")}});
  auto cfg = cfgs[0];
  std::filesystem::remove(cfg.dataset);
  try {
    run_experiment(cfg);
    FAIL("expected an error");
  } catch (const Error &e) {
    CHECK(e.kind() == ErrorKind::Data);
    CHECK(std::string(e.what()).rfind("stage 'load': ", 0) == 0);
  }

  cfg = cfgs[0];
  io::write_file(cfg.corpus, "not a corpus line with [[broken markup\n");
  try {
    run_experiment(cfg);
    FAIL("expected an error");
  } catch (const Error &e) {
    CHECK(e.kind() == ErrorKind::Data);
    CAPTURE(e.what());
    CHECK(std::string(e.what()).rfind("stage '", 0) == 0);
  }
}

TEST_CASE("inputs from a synthetic world match loading its files") {
  auto root = testing::scratch_dir("pipeline_inputs");
  auto data = generate_synthetic(tiny_world());
  save_synthetic(data, root);
  ExperimentConfig cfg;
  cfg.corpus = root / "corpus.txt";
  cfg.dataset = root / "dataset.tsv";
  cfg.hierarchy = root / "hierarchy.tsv";
  cfg.notable = root / "notable.tsv";
  cfg.descriptions = root / "descriptions.tsv";
  auto loaded = load_inputs(cfg);
  auto direct = inputs_from(std::move(data));
  CHECK(serialize_dataset(loaded.split, loaded.types) == serialize_dataset(direct.split, direct.types));
  CHECK(loaded.corpus.sentences == direct.corpus.sentences);
  CHECK(build_training_stream(loaded).sentences == build_training_stream(direct).sentences);
  // Three copies per sentence; dev and test ids never meet a type token.
  CHECK(build_training_stream(direct).sentences.size() == 3 * direct.corpus.sentences.size());
  CHECK(surface_stream(direct.corpus).sentences.size() == direct.corpus.sentences.size());
}
