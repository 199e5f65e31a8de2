#include <cstdlib>

#include "doctest.h"
#include "mulr/config.hpp"
#include "mulr/error.hpp"
#include "mulr/io.hpp"
#include "support.hpp"

using namespace mulr;

namespace {

std::filesystem::path data_dir() {
  auto dir = testing::scratch_dir("config_data");
  for (const char *f : {"corpus.txt", "dataset.tsv", "hierarchy.tsv", "notable.tsv"}) {
    io::write_file(dir / f, std::string("content of ") + f + '\n');
  }
  return dir;
}

const char *kConfig = R"(# experiment
[run]
name = demo
seed = 7

[data]
dir = data

[embed]
mode = skip
dim = 32

[typer]
levels = elr, clr-cnn ,tc
epochs = 3
learning_rate = 0.05
cnn_widths = 1,2,3
standardize = false
)";

}  // namespace

TEST_CASE("key-value parsing with sections") {
  auto kv = parse_key_values("a = 1\n[s]\nb=two words\n# c = 3\n\n[t]\nb = 4\n");
  CHECK(kv.at("a") == "1");
  CHECK(kv.at("s.b") == "two words");
  CHECK(kv.at("t.b") == "4");
  CHECK(kv.count("s.c") == 0);
  CHECK_THROWS_AS(parse_key_values("a=1\na=2\n"), ParseError);
  CHECK_THROWS_AS(parse_key_values("no equals sign\n"), ParseError);
  CHECK_THROWS_AS(parse_key_values("[unclosed\n"), ParseError);
  CHECK_THROWS_AS(parse_key_values("= value\n"), ParseError);
}

TEST_CASE("experiment config fields and path resolution") {
  auto base = testing::scratch_dir("config_parse");
  auto cfg = ExperimentConfig::parse(kConfig, base);
  CHECK(cfg.name == "demo");
  CHECK(cfg.seed == 7);
  CHECK(cfg.train.seed == 7);
  CHECK(cfg.corpus == base / "data" / "corpus.txt");
  CHECK(cfg.hierarchy == base / "data" / "hierarchy.tsv");
  CHECK(cfg.descriptions.empty());
  CHECK(cfg.embed.entity_mode == EmbeddingKind::Skip);
  CHECK(cfg.embed.dim == 32);
  CHECK(cfg.repr.levels_string() == "elr,clr-cnn,tc");
  CHECK(cfg.repr.cnn_widths == std::vector<int>{1, 2, 3});
  CHECK(cfg.train.epochs == 3);
  CHECK(cfg.train.learning_rate == doctest::Approx(0.05));
  CHECK_FALSE(cfg.train.standardize);

  // Explicit paths win over data.dir regardless of order.
  auto over = ExperimentConfig::parse("[data]\ncorpus = /abs/c.txt\ndir = d\n", base);
  CHECK(over.corpus == "/abs/c.txt");
  CHECK(over.dataset == base / "d" / "dataset.tsv");
}

TEST_CASE("config errors are usage errors") {
  auto base = testing::scratch_dir("config_errors");
  CHECK_THROWS_AS(ExperimentConfig::parse("[typer]\nlevels = elr,nope\n", base), UsageError);
  CHECK_THROWS_AS(ExperimentConfig::parse("[typer]\nepochs = many\n", base), UsageError);
  CHECK_THROWS_AS(ExperimentConfig::parse("[typer]\nepochs = 0\n", base), UsageError);
  CHECK_THROWS_AS(ExperimentConfig::parse("[typer]\nstandardize = yes\n", base), UsageError);
  CHECK_THROWS_AS(ExperimentConfig::parse("[embed]\nmode = subword\n", base), UsageError);
  CHECK_THROWS_AS(ExperimentConfig::parse("[embed]\ndim = -3\n", base), UsageError);
  CHECK_THROWS_AS(ExperimentConfig::parse("[run]\nthreads = 0\n", base), UsageError);
  CHECK_THROWS_AS(ExperimentConfig::parse("[mystery]\nkey = 1\n", base), UsageError);
}

TEST_CASE("config hash tracks results-affecting settings only") {
  auto root = testing::scratch_dir("config_hash");
  auto data = data_dir();
  std::filesystem::copy(data, root / "data");
  auto cfg = ExperimentConfig::parse(kConfig, root);
  const auto h = cfg.hash();
  CHECK(h.size() == 16);

  auto same = cfg;
  same.threads = 4;
  same.work_dir = "/elsewhere";
  same.name = "other";
  CHECK(same.hash() == h);

  auto seed = cfg;
  seed.seed = 8;
  CHECK(seed.hash() != h);
  auto levels = cfg;
  levels.repr = RepresentationSpec::parse("elr");
  CHECK(levels.hash() != h);
  auto lr = cfg;
  lr.train.learning_rate = 0.1;
  CHECK(lr.hash() != h);

  // File contents, not paths, enter the hash.
  io::write_file(root / "data" / "corpus.txt", "changed\n");
  CHECK(cfg.hash() != h);
}

TEST_CASE("load names the run after the file and honours MULR_THREADS") {
  auto dir = testing::scratch_dir("config_load");
  io::write_file(dir / "baseline.cfg", "[typer]\nlevels = elr\n");
  ::unsetenv("MULR_THREADS");
  auto cfg = ExperimentConfig::load(dir / "baseline.cfg");
  CHECK(cfg.name == "baseline");
  CHECK(cfg.threads == 1);
  ::setenv("MULR_THREADS", "3", 1);
  CHECK(ExperimentConfig::load(dir / "baseline.cfg").threads == 3);
  CHECK(effective_threads(1) == 3);
  ::setenv("MULR_THREADS", "zero", 1);
  CHECK_THROWS_AS(effective_threads(1), UsageError);
  ::unsetenv("MULR_THREADS");
  CHECK(effective_threads(2) == 2);
}
