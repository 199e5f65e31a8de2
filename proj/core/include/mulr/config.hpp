#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "mulr/embed.hpp"
#include "mulr/repr.hpp"
#include "mulr/typer.hpp"

namespace mulr {

// Flat `key = value` text with `[section]` headers; `#` starts a comment.
// Keys are returned as `section.key`.
std::map<std::string, std::string> parse_key_values(std::string_view text, const std::string &source = "<config>");

struct EmbedSettings {
  EmbeddingKind entity_mode = EmbeddingKind::Sskip;  // skip or sskip
  int dim = 100;
  int negatives = 5;
  int window = 5;
  int epochs = 5;
  double learning_rate = 0.025;
  std::int64_t min_count = 5;
  int subword_min_n = kDefaultMinN;
  int subword_max_n = kDefaultMaxN;
  std::int64_t ngram_min_count = kDefaultNgramMinCount;

  SgnsConfig sgns(std::uint64_t seed, int threads, bool positional) const;
};

struct ExperimentConfig {
  std::string name = "run";
  std::filesystem::path corpus;
  std::filesystem::path dataset;
  std::filesystem::path hierarchy;
  std::filesystem::path notable;
  std::filesystem::path descriptions;  // optional
  EmbedSettings embed;
  RepresentationSpec repr = RepresentationSpec::parse("elr");
  TrainConfig train;
  std::uint64_t seed = 1;
  int threads = 1;
  std::filesystem::path work_dir = "mulr-work";

  // Relative paths resolve against `base_dir`. Unknown keys and malformed
  // values throw UsageError. MULR_THREADS, when set, overrides run.threads.
  static ExperimentConfig parse(std::string_view text, const std::filesystem::path &base_dir,
                                const std::string &source = "<config>");
  static ExperimentConfig load(const std::filesystem::path &path);

  // Canonical text of every setting that affects results (excludes threads,
  // work_dir and name).
  std::string canonical() const;
  std::string hash() const;
};

// Applies MULR_THREADS when set; returns the effective thread count.
int effective_threads(int configured);

}  // namespace mulr
