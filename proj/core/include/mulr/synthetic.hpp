#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mulr/corpus.hpp"
#include "mulr/dataset.hpp"
#include "mulr/repr.hpp"

namespace mulr {

// Generator settings for a typed entity world. Every leaf type has its own
// context words, name words and name suffixes; the *_signal fields set how
// often each cue is present, so individual levels can be switched off.
struct SyntheticSpec {
  std::size_t roots = 3;
  std::size_t leaves = 7;  // spread over the roots round-robin
  std::size_t entities = 2000;
  double train_fraction = 0.5;
  double dev_fraction = 0.2;  // the rest is test

  // Corpus frequency mixture; the middle bucket takes the remainder.
  double head_fraction = 0.05;
  double tail_fraction = 0.35;
  std::int64_t head_max_frequency = 120;   // head: [101, max]
  std::int64_t middle_max_frequency = 12;  // middle: [5, max]

  std::size_t sentence_length = 6;        // context tokens per sentence
  std::size_t context_words = 20;         // per leaf type
  std::size_t background_words = 400;     // shared, type-neutral
  double context_signal = 0.5;            // P(context token is a type word)
  double sibling_confusion = 0.0;         // P(type context token comes from a sibling leaf)

  std::size_t name_words = 150;           // per leaf type
  double name_word_signal = 0.6;          // P(name contains a type name word)
  std::size_t name_word_sentences = 3;    // background sentences per name word
  double name_word_context_signal = 0.5;  // context_signal for those sentences
  std::size_t suffixes = 2;               // per leaf type
  double suffix_signal = 0.6;             // P(name contains a suffixed word)
  std::size_t filler_words = 300;         // shared name words
  std::size_t max_filler = 2;             // filler words per name: [0, max]
  std::size_t max_train_names = 2;

  // Fraction of test entities whose name words never occur in train names:
  // type words become morphological variants, fillers fresh words.
  double unknown_fraction = 0.0;

  // Entities mentioned in the corpus, with a notable type, that belong to
  // no split. Mention counts are uniform in [1, middle_max_frequency].
  std::size_t corpus_only_entities = 0;

  std::size_t description_length = 12;
  double description_signal = 0.4;

  std::uint64_t seed = 1;
};

// Throws UsageError on invalid sizes or fractions.
void validate(const SyntheticSpec &spec);

// Named settings:
//   mixed    every cue present at moderate strength; a small train split
//            and a corpus mentioning many entities outside the dataset
//   context  only context words carry the type
//   suffix   only name suffixes carry the type
//   subword  mixed, with 30% of test names built from unseen variants
SyntheticSpec synthetic_preset(std::string_view name);

struct SyntheticData {
  TypeSystem types;
  DatasetSplit split;          // gold sets closed under parents
  AnnotatedCorpus corpus;      // corpus_frequency = mention count
  NotableTypes notable;        // leaf type per entity
  Descriptions descriptions;
};

SyntheticData generate_synthetic(const SyntheticSpec &spec);

// Files: hierarchy.tsv, dataset.tsv, corpus.txt, notable.tsv,
// descriptions.tsv.
void save_synthetic(const SyntheticData &data, const std::filesystem::path &dir);
SyntheticData load_synthetic(const std::filesystem::path &dir);

// Entities of two classes share the same context bag but see a relation
// word on opposite sides: class 0 `... e R ...`, class 1 `... R e ...`.
struct OrderProbeSpec {
  std::size_t entities_per_class = 150;
  std::size_t sentences_per_entity = 20;
  std::size_t fillers = 200;
  std::size_t side_fillers = 2;  // fillers before and after the pair
  std::uint64_t seed = 1;
};

struct OrderProbeCorpus {
  TokenStream stream;  // entity tokens are exempt
  std::vector<std::string> entities;
  std::vector<int> labels;
};

OrderProbeCorpus generate_order_corpus(const OrderProbeSpec &spec);

}  // namespace mulr
