#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace mulr {

// Token span [begin, end) linked to an entity id.
struct Mention {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string entity;

  bool operator==(const Mention &) const = default;
};

struct Sentence {
  std::vector<std::string> tokens;
  std::vector<Mention> mentions;  // sorted by begin, non-overlapping

  bool operator==(const Sentence &) const = default;
};

struct AnnotatedCorpus {
  std::vector<Sentence> sentences;

  bool operator==(const AnnotatedCorpus &) const = default;
};

// One sentence per line, mentions inline as `[[entity_id|surface words]]`.
AnnotatedCorpus parse_corpus(std::string_view content, const std::string &source = "<corpus>");
AnnotatedCorpus load_corpus(const std::filesystem::path &path);
std::string serialize_corpus(const AnnotatedCorpus &corpus);

// Throws DataError when a span is out of bounds, empty or overlapping.
void validate(const AnnotatedCorpus &corpus);

// `entity_id<TAB>type_id` rows.
using NotableTypes = std::map<std::string, std::string>;
NotableTypes parse_notable_types(std::string_view content, const std::string &source = "<notable>");
NotableTypes load_notable_types(const std::filesystem::path &path);
std::string serialize_notable_types(const NotableTypes &notable);

// Sentences of tokens plus the set of entity-id and type-id tokens, which
// are exempt from the vocabulary frequency threshold.
struct TokenStream {
  std::vector<std::vector<std::string>> sentences;
  std::unordered_set<std::string> exempt;

  std::size_t token_count() const;
};

// For every sentence emits the surface copy, a copy with each mention
// collapsed to its entity-id token, and a copy with each mention collapsed
// to its notable-type token. Mentions of entities in `exclude` stay as
// surface words in the third copy.
TokenStream build_three_copy_corpus(const AnnotatedCorpus &corpus, const NotableTypes &notable,
                                    const std::unordered_set<std::string> &exclude);

// Stream file: one sentence per line; the exempt tokens go to a sidecar
// file `<path>.exempt`, one per line.
void save_token_stream(const std::filesystem::path &path, const TokenStream &stream);
TokenStream load_token_stream(const std::filesystem::path &path);

class Vocabulary {
 public:
  Vocabulary() = default;

  std::size_t size() const { return tokens_.size(); }
  const std::string &token(int i) const { return tokens_[i]; }
  std::int64_t count(int i) const { return counts_[i]; }
  bool exempt(int i) const { return exempt_[i]; }
  std::int64_t min_count() const { return min_count_; }
  std::optional<int> find(std::string_view token) const;

  const std::vector<std::string> &tokens() const { return tokens_; }
  const std::vector<std::int64_t> &counts() const { return counts_; }

  // Sentences as index sequences; tokens outside the vocabulary are dropped.
  std::vector<std::vector<int>> encode(const TokenStream &stream) const;

  friend Vocabulary build_vocabulary(const TokenStream &stream, std::int64_t min_count);

 private:
  std::vector<std::string> tokens_;
  std::vector<std::int64_t> counts_;
  std::vector<bool> exempt_;
  std::unordered_map<std::string, int> index_;
  std::int64_t min_count_ = 1;
};

// Keeps word tokens seen at least `min_count` times and every exempt token.
// Indices are ordered by descending count, ties lexicographic.
Vocabulary build_vocabulary(const TokenStream &stream, std::int64_t min_count);

inline constexpr int kDefaultMinN = 3;
inline constexpr int kDefaultMaxN = 6;
inline constexpr std::int64_t kDefaultNgramMinCount = 5;

// Character ngrams of `<word>` for n in [n_min, n_max] in order of n then
// position, plus the whole bracketed word when it is longer than n_max.
// Duplicates are kept. Characters are UTF-8 code points.
std::vector<std::string> extract_subwords(std::string_view word, int n_min, int n_max);

class SubwordIndex {
 public:
  SubwordIndex() = default;

  // Ngram counts are weighted by word counts; ngrams below `min_count` are
  // dropped. The whole-word unit of every vocabulary token is always kept.
  static SubwordIndex build(const Vocabulary &vocab, int n_min = kDefaultMinN,
                            int n_max = kDefaultMaxN,
                            std::int64_t min_count = kDefaultNgramMinCount);

  // Rebuilds from an explicit ngram list (used when loading a model).
  SubwordIndex(std::vector<std::string> ngrams, int n_min, int n_max);

  int n_min() const { return n_min_; }
  int n_max() const { return n_max_; }
  std::size_t size() const { return ngrams_.size(); }
  const std::string &ngram(int i) const { return ngrams_[i]; }
  const std::vector<std::string> &ngrams() const { return ngrams_; }
  std::optional<int> find(std::string_view ngram) const;

  // Indexed units of a word (ngrams and whole-word unit), in extraction
  // order, duplicates kept. Unindexed ngrams are skipped.
  std::vector<int> units(std::string_view word) const;

 private:
  std::vector<std::string> ngrams_;
  std::unordered_map<std::string, int> index_;
  int n_min_ = kDefaultMinN;
  int n_max_ = kDefaultMaxN;
};

// Up to k surface names per entity ranked by mention count; ties are broken
// lexicographically.
std::map<std::string, std::vector<std::string>> most_frequent_names(const AnnotatedCorpus &corpus,
                                                                    std::size_t k);

// Mention count per entity id.
std::map<std::string, std::int64_t> mention_counts(const AnnotatedCorpus &corpus);

}  // namespace mulr
