#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mulr/corpus.hpp"
#include "mulr/dataset.hpp"
#include "mulr/tensor.hpp"

namespace mulr {

enum class EmbeddingKind { Skip, Sskip, Subword };

std::string_view to_string(EmbeddingKind kind);
EmbeddingKind parse_embedding_kind(std::string_view s);

// Ngram vectors of a subword model; a word vector is the mean of the
// vectors of its indexed units.
class SubwordModel {
 public:
  SubwordModel() = default;
  SubwordModel(SubwordIndex index, Matrix vectors);

  const SubwordIndex &index() const { return index_; }
  const Matrix &vectors() const { return vectors_; }
  std::size_t dim() const { return vectors_.cols(); }

  // Writes the mean of the unit vectors into `out`. Returns false (and
  // zero-fills) when the word has no indexed unit.
  bool compose(std::string_view word, std::span<double> out) const;

 private:
  SubwordIndex index_;
  Matrix vectors_;
};

// Token -> vector table of one dimension for words, entity ids and type ids.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  EmbeddingStore(EmbeddingKind kind, std::vector<std::string> tokens, Matrix vectors,
                 std::optional<SubwordModel> subwords = std::nullopt);

  EmbeddingKind kind() const { return kind_; }
  std::size_t dim() const { return vectors_.cols(); }
  std::size_t size() const { return tokens_.size(); }
  const std::string &token(int i) const { return tokens_[i]; }
  const std::vector<std::string> &tokens() const { return tokens_; }
  const Matrix &vectors() const { return vectors_; }
  std::span<const double> vector(int i) const { return vectors_.row(i); }

  std::optional<int> find(std::string_view token) const;
  std::optional<std::span<const double>> lookup(std::string_view token) const;

  const SubwordModel *subwords() const { return subwords_ ? &*subwords_ : nullptr; }

  // Written as `key=value` fields after the header counts.
  std::map<std::string, std::string> metadata;

  // Text format: `count dim [key=value ...]` header, then `token v1 ... vd`
  // per line.
  // Subword stores also write `<path>.ngrams` with header
  // `count dim n_min n_max` and one `ngram v1 ... vd` row per unit.
  void save(const std::filesystem::path &path) const;
  static EmbeddingStore load(const std::filesystem::path &path,
                             EmbeddingKind kind = EmbeddingKind::Skip);

  bool operator==(const EmbeddingStore &other) const;

 private:
  EmbeddingKind kind_ = EmbeddingKind::Skip;
  std::vector<std::string> tokens_;
  Matrix vectors_;
  std::unordered_map<std::string, int> index_;
  std::optional<SubwordModel> subwords_;
};

struct SgnsConfig {
  int dim = 200;
  int negatives = 10;
  int window = 5;
  int epochs = 5;
  double learning_rate = 0.025;
  std::uint64_t seed = 1;
  bool positional = false;  // structured (order-aware) skip-gram
  bool shrink_window = true;
  int threads = 1;
  std::size_t table_size = 1'000'000;
  double min_lr_fraction = 1e-4;
};

void validate(const SgnsConfig &cfg);

// Raw parameters of a (structured) skip-gram model. Non-positional models
// have one output block; positional ones have 2*window blocks selected by
// the signed offset of the context token.
struct SgnsModel {
  Matrix input;
  std::vector<Matrix> output;
  int window = 0;
  bool positional = false;

  std::size_t block_for_offset(int offset) const;
};

struct SgnsStats {
  // Mean negative-sampling loss per (center, context) pair, per epoch.
  std::vector<double> epoch_loss;
};

SgnsModel train_sgns_model(const TokenStream &stream, const Vocabulary &vocab,
                           const SgnsConfig &cfg, SgnsStats *stats = nullptr);

// SKIP or SSKIP input-side vectors for every vocabulary token.
EmbeddingStore train_sgns(const TokenStream &stream, const Vocabulary &vocab,
                          const SgnsConfig &cfg, SgnsStats *stats = nullptr);

// Skip-gram whose input word vector is the mean of its subword unit
// vectors. The returned store composes vectors for unseen words.
EmbeddingStore train_subword_sgns(const TokenStream &stream, const Vocabulary &vocab,
                                  const SubwordIndex &subwords, const SgnsConfig &cfg,
                                  SgnsStats *stats = nullptr);

// Sum over all in-window pairs of -log sigmoid(u_center . v_block(offset)(context)).
double positive_pair_loss(const SgnsModel &model, const std::vector<std::vector<int>> &sentences);

// Cosine similarity; 0 when either vector is all zero. Throws on dim mismatch.
double cosine(std::span<const double> a, std::span<const double> b);

// Cosine of the entity vector with every type vector, in TypeSystem order.
// Types without a vector (never a notable type) contribute 0.
Vec type_cosine_vector(std::string_view entity, const EmbeddingStore &store,
                       const TypeSystem &types);

}  // namespace mulr
