#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mulr/dataset.hpp"
#include "mulr/embed.hpp"
#include "mulr/nn.hpp"
#include "mulr/tensor.hpp"

namespace mulr {

// ------------------------------------------------------------ characters

// Ids 0..3 are PAD, UNK, start `^` and end `$`; inventory characters follow.
class CharInventory {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kStart = 2;
  static constexpr int kEnd = 3;
  static constexpr int kReserved = 4;

  CharInventory() = default;
  explicit CharInventory(std::vector<std::string> chars);

  // Characters seen at least `min_count` times across `names`, ordered by
  // descending count then code point string.
  static CharInventory build(const std::vector<std::string> &names, std::int64_t min_count = 5);

  std::size_t size() const { return chars_.size() + kReserved; }
  const std::vector<std::string> &chars() const { return chars_; }
  int id(std::string_view ch) const;

 private:
  std::vector<std::string> chars_;
  std::unordered_map<std::string, int> index_;
};

inline constexpr std::size_t kDefaultNameLength = 40;

struct CharSequence {
  std::vector<int> ids;  // exactly l entries
  bool empty_name = false;
  bool truncated = false;
};

// `^`, the first l-2 characters of the name, `$`, then PAD up to length l.
// Throws DataError when l < 3.
CharSequence char_ids(std::string_view name, const CharInventory &inventory, std::size_t l);

struct CharMatrix {
  Matrix rows;  // l x d_c
  CharSequence sequence;
};

// Looks up one embedding row per character id; `table` is |inventory| x d_c.
CharMatrix char_lookup(std::string_view name, const CharInventory &inventory, const Matrix &table,
                       std::size_t l);

// ------------------------------------------------------------ CLR encoders

enum class ClrKind { Forward, Cnn, Lstm, BiLstm };

std::string_view to_string(ClrKind kind);

struct ClrConfig {
  ClrKind kind = ClrKind::Cnn;
  std::size_t name_length = kDefaultNameLength;
  std::size_t char_dim = 10;
  std::size_t hidden = 50;                           // LSTM / BiLSTM state size
  std::vector<int> widths{1, 2, 3, 4, 5, 6, 7};      // CNN window widths
  std::size_t filters_per_width = 50;                // CNN feature maps per width

  // Character dims and hidden sizes used for each encoder when unset.
  static ClrConfig defaults(ClrKind kind);
};

// Character-level encoder with its own character embedding table. Output
// depends only on the character id sequence.
class ClrEncoder {
 public:
  ClrEncoder(ClrConfig cfg, std::size_t inventory_size);

  const ClrConfig &config() const { return cfg_; }
  std::size_t output_dim() const;

  struct Cache {
    Matrix chars;
    nn::ConvFilterBank::Cache conv;
    nn::LstmCell::Trace forward_trace;
    nn::LstmCell::Trace backward_trace;
    Matrix reversed;
    Vec forward_last;
  };

  void init(Rng &rng, double range = nn::kInitRange);
  Vec forward(const std::vector<int> &ids, Cache *cache = nullptr) const;
  // Accumulates gradients into the character table and encoder weights.
  void backward(const std::vector<int> &ids, const Cache &cache, std::span<const double> grad_out);
  void collect(nn::ParamList &params, const std::string &prefix);

  Matrix table;
  Matrix grad_table;
  nn::ConvFilterBank conv;
  nn::LstmCell forward_cell;
  nn::LstmCell backward_cell;

 private:
  Matrix lookup(const std::vector<int> &ids) const;

  ClrConfig cfg_;
};

// FORWARD: row-major concatenation of the character matrix.
Vec clr_forward(const CharMatrix &c);

// ------------------------------------------------------------ word level

struct WlrResult {
  Vec vector;
  std::size_t found = 0;   // words that contributed
  std::size_t words = 0;   // words in the name
  bool flagged = false;    // no word found: zero vector
};

// Mean of the name words' vectors. Each word is looked up as-is, then
// lowercased; with `compose_subwords` a still-missing word is composed from
// the store's subword model. Missing words are skipped.
WlrResult wlr(std::string_view name, const EmbeddingStore &words, bool compose_subwords);

// ------------------------------------------------------------ hand-crafted

using SparseFeatureVector = std::set<std::string>;

// `w=<token>` and `wl=<lowercased token>` for every whitespace token.
SparseFeatureVector bow_features(std::string_view name);

// Token shape with classes A/a/7/. (runs collapsed, tokens joined by a
// space), length bucket and token count, raw character 1..5-grams of `^name$`
// and the same ngrams after lowercasing, digits -> 7 and punctuation -> `.`.
SparseFeatureVector nsl_features(std::string_view name);

std::string name_shape(std::string_view name);

// ------------------------------------------------------------ descriptions

// `entity_id<TAB>free text` rows, tokenized.
using Descriptions = std::map<std::string, std::vector<std::string>>;
Descriptions parse_descriptions(std::string_view content, const std::string &source = "<descriptions>");
Descriptions load_descriptions(const std::filesystem::path &path);

using IdfTable = std::unordered_map<std::string, double>;

// idf = log(N / df) over the description collection.
IdfTable compute_idf(const Descriptions &descriptions);

struct AvgDesResult {
  Vec vector;
  std::size_t used = 0;
  bool flagged = false;
};

// Mean vector of the top-k description words by tf*idf among those present
// in the store; ties broken lexicographically.
AvgDesResult avg_des(const std::vector<std::string> &description, const IdfTable &idf,
                     const EmbeddingStore &words, std::size_t k);

// ------------------------------------------------------------ multi-level

enum class Level { ClrForward, ClrCnn, ClrLstm, ClrBiLstm, ClrNsl, Wwlr, Swlr, Elr, Tc, AvgDes, Bow };

std::string_view to_string(Level level);
Level parse_level(std::string_view name);
bool is_clr_network(Level level);
bool is_sparse(Level level);
std::optional<ClrKind> clr_kind(Level level);

struct RepresentationSpec {
  std::vector<Level> levels;  // concatenation order
  std::size_t name_length = kDefaultNameLength;
  std::size_t char_dim = 0;     // 0: per-encoder default
  std::size_t lstm_hidden = 0;  // 0: per-encoder default
  std::vector<int> cnn_widths{1, 2, 3, 4, 5, 6, 7};
  std::size_t cnn_filters = 50;
  std::int64_t char_min_count = 5;
  std::size_t avg_des_k = 20;

  // Comma separated level names, e.g. "elr,swlr,clr-cnn,tc".
  static RepresentationSpec parse(std::string_view levels);
  std::string levels_string() const;
  ClrConfig clr_config(Level level) const;
  bool has(Level level) const;
};

// Everything the frozen levels read from. Pointers may be null when no
// requested level needs them.
struct RepresentationSources {
  const EmbeddingStore *entities = nullptr;  // ELR, TC
  const EmbeddingStore *words = nullptr;     // WWLR, AVG-DES
  const EmbeddingStore *subwords = nullptr;  // SWLR
  const TypeSystem *types = nullptr;         // TC
  const Descriptions *descriptions = nullptr;
  const IdfTable *idf = nullptr;
};

struct LevelSlot {
  Level level;
  std::size_t offset = 0;
  std::size_t dim = 0;
};

// Input layout of v(e): one slot per level in spec order. Sparse levels own
// a feature dictionary built from training names.
class FeatureLayout {
 public:
  FeatureLayout() = default;

  static FeatureLayout build(const RepresentationSpec &spec, const RepresentationSources &src,
                             const std::vector<std::string> &train_names);
  // Restores a layout from saved dictionaries.
  static FeatureLayout restore(const RepresentationSpec &spec, const RepresentationSources &src,
                               CharInventory inventory,
                               std::map<Level, std::vector<std::string>> dictionaries);

  const RepresentationSpec &spec() const { return spec_; }
  const std::vector<LevelSlot> &slots() const { return slots_; }
  std::size_t dim() const { return dim_; }
  const CharInventory &inventory() const { return inventory_; }
  const std::map<Level, std::vector<std::string>> &dictionaries() const { return dict_lists_; }
  std::optional<int> feature(Level level, const std::string &name) const;

  // Per-dimension (x - shift) * scale over the frozen dense levels (ELR, TC,
  // WWLR, SWLR, AVG-DES). Empty vectors mean identity.
  bool standardized() const { return !shift_.empty(); }
  const std::vector<double> &shift() const { return shift_; }
  const std::vector<double> &scale() const { return scale_; }
  // Both vectors have length dim(); entries outside dense frozen slots must
  // be 0 and 1. Throws DataError otherwise.
  void set_standardization(std::vector<double> shift, std::vector<double> scale);

 private:
  void finalize(const RepresentationSources &src);

  RepresentationSpec spec_;
  std::vector<LevelSlot> slots_;
  std::size_t dim_ = 0;
  CharInventory inventory_;
  std::map<Level, std::vector<std::string>> dict_lists_;
  std::map<Level, std::unordered_map<std::string, int>> dicts_;
  std::vector<double> shift_, scale_;
};

// ELR, TC, WWLR, SWLR and AVG-DES.
bool is_dense_frozen(Level level);

// Frozen part of v(e) for one (entity, name) pair: sparse (index, value)
// entries over the full layout, with the CLR slots left for the encoders.
struct AssembledInput {
  std::vector<std::pair<std::uint32_t, double>> entries;
  std::vector<int> char_ids;
  std::vector<std::string> flags;  // e.g. "wwlr:oov", "avg-des:empty"
};

// Throws DataError listing the entity id when ELR/TC is requested and the
// entity has no vector.
AssembledInput assemble_frozen(const std::string &entity_id, std::string_view name,
                               const FeatureLayout &layout, const RepresentationSources &src);

// Dense v(e) with CLR slots filled by the given encoders (one per CLR
// network level, in spec order).
Vec assemble(const std::string &entity_id, std::string_view name, const FeatureLayout &layout,
             const RepresentationSources &src, const std::vector<const ClrEncoder *> &encoders);

}  // namespace mulr
