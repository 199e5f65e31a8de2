#include "mulr/embed.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "mulr/error.hpp"
#include "mulr/io.hpp"
#include "mulr/rng.hpp"
#include "mulr/text.hpp"

namespace mulr {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// -log sigmoid(x), stable for large |x|.
double neg_log_sigmoid(double x) {
  return x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

std::vector<int> build_unigram_table(const Vocabulary &vocab, std::size_t size) {
  std::vector<int> table;
  table.reserve(size);
  double total = 0.0;
  for (auto c : vocab.counts()) total += std::pow(static_cast<double>(c), 0.75);
  std::size_t i = 0;
  double cum = std::pow(static_cast<double>(vocab.count(0)), 0.75) / total;
  for (std::size_t a = 0; a < size; ++a) {
    table.push_back(static_cast<int>(i));
    if (static_cast<double>(a) / static_cast<double>(size) > cum && i + 1 < vocab.size()) {
      ++i;
      cum += std::pow(static_cast<double>(vocab.count(static_cast<int>(i))), 0.75) / total;
    }
  }
  return table;
}

void init_uniform(Matrix &m, Rng &rng, double half_width) {
  for (double &x : m.flat()) x = rng.uniform(-half_width, half_width);
}

// Shared negative-sampling trainer. `hidden_of(center)` fills the input
// representation of the center token; `apply_grad(center, grad)` adds the
// accumulated input gradient back to its parameters.
template <typename HiddenFn, typename GradFn>
void run_sgns(const std::vector<std::vector<int>> &sentences, SgnsModel &model,
              const std::vector<int> &table, const SgnsConfig &cfg, SgnsStats *stats,
              HiddenFn hidden_of, GradFn apply_grad) {
  const std::size_t dim = static_cast<std::size_t>(cfg.dim);
  std::size_t words_per_epoch = 0;
  for (const auto &s : sentences) words_per_epoch += s.size();
  const double total = static_cast<double>(words_per_epoch) * cfg.epochs + 1.0;
  std::atomic<std::size_t> processed{0};

  auto worker = [&](std::size_t first, std::size_t last, std::uint64_t seed,
                    double &loss_sum, std::size_t &pairs) {
    Rng rng(seed);
    Vec hidden(dim), grad(dim);
    for (std::size_t si = first; si < last; ++si) {
      const auto &s = sentences[si];
      const int n = static_cast<int>(s.size());
      for (int i = 0; i < n; ++i) {
        std::size_t done = processed.fetch_add(1, std::memory_order_relaxed);
        double lr = cfg.learning_rate *
                    std::max(cfg.min_lr_fraction, 1.0 - static_cast<double>(done) / total);
        int span = cfg.window;
        if (cfg.shrink_window) span = cfg.window - static_cast<int>(rng.below(cfg.window));
        const int center = s[i];
        hidden_of(center, std::span<double>(hidden));
        std::fill(grad.begin(), grad.end(), 0.0);
        bool touched = false;
        for (int o = -span; o <= span; ++o) {
          const int j = i + o;
          if (o == 0 || j < 0 || j >= n) continue;
          Matrix &out = model.output[model.positional ? model.block_for_offset(o) : 0];
          const int context = s[j];
          for (int d = 0; d <= cfg.negatives; ++d) {
            int target = context;
            if (d > 0) {
              target = table[rng.below(table.size())];
              if (target == context) continue;
            }
            auto row = out.row(static_cast<std::size_t>(target));
            double f = dot(hidden, row);
            const double label = d == 0 ? 1.0 : 0.0;
            loss_sum += neg_log_sigmoid(d == 0 ? f : -f);
            double g = (label - sigmoid(f)) * lr;
            axpy(g, row, grad);
            axpy(g, hidden, row);
          }
          ++pairs;
          touched = true;
        }
        if (touched) apply_grad(center, std::span<const double>(grad));
      }
    }
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t pairs = 0;
    const std::uint64_t epoch_seed = cfg.seed * 1000003ULL + static_cast<std::uint64_t>(epoch);
    if (cfg.threads <= 1) {
      worker(0, sentences.size(), epoch_seed, loss_sum, pairs);
    } else {
      // Hogwild: threads update shared rows without synchronisation.
      const std::size_t nt = static_cast<std::size_t>(cfg.threads);
      std::vector<double> losses(nt, 0.0);
      std::vector<std::size_t> counts(nt, 0);
      std::vector<std::thread> pool;
      for (std::size_t t = 0; t < nt; ++t) {
        std::size_t first = sentences.size() * t / nt;
        std::size_t last = sentences.size() * (t + 1) / nt;
        pool.emplace_back([&, t, first, last] {
          worker(first, last, epoch_seed + 7919 * (t + 1), losses[t], counts[t]);
        });
      }
      for (auto &th : pool) th.join();
      for (std::size_t t = 0; t < nt; ++t) {
        loss_sum += losses[t];
        pairs += counts[t];
      }
    }
    if (stats) stats->epoch_loss.push_back(pairs ? loss_sum / static_cast<double>(pairs) : 0.0);
  }
}

void check_finite(const Matrix &m, const char *what) {
  if (!all_finite(m.flat())) throw NumericError(std::string("non-finite values in ") + what);
}

}  // namespace

std::string_view to_string(EmbeddingKind kind) {
  switch (kind) {
    case EmbeddingKind::Skip:
      return "skip";
    case EmbeddingKind::Sskip:
      return "sskip";
    case EmbeddingKind::Subword:
      return "subword";
  }
  return "skip";
}

EmbeddingKind parse_embedding_kind(std::string_view s) {
  if (s == "skip") return EmbeddingKind::Skip;
  if (s == "sskip") return EmbeddingKind::Sskip;
  if (s == "subword") return EmbeddingKind::Subword;
  throw UsageError("unknown embedding mode '" + std::string(s) + "'");
}

SubwordModel::SubwordModel(SubwordIndex index, Matrix vectors)
    : index_(std::move(index)), vectors_(std::move(vectors)) {
  if (vectors_.rows() != index_.size()) {
    throw DataError("subword model: vector count does not match ngram count");
  }
}

bool SubwordModel::compose(std::string_view word, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  auto units = index_.units(word);
  if (units.empty()) return false;
  for (int u : units) axpy(1.0, vectors_.row(static_cast<std::size_t>(u)), out);
  const double inv = 1.0 / static_cast<double>(units.size());
  for (double &x : out) x *= inv;
  return true;
}

EmbeddingStore::EmbeddingStore(EmbeddingKind kind, std::vector<std::string> tokens,
                               Matrix vectors, std::optional<SubwordModel> subwords)
    : kind_(kind),
      tokens_(std::move(tokens)),
      vectors_(std::move(vectors)),
      subwords_(std::move(subwords)) {
  if (vectors_.rows() != tokens_.size()) {
    throw DataError("embedding store: row count does not match token count");
  }
  if (subwords_ && subwords_->dim() != vectors_.cols()) {
    throw DataError("embedding store: subword dimension mismatch");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw DataError("embedding store: duplicate token '" + tokens_[i] + "'");
    }
  }
}

std::optional<int> EmbeddingStore::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::span<const double>> EmbeddingStore::lookup(std::string_view token) const {
  auto i = find(token);
  if (!i) return std::nullopt;
  return vector(*i);
}

bool EmbeddingStore::operator==(const EmbeddingStore &other) const {
  if (kind_ != other.kind_ || tokens_ != other.tokens_ || !(vectors_ == other.vectors_) ||
      metadata != other.metadata) {
    return false;
  }
  if (bool(subwords_) != bool(other.subwords_)) return false;
  if (!subwords_) return true;
  return subwords_->index().ngrams() == other.subwords_->index().ngrams() &&
         subwords_->vectors() == other.subwords_->vectors();
}

namespace {

void write_rows(std::string &out, const std::vector<std::string> &keys, const Matrix &m) {
  for (std::size_t i = 0; i < keys.size(); ++i) {
    out += keys[i];
    for (double v : m.row(i)) {
      out += ' ';
      io::append_double(out, v);
    }
    out += '\n';
  }
}

std::pair<std::vector<std::string>, Matrix> read_rows(std::string_view content, std::size_t skip,
                                                      std::size_t count, std::size_t dim,
                                                      const std::string &source) {
  auto lines = io::lines_of(content);
  if (lines.size() < skip + count) throw DataError(source + ": truncated embedding file");
  std::vector<std::string> keys;
  Matrix m(count, dim);
  for (std::size_t i = 0; i < count; ++i) {
    auto cols = text::split_whitespace(lines[skip + i]);
    if (cols.size() != dim + 1) {
      throw ParseError(source, skip + i + 1, "expected token followed by " + std::to_string(dim) +
                                                 " values");
    }
    keys.push_back(cols[0]);
    for (std::size_t d = 0; d < dim; ++d) m(i, d) = io::parse_double(cols[d + 1]);
  }
  return {std::move(keys), std::move(m)};
}

}  // namespace

void EmbeddingStore::save(const std::filesystem::path &path) const {
  std::string out = std::to_string(size()) + ' ' + std::to_string(dim());
  for (const auto &[k, v] : metadata) {
    if (k.empty() || k.find_first_of("= \t\n") != std::string::npos ||
        v.find_first_of(" \t\n") != std::string::npos) {
      throw DataError("embedding metadata '" + k + "' must be a single token");
    }
    out += ' ' + k + '=' + v;
  }
  out += '\n';
  write_rows(out, tokens_, vectors_);
  io::write_file(path, out);
  if (subwords_) {
    const auto &idx = subwords_->index();
    std::string side = std::to_string(idx.size()) + ' ' + std::to_string(dim()) + ' ' +
                       std::to_string(idx.n_min()) + ' ' + std::to_string(idx.n_max()) + '\n';
    write_rows(side, idx.ngrams(), subwords_->vectors());
    io::write_file(path.string() + ".ngrams", side);
  }
}

EmbeddingStore EmbeddingStore::load(const std::filesystem::path &path, EmbeddingKind kind) {
  std::string content = io::read_file(path);
  auto lines = io::lines_of(content);
  if (lines.empty()) throw DataError(path.string() + ": empty embedding file");
  auto header = text::split_whitespace(lines[0]);
  if (header.size() < 2) throw ParseError(path.string(), 1, "expected `count dim` header");
  std::map<std::string, std::string> meta;
  for (std::size_t i = 2; i < header.size(); ++i) {
    auto eq = header[i].find('=');
    if (eq == std::string::npos || eq == 0) throw ParseError(path.string(), 1, "expected key=value after `count dim`");
    meta[header[i].substr(0, eq)] = header[i].substr(eq + 1);
  }
  auto count = static_cast<std::size_t>(io::parse_double(header[0]));
  auto dim = static_cast<std::size_t>(io::parse_double(header[1]));
  auto [tokens, vectors] = read_rows(content, 1, count, dim, path.string());
  std::optional<SubwordModel> sub;
  std::filesystem::path side = path.string() + ".ngrams";
  if (std::filesystem::exists(side)) {
    std::string sc = io::read_file(side);
    auto sl = io::lines_of(sc);
    auto sh = sl.empty() ? std::vector<std::string>{} : text::split_whitespace(sl[0]);
    if (sh.size() != 4) throw ParseError(side.string(), 1, "expected `count dim n_min n_max`");
    auto n = static_cast<std::size_t>(io::parse_double(sh[0]));
    if (static_cast<std::size_t>(io::parse_double(sh[1])) != dim) {
      throw DataError(side.string() + ": dimension mismatch");
    }
    auto [grams, gv] = read_rows(sc, 1, n, dim, side.string());
    sub.emplace(SubwordIndex(std::move(grams), static_cast<int>(io::parse_double(sh[2])),
                             static_cast<int>(io::parse_double(sh[3]))),
                std::move(gv));
    kind = EmbeddingKind::Subword;
  }
  EmbeddingStore store(kind, std::move(tokens), std::move(vectors), std::move(sub));
  store.metadata = std::move(meta);
  return store;
}

void validate(const SgnsConfig &cfg) {
  if (cfg.dim <= 0) throw UsageError("embedding dim must be > 0");
  if (cfg.negatives < 1) throw UsageError("negatives must be >= 1");
  if (cfg.window < 1) throw UsageError("window must be >= 1");
  if (cfg.epochs < 1) throw UsageError("epochs must be >= 1");
  if (!(cfg.learning_rate > 0)) throw UsageError("learning rate must be > 0");
  if (cfg.table_size == 0) throw UsageError("negative table size must be > 0");
}

std::size_t SgnsModel::block_for_offset(int offset) const {
  if (!positional) return 0;
  return offset < 0 ? static_cast<std::size_t>(offset + window)
                    : static_cast<std::size_t>(offset + window - 1);
}

SgnsModel train_sgns_model(const TokenStream &stream, const Vocabulary &vocab,
                           const SgnsConfig &cfg, SgnsStats *stats) {
  validate(cfg);
  if (stream.sentences.empty() || vocab.size() == 0) {
    throw DataError("cannot train embeddings on an empty stream");
  }
  const auto sentences = vocab.encode(stream);
  const auto dim = static_cast<std::size_t>(cfg.dim);
  Rng rng(cfg.seed);
  SgnsModel model;
  model.window = cfg.window;
  model.positional = cfg.positional;
  model.input = Matrix(vocab.size(), dim);
  init_uniform(model.input, rng, 0.5 / static_cast<double>(dim));
  const std::size_t blocks = cfg.positional ? 2 * static_cast<std::size_t>(cfg.window) : 1;
  model.output.assign(blocks, Matrix(vocab.size(), dim));
  auto table = build_unigram_table(vocab, cfg.table_size);

  run_sgns(
      sentences, model, table, cfg, stats,
      [&](int center, std::span<double> h) {
        auto row = model.input.row(static_cast<std::size_t>(center));
        std::copy(row.begin(), row.end(), h.begin());
      },
      [&](int center, std::span<const double> g) {
        axpy(1.0, g, model.input.row(static_cast<std::size_t>(center)));
      });
  check_finite(model.input, "input embeddings");
  return model;
}

EmbeddingStore train_sgns(const TokenStream &stream, const Vocabulary &vocab,
                          const SgnsConfig &cfg, SgnsStats *stats) {
  SgnsModel model = train_sgns_model(stream, vocab, cfg, stats);
  return EmbeddingStore(cfg.positional ? EmbeddingKind::Sskip : EmbeddingKind::Skip,
                        vocab.tokens(), std::move(model.input));
}

EmbeddingStore train_subword_sgns(const TokenStream &stream, const Vocabulary &vocab,
                                  const SubwordIndex &subwords, const SgnsConfig &cfg,
                                  SgnsStats *stats) {
  validate(cfg);
  if (stream.sentences.empty() || vocab.size() == 0) {
    throw DataError("cannot train embeddings on an empty stream");
  }
  const auto sentences = vocab.encode(stream);
  const auto dim = static_cast<std::size_t>(cfg.dim);
  Rng rng(cfg.seed);
  Matrix grams(subwords.size(), dim);
  init_uniform(grams, rng, 1.0 / static_cast<double>(dim));
  SgnsModel model;
  model.window = cfg.window;
  model.positional = false;
  model.output.assign(1, Matrix(vocab.size(), dim));
  std::vector<std::vector<int>> units(vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    units[i] = subwords.units(vocab.token(static_cast<int>(i)));
  }
  auto table = build_unigram_table(vocab, cfg.table_size);

  run_sgns(
      sentences, model, table, cfg, stats,
      [&](int center, std::span<double> h) {
        std::fill(h.begin(), h.end(), 0.0);
        const auto &u = units[static_cast<std::size_t>(center)];
        for (int g : u) axpy(1.0, grams.row(static_cast<std::size_t>(g)), h);
        if (!u.empty()) {
          const double inv = 1.0 / static_cast<double>(u.size());
          for (double &x : h) x *= inv;
        }
      },
      [&](int center, std::span<const double> g) {
        for (int u : units[static_cast<std::size_t>(center)]) {
          axpy(1.0, g, grams.row(static_cast<std::size_t>(u)));
        }
      });
  check_finite(grams, "subword embeddings");

  SubwordModel sub(subwords, std::move(grams));
  Matrix words(vocab.size(), dim);
  for (std::size_t i = 0; i < vocab.size(); ++i) sub.compose(vocab.token(static_cast<int>(i)), words.row(i));
  return EmbeddingStore(EmbeddingKind::Subword, vocab.tokens(), std::move(words), std::move(sub));
}

double positive_pair_loss(const SgnsModel &model, const std::vector<std::vector<int>> &sentences) {
  double loss = 0.0;
  for (const auto &s : sentences) {
    const int n = static_cast<int>(s.size());
    for (int i = 0; i < n; ++i) {
      for (int o = -model.window; o <= model.window; ++o) {
        const int j = i + o;
        if (o == 0 || j < 0 || j >= n) continue;
        const auto &out = model.output[model.block_for_offset(o)];
        loss += neg_log_sigmoid(dot(model.input.row(static_cast<std::size_t>(s[i])),
                                    out.row(static_cast<std::size_t>(s[j]))));
      }
    }
  }
  return loss;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DataError("cosine: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()) + ")");
  }
  double na = dot(a, a), nb = dot(b, b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  double c = dot(a, b) / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

Vec type_cosine_vector(std::string_view entity, const EmbeddingStore &store,
                       const TypeSystem &types) {
  auto e = store.lookup(entity);
  if (!e) throw DataError("no embedding for entity '" + std::string(entity) + "'");
  Vec out(types.size(), 0.0);
  for (std::size_t t = 0; t < types.size(); ++t) {
    // Types never used as a notable type have no vector; they score 0.
    auto tv = store.lookup(types.name(static_cast<int>(t)));
    if (tv) out[t] = cosine(*e, *tv);
  }
  return out;
}

}  // namespace mulr
