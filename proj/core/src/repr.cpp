#include "mulr/repr.hpp"

#include <algorithm>
#include <cmath>

#include "mulr/error.hpp"
#include "mulr/io.hpp"
#include "mulr/text.hpp"

namespace mulr {

// ------------------------------------------------------------ characters

CharInventory::CharInventory(std::vector<std::string> chars) : chars_(std::move(chars)) {
  for (std::size_t i = 0; i < chars_.size(); ++i) {
    index_.emplace(chars_[i], static_cast<int>(i) + kReserved);
  }
}

CharInventory CharInventory::build(const std::vector<std::string> &names, std::int64_t min_count) {
  std::map<std::string, std::int64_t> counts;
  for (const auto &n : names) {
    for (auto &c : text::utf8_chars(n)) ++counts[c];
  }
  std::vector<std::pair<std::string, std::int64_t>> kept;
  for (auto &[c, k] : counts) {
    if (k >= min_count) kept.emplace_back(c, k);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto &a, const auto &b) { return a.second > b.second; });
  std::vector<std::string> chars;
  for (auto &[c, k] : kept) chars.push_back(c);
  return CharInventory(std::move(chars));
}

int CharInventory::id(std::string_view ch) const {
  auto it = index_.find(std::string(ch));
  return it == index_.end() ? kUnk : it->second;
}

CharSequence char_ids(std::string_view name, const CharInventory &inventory, std::size_t l) {
  if (l < 3) throw DataError("padded name length must be >= 3");
  CharSequence seq;
  auto chars = text::utf8_chars(name);
  seq.empty_name = chars.empty();
  seq.truncated = chars.size() > l - 2;
  seq.ids.reserve(l);
  seq.ids.push_back(CharInventory::kStart);
  for (std::size_t i = 0; i < chars.size() && i < l - 2; ++i) seq.ids.push_back(inventory.id(chars[i]));
  seq.ids.push_back(CharInventory::kEnd);
  seq.ids.resize(l, CharInventory::kPad);
  return seq;
}

CharMatrix char_lookup(std::string_view name, const CharInventory &inventory, const Matrix &table,
                       std::size_t l) {
  if (table.rows() != inventory.size()) throw DataError("character table size mismatch");
  CharMatrix m;
  m.sequence = char_ids(name, inventory, l);
  m.rows = Matrix(l, table.cols());
  for (std::size_t r = 0; r < l; ++r) {
    auto src = table.row(static_cast<std::size_t>(m.sequence.ids[r]));
    std::copy(src.begin(), src.end(), m.rows.row(r).begin());
  }
  return m;
}

Vec clr_forward(const CharMatrix &c) {
  auto flat = c.rows.flat();
  return Vec(flat.begin(), flat.end());
}

// ------------------------------------------------------------ encoders

std::string_view to_string(ClrKind kind) {
  switch (kind) {
    case ClrKind::Forward:
      return "forward";
    case ClrKind::Cnn:
      return "cnn";
    case ClrKind::Lstm:
      return "lstm";
    case ClrKind::BiLstm:
      return "bilstm";
  }
  return "cnn";
}

ClrConfig ClrConfig::defaults(ClrKind kind) {
  ClrConfig cfg;
  cfg.kind = kind;
  switch (kind) {
    case ClrKind::Forward:
      cfg.char_dim = 15;
      break;
    case ClrKind::Cnn:
      cfg.char_dim = 10;
      break;
    case ClrKind::Lstm:
      cfg.char_dim = 70;
      cfg.hidden = 70;
      break;
    case ClrKind::BiLstm:
      cfg.char_dim = 50;
      cfg.hidden = 50;
      break;
  }
  return cfg;
}

ClrEncoder::ClrEncoder(ClrConfig cfg, std::size_t inventory_size)
    : table(inventory_size, cfg.char_dim), grad_table(inventory_size, cfg.char_dim), cfg_(std::move(cfg)) {
  if (cfg_.name_length < 3) throw DataError("padded name length must be >= 3");
  switch (cfg_.kind) {
    case ClrKind::Forward:
      break;
    case ClrKind::Cnn:
      conv = nn::ConvFilterBank(cfg_.char_dim, cfg_.widths, cfg_.filters_per_width);
      if (static_cast<std::size_t>(conv.max_width()) > cfg_.name_length) {
        throw DataError("CNN filter wider than the padded name length");
      }
      break;
    case ClrKind::Lstm:
      forward_cell = nn::LstmCell(cfg_.char_dim, cfg_.hidden);
      break;
    case ClrKind::BiLstm:
      forward_cell = nn::LstmCell(cfg_.char_dim, cfg_.hidden);
      backward_cell = nn::LstmCell(cfg_.char_dim, cfg_.hidden);
      break;
  }
}

std::size_t ClrEncoder::output_dim() const {
  switch (cfg_.kind) {
    case ClrKind::Forward:
      return cfg_.char_dim * cfg_.name_length;
    case ClrKind::Cnn:
      return conv.output_dim();
    case ClrKind::Lstm:
      return cfg_.hidden;
    case ClrKind::BiLstm:
      return 2 * cfg_.hidden;
  }
  return 0;
}

void ClrEncoder::init(Rng &rng, double range) {
  for (double &x : table.flat()) x = rng.uniform(-range, range);
  switch (cfg_.kind) {
    case ClrKind::Forward:
      break;
    case ClrKind::Cnn:
      conv.init(rng, range);
      break;
    case ClrKind::Lstm:
      forward_cell.init(rng, range);
      break;
    case ClrKind::BiLstm:
      forward_cell.init(rng, range);
      backward_cell.init(rng, range);
      break;
  }
}

Matrix ClrEncoder::lookup(const std::vector<int> &ids) const {
  if (ids.size() != cfg_.name_length) throw DataError("character sequence length mismatch");
  Matrix m(ids.size(), cfg_.char_dim);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    auto src = table.row(static_cast<std::size_t>(ids[r]));
    std::copy(src.begin(), src.end(), m.row(r).begin());
  }
  return m;
}

namespace {
Matrix reverse_rows(const Matrix &m) {
  Matrix r(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto src = m.row(m.rows() - 1 - i);
    std::copy(src.begin(), src.end(), r.row(i).begin());
  }
  return r;
}
}  // namespace

Vec ClrEncoder::forward(const std::vector<int> &ids, Cache *cache) const {
  Matrix chars = lookup(ids);
  Vec out;
  const Vec zeros(cfg_.hidden, 0.0);
  switch (cfg_.kind) {
    case ClrKind::Forward: {
      auto flat = chars.flat();
      out.assign(flat.begin(), flat.end());
      break;
    }
    case ClrKind::Cnn:
      out = conv.forward(chars, cache ? &cache->conv : nullptr);
      break;
    case ClrKind::Lstm:
      out = forward_cell.forward(chars, zeros, zeros, cache ? &cache->forward_trace : nullptr).last;
      break;
    case ClrKind::BiLstm: {
      Vec fwd = forward_cell.forward(chars, zeros, zeros, cache ? &cache->forward_trace : nullptr).last;
      Matrix rev = reverse_rows(chars);
      // The backward pass starts from the forward pass's last state.
      Vec bwd = backward_cell.forward(rev, fwd, zeros, cache ? &cache->backward_trace : nullptr).last;
      out = fwd;
      out.insert(out.end(), bwd.begin(), bwd.end());
      if (cache) {
        cache->reversed = std::move(rev);
        cache->forward_last = fwd;
      }
      break;
    }
  }
  if (cache) cache->chars = std::move(chars);
  return out;
}

void ClrEncoder::backward(const std::vector<int> &ids, const Cache &cache,
                          std::span<const double> grad_out) {
  Matrix gchars;
  switch (cfg_.kind) {
    case ClrKind::Forward:
      gchars = Matrix(ids.size(), cfg_.char_dim);
      std::copy(grad_out.begin(), grad_out.end(), gchars.flat().begin());
      break;
    case ClrKind::Cnn:
      gchars = conv.backward(cache.chars, cache.conv, grad_out);
      break;
    case ClrKind::Lstm:
      gchars = forward_cell.backward(cache.chars, cache.forward_trace, grad_out).inputs;
      break;
    case ClrKind::BiLstm: {
      const std::size_t H = cfg_.hidden;
      auto bg = backward_cell.backward(cache.reversed, cache.backward_trace, grad_out.subspan(H, H));
      Vec gf(grad_out.begin(), grad_out.begin() + static_cast<std::ptrdiff_t>(H));
      axpy(1.0, bg.h0, gf);
      auto fg = forward_cell.backward(cache.chars, cache.forward_trace, gf);
      gchars = std::move(fg.inputs);
      const std::size_t L = ids.size();
      for (std::size_t r = 0; r < L; ++r) axpy(1.0, bg.inputs.row(L - 1 - r), gchars.row(r));
      break;
    }
  }
  for (std::size_t r = 0; r < ids.size(); ++r) {
    axpy(1.0, gchars.row(r), grad_table.row(static_cast<std::size_t>(ids[r])));
  }
}

void ClrEncoder::collect(nn::ParamList &params, const std::string &prefix) {
  params.push_back({prefix + ".chars", table.flat(), grad_table.flat()});
  switch (cfg_.kind) {
    case ClrKind::Forward:
      break;
    case ClrKind::Cnn:
      conv.collect(params, prefix + ".conv");
      break;
    case ClrKind::Lstm:
      forward_cell.collect(params, prefix + ".lstm");
      break;
    case ClrKind::BiLstm:
      forward_cell.collect(params, prefix + ".lstm_fwd");
      backward_cell.collect(params, prefix + ".lstm_bwd");
      break;
  }
}

// ------------------------------------------------------------ word level

WlrResult wlr(std::string_view name, const EmbeddingStore &words, bool compose_subwords) {
  WlrResult res;
  res.vector.assign(words.dim(), 0.0);
  Vec buf(words.dim());
  auto tokens = text::split_whitespace(name);
  res.words = tokens.size();
  for (const auto &w : tokens) {
    auto v = words.lookup(w);
    if (!v) v = words.lookup(text::to_lower(w));
    if (v) {
      axpy(1.0, *v, res.vector);
      ++res.found;
      continue;
    }
    if (compose_subwords && words.subwords()) {
      if (words.subwords()->compose(w, buf) || words.subwords()->compose(text::to_lower(w), buf)) {
        axpy(1.0, buf, res.vector);
        ++res.found;
      }
    }
  }
  if (res.found == 0) {
    res.flagged = true;
    return res;
  }
  const double inv = 1.0 / static_cast<double>(res.found);
  for (double &x : res.vector) x *= inv;
  return res;
}

// ------------------------------------------------------------ hand-crafted

SparseFeatureVector bow_features(std::string_view name) {
  SparseFeatureVector f;
  for (const auto &t : text::split_whitespace(name)) {
    f.insert("w=" + t);
    f.insert("wl=" + text::to_lower(t));
  }
  return f;
}

namespace {

char shape_class(const std::string &ch) {
  if (ch.size() != 1) return 'a';  // non-ASCII letters count as lowercase
  char c = ch[0];
  if (c >= 'A' && c <= 'Z') return 'A';
  if (c >= 'a' && c <= 'z') return 'a';
  if (c >= '0' && c <= '9') return '7';
  return '.';
}

std::string normalize_char(const std::string &ch) {
  if (ch.size() != 1) return ch;
  char c = ch[0];
  if (c >= 'A' && c <= 'Z') return std::string(1, static_cast<char>(c - 'A' + 'a'));
  if (c >= '0' && c <= '9') return "7";
  if (text::is_ascii_punct(c)) return ".";
  return ch;
}

void add_ngrams(SparseFeatureVector &f, const std::string &prefix,
                const std::vector<std::string> &chars, int n_max) {
  for (int n = 1; n <= n_max; ++n) {
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= chars.size(); ++i) {
      std::string g;
      for (std::size_t k = i; k < i + static_cast<std::size_t>(n); ++k) g += chars[k];
      f.insert(prefix + g);
    }
  }
}

}  // namespace

std::string name_shape(std::string_view name) {
  std::string out;
  for (const auto &tok : text::split_whitespace(name)) {
    if (!out.empty()) out += ' ';
    char prev = 0;
    for (const auto &ch : text::utf8_chars(tok)) {
      char c = shape_class(ch);
      if (c != prev) out += c;
      prev = c;
    }
  }
  return out;
}

SparseFeatureVector nsl_features(std::string_view name) {
  SparseFeatureVector f;
  std::string trimmed = text::trim(name);
  if (trimmed.empty()) return f;
  f.insert("shape=" + name_shape(trimmed));
  auto chars = text::utf8_chars(trimmed);
  const std::size_t len = chars.size();
  const char *bucket = len <= 5 ? "1-5" : len <= 10 ? "6-10" : len <= 20 ? "11-20" : "21+";
  f.insert(std::string("len=") + bucket);
  f.insert("ntok=" + std::to_string(text::split_whitespace(trimmed).size()));
  std::vector<std::string> raw{"^"};
  raw.insert(raw.end(), chars.begin(), chars.end());
  raw.emplace_back("$");
  add_ngrams(f, "ng=", raw, 5);
  std::vector<std::string> norm{"^"};
  for (const auto &c : chars) norm.push_back(normalize_char(c));
  norm.emplace_back("$");
  add_ngrams(f, "nng=", norm, 5);
  return f;
}

// ------------------------------------------------------------ descriptions

Descriptions parse_descriptions(std::string_view content, const std::string &source) {
  Descriptions d;
  auto lines = io::lines_of(content);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (text::trim(lines[ln]).empty()) continue;
    auto tab = lines[ln].find('\t');
    if (tab == std::string_view::npos) throw ParseError(source, ln + 1, "expected entity_id<TAB>text");
    d[text::trim(lines[ln].substr(0, tab))] = text::tokenize(lines[ln].substr(tab + 1));
  }
  return d;
}

Descriptions load_descriptions(const std::filesystem::path &path) {
  return parse_descriptions(io::read_file(path), path.string());
}

IdfTable compute_idf(const Descriptions &descriptions) {
  std::unordered_map<std::string, std::size_t> df;
  for (const auto &[id, toks] : descriptions) {
    std::set<std::string> uniq(toks.begin(), toks.end());
    for (const auto &t : uniq) ++df[t];
  }
  IdfTable idf;
  const double n = static_cast<double>(descriptions.size());
  for (const auto &[t, c] : df) idf[t] = std::log(n / static_cast<double>(c));
  return idf;
}

AvgDesResult avg_des(const std::vector<std::string> &description, const IdfTable &idf,
                     const EmbeddingStore &words, std::size_t k) {
  if (k == 0) throw DataError("avg_des: k must be >= 1");
  std::map<std::string, std::size_t> tf;
  for (const auto &t : description) ++tf[t];
  std::vector<std::pair<std::string, double>> ranked;
  for (const auto &[t, c] : tf) {
    if (!words.lookup(t)) continue;
    auto it = idf.find(t);
    ranked.emplace_back(t, static_cast<double>(c) * (it == idf.end() ? 0.0 : it->second));
  }
  // tf is a std::map, so equal scores keep lexicographic order.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto &a, const auto &b) { return a.second > b.second; });
  AvgDesResult res;
  res.vector.assign(words.dim(), 0.0);
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i) {
    axpy(1.0, *words.lookup(ranked[i].first), res.vector);
    ++res.used;
  }
  if (res.used == 0) {
    res.flagged = true;
    return res;
  }
  for (double &x : res.vector) x /= static_cast<double>(res.used);
  return res;
}

// ------------------------------------------------------------ multi-level

namespace {
struct LevelName {
  Level level;
  const char *name;
};
constexpr LevelName kLevelNames[] = {
    {Level::ClrForward, "clr-forward"}, {Level::ClrCnn, "clr-cnn"},   {Level::ClrLstm, "clr-lstm"},
    {Level::ClrBiLstm, "clr-bilstm"},   {Level::ClrNsl, "clr-nsl"},   {Level::Wwlr, "wwlr"},
    {Level::Swlr, "swlr"},              {Level::Elr, "elr"},          {Level::Tc, "tc"},
    {Level::AvgDes, "avg-des"},         {Level::Bow, "bow"},
};
}  // namespace

std::string_view to_string(Level level) {
  for (const auto &ln : kLevelNames) {
    if (ln.level == level) return ln.name;
  }
  return "?";
}

Level parse_level(std::string_view name) {
  std::string n = text::to_lower(text::trim(name));
  if (n == "nsl") n = "clr-nsl";
  if (n == "clr") n = "clr-cnn";
  if (n == "clr-ff") n = "clr-forward";
  for (const auto &ln : kLevelNames) {
    if (n == ln.name) return ln.level;
  }
  throw UsageError("unknown representation level '" + std::string(name) + "'");
}

bool is_clr_network(Level level) { return clr_kind(level).has_value(); }

bool is_sparse(Level level) { return level == Level::ClrNsl || level == Level::Bow; }

std::optional<ClrKind> clr_kind(Level level) {
  switch (level) {
    case Level::ClrForward:
      return ClrKind::Forward;
    case Level::ClrCnn:
      return ClrKind::Cnn;
    case Level::ClrLstm:
      return ClrKind::Lstm;
    case Level::ClrBiLstm:
      return ClrKind::BiLstm;
    default:
      return std::nullopt;
  }
}

RepresentationSpec RepresentationSpec::parse(std::string_view levels) {
  RepresentationSpec spec;
  for (const auto &part : text::split(levels, ',')) {
    if (text::trim(part).empty()) continue;
    Level l = parse_level(part);
    if (spec.has(l)) throw UsageError("level '" + std::string(to_string(l)) + "' listed twice");
    spec.levels.push_back(l);
  }
  if (spec.levels.empty()) throw UsageError("representation needs at least one level");
  return spec;
}

std::string RepresentationSpec::levels_string() const {
  std::string out;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (i) out += ',';
    out += to_string(levels[i]);
  }
  return out;
}

bool RepresentationSpec::has(Level level) const {
  return std::find(levels.begin(), levels.end(), level) != levels.end();
}

ClrConfig RepresentationSpec::clr_config(Level level) const {
  auto kind = clr_kind(level);
  if (!kind) throw DataError("level '" + std::string(to_string(level)) + "' is not a CLR network");
  ClrConfig cfg = ClrConfig::defaults(*kind);
  cfg.name_length = name_length;
  if (char_dim) cfg.char_dim = char_dim;
  if (lstm_hidden) cfg.hidden = lstm_hidden;
  cfg.widths = cnn_widths;
  cfg.filters_per_width = cnn_filters;
  return cfg;
}

namespace {

const EmbeddingStore &require(const EmbeddingStore *s, Level level) {
  if (!s) {
    throw DataError("level '" + std::string(to_string(level)) + "' needs an embedding store");
  }
  return *s;
}

}  // namespace

FeatureLayout FeatureLayout::build(const RepresentationSpec &spec, const RepresentationSources &src,
                                   const std::vector<std::string> &train_names) {
  std::map<Level, std::vector<std::string>> dicts;
  for (Level l : spec.levels) {
    if (!is_sparse(l)) continue;
    std::set<std::string> all;
    for (const auto &n : train_names) {
      auto f = l == Level::Bow ? bow_features(n) : nsl_features(n);
      all.insert(f.begin(), f.end());
    }
    dicts[l] = std::vector<std::string>(all.begin(), all.end());
  }
  return restore(spec, src, CharInventory::build(train_names, spec.char_min_count), std::move(dicts));
}

FeatureLayout FeatureLayout::restore(const RepresentationSpec &spec, const RepresentationSources &src,
                                     CharInventory inventory,
                                     std::map<Level, std::vector<std::string>> dictionaries) {
  if (spec.levels.empty()) throw DataError("representation needs at least one level");
  FeatureLayout layout;
  layout.spec_ = spec;
  layout.inventory_ = std::move(inventory);
  layout.dict_lists_ = std::move(dictionaries);
  for (auto &[level, list] : layout.dict_lists_) {
    auto &d = layout.dicts_[level];
    for (std::size_t i = 0; i < list.size(); ++i) d.emplace(list[i], static_cast<int>(i));
  }
  layout.finalize(src);
  return layout;
}

void FeatureLayout::finalize(const RepresentationSources &src) {
  slots_.clear();
  dim_ = 0;
  for (Level l : spec_.levels) {
    std::size_t d = 0;
    switch (l) {
      case Level::ClrForward:
      case Level::ClrCnn:
      case Level::ClrLstm:
      case Level::ClrBiLstm:
        d = ClrEncoder(spec_.clr_config(l), inventory_.size()).output_dim();
        break;
      case Level::ClrNsl:
      case Level::Bow:
        d = dict_lists_.count(l) ? dict_lists_.at(l).size() : 0;
        break;
      case Level::Wwlr:
        d = require(src.words, l).dim();
        break;
      case Level::Swlr:
        d = require(src.subwords, l).dim();
        break;
      case Level::Elr:
        d = require(src.entities, l).dim();
        break;
      case Level::Tc:
        require(src.entities, l);
        if (!src.types) throw DataError("level 'tc' needs the type system");
        d = src.types->size();
        break;
      case Level::AvgDes:
        d = require(src.words, l).dim();
        break;
    }
    slots_.push_back({l, dim_, d});
    dim_ += d;
  }
}

std::optional<int> FeatureLayout::feature(Level level, const std::string &name) const {
  auto it = dicts_.find(level);
  if (it == dicts_.end()) return std::nullopt;
  auto f = it->second.find(name);
  if (f == it->second.end()) return std::nullopt;
  return f->second;
}

bool is_dense_frozen(Level level) {
  return level == Level::Elr || level == Level::Tc || level == Level::Wwlr || level == Level::Swlr ||
         level == Level::AvgDes;
}

void FeatureLayout::set_standardization(std::vector<double> shift, std::vector<double> scale) {
  if (shift.empty() && scale.empty()) {
    shift_.clear();
    scale_.clear();
    return;
  }
  if (shift.size() != dim_ || scale.size() != dim_) throw DataError("standardization has the wrong length");
  for (const auto &slot : slots_) {
    if (is_dense_frozen(slot.level)) continue;
    for (std::size_t i = slot.offset; i < slot.offset + slot.dim; ++i) {
      if (shift[i] != 0.0 || scale[i] != 1.0) {
        throw DataError("standardization touches level '" + std::string(to_string(slot.level)) + "'");
      }
    }
  }
  for (std::size_t i = 0; i < dim_; ++i) {
    if (!std::isfinite(shift[i]) || !std::isfinite(scale[i]) || scale[i] <= 0.0) {
      throw DataError("standardization needs finite shifts and positive scales");
    }
  }
  shift_ = std::move(shift);
  scale_ = std::move(scale);
}

AssembledInput assemble_frozen(const std::string &entity_id, std::string_view name,
                               const FeatureLayout &layout, const RepresentationSources &src) {
  AssembledInput in;
  const auto &shift = layout.shift();
  const auto &scale = layout.scale();
  auto push_dense = [&](const LevelSlot &slot, std::span<const double> v) {
    for (std::size_t i = 0; i < slot.dim; ++i) {
      const std::size_t at = slot.offset + i;
      double x = i < v.size() ? v[i] : 0.0;
      if (layout.standardized()) x = (x - shift[at]) * scale[at];
      if (x != 0.0) in.entries.emplace_back(static_cast<std::uint32_t>(at), x);
    }
  };
  bool need_chars = false;
  for (const auto &slot : layout.slots()) {
    switch (slot.level) {
      case Level::ClrForward:
      case Level::ClrCnn:
      case Level::ClrLstm:
      case Level::ClrBiLstm:
        need_chars = true;
        break;
      case Level::ClrNsl:
      case Level::Bow: {
        auto feats = slot.level == Level::Bow ? bow_features(name) : nsl_features(name);
        for (const auto &f : feats) {
          if (auto idx = layout.feature(slot.level, f)) {
            in.entries.emplace_back(static_cast<std::uint32_t>(slot.offset + *idx), 1.0);
          }
        }
        break;
      }
      case Level::Wwlr:
      case Level::Swlr: {
        auto r = wlr(name, slot.level == Level::Wwlr ? *src.words : *src.subwords,
                     slot.level == Level::Swlr);
        if (r.flagged) in.flags.push_back(std::string(to_string(slot.level)) + ":oov");
        push_dense(slot, r.vector);
        break;
      }
      case Level::Elr: {
        auto v = src.entities->lookup(entity_id);
        if (!v) throw DataError("no entity embedding for '" + entity_id + "'");
        push_dense(slot, *v);
        break;
      }
      case Level::Tc:
        push_dense(slot, type_cosine_vector(entity_id, *src.entities, *src.types));
        break;
      case Level::AvgDes: {
        AvgDesResult r;
        if (src.descriptions && src.idf) {
          auto it = src.descriptions->find(entity_id);
          if (it != src.descriptions->end()) {
            r = avg_des(it->second, *src.idf, *src.words, layout.spec().avg_des_k);
          }
        }
        if (r.used == 0) in.flags.emplace_back("avg-des:empty");
        push_dense(slot, r.vector);
        break;
      }
    }
  }
  if (need_chars) in.char_ids = char_ids(name, layout.inventory(), layout.spec().name_length).ids;
  return in;
}

Vec assemble(const std::string &entity_id, std::string_view name, const FeatureLayout &layout,
             const RepresentationSources &src, const std::vector<const ClrEncoder *> &encoders) {
  auto frozen = assemble_frozen(entity_id, name, layout, src);
  Vec v(layout.dim(), 0.0);
  for (auto [i, x] : frozen.entries) v[i] = x;
  std::size_t enc = 0;
  for (const auto &slot : layout.slots()) {
    if (!is_clr_network(slot.level)) continue;
    if (enc >= encoders.size()) throw DataError("missing encoder for a CLR level");
    Vec out = encoders[enc++]->forward(frozen.char_ids);
    std::copy(out.begin(), out.end(), v.begin() + static_cast<std::ptrdiff_t>(slot.offset));
  }
  return v;
}

}  // namespace mulr
