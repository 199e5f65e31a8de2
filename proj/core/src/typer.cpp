#include "mulr/typer.hpp"

#include <algorithm>
#include <cmath>
#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>
#include <thread>

#include "mulr/error.hpp"
#include "mulr/io.hpp"
#include "mulr/text.hpp"

namespace mulr {

std::vector<Instance> build_instances(const std::vector<EntityRecord> &records, const FeatureLayout &layout,
                                      const RepresentationSources &src, std::size_t type_count,
                                      std::size_t max_names) {
  std::vector<Instance> out;
  for (const auto &e : records) {
    Vec gold(type_count, 0.0);
    for (int t : e.gold_types) {
      if (t < 0 || static_cast<std::size_t>(t) >= type_count) throw DataError("type id out of range");
      gold[t] = 1.0;
    }
    for (std::size_t k = 0; k < e.names.size() && k < max_names; ++k) {
      out.push_back({e.id, assemble_frozen(e.id, e.names[k], layout, src), gold});
    }
  }
  return out;
}

std::size_t default_hidden_size(const RepresentationSpec &spec) {
  std::vector<Level> levels = spec.levels;
  std::sort(levels.begin(), levels.end());
  using L = Level;
  const std::pair<std::vector<Level>, std::size_t> table[] = {
      {{L::ClrForward}, 600},
      {{L::ClrLstm}, 300},
      {{L::ClrBiLstm}, 200},
      {{L::ClrCnn}, 800},
      {{L::ClrNsl}, 800},
      {{L::Bow}, 200},
      {{L::ClrNsl, L::Bow}, 300},
      {{L::Wwlr}, 400},
      {{L::Swlr}, 400},
      {{L::ClrCnn, L::Wwlr}, 700},
      {{L::ClrCnn, L::Swlr}, 700},
      {{L::Elr}, 400},
      {{L::ClrCnn, L::Elr}, 700},
      {{L::Wwlr, L::Elr}, 600},
      {{L::Swlr, L::Elr}, 600},
      {{L::ClrCnn, L::Wwlr, L::Elr}, 700},
      {{L::ClrCnn, L::Swlr, L::Elr}, 700},
      {{L::ClrCnn, L::Wwlr, L::Elr, L::Tc}, 900},
      {{L::ClrCnn, L::Swlr, L::Elr, L::Tc}, 900},
      {{L::AvgDes}, 400},
      {{L::ClrCnn, L::Swlr, L::Elr, L::Tc, L::AvgDes}, 1000},
  };
  for (const auto &[key, h] : table) {
    auto sorted = key;
    std::sort(sorted.begin(), sorted.end());
    if (sorted == levels) return h;
  }
  return 600;
}

// ------------------------------------------------------------ model

Typer::Typer(TypeSystem types, FeatureLayout layout, std::size_t hidden)
    : input_weight(layout.dim(), hidden),
      input_bias(hidden, 0.0),
      output(hidden, types.size()),
      thresholds(types.size(), 0.5),
      grad_input_weight(layout.dim(), hidden),
      grad_input_bias(hidden, 0.0),
      types_(std::move(types)),
      layout_(std::move(layout)) {
  if (hidden == 0) throw DataError("hidden layer size must be positive");
  if (types_.size() == 0) throw DataError("type system is empty");
  for (const auto &slot : layout_.slots()) {
    if (is_clr_network(slot.level)) {
      encoders.emplace_back(layout_.spec().clr_config(slot.level), layout_.inventory().size());
    }
  }
}

void Typer::init(Rng &rng, double range) {
  for (double &x : input_weight.flat()) x = rng.uniform(-range, range);
  for (double &x : input_bias) x = rng.uniform(-range, range);
  output.init(rng, range);
  for (auto &e : encoders) e.init(rng, range);
}

void Typer::run(const AssembledInput &in, Pass &pass, bool keep_caches) const {
  const std::size_t d = input_dim();
  pass.pre = input_bias;
  for (auto [i, x] : in.entries) {
    if (i >= d) throw DataError("input index " + std::to_string(i) + " outside layout of dim " + std::to_string(d));
    axpy(x, input_weight.row(i), pass.pre);
  }
  pass.clr.resize(encoders.size());
  if (keep_caches) pass.caches.resize(encoders.size());
  std::size_t k = 0;
  for (const auto &slot : layout_.slots()) {
    if (!is_clr_network(slot.level)) continue;
    pass.clr[k] = encoders[k].forward(in.char_ids, keep_caches ? &pass.caches[k] : nullptr);
    for (std::size_t j = 0; j < slot.dim; ++j) axpy(pass.clr[k][j], input_weight.row(slot.offset + j), pass.pre);
    ++k;
  }
  pass.hidden.resize(pass.pre.size());
  for (std::size_t j = 0; j < pass.pre.size(); ++j) pass.hidden[j] = nn::relu(pass.pre[j]);
  pass.probs = output.forward(pass.hidden);
  for (double &p : pass.probs) p = nn::sigmoid(p);
}

Vec Typer::probabilities(const AssembledInput &in) const {
  Pass pass;
  run(in, pass, false);
  return std::move(pass.probs);
}

double Typer::accumulate(const Instance &inst, double scale, std::vector<std::uint32_t> *touched) {
  Pass pass;
  run(inst.input, pass, true);
  if (inst.gold.size() != pass.probs.size()) throw DataError("gold vector size mismatch");
  const double loss = nn::bce_loss(pass.probs, inst.gold);

  Vec glogit(pass.probs.size());
  for (std::size_t t = 0; t < glogit.size(); ++t) {
    const double p = pass.probs[t];
    // The clamped loss is flat outside [eps, 1 - eps].
    glogit[t] = (p < nn::kBceEpsilon || p > 1.0 - nn::kBceEpsilon) ? 0.0 : scale * (p - inst.gold[t]);
  }
  Vec dz = output.backward(pass.hidden, glogit);
  for (std::size_t j = 0; j < dz.size(); ++j) {
    if (pass.pre[j] <= 0.0) dz[j] = 0.0;
  }
  axpy(1.0, dz, grad_input_bias);
  for (auto [i, x] : inst.input.entries) {
    axpy(x, dz, grad_input_weight.row(i));
    if (touched) touched->push_back(i);
  }
  std::size_t k = 0;
  for (const auto &slot : layout_.slots()) {
    if (!is_clr_network(slot.level)) continue;
    Vec dout(slot.dim);
    for (std::size_t j = 0; j < slot.dim; ++j) {
      const auto row = slot.offset + j;
      dout[j] = dot(input_weight.row(row), dz);
      axpy(pass.clr[k][j], dz, grad_input_weight.row(row));
      if (touched) touched->push_back(static_cast<std::uint32_t>(row));
    }
    encoders[k].backward(inst.input.char_ids, pass.caches[k], dout);
    ++k;
  }
  return loss;
}

TypeSet Typer::predict(const Vec &probs) const {
  if (probs.size() != thresholds.size()) throw DataError("probability vector size mismatch");
  TypeSet out;
  for (std::size_t t = 0; t < probs.size(); ++t) {
    if (probs[t] > thresholds[t]) out.push_back(static_cast<int>(t));
  }
  return out;
}

void Typer::collect(nn::ParamList &params) {
  params.push_back({"mlp.in.weight", input_weight.flat(), grad_input_weight.flat()});
  params.push_back({"mlp.in.bias", input_bias, grad_input_bias});
  output.collect(params, "mlp.out");
  for (std::size_t k = 0; k < encoders.size(); ++k) encoders[k].collect(params, "clr" + std::to_string(k));
}

// ------------------------------------------------------------ training

void validate(const TrainConfig &cfg) {
  if (cfg.epochs == 0) throw UsageError("epochs must be >= 1");
  if (cfg.batch_size == 0) throw UsageError("batch size must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw UsageError("learning rate must be > 0");
  if (!(cfg.init_range > 0.0)) throw UsageError("init range must be > 0");
}

void fit_standardization(FeatureLayout &layout, const std::vector<Instance> &train) {
  if (layout.standardized()) throw DataError("layout is already standardized");
  const std::size_t d = layout.dim();
  std::vector<double> shift(d, 0.0), scale(d, 1.0);
  if (train.empty()) return layout.set_standardization({}, {});
  std::vector<char> dense(d, 0);
  for (const auto &slot : layout.slots()) {
    if (is_dense_frozen(slot.level)) std::fill_n(dense.begin() + static_cast<std::ptrdiff_t>(slot.offset), slot.dim, 1);
  }
  std::vector<double> sum(d, 0.0), sq(d, 0.0);
  for (const auto &inst : train) {
    for (auto [i, x] : inst.input.entries) {
      sum[i] += x;
      sq[i] += x * x;
    }
  }
  const double n = static_cast<double>(train.size());
  for (std::size_t i = 0; i < d; ++i) {
    if (!dense[i]) continue;
    shift[i] = sum[i] / n;
    const double var = std::max(0.0, sq[i] / n - shift[i] * shift[i]);
    const double sd = std::sqrt(var);
    scale[i] = sd < 1e-8 ? 1.0 : 1.0 / sd;
  }
  layout.set_standardization(std::move(shift), std::move(scale));
}

namespace {

double dev_micro_f1(const Typer &model, const std::vector<Instance> &dev) {
  std::vector<TypeSet> preds, golds;
  for (const auto &inst : dev) {
    auto p = model.probabilities(inst.input);
    TypeSet pred, gold;
    for (std::size_t t = 0; t < p.size(); ++t) {
      if (p[t] > 0.5) pred.push_back(static_cast<int>(t));
      if (inst.gold[t] != 0.0) gold.push_back(static_cast<int>(t));
    }
    preds.push_back(std::move(pred));
    golds.push_back(std::move(gold));
  }
  return micro_f1(preds, golds).value;
}

}  // namespace

TrainResult train_typer(Typer model, const std::vector<Instance> &train, const std::vector<Instance> &dev,
                        const TrainConfig &cfg) {
  validate(cfg);
  if (train.empty()) throw DataError("no training instances");
  nn::ParamList params;
  model.collect(params);
  const std::size_t h = model.hidden();
  nn::AdaGrad opt(cfg.learning_rate);
  Rng rng(cfg.seed + 0x5851F42D4C957F2DULL);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  result.best_dev_micro_f1 = -1.0;
  std::size_t since_best = 0;
  std::vector<std::uint32_t> touched;
  nn::zero_grads(params);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      touched.clear();
      for (std::size_t b = start; b < end; ++b) loss += model.accumulate(train[order[b]], scale, &touched);
      std::sort(touched.begin(), touched.end());
      touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
      for (auto row : touched) opt.step_range(0, params[0], row * h, h);
      for (std::size_t s = 1; s < params.size(); ++s) opt.step_range(s, params[s], 0, params[s].value.size());
      for (auto row : touched) std::fill_n(params[0].grad.begin() + row * h, h, 0.0);
      for (std::size_t s = 1; s < params.size(); ++s) std::fill(params[s].grad.begin(), params[s].grad.end(), 0.0);
    }
    for (const auto &p : params) {
      if (!all_finite(p.value)) throw NumericError("non-finite parameter '" + p.name + "' after epoch " + std::to_string(epoch));
    }
    EpochStats stats{epoch, loss / static_cast<double>(train.size()), 0.0};
    // Without dev instances every epoch counts as an improvement.
    stats.dev_micro_f1 = dev.empty() ? 0.0 : dev_micro_f1(model, dev);
    result.history.push_back(stats);
    if (dev.empty() || stats.dev_micro_f1 > result.best_dev_micro_f1) {
      result.model = model;
      result.best_epoch = epoch;
      result.best_dev_micro_f1 = stats.dev_micro_f1;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (!dev.empty() && since_best >= cfg.patience) break;
    if (cfg.patience == 0) break;
  }
  return result;
}

TrainResult train_typer(const DatasetSplit &split, const TypeSystem &types, const RepresentationSpec &spec,
                        const RepresentationSources &src, const TrainConfig &cfg) {
  validate(cfg);
  std::vector<std::string> names;
  for (const auto &e : split.train) {
    for (std::size_t k = 0; k < e.names.size() && k < kMaxTrainNames; ++k) names.push_back(e.names[k]);
  }
  auto layout = FeatureLayout::build(spec, src, names);
  auto train = build_instances(split.train, layout, src, types.size(), kMaxTrainNames);
  if (cfg.standardize) {
    fit_standardization(layout, train);
    train = build_instances(split.train, layout, src, types.size(), kMaxTrainNames);
  }
  auto dev = build_instances(split.dev, layout, src, types.size(), 1);
  Typer model(types, std::move(layout), cfg.hidden ? cfg.hidden : default_hidden_size(spec));
  Rng rng(cfg.seed);
  model.init(rng, cfg.init_range);
  return train_typer(std::move(model), train, dev, cfg);
}

// ------------------------------------------------------------ thresholds

double threshold_f1(const std::vector<double> &scores, const std::vector<bool> &positive, double threshold) {
  if (scores.size() != positive.size()) throw DataError("scores and labels are not aligned");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] > threshold;
    tp += pred && positive[i];
    fp += pred && !positive[i];
    fn += !pred && positive[i];
  }
  return f1_score(tp, fp, fn);
}

TypeThreshold calibrate_type(const std::vector<double> &scores, const std::vector<bool> &positive) {
  if (scores.size() != positive.size()) throw DataError("scores and labels are not aligned");
  const std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  std::vector<double> sorted(n);
  std::vector<std::size_t> pos_prefix(n + 1, 0);
  for (std::size_t k = 0; k < n; ++k) {
    sorted[k] = scores[idx[k]];
    pos_prefix[k + 1] = pos_prefix[k] + positive[idx[k]];
  }
  const std::size_t total_pos = pos_prefix[n];
  if (total_pos == 0) return {0.5, threshold_f1(scores, positive, 0.5), true};

  auto f1_at = [&](double thr) {
    const auto first = static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), thr) - sorted.begin());
    const std::size_t predicted = n - first;
    const std::size_t tp = total_pos - pos_prefix[first];
    return f1_score(tp, predicted - tp, total_pos - tp);
  };

  std::vector<double> values{0.0, 1.0};
  values.insert(values.end(), sorted.begin(), sorted.end());
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());

  TypeThreshold best{0.5, -1.0, false};
  for (std::size_t k = 0; k + 1 < values.size(); ++k) {
    const double thr = 0.5 * (values[k] + values[k + 1]);
    const double f = f1_at(thr);
    if (f > best.f1) best = {thr, f, false};
  }
  const double at_half = f1_at(0.5);
  if (at_half > best.f1) best = {0.5, at_half, false};
  return best;
}

Calibration calibrate_thresholds(Typer &model, const std::vector<Instance> &dev) {
  const std::size_t T = model.types().size();
  auto scores = score_instances(model, dev);
  Calibration cal;
  std::vector<double> s(dev.size());
  std::vector<bool> pos(dev.size());
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < dev.size(); ++i) {
      s[i] = scores[i][t];
      pos[i] = dev[i].gold[t] != 0.0;
    }
    auto r = calibrate_type(s, pos);
    cal.flagged += r.flagged;
    model.thresholds[t] = r.threshold;
    cal.types.push_back(r);
  }
  return cal;
}

// ------------------------------------------------------------ scoring

std::vector<Vec> score_instances(const Typer &model, const std::vector<Instance> &instances, std::size_t threads) {
  std::vector<Vec> out(instances.size());
  threads = std::max<std::size_t>(1, std::min(threads, instances.size()));
  auto work = [&](std::size_t w) {
    for (std::size_t i = w; i < instances.size(); i += threads) out[i] = model.probabilities(instances[i].input);
  };
  if (threads == 1) {
    work(0);
    return out;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(work, w);
  for (auto &t : pool) t.join();
  return out;
}

std::string format_predictions(const Typer &model, const std::vector<Instance> &instances,
                               const std::vector<Vec> &scores) {
  if (instances.size() != scores.size()) throw DataError("scores and instances are not aligned");
  std::string out;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    out += instances[i].entity;
    out += '\t';
    bool first = true;
    for (int t : model.predict(scores[i])) {
      if (!first) out += ',';
      first = false;
      out += model.types().name(t);
      out += ':';
      io::append_double(out, scores[i][t]);
    }
    out += '\n';
  }
  return out;
}

std::vector<Prediction> parse_predictions(std::string_view content, const TypeSystem &types,
                                          const std::string &source) {
  std::vector<Prediction> out;
  auto lines = io::lines_of(content);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (lines[ln].empty() || lines[ln].front() == '#') continue;
    auto tab = lines[ln].find('\t');
    if (tab == std::string_view::npos) throw ParseError(source, ln + 1, "expected entity_id<TAB>types");
    Prediction p;
    p.entity = std::string(lines[ln].substr(0, tab));
    for (const auto &item : text::split(lines[ln].substr(tab + 1), ',')) {
      if (item.empty()) continue;
      auto colon = item.rfind(':');
      std::string name = colon == std::string::npos ? item : item.substr(0, colon);
      auto t = types.find(name);
      if (!t) throw ParseError(source, ln + 1, "unknown type '" + name + "'");
      p.types.push_back(*t);
    }
    std::sort(p.types.begin(), p.types.end());
    p.types.erase(std::unique(p.types.begin(), p.types.end()), p.types.end());
    out.push_back(std::move(p));
  }
  return out;
}

// ------------------------------------------------------------ checkpoints

namespace {

constexpr std::string_view kMagic = "mulr-model 1";

void append_le(std::string &out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

double read_le(const char *p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[b])) << (8 * b);
  return std::bit_cast<double>(bits);
}

std::string join_ints(const std::vector<int> &v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

void check_field(const std::string &s, const char *what) {
  if (s.find_first_of("\t\n\r") != std::string::npos) {
    throw DataError(std::string(what) + " '" + s + "' contains a tab or newline");
  }
}

}  // namespace

std::string serialize_model(const Typer &model) {
  const auto &spec = model.layout().spec();
  std::string out(kMagic);
  out += '\n';
  auto kv = [&](const std::string &k, const std::string &v) { out += k + '\t' + v + '\n'; };
  kv("levels", spec.levels_string());
  kv("name_length", std::to_string(spec.name_length));
  kv("char_dim", std::to_string(spec.char_dim));
  kv("lstm_hidden", std::to_string(spec.lstm_hidden));
  kv("cnn_widths", join_ints(spec.cnn_widths));
  kv("cnn_filters", std::to_string(spec.cnn_filters));
  kv("char_min_count", std::to_string(spec.char_min_count));
  kv("avg_des_k", std::to_string(spec.avg_des_k));
  kv("hidden", std::to_string(model.hidden()));
  kv("input_dim", std::to_string(model.input_dim()));
  for (const auto &slot : model.layout().slots()) {
    out += "slot\t" + std::string(to_string(slot.level)) + '\t' + std::to_string(slot.dim) + '\n';
  }
  for (const auto &[k, v] : model.metadata) {
    check_field(k, "metadata key");
    check_field(v, "metadata value");
    out += "meta\t" + k + '\t' + v + '\n';
  }
  const auto &types = model.types();
  for (std::size_t t = 0; t < types.size(); ++t) {
    const int p = types.parent(static_cast<int>(t));
    out += "type\t" + types.name(static_cast<int>(t)) + '\t' + (p < 0 ? "" : types.name(p)) + '\n';
  }
  for (const auto &c : model.layout().inventory().chars()) {
    check_field(c, "character");
    out += "char\t" + c + '\n';
  }
  for (const auto &[level, names] : model.layout().dictionaries()) {
    for (const auto &n : names) {
      check_field(n, "feature");
      out += "feature\t" + std::string(to_string(level)) + '\t' + n + '\n';
    }
  }
  if (model.layout().standardized()) {
    for (const auto *name : {"shift", "scale"}) {
      const auto &v = std::string_view(name) == "shift" ? model.layout().shift() : model.layout().scale();
      out += std::string(name) + '\t';
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        io::append_double(out, v[i]);
      }
      out += '\n';
    }
  }
  out += "thresholds\t";
  for (std::size_t t = 0; t < model.thresholds.size(); ++t) {
    if (t) out += ',';
    io::append_double(out, model.thresholds[t]);
  }
  out += '\n';
  nn::ParamList params;
  const_cast<Typer &>(model).collect(params);
  out += "tensors\t" + std::to_string(params.size()) + '\n';
  for (const auto &p : params) {
    out += p.name + '\t' + std::to_string(p.value.size()) + '\n';
    for (double v : p.value) append_le(out, v);
  }
  return out;
}

void save_model(const Typer &model, const std::filesystem::path &path) {
  io::write_file(path, serialize_model(model));
}

namespace {

struct Header {
  std::vector<std::pair<std::string, std::vector<std::string>>> rows;
  std::size_t body = 0;  // offset of the first tensor record
};

// Reads `key<TAB>...` rows up to and including the `tensors` row.
Header read_header(const std::string &bytes, const std::string &source) {
  Header h;
  std::size_t pos = 0, line = 0;
  auto next_line = [&]() -> std::string {
    auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw ParseError(source, line + 1, "truncated model header");
    std::string s = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    ++line;
    return s;
  };
  if (next_line() != kMagic) throw ParseError(source, 1, "not a model file");
  while (true) {
    auto fields = text::split(next_line(), '\t');
    if (fields.empty() || fields[0].empty()) throw ParseError(source, line, "empty header row");
    std::string key = fields[0];
    fields.erase(fields.begin());
    h.rows.emplace_back(key, fields);
    if (key == "tensors") break;
  }
  h.body = pos;
  return h;
}

}  // namespace

std::map<std::string, std::string> read_model_metadata(const std::filesystem::path &path) {
  auto h = read_header(io::read_file(path), path.string());
  std::map<std::string, std::string> out;
  for (const auto &[k, f] : h.rows) {
    if (k == "meta" && f.size() == 2) {
      out["meta." + f[0]] = f[1];
    } else if (k != "slot" && k != "type" && k != "char" && k != "feature" && k != "meta" && k != "shift" &&
               k != "scale" && !f.empty()) {
      out[k] = f[0];
    }
  }
  return out;
}

Typer parse_model(const std::string &bytes, const RepresentationSources &src, const std::string &source) {
  auto h = read_header(bytes, source);
  auto bad = [&](const std::string &what) { return DataError(source + ": " + what); };
  std::map<std::string, std::string> scalars;
  std::vector<std::pair<std::string, std::size_t>> slots;
  std::map<std::string, std::string> meta;
  std::vector<std::string> type_names, parent_names, chars;
  std::map<Level, std::vector<std::string>> dicts;
  for (const auto &[k, f] : h.rows) {
    if (k == "slot" && f.size() == 2) {
      slots.emplace_back(f[0], std::stoul(f[1]));
    } else if (k == "meta" && f.size() == 2) {
      meta[f[0]] = f[1];
    } else if (k == "type" && f.size() == 2) {
      type_names.push_back(f[0]);
      parent_names.push_back(f[1]);
    } else if (k == "char" && f.size() == 1) {
      chars.push_back(f[0]);
    } else if (k == "feature" && f.size() == 2) {
      dicts[parse_level(f[0])].push_back(f[1]);
    } else if (f.size() == 1) {
      scalars[k] = f[0];
    } else {
      throw bad("malformed header row '" + k + "'");
    }
  }
  auto scalar = [&](const char *key) {
    auto it = scalars.find(key);
    if (it == scalars.end()) throw bad(std::string("missing header field '") + key + "'");
    return it->second;
  };
  auto as_size = [&](const char *key) { return static_cast<std::size_t>(std::stoull(scalar(key))); };

  RepresentationSpec spec = RepresentationSpec::parse(scalar("levels"));
  spec.name_length = as_size("name_length");
  spec.char_dim = as_size("char_dim");
  spec.lstm_hidden = as_size("lstm_hidden");
  spec.cnn_widths.clear();
  for (const auto &w : text::split(scalar("cnn_widths"), ',')) spec.cnn_widths.push_back(std::stoi(w));
  spec.cnn_filters = as_size("cnn_filters");
  spec.char_min_count = std::stoll(scalar("char_min_count"));
  spec.avg_des_k = as_size("avg_des_k");

  std::vector<int> parents;
  for (const auto &p : parent_names) {
    if (p.empty()) {
      parents.push_back(-1);
      continue;
    }
    auto it = std::find(type_names.begin(), type_names.end(), p);
    if (it == type_names.end()) throw bad("unknown parent type '" + p + "'");
    parents.push_back(static_cast<int>(it - type_names.begin()));
  }
  TypeSystem types(type_names, parents);

  // TC falls back to the checkpoint's own type system.
  RepresentationSources with_types = src;
  if (!with_types.types) with_types.types = &types;
  auto layout = FeatureLayout::restore(spec, with_types, CharInventory(chars), std::move(dicts));
  if (layout.slots().size() != slots.size()) throw bad("slot count mismatch");
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto &s = layout.slots()[i];
    if (to_string(s.level) != slots[i].first || s.dim != slots[i].second) {
      throw bad("level '" + slots[i].first + "' has dim " + std::to_string(slots[i].second) +
                " in the model but " + std::to_string(s.dim) + " with the given inputs");
    }
  }
  if (scalars.count("shift") || scalars.count("scale")) {
    auto doubles = [&](const char *key) {
      std::vector<double> v;
      for (const auto &x : text::split(scalar(key), ',')) v.push_back(io::parse_double(x));
      return v;
    };
    layout.set_standardization(doubles("shift"), doubles("scale"));
  }
  Typer model(std::move(types), std::move(layout), as_size("hidden"));
  model.metadata = meta;
  auto th = text::split(scalar("thresholds"), ',');
  if (th.size() != model.thresholds.size()) throw bad("threshold count mismatch");
  for (std::size_t t = 0; t < th.size(); ++t) model.thresholds[t] = io::parse_double(th[t]);

  nn::ParamList params;
  model.collect(params);
  if (as_size("tensors") != params.size()) throw bad("tensor count mismatch");
  std::size_t pos = h.body;
  for (const auto &p : params) {
    auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw bad("truncated tensor header");
    auto fields = text::split(bytes.substr(pos, nl - pos), '\t');
    if (fields.size() != 2 || fields[0] != p.name || std::stoull(fields[1]) != p.value.size()) {
      throw bad("expected tensor '" + p.name + "' of size " + std::to_string(p.value.size()));
    }
    pos = nl + 1;
    if (bytes.size() < pos + 8 * p.value.size()) throw bad("truncated tensor '" + p.name + "'");
    for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] = read_le(bytes.data() + pos + 8 * i);
    pos += 8 * p.value.size();
  }
  if (pos != bytes.size()) throw bad("trailing bytes after tensors");
  return model;
}

Typer load_model(const std::filesystem::path &path, const RepresentationSources &src) {
  return parse_model(io::read_file(path), src, path.string());
}

}  // namespace mulr
