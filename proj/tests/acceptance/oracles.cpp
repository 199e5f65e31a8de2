// Gradient, metric, threshold and module-level oracle criteria.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "acceptance.hpp"
#include "metrics_fixture.hpp"
#include "mulr/corpus.hpp"
#include "mulr/eval.hpp"
#include "mulr/nn.hpp"
#include "mulr/repr.hpp"
#include "mulr/typer.hpp"
#include "support.hpp"

namespace mulr::acceptance {

namespace {

std::string fmt(const char *f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::size_t pick(Rng &rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

std::string random_word(Rng &rng, std::size_t max_len, const char *alphabet = "abcde") {
  const std::size_t k = std::char_traits<char>::length(alphabet);
  std::string w;
  for (std::size_t i = 0, n = pick(rng, 1, max_len); i < n; ++i) w += alphabet[rng.below(k)];
  return w;
}

// ------------------------------------------------------------ gradients

double dense_fixture(Rng &rng) {
  const std::size_t in = pick(rng, 1, 8), out = pick(rng, 1, 6);
  nn::DenseLayer layer(in, out);
  layer.init(rng, 0.8);
  Vec x = testing::random_vec(rng, in, 1.5), m(out);
  for (double &v : m) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
  auto loss = [&] {
    Vec z = layer.forward(x);
    for (double &v : z) v = nn::sigmoid(v);
    return nn::bce_loss(z, m);
  };
  nn::ParamList params;
  layer.collect(params, "dense");
  nn::zero_grads(params);
  Vec z = layer.forward(x), dz(out);
  for (std::size_t t = 0; t < out; ++t) dz[t] = nn::sigmoid(z[t]) - m[t];
  layer.backward(x, dz);
  return nn::grad_check(loss, params, rng, 64).max_relative_error;
}

double conv_fixture(Rng &rng) {
  const std::size_t dim = pick(rng, 1, 4), len = pick(rng, 3, 9);
  std::vector<int> widths;
  for (int w = 1; w <= 4; ++w) {
    if (static_cast<std::size_t>(w) <= len && (widths.empty() || rng.bernoulli(0.5))) widths.push_back(w);
  }
  nn::ConvFilterBank bank(dim, widths, pick(rng, 1, 3));
  bank.init(rng, 0.8);
  Matrix C = testing::random_matrix(rng, len, dim);
  Vec w = testing::random_vec(rng, bank.output_dim());
  nn::ConvFilterBank::Cache cache;
  bank.forward(C, &cache);
  nn::ParamList params;
  bank.collect(params, "conv");
  nn::zero_grads(params);
  bank.backward(C, cache, w);
  return nn::grad_check([&] { return dot(w, bank.forward(C)); }, params, rng, 64).max_relative_error;
}

double lstm_fixture(Rng &rng) {
  const std::size_t dim = pick(rng, 1, 4), hidden = pick(rng, 1, 5), len = pick(rng, 1, 7);
  nn::LstmCell cell(dim, hidden);
  cell.init(rng, 0.8);
  Matrix xs = testing::random_matrix(rng, len, dim);
  Vec u = testing::random_vec(rng, hidden);
  const Vec zero(hidden, 0.0);
  nn::LstmCell::Trace trace;
  cell.forward(xs, zero, zero, &trace);
  nn::ParamList params;
  cell.collect(params, "lstm");
  nn::zero_grads(params);
  cell.backward(xs, trace, u);
  auto loss = [&] { return dot(u, cell.forward(xs, zero, zero).last); };
  return nn::grad_check(loss, params, rng, 64).max_relative_error;
}

double bilstm_fixture(Rng &rng) {
  const CharInventory inv({"a", "b", "c"});
  ClrConfig cfg = ClrConfig::defaults(ClrKind::BiLstm);
  cfg.char_dim = pick(rng, 1, 4);
  cfg.hidden = pick(rng, 1, 4);
  cfg.name_length = pick(rng, 3, 9);
  ClrEncoder enc(cfg, inv.size());
  enc.init(rng, 0.8);
  auto ids = char_ids(random_word(rng, 8, "abcz"), inv, cfg.name_length).ids;
  Vec w = testing::random_vec(rng, enc.output_dim());
  nn::ParamList params;
  enc.collect(params, "bilstm");
  nn::zero_grads(params);
  ClrEncoder::Cache cache;
  enc.forward(ids, &cache);
  enc.backward(ids, cache, w);
  return nn::grad_check([&] { return dot(w, enc.forward(ids)); }, params, rng, 64).max_relative_error;
}

double typer_fixture(Rng &rng) {
  const std::size_t types = pick(rng, 1, 4), dim = pick(rng, 1, 4), entities = pick(rng, 1, 4);
  std::vector<std::string> names;
  for (std::size_t t = 0; t < types; ++t) names.push_back("/t" + std::to_string(t));
  TypeSystem ts(names, std::vector<int>(types, -1));

  std::vector<std::string> ids;
  Matrix vectors(entities, dim);
  for (double &v : vectors.flat()) v = rng.uniform(-1.0, 1.0);
  std::vector<EntityRecord> records;
  std::vector<std::string> train_names;
  for (std::size_t i = 0; i < entities; ++i) {
    ids.push_back("m." + std::to_string(i));
    EntityRecord e{ids.back(), {random_word(rng, 5) + " " + random_word(rng, 4)}, {}, 3};
    for (std::size_t t = 0; t < types; ++t) {
      if (rng.bernoulli(0.5)) e.gold_types.push_back(static_cast<int>(t));
    }
    train_names.push_back(e.names[0]);
    records.push_back(e);
  }
  EmbeddingStore store(EmbeddingKind::Skip, ids, std::move(vectors));
  RepresentationSources src;
  src.entities = &store;

  static const char *kinds[] = {"clr-forward", "clr-cnn", "clr-lstm", "clr-bilstm"};
  RepresentationSpec spec = RepresentationSpec::parse(std::string("elr,") + kinds[rng.below(4)]);
  spec.name_length = pick(rng, 4, 10);
  spec.char_dim = pick(rng, 1, 3);
  spec.lstm_hidden = pick(rng, 1, 3);
  spec.cnn_widths = {1, 2};
  spec.cnn_filters = 2;
  spec.char_min_count = 1;
  auto layout = FeatureLayout::build(spec, src, train_names);
  auto inst = build_instances(records, layout, src, types, 1);
  Typer model(ts, layout, pick(rng, 2, 6));
  model.init(rng, 0.8);
  nn::ParamList params;
  model.collect(params);
  auto loss = [&] {
    double l = 0.0;
    for (const auto &i : inst) l += nn::bce_loss(model.probabilities(i.input), i.gold);
    return l;
  };
  nn::zero_grads(params);
  for (const auto &i : inst) model.accumulate(i, 1.0);
  return nn::grad_check(loss, params, rng, 64).max_relative_error;
}

// ------------------------------------------------------------ thresholds

// Independent F1 of `score > t` decisions.
double scan_f1(const std::vector<double> &s, const std::vector<bool> &pos, double t) {
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const bool p = s[i] > t;
    tp += p && pos[i];
    fp += p && !pos[i];
    fn += !p && pos[i];
  }
  return tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
}

}  // namespace

Outcome gradient_suite() {
  struct Suite {
    const char *name;
    double (*fixture)(Rng &);
  };
  const Suite suites[] = {{"dense+sigmoid+bce", dense_fixture},
                          {"cnn+maxpool", conv_fixture},
                          {"lstm", lstm_fixture},
                          {"bilstm", bilstm_fixture},
                          {"typer+clr", typer_fixture}};
  Outcome out{true, ""};
  Rng rng(2024);
  for (const auto &s : suites) {
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) worst = std::max(worst, s.fixture(rng));
    out.pass = out.pass && worst < 1e-4;
    out.detail += std::string(out.detail.empty() ? "" : ", ") + s.name + " " + fmt("%.1e", worst);
  }
  return out;
}

Outcome metric_oracle() {
  auto f = testing::load_metrics_fixture(std::string(MULR_FIXTURE_DIR) + "/metrics", "10");
  // Hand-derived: exact matches e1 e5 e6 e8; TP 10 FP 3 FN 5; per-entity F1
  // 1, 2/3, 2/3, 0, 1, 1, 0, 1, 2/3, 2/3; six gold types with F1 1, 2/3,
  // 2/3, 2/3, 0, 1/2.
  auto near = [](double a, double b) { return std::fabs(a - b) <= 1e-12; };
  const auto micro = micro_f1(f.pred_sets, f.gold_sets);
  const auto tm = type_macro_f1(f.pred_sets, f.gold_sets, {0, 1, 2, 3, 4, 5, 6});
  int hand_ok = 0, hand_total = 0;
  for (bool ok : {f.split.test.size() == 10, near(strict_accuracy(f.pred_sets, f.gold_sets), 0.4),
                  micro.tp == 10, micro.fp == 3, micro.fn == 5, near(micro.value, 5.0 / 7.0),
                  near(entity_macro_f1(f.pred_sets, f.gold_sets), 2.0 / 3.0), near(tm.value, 7.0 / 12.0),
                  tm.types == 6, tm.excluded == 1}) {
    hand_ok += ok;
    ++hand_total;
  }

  Rng rng(99);
  int inv_ok = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int types = 1 + static_cast<int>(rng.below(10));
    const std::size_t n = 1 + rng.below(40);
    std::vector<TypeSet> preds(n), golds(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (int t = 0; t < types; ++t) {
        if (rng.bernoulli(0.3)) preds[i].push_back(t);
        if (rng.bernoulli(0.3)) golds[i].push_back(t);
      }
      // Bias toward exact matches so accuracy is not trivially zero.
      if (rng.bernoulli(0.3)) preds[i] = golds[i];
    }
    inv_ok += strict_accuracy(preds, golds) <= entity_macro_f1(preds, golds) + 1e-12;
  }
  return {hand_ok == hand_total && inv_ok == 1000,
          "hand fixture " + std::to_string(hand_ok) + "/" + std::to_string(hand_total) +
              ", accuracy <= entity macro F1 on " + std::to_string(inv_ok) + "/1000 random sets"};
}

Outcome threshold_oracle() {
  Rng rng(31);
  int exact = 0, dominates = 0, type_total = 0;
  for (int trial = 0; trial < 100; ++trial) {
    // A random typer over random ELR vectors supplies the dev scores.
    const std::size_t T = pick(rng, 1, 6), n = pick(rng, 1, 200), dim = 3;
    std::vector<std::string> names;
    for (std::size_t t = 0; t < T; ++t) names.push_back("/t" + std::to_string(t));
    TypeSystem ts(names, std::vector<int>(T, -1));
    std::vector<std::string> ids;
    Matrix vectors(n, dim);
    for (double &v : vectors.flat()) {
      // Coarse values on odd trials make score ties common.
      v = trial % 2 ? std::round(rng.uniform(-2.0, 2.0)) : rng.uniform(-2.0, 2.0);
    }
    std::vector<EntityRecord> dev;
    for (std::size_t i = 0; i < n; ++i) {
      ids.push_back("m." + std::to_string(i));
      EntityRecord e{ids.back(), {"x"}, {}, 1};
      for (std::size_t t = 0; t < T; ++t) {
        if (rng.bernoulli(0.4)) e.gold_types.push_back(static_cast<int>(t));
      }
      dev.push_back(e);
    }
    EmbeddingStore store(EmbeddingKind::Skip, ids, std::move(vectors));
    RepresentationSources src;
    src.entities = &store;
    auto layout = FeatureLayout::build(RepresentationSpec::parse("elr"), src, {"x"});
    Typer model(ts, layout, 4);
    model.init(rng, 1.5);
    auto inst = build_instances(dev, layout, src, T, 1);
    auto cal = calibrate_thresholds(model, inst);

    for (std::size_t t = 0; t < T; ++t) {
      std::vector<double> s;
      std::vector<bool> pos;
      for (const auto &i : inst) {
        s.push_back(model.probabilities(i.input)[t]);
        pos.push_back(i.gold[t] != 0.0);
      }
      // Exhaustive scan over every cut between distinct values of {0} u s u {1}.
      std::set<double> vals(s.begin(), s.end());
      vals.insert(0.0);
      vals.insert(1.0);
      double best_t = 0.5, best_f = -1.0;
      for (auto it = vals.begin(); std::next(it) != vals.end(); ++it) {
        const double cut = 0.5 * (*it + *std::next(it));
        const double f1 = scan_f1(s, pos, cut);
        if (f1 > best_f) best_t = cut, best_f = f1;
      }
      const bool any_pos = std::find(pos.begin(), pos.end(), true) != pos.end();
      const double fixed = scan_f1(s, pos, 0.5);
      if (!any_pos || fixed > best_f) best_t = 0.5;
      ++type_total;
      exact += model.thresholds[t] == best_t && cal.types[t].threshold == best_t;
      dominates += scan_f1(s, pos, model.thresholds[t]) >= fixed;
    }
  }
  return {exact == type_total && dominates == type_total,
          "brute force agrees on " + std::to_string(exact) + "/" + std::to_string(type_total) +
              " types, calibrated F1 >= fixed 0.5 on " + std::to_string(dominates) + "/" +
              std::to_string(type_total)};
}

Outcome module_oracles() {
  Rng rng(4242);
  int closure_ok = 0, copy_ok = 0, subword_ok = 0, prop_ok = 0;
  const int cases = 100;

  for (int trial = 0; trial < cases; ++trial) {
    // Parent closure against walking every parent chain.
    const std::size_t n = pick(rng, 1, 15);
    std::vector<std::string> names;
    std::vector<int> parents;
    for (std::size_t i = 0; i < n; ++i) {
      names.push_back("/t" + std::to_string(i));
      parents.push_back(i == 0 || rng.bernoulli(0.3) ? -1 : static_cast<int>(rng.below(i)));
    }
    TypeSystem ts(names, parents);
    EntityRecord e{"e", {"n"}, {}, 1};
    std::set<int> expect;
    for (std::size_t i = 0; i < n; ++i) {
      if (!rng.bernoulli(0.3)) continue;
      e.gold_types.push_back(static_cast<int>(i));
      for (int t = static_cast<int>(i); t != -1; t = parents[t]) expect.insert(t);
    }
    closure_ok += close_under_parents(e, ts).gold_types == TypeSet(expect.begin(), expect.end());
  }

  for (int trial = 0; trial < cases; ++trial) {
    // Three copies rebuilt token by token from the mention spans.
    AnnotatedCorpus c;
    NotableTypes notable;
    std::unordered_set<std::string> held_out;
    for (int k = 0; k < 4; ++k) {
      const std::string id = "m." + std::to_string(k);
      notable[id] = "/type" + std::to_string(k % 2);
      if (rng.bernoulli(0.3)) held_out.insert(id);
    }
    std::vector<std::vector<std::string>> expect;
    for (int si = 0, sn = static_cast<int>(pick(rng, 1, 5)); si < sn; ++si) {
      Sentence s;
      const std::size_t len = pick(rng, 1, 10);
      for (std::size_t i = 0; i < len; ++i) s.tokens.push_back("w" + std::to_string(rng.below(6)));
      std::vector<std::string> c2, c3;
      for (std::size_t i = 0; i < len;) {
        const std::size_t span = pick(rng, 1, 3);
        if (i + span <= len && rng.bernoulli(0.3)) {
          const std::string id = "m." + std::to_string(rng.below(4));
          s.mentions.push_back({i, i + span, id});
          c2.push_back(id);
          if (held_out.count(id)) {
            c3.insert(c3.end(), s.tokens.begin() + i, s.tokens.begin() + i + span);
          } else {
            c3.push_back(notable[id]);
          }
          i += span;
        } else {
          c2.push_back(s.tokens[i]);
          c3.push_back(s.tokens[i]);
          ++i;
        }
      }
      expect.push_back(s.tokens);
      expect.push_back(c2);
      expect.push_back(c3);
      c.sentences.push_back(std::move(s));
    }
    copy_ok += build_three_copy_corpus(c, notable, held_out).sentences == expect;
  }

  for (int trial = 0; trial < cases; ++trial) {
    // Subword units against the set of bracketed substrings.
    const std::string w = random_word(rng, 12, "abcd");
    const int nmin = static_cast<int>(pick(rng, 1, 4)), nmax = nmin + static_cast<int>(rng.below(4));
    const std::string b = "<" + w + ">";
    std::multiset<std::string> expect;
    for (std::size_t i = 0; i < b.size(); ++i) {
      for (std::size_t j = i + 1; j <= b.size(); ++j) {
        const int len = static_cast<int>(j - i);
        if (len >= nmin && len <= nmax) expect.insert(b.substr(i, len));
      }
    }
    if (static_cast<int>(b.size()) > nmax) expect.insert(b);
    auto got = extract_subwords(w, nmin, nmax);
    subword_ok += std::multiset<std::string>(got.begin(), got.end()) == expect;
  }

  for (int trial = 0; trial < cases; ++trial) {
    // Pooled two-proportion z statistic written out directly.
    const std::size_t n = pick(rng, 1, 3000), a = rng.below(n + 1), b = rng.below(n + 1);
    const double pa = static_cast<double>(a) / n, pb = static_cast<double>(b) / n;
    const double pool = 0.5 * (pa + pb), se = std::sqrt(pool * (1 - pool) * 2.0 / n);
    const double z = se > 0 ? (pa - pb) / se : 0.0;
    const double p = std::erfc(std::fabs(z) / std::sqrt(2.0));
    auto r = equal_proportions_test(a, b, n);
    prop_ok += std::fabs(r.z - z) <= 1e-9 * std::max(1.0, std::fabs(z)) && std::fabs(r.p_value - p) <= 1e-9 &&
               r.significant == (p < 0.05);
  }
  // Hand-derived: 900 vs 100 of 1000 pools to 0.5, so z = 0.8 / sqrt(0.25 * 2 / 1000).
  auto big = equal_proportions_test(900, 100, 1000);
  const bool hand = std::fabs(big.z - 0.8 / std::sqrt(0.25 * 2.0 / 1000.0)) < 1e-9 && big.significant &&
                    !equal_proportions_test(505, 500, 1000).significant;

  const bool pass = closure_ok == cases && copy_ok == cases && subword_ok == cases && prop_ok == cases && hand;
  return {pass, "parent closure " + std::to_string(closure_ok) + "/100, three-copy " + std::to_string(copy_ok) +
                    "/100, subwords " + std::to_string(subword_ok) + "/100, equal proportions " +
                    std::to_string(prop_ok) + "/100" + (hand ? "" : ", hand points differ")};
}

}  // namespace mulr::acceptance
