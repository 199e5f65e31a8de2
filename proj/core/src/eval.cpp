#include "mulr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "mulr/error.hpp"
#include "mulr/io.hpp"

namespace mulr {

namespace {

void check_aligned(const std::vector<TypeSet> &preds, const std::vector<TypeSet> &golds) {
  if (preds.size() != golds.size()) {
    throw DataError("predictions (" + std::to_string(preds.size()) + ") and golds (" +
                    std::to_string(golds.size()) + ") are not aligned");
  }
}

// Sizes of the intersection and differences of two sorted sets.
void overlap(const TypeSet &pred, const TypeSet &gold, std::size_t &tp, std::size_t &fp,
             std::size_t &fn) {
  std::size_t i = 0, j = 0;
  tp = fp = fn = 0;
  while (i < pred.size() && j < gold.size()) {
    if (pred[i] == gold[j]) {
      ++tp, ++i, ++j;
    } else if (pred[i] < gold[j]) {
      ++fp, ++i;
    } else {
      ++fn, ++j;
    }
  }
  fp += pred.size() - i;
  fn += gold.size() - j;
}

}  // namespace

double f1_score(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t denom = 2 * tp + fp + fn;
  if (denom == 0) return 1.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

double strict_accuracy(const std::vector<TypeSet> &preds, const std::vector<TypeSet> &golds) {
  check_aligned(preds, golds);
  if (preds.empty()) return 0.0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) ok += preds[i] == golds[i];
  return static_cast<double>(ok) / static_cast<double>(preds.size());
}

MicroF1 micro_f1(const std::vector<TypeSet> &preds, const std::vector<TypeSet> &golds) {
  check_aligned(preds, golds);
  MicroF1 m;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    std::size_t tp, fp, fn;
    overlap(preds[i], golds[i], tp, fp, fn);
    m.tp += tp, m.fp += fp, m.fn += fn;
  }
  if (m.tp + m.fp + m.fn == 0) {
    m.both_empty = true;
    m.value = m.precision = m.recall = 1.0;
    return m;
  }
  m.precision = m.tp + m.fp ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
  m.recall = m.tp + m.fn ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
  m.value = f1_score(m.tp, m.fp, m.fn);
  return m;
}

double entity_macro_f1(const std::vector<TypeSet> &preds, const std::vector<TypeSet> &golds) {
  check_aligned(preds, golds);
  if (preds.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    std::size_t tp, fp, fn;
    overlap(preds[i], golds[i], tp, fp, fn);
    sum += f1_score(tp, fp, fn);
  }
  return sum / static_cast<double>(preds.size());
}

namespace {

struct TypeCounts {
  std::vector<std::size_t> tp, fp, fn;
};

TypeCounts count_per_type(const std::vector<TypeSet> &preds, const std::vector<TypeSet> &golds,
                          std::size_t type_count) {
  check_aligned(preds, golds);
  TypeCounts c{std::vector<std::size_t>(type_count), std::vector<std::size_t>(type_count),
               std::vector<std::size_t>(type_count)};
  auto check = [&](int t) {
    if (t < 0 || static_cast<std::size_t>(t) >= type_count) {
      throw DataError("type id " + std::to_string(t) + " out of range");
    }
  };
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (int t : preds[i]) {
      check(t);
      if (std::binary_search(golds[i].begin(), golds[i].end(), t)) {
        ++c.tp[t];
      } else {
        ++c.fp[t];
      }
    }
    for (int t : golds[i]) {
      check(t);
      if (!std::binary_search(preds[i].begin(), preds[i].end(), t)) ++c.fn[t];
    }
  }
  return c;
}

}  // namespace

TypeMacroF1 type_macro_f1(const std::vector<TypeSet> &preds, const std::vector<TypeSet> &golds,
                          const std::vector<int> &types) {
  int max_type = -1;
  for (const auto *sets : {&preds, &golds}) {
    for (const auto &s : *sets) {
      if (!s.empty()) max_type = std::max(max_type, s.back());
    }
  }
  for (int t : types) max_type = std::max(max_type, t);
  auto c = count_per_type(preds, golds, static_cast<std::size_t>(max_type + 1));
  TypeMacroF1 r;
  double sum = 0.0;
  for (int t : types) {
    if (c.tp[t] + c.fn[t] == 0) {
      ++r.excluded;
      continue;
    }
    sum += f1_score(c.tp[t], c.fp[t], c.fn[t]);
    ++r.types;
  }
  r.value = r.types ? sum / static_cast<double>(r.types) : 0.0;
  return r;
}

std::vector<double> per_type_f1(const std::vector<TypeSet> &preds, const std::vector<TypeSet> &golds,
                                std::size_t type_count) {
  auto c = count_per_type(preds, golds, type_count);
  std::vector<double> out(type_count, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t t = 0; t < type_count; ++t) {
    if (c.tp[t] + c.fp[t] + c.fn[t] > 0) out[t] = f1_score(c.tp[t], c.fp[t], c.fn[t]);
  }
  return out;
}

std::vector<std::size_t> train_type_counts(const std::vector<EntityRecord> &train, std::size_t type_count) {
  std::vector<std::size_t> counts(type_count, 0);
  for (const auto &e : train) {
    for (int t : e.gold_types) {
      if (t < 0 || static_cast<std::size_t>(t) >= type_count) throw DataError("type id out of range");
      ++counts[t];
    }
  }
  return counts;
}

std::vector<int> head_types(const std::vector<std::size_t> &train_counts) {
  std::vector<int> out;
  for (std::size_t t = 0; t < train_counts.size(); ++t) {
    if (train_counts[t] >= kHeadTypeMinTrain) out.push_back(static_cast<int>(t));
  }
  return out;
}

std::vector<int> tail_types(const std::vector<std::size_t> &train_counts) {
  std::vector<int> out;
  for (std::size_t t = 0; t < train_counts.size(); ++t) {
    if (train_counts[t] <= kTailTypeMaxTrain) out.push_back(static_cast<int>(t));
  }
  return out;
}

TypeSet most_frequent_type_set(const std::vector<EntityRecord> &train) {
  std::map<TypeSet, std::size_t> counts;
  for (const auto &e : train) ++counts[e.gold_types];
  TypeSet best;
  std::size_t best_count = 0;
  for (const auto &[set, n] : counts) {
    if (n > best_count) {
      best = set;
      best_count = n;
    }
  }
  return best;
}

ProportionTest equal_proportions_test(std::size_t correct_a, std::size_t correct_b, std::size_t n,
                                      double alpha) {
  if (n == 0) throw DataError("equal proportions test needs n > 0");
  if (correct_a > n || correct_b > n) throw DataError("correct count exceeds n");
  const double nn = static_cast<double>(n);
  const double pa = static_cast<double>(correct_a) / nn;
  const double pb = static_cast<double>(correct_b) / nn;
  const double pooled = static_cast<double>(correct_a + correct_b) / (2.0 * nn);
  const double se = std::sqrt(pooled * (1.0 - pooled) * (2.0 / nn));
  ProportionTest r;
  if (se == 0.0) return r;
  r.z = (pa - pb) / se;
  r.p_value = std::erfc(std::fabs(r.z) / std::sqrt(2.0));
  r.significant = r.p_value < alpha;
  return r;
}

const SliceMetrics &EvalReport::slice(const std::string &name) const {
  for (const auto &s : slices) {
    if (s.name == name) return s;
  }
  throw DataError("no slice named '" + name + "'");
}

EvalReport evaluate(const std::vector<Prediction> &preds, const DatasetSplit &split,
                    const TypeSystem &types) {
  std::unordered_map<std::string, const TypeSet *> by_id;
  for (const auto &p : preds) {
    if (!by_id.emplace(p.entity, &p.types).second) {
      throw DataError("duplicate prediction for entity '" + p.entity + "'");
    }
  }
  std::vector<TypeSet> pred_sets, gold_sets;
  for (const auto &e : split.test) {
    auto it = by_id.find(e.id);
    if (it == by_id.end()) throw DataError("no prediction for test entity '" + e.id + "'");
    pred_sets.push_back(*it->second);
    gold_sets.push_back(e.gold_types);
  }
  // Predicting the whole dataset is fine; ids the dataset has never seen are not.
  if (by_id.size() != split.test.size()) {
    std::unordered_set<std::string> known;
    for (const auto *part : {&split.train, &split.dev, &split.test}) {
      for (const auto &e : *part) known.insert(e.id);
    }
    for (const auto &[id, _] : by_id) {
      if (!known.count(id)) throw DataError("prediction for unknown entity '" + id + "'");
    }
  }

  EvalReport report;
  auto slices = slice_entities(split);
  const std::pair<const char *, const std::vector<std::size_t> *> named[] = {
      {"all", &slices.all},   {"head", &slices.head},       {"tail", &slices.tail},
      {"known", &slices.known}, {"unknown", &slices.unknown}};
  for (auto [name, idx] : named) {
    std::vector<TypeSet> p, g;
    for (auto i : *idx) {
      p.push_back(pred_sets[i]);
      g.push_back(gold_sets[i]);
    }
    SliceMetrics m;
    m.name = name;
    m.count = idx->size();
    m.accuracy = strict_accuracy(p, g);
    for (std::size_t i = 0; i < p.size(); ++i) m.strict_correct += p[i] == g[i];
    auto micro = micro_f1(p, g);
    m.micro_f1 = m.count ? micro.value : 0.0;
    m.both_empty = m.count && micro.both_empty;
    m.entity_macro_f1 = entity_macro_f1(p, g);
    report.slices.push_back(m);
  }
  std::vector<int> all_types(types.size());
  for (std::size_t t = 0; t < types.size(); ++t) all_types[t] = static_cast<int>(t);
  auto counts = train_type_counts(split.train, types.size());
  report.type_macro_all = type_macro_f1(pred_sets, gold_sets, all_types);
  report.type_macro_head = type_macro_f1(pred_sets, gold_sets, head_types(counts));
  report.type_macro_tail = type_macro_f1(pred_sets, gold_sets, tail_types(counts));
  report.per_type = per_type_f1(pred_sets, gold_sets, types.size());
  return report;
}

namespace {

std::string fmt(double v) {
  std::string s;
  io::append_double(s, v);
  return s;
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

std::string report_tsv(const EvalReport &report) {
  std::string out;
  auto row = [&](const std::string &slice, const char *metric, const std::string &value) {
    out += slice + '\t' + metric + '\t' + value + '\n';
  };
  for (const auto &s : report.slices) {
    row(s.name, "count", std::to_string(s.count));
    row(s.name, "accuracy", fmt(s.accuracy));
    row(s.name, "micro_f1", fmt(s.micro_f1));
    row(s.name, "entity_macro_f1", fmt(s.entity_macro_f1));
    row(s.name, "strict_correct", std::to_string(s.strict_correct));
    if (s.both_empty) row(s.name, "both_empty", "1");
  }
  const std::pair<const char *, const TypeMacroF1 *> tm[] = {
      {"types_all", &report.type_macro_all},
      {"types_head", &report.type_macro_head},
      {"types_tail", &report.type_macro_tail}};
  for (auto [name, m] : tm) {
    row(name, "type_macro_f1", fmt(m->value));
    row(name, "types", std::to_string(m->types));
    row(name, "excluded", std::to_string(m->excluded));
  }
  return out;
}

std::string report_table(const EvalReport &report) {
  std::string out = "slice      n       acc    mic    mac\n";
  for (const auto &s : report.slices) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-9s %6zu   %s  %s  %s%s\n", s.name.c_str(), s.count,
                  fixed3(s.accuracy).c_str(), fixed3(s.micro_f1).c_str(),
                  fixed3(s.entity_macro_f1).c_str(), s.both_empty ? "  (both empty)" : "");
    out += buf;
  }
  const std::pair<const char *, const TypeMacroF1 *> tm[] = {
      {"all", &report.type_macro_all}, {"head", &report.type_macro_head}, {"tail", &report.type_macro_tail}};
  out += "\ntypes      n   excluded  macro F1\n";
  for (auto [name, m] : tm) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-9s %3zu   %8zu  %s\n", name, m->types, m->excluded,
                  fixed3(m->value).c_str());
    out += buf;
  }
  return out;
}

std::vector<std::vector<bool>> significance_matrix(const std::vector<std::size_t> &correct,
                                                   std::size_t n, double alpha) {
  const std::size_t k = correct.size();
  std::vector<std::vector<bool>> m(k, std::vector<bool>(k, false));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i != j) m[i][j] = equal_proportions_test(correct[i], correct[j], n, alpha).significant;
    }
  }
  return m;
}

std::string format_significance(const std::vector<std::string> &names,
                                const std::vector<std::vector<bool>> &matrix) {
  if (names.size() != matrix.size()) throw DataError("significance matrix / name count mismatch");
  std::size_t width = 0;
  for (const auto &n : names) width = std::max(width, n.size());
  std::string out(width, ' ');
  for (std::size_t j = 0; j < names.size(); ++j) out += ' ' + std::to_string(j + 1);
  out += '\n';
  for (std::size_t i = 0; i < names.size(); ++i) {
    out += names[i] + std::string(width - names[i].size(), ' ');
    for (std::size_t j = 0; j < names.size(); ++j) {
      std::string cell = matrix[i][j] ? "*" : "0";
      out += std::string(std::to_string(j + 1).size(), ' ') + cell;
    }
    out += '\n';
  }
  return out;
}

}  // namespace mulr
