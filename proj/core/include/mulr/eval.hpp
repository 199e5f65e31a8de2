#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mulr/dataset.hpp"

namespace mulr {

// Predicted type set for one entity.
struct Prediction {
  std::string entity;
  TypeSet types;
};

// F1 = 2TP / (2TP + FP + FN); 1.0 when all three are zero.
double f1_score(std::size_t tp, std::size_t fp, std::size_t fn);

// Each function takes aligned prediction/gold lists of sorted type sets and
// throws DataError when the lengths differ.
double strict_accuracy(const std::vector<TypeSet> &preds, const std::vector<TypeSet> &golds);

struct MicroF1 {
  double value = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0;
  bool both_empty = false;  // no predictions and no golds: value set to 1.0
};
MicroF1 micro_f1(const std::vector<TypeSet> &preds, const std::vector<TypeSet> &golds);

double entity_macro_f1(const std::vector<TypeSet> &preds, const std::vector<TypeSet> &golds);

struct TypeMacroF1 {
  double value = 0.0;
  std::size_t types = 0;     // types averaged
  std::size_t excluded = 0;  // requested types without a gold entity
};
// Averages per-type F1 over `types`; types no gold entity carries are
// excluded and counted.
TypeMacroF1 type_macro_f1(const std::vector<TypeSet> &preds, const std::vector<TypeSet> &golds,
                          const std::vector<int> &types);

// Per-type F1 for every type id in [0, type_count); NaN for types without
// gold or predicted entities.
std::vector<double> per_type_f1(const std::vector<TypeSet> &preds, const std::vector<TypeSet> &golds,
                                std::size_t type_count);

inline constexpr std::size_t kHeadTypeMinTrain = 3000;
inline constexpr std::size_t kTailTypeMaxTrain = 199;

// Number of train entities carrying each type.
std::vector<std::size_t> train_type_counts(const std::vector<EntityRecord> &train, std::size_t type_count);
std::vector<int> head_types(const std::vector<std::size_t> &train_counts);
std::vector<int> tail_types(const std::vector<std::size_t> &train_counts);

// The gold set shared by the most train entities (ties: smallest set in
// lexicographic order).
TypeSet most_frequent_type_set(const std::vector<EntityRecord> &train);

struct ProportionTest {
  double z = 0.0;
  double p_value = 1.0;
  bool significant = false;
};
// Two-proportion z-test with pooled variance, two-sided, no continuity
// correction. Throws DataError when n = 0 or a count exceeds n.
ProportionTest equal_proportions_test(std::size_t correct_a, std::size_t correct_b, std::size_t n,
                                      double alpha = 0.05);

struct SliceMetrics {
  std::string name;
  std::size_t count = 0;
  double accuracy = 0.0;
  double micro_f1 = 0.0;
  double entity_macro_f1 = 0.0;
  std::size_t strict_correct = 0;
  bool both_empty = false;
};

struct EvalReport {
  std::vector<SliceMetrics> slices;  // all, head, tail, known, unknown
  TypeMacroF1 type_macro_all;
  TypeMacroF1 type_macro_head;
  TypeMacroF1 type_macro_tail;
  std::vector<double> per_type;

  const SliceMetrics &slice(const std::string &name) const;
};

// Aligns predictions with split.test by entity id (missing or extra ids
// throw DataError) and computes every slice and type macro measure.
EvalReport evaluate(const std::vector<Prediction> &preds, const DatasetSplit &split,
                    const TypeSystem &types);

// `slice<TAB>metric<TAB>value` rows.
std::string report_tsv(const EvalReport &report);
// Aligned text table with acc/mic/mac columns per slice.
std::string report_table(const EvalReport &report);

// Pairwise strict-accuracy significance; diagonal is always false.
std::vector<std::vector<bool>> significance_matrix(const std::vector<std::size_t> &correct,
                                                   std::size_t n, double alpha = 0.05);
// Rows and columns of `*` (significant) or `0`.
std::string format_significance(const std::vector<std::string> &names,
                                const std::vector<std::vector<bool>> &matrix);

}  // namespace mulr
