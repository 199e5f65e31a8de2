#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "mulr/error.hpp"
#include "mulr/rng.hpp"
#include "mulr/typer.hpp"
#include "support.hpp"

using namespace mulr;

namespace {

TypeSystem flat_types(int n) {
  std::vector<std::string> names;
  for (int i = 0; i < n; ++i) names.push_back("/t" + std::to_string(i));
  return TypeSystem(names, std::vector<int>(n, -1));
}

EmbeddingStore entity_store(const std::vector<std::string> &ids, const std::vector<Vec> &rows) {
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  return EmbeddingStore(EmbeddingKind::Skip, ids, std::move(m));
}

// Two types; the first ELR coordinate decides between them.
struct Separable {
  TypeSystem types = flat_types(2);
  EmbeddingStore store;
  DatasetSplit split;
  RepresentationSources src;

  explicit Separable(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::string> ids;
    std::vector<Vec> rows;
    auto add = [&](std::vector<EntityRecord> &part, int i) {
      const bool a = i % 2 == 0;
      std::string id = "m" + std::to_string(ids.size());
      Vec v = testing::random_vec(rng, 4, 0.3);
      v[0] = a ? 1.0 + rng.uniform() : -1.0 - rng.uniform();
      ids.push_back(id);
      rows.push_back(v);
      part.push_back({id, {"Name " + id}, {a ? 0 : 1}, 10});
    };
    for (int i = 0; i < 40; ++i) add(split.train, i);
    for (int i = 0; i < 10; ++i) add(split.dev, i);
    for (int i = 0; i < 10; ++i) add(split.test, i);
    store = entity_store(ids, rows);
    src.entities = &store;
  }
};

TrainConfig quick_config() {
  TrainConfig cfg;
  cfg.hidden = 8;
  cfg.epochs = 50;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.1;
  cfg.seed = 11;
  cfg.patience = 50;
  return cfg;
}

}  // namespace

TEST_CASE("all-zero weights give 0.5 everywhere") {
  Separable w(1);
  auto layout = FeatureLayout::build(RepresentationSpec::parse("elr"), w.src, {"a"});
  Typer model(w.types, layout, 5);
  auto in = assemble_frozen("m0", "x", layout, w.src);
  for (double p : model.probabilities(in)) CHECK(p == 0.5);
  CHECK(model.predict(model.probabilities(in)).empty());
}

TEST_CASE("hand-built two-type model") {
  auto types = flat_types(2);
  auto store = entity_store({"e"}, {{1.0, -2.0}});
  RepresentationSources src;
  src.entities = &store;
  auto layout = FeatureLayout::build(RepresentationSpec::parse("elr"), src, {"e"});
  Typer model(types, layout, 1);
  model.input_weight(0, 0) = 0.5;
  model.input_weight(1, 0) = 0.25;
  model.input_bias[0] = 0.1;
  model.output.weight(0, 0) = 2.0;
  model.output.weight(1, 0) = -3.0;
  model.output.bias = {0.0, 1.0};
  // hidden = relu(0.5 - 0.5 + 0.1) = 0.1; logits 0.2 and 0.7.
  auto p = model.probabilities(assemble_frozen("e", "e", layout, src));
  CHECK(std::fabs(p[0] - 0.549833997312478) < 1e-12);
  CHECK(std::fabs(p[1] - 0.6681877721681662) < 1e-12);
  CHECK_THROWS_AS(model.probabilities({{{7, 1.0}}, {}, {}}), DataError);
}

TEST_CASE("default hidden sizes") {
  CHECK(default_hidden_size(RepresentationSpec::parse("elr")) == 400);
  CHECK(default_hidden_size(RepresentationSpec::parse("swlr,elr,clr-cnn,tc")) == 900);
  CHECK(default_hidden_size(RepresentationSpec::parse("clr-bilstm")) == 200);
}

TEST_CASE("end-to-end gradient with trainable CLR matches finite differences") {
  auto types = flat_types(3);
  Rng rng(8);
  auto store = entity_store({"a", "b", "c"}, {testing::random_vec(rng, 4), testing::random_vec(rng, 4),
                                                testing::random_vec(rng, 4)});
  RepresentationSources src;
  src.entities = &store;
  RepresentationSpec spec = RepresentationSpec::parse("elr,clr-cnn,clr-bilstm,bow");
  spec.name_length = 8;
  spec.char_dim = 3;
  spec.lstm_hidden = 3;
  spec.cnn_widths = {1, 3};
  spec.cnn_filters = 2;
  spec.char_min_count = 1;
  std::vector<EntityRecord> records{{"a", {"Abe Lin"}, {0, 2}, 3}, {"b", {"Bo"}, {1}, 3}, {"c", {"Cal Bo"}, {2}, 3}};
  auto layout = FeatureLayout::build(spec, src, {"Abe Lin", "Bo", "Cal Bo"});
  auto inst = build_instances(records, layout, src, 3, 3);
  Typer model(types, layout, 6);
  model.init(rng, 0.5);
  nn::ParamList params;
  model.collect(params);
  auto loss = [&] {
    double l = 0.0;
    for (const auto &i : inst) l += nn::bce_loss(model.probabilities(i.input), i.gold);
    return l;
  };
  nn::zero_grads(params);
  for (const auto &i : inst) model.accumulate(i, 1.0);
  auto res = nn::grad_check(loss, params, rng, 24);
  CHECK(res.max_relative_error < 1e-4);
  CHECK(res.checked > 100);
}

TEST_CASE("separable data reaches train micro F1 1.0") {
  Separable w(2);
  auto spec = RepresentationSpec::parse("elr");
  auto result = train_typer(w.split, w.types, spec, w.src, quick_config());
  auto train = build_instances(w.split.train, result.model.layout(), w.src, 2, 3);
  std::vector<TypeSet> preds, golds;
  for (const auto &i : train) {
    preds.push_back(result.model.predict(result.model.probabilities(i.input)));
  }
  for (const auto &e : w.split.train) golds.push_back(e.gold_types);
  CHECK(micro_f1(preds, golds).value == 1.0);
  CHECK(result.history.size() <= 50);
}

TEST_CASE("training is deterministic and leaves frozen stores alone") {
  Separable w(3);
  const EmbeddingStore before = w.store;
  auto spec = RepresentationSpec::parse("elr,bow");
  auto a = train_typer(w.split, w.types, spec, w.src, quick_config());
  auto b = train_typer(w.split, w.types, spec, w.src, quick_config());
  CHECK(serialize_model(a.model) == serialize_model(b.model));
  CHECK(w.store == before);
}

TEST_CASE("patience and model selection") {
  Separable w(4);
  auto spec = RepresentationSpec::parse("elr");
  auto cfg = quick_config();
  cfg.patience = 0;
  CHECK(train_typer(w.split, w.types, spec, w.src, cfg).history.size() == 1);
  cfg.patience = 3;
  cfg.learning_rate = 0.5;
  auto r = train_typer(w.split, w.types, spec, w.src, cfg);
  CHECK(r.best_dev_micro_f1 >= r.history.back().dev_micro_f1);
  CHECK(r.history[r.best_epoch - 1].dev_micro_f1 == r.best_dev_micro_f1);
  if (r.history.size() < cfg.epochs) CHECK(r.history.size() == r.best_epoch + cfg.patience);
}

TEST_CASE("training without instances fails") {
  Separable w(5);
  DatasetSplit empty;
  empty.dev = w.split.dev;
  CHECK_THROWS_AS(train_typer(empty, w.types, RepresentationSpec::parse("elr"), w.src, quick_config()), DataError);
  TrainConfig bad = quick_config();
  bad.batch_size = 0;
  CHECK_THROWS_AS(validate(bad), UsageError);
}

TEST_CASE("predict thresholds strictly") {
  Typer model;
  model.thresholds = {0.5, 0.5, 0.5};
  CHECK(model.predict({0.5, 0.5, 0.5}).empty());
  CHECK(model.predict({0.9, 0.1, 0.6}) == TypeSet{0, 2});
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    Vec p(3);
    for (double &x : p) x = rng.uniform();
    auto base = model.predict(p);
    Typer raised = model;
    const auto t = rng.below(3);
    raised.thresholds[t] += rng.uniform(0.0, 0.5);
    auto after = raised.predict(p);
    CHECK(std::includes(base.begin(), base.end(), after.begin(), after.end()));
  }
}

TEST_CASE("calibration examples") {
  auto r = calibrate_type({0.9, 0.8, 0.3}, {true, true, false});
  CHECK(r.threshold == doctest::Approx(0.55));
  CHECK(r.f1 == 1.0);
  auto all = calibrate_type({0.7, 0.6, 0.9}, {true, true, true});
  CHECK(all.threshold < 0.6);
  CHECK(all.f1 == 1.0);
  auto none = calibrate_type({0.7, 0.2}, {false, false});
  CHECK(none.flagged);
  CHECK(none.threshold == 0.5);
}

TEST_CASE("calibration matches an exhaustive cut-point scan") {
  Rng rng(10);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(60);
    std::vector<double> s(n);
    std::vector<bool> pos(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse grid so ties are common.
      s[i] = trial % 2 ? std::round(rng.uniform() * 20.0) / 20.0 : rng.uniform();
      pos[i] = rng.bernoulli(0.4);
    }
    if (std::none_of(pos.begin(), pos.end(), [](bool b) { return b; })) pos[0] = true;
    std::vector<double> vals = s;
    vals.push_back(0.0);
    vals.push_back(1.0);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    double best_t = 0.5, best_f = -1.0;
    for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
      const double t = 0.5 * (vals[k] + vals[k + 1]);
      const double f = threshold_f1(s, pos, t);
      if (f > best_f) best_t = t, best_f = f;
    }
    if (threshold_f1(s, pos, 0.5) > best_f) best_t = 0.5, best_f = threshold_f1(s, pos, 0.5);
    auto r = calibrate_type(s, pos);
    CHECK(r.threshold == best_t);
    CHECK(r.f1 == best_f);
    CHECK(r.f1 >= threshold_f1(s, pos, 0.5));
    CHECK(r.threshold > 0.0);
    CHECK(r.threshold < 1.0);
  }
}

TEST_CASE("checkpoint round trip") {
  Separable w(7);
  auto spec = RepresentationSpec::parse("elr,clr-cnn,bow");
  spec.cnn_filters = 3;
  spec.cnn_widths = {2, 3};
  spec.name_length = 12;
  spec.char_min_count = 1;
  auto cfg = quick_config();
  cfg.epochs = 3;
  auto r = train_typer(w.split, w.types, spec, w.src, cfg);
  auto dev = build_instances(w.split.dev, r.model.layout(), w.src, 2, 1);
  calibrate_thresholds(r.model, dev);
  r.model.metadata["seed"] = "11";
  auto dir = testing::scratch_dir("typer_ckpt");
  save_model(r.model, dir / "m.bin");
  auto loaded = load_model(dir / "m.bin", w.src);
  CHECK(serialize_model(loaded) == serialize_model(r.model));
  CHECK(loaded.thresholds == r.model.thresholds);
  for (const auto &i : dev) CHECK(loaded.probabilities(i.input) == r.model.probabilities(i.input));
  CHECK(read_model_metadata(dir / "m.bin").at("meta.seed") == "11");

  auto bytes = serialize_model(r.model);
  CHECK_THROWS_AS(parse_model(bytes.substr(0, bytes.size() - 3), w.src), DataError);
  CHECK_THROWS_AS(parse_model("garbage\n", w.src), DataError);
  auto other = entity_store({"m0"}, {{1.0, 2.0}});
  RepresentationSources wrong;
  wrong.entities = &other;
  CHECK_THROWS_AS(parse_model(bytes, wrong), DataError);
}

TEST_CASE("prediction file round trip") {
  Separable w(8);
  auto cfg = quick_config();
  cfg.epochs = 5;
  auto r = train_typer(w.split, w.types, RepresentationSpec::parse("elr"), w.src, cfg);
  auto test = build_instances(w.split.test, r.model.layout(), w.src, 2, 1);
  auto scores = score_instances(r.model, test);
  CHECK(score_instances(r.model, test, 3) == scores);
  auto text = format_predictions(r.model, test, scores);
  auto preds = parse_predictions(text, w.types);
  REQUIRE(preds.size() == test.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    CHECK(preds[i].entity == test[i].entity);
    CHECK(preds[i].types == r.model.predict(scores[i]));
  }
}
