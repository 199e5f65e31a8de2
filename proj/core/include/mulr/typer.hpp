#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mulr/dataset.hpp"
#include "mulr/eval.hpp"
#include "mulr/nn.hpp"
#include "mulr/repr.hpp"

namespace mulr {

// One training or scoring instance: a single (entity, name) pair.
struct Instance {
  std::string entity;
  AssembledInput input;
  Vec gold;  // 0/1 per type
};

// Instances for every name of every record (up to `max_names` per entity).
std::vector<Instance> build_instances(const std::vector<EntityRecord> &records, const FeatureLayout &layout,
                                      const RepresentationSources &src, std::size_t type_count,
                                      std::size_t max_names);

// Hidden layer size used when the training config leaves it unset.
std::size_t default_hidden_size(const RepresentationSpec &spec);

// P(t|e) = sigmoid(W_out relu(W_in v(e) + b_in) + b_out). W_in is stored
// transposed, one row per input coordinate, so sparse inputs touch only
// their own rows.
class Typer {
 public:
  Typer() = default;
  Typer(TypeSystem types, FeatureLayout layout, std::size_t hidden);

  const TypeSystem &types() const { return types_; }
  const FeatureLayout &layout() const { return layout_; }
  std::size_t input_dim() const { return layout_.dim(); }
  std::size_t hidden() const { return input_weight.cols(); }

  void init(Rng &rng, double range = nn::kInitRange);

  // Throws DataError when the input does not fit the layout.
  Vec probabilities(const AssembledInput &in) const;

  // Adds `scale` times the gradient of the summed BCE of one instance to the
  // parameter gradients and returns its unscaled loss. Rows of W_in that
  // received gradient are appended to `touched` when given.
  double accumulate(const Instance &inst, double scale, std::vector<std::uint32_t> *touched = nullptr);

  // {t : p_t > threshold_t}
  TypeSet predict(const Vec &probs) const;

  // Every trainable tensor in a fixed order: W_in, b_in, W_out, b_out, then
  // the encoders' parameters.
  void collect(nn::ParamList &params);

  Matrix input_weight;  // d x h
  Vec input_bias;
  nn::DenseLayer output;  // h -> |T|
  std::vector<ClrEncoder> encoders;  // one per CLR network level, spec order
  Vec thresholds;
  std::map<std::string, std::string> metadata;

  Matrix grad_input_weight;
  Vec grad_input_bias;

 private:
  struct Pass {
    std::vector<Vec> clr;
    std::vector<ClrEncoder::Cache> caches;
    Vec pre;
    Vec hidden;
    Vec probs;
  };
  void run(const AssembledInput &in, Pass &pass, bool keep_caches) const;

  TypeSystem types_;
  FeatureLayout layout_;
};

struct TrainConfig {
  std::size_t hidden = 0;  // 0: default_hidden_size
  std::size_t epochs = 200;
  std::size_t batch_size = 128;
  double learning_rate = nn::AdaGrad::kDefaultLearningRate;
  std::uint64_t seed = 1;
  std::size_t patience = 5;
  double init_range = nn::kInitRange;
  bool standardize = true;  // standardize dense frozen levels on train moments
};

void validate(const TrainConfig &cfg);

// Sets the layout's standardization to the mean and inverse standard
// deviation of each dense frozen dimension over `train` (scale 1 where the
// deviation is below 1e-8). `train` must have been assembled without it.
void fit_standardization(FeatureLayout &layout, const std::vector<Instance> &train);

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean per-instance summed BCE
  double dev_micro_f1 = 0.0;
};

struct TrainResult {
  Typer model;  // best dev checkpoint
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;
  double best_dev_micro_f1 = 0.0;
};

// Trains on every train name, selects the epoch with the best dev micro F1
// at threshold 0.5 and stops after `patience` epochs without improvement.
// Frozen levels read from `src` and are never modified.
TrainResult train_typer(const DatasetSplit &split, const TypeSystem &types, const RepresentationSpec &spec,
                        const RepresentationSources &src, const TrainConfig &cfg);

// Same with prebuilt instances and an initialized model.
TrainResult train_typer(Typer model, const std::vector<Instance> &train, const std::vector<Instance> &dev,
                        const TrainConfig &cfg);

// ------------------------------------------------------------ thresholds

struct TypeThreshold {
  double threshold = 0.5;
  double f1 = 0.0;
  bool flagged = false;  // no positives: fallback 0.5
};

// Candidates: midpoints between consecutive distinct values of
// {0} u scores u {1}, scanned in increasing order; first best F1 wins. 0.5
// replaces it only when strictly better.
TypeThreshold calibrate_type(const std::vector<double> &scores, const std::vector<bool> &positive);

// F1 of `score > threshold` decisions against `positive`.
double threshold_f1(const std::vector<double> &scores, const std::vector<bool> &positive, double threshold);

struct Calibration {
  std::vector<TypeThreshold> types;
  std::size_t flagged = 0;
};

// Scores every dev instance and sets model.thresholds.
Calibration calibrate_thresholds(Typer &model, const std::vector<Instance> &dev);

// ------------------------------------------------------------ scoring

// Probabilities per instance; `threads` > 1 splits instances across workers.
std::vector<Vec> score_instances(const Typer &model, const std::vector<Instance> &instances,
                                 std::size_t threads = 1);

// `entity_id<TAB>type:score,...` over predicted types, in type order. The
// parser skips `#` comment lines.
std::string format_predictions(const Typer &model, const std::vector<Instance> &instances,
                               const std::vector<Vec> &scores);
std::vector<Prediction> parse_predictions(std::string_view content, const TypeSystem &types,
                                          const std::string &source = "<predictions>");

// ------------------------------------------------------------ checkpoints

// Binary checkpoint: a text header (spec, hyperparameters, metadata, type
// system, character inventory, feature dictionaries, thresholds) followed by
// named tensors stored as little-endian doubles.
void save_model(const Typer &model, const std::filesystem::path &path);
std::string serialize_model(const Typer &model);
// Layout dims are rebuilt from `src` and checked against the stored ones.
Typer load_model(const std::filesystem::path &path, const RepresentationSources &src);
Typer parse_model(const std::string &bytes, const RepresentationSources &src,
                  const std::string &source = "<model>");
// Header fields only (metadata, spec), without rebuilding the layout.
std::map<std::string, std::string> read_model_metadata(const std::filesystem::path &path);

}  // namespace mulr
