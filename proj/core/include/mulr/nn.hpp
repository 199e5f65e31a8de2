#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mulr/rng.hpp"
#include "mulr/tensor.hpp"

namespace mulr::nn {

// A trainable tensor viewed as flat value/gradient spans.
struct Param {
  std::string name;
  std::span<double> value;
  std::span<double> grad;
};
using ParamList = std::vector<Param>;

void zero_grads(const ParamList &params);

inline double relu(double x) { return x > 0.0 ? x : 0.0; }
double sigmoid(double x);

inline constexpr double kBceEpsilon = 1e-7;

// Sum over components of -(m log p + (1-m) log(1-p)), p clamped to
// [eps, 1-eps].
double bce_loss(std::span<const double> p, std::span<const double> m);

inline constexpr double kInitRange = 0.05;

// y = W x + b, W is out x in.
class DenseLayer {
 public:
  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out);

  std::size_t in() const { return weight.cols(); }
  std::size_t out() const { return weight.rows(); }

  void init(Rng &rng, double range = kInitRange);
  Vec forward(std::span<const double> x) const;
  // Accumulates parameter gradients, returns dL/dx.
  Vec backward(std::span<const double> x, std::span<const double> grad_out);
  void collect(ParamList &params, const std::string &prefix);

  Matrix weight;
  Vec bias;
  Matrix grad_weight;
  Vec grad_bias;
};

// Narrow 1-D convolution over the rows of an l x d_c matrix followed by
// rectifier and max pooling over positions. Filters of one width are
// stored as rows of a (count x width*d_c) matrix, position-major.
class ConvFilterBank {
 public:
  static constexpr int kMaxWidth = 10;

  ConvFilterBank() = default;
  ConvFilterBank(std::size_t input_dim, std::vector<int> widths, std::size_t filters_per_width);
  // One filter count per width.
  ConvFilterBank(std::size_t input_dim, std::vector<int> widths, std::vector<std::size_t> filters);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const;
  const std::vector<int> &widths() const { return widths_; }
  const std::vector<std::size_t> &filters() const { return filters_; }
  int max_width() const;

  struct Cache {
    std::vector<std::size_t> argmax;  // window start per filter
    Vec best;                         // pre-activation at argmax
    Vec runner_up;                    // second largest pre-activation (-inf if none)
  };

  void init(Rng &rng, double range = kInitRange);
  // Throws DataError when input rows < max width.
  Vec forward(const Matrix &input, Cache *cache = nullptr) const;
  // Accumulates parameter gradients; returns dL/dinput.
  Matrix backward(const Matrix &input, const Cache &cache, std::span<const double> grad_out);
  void collect(ParamList &params, const std::string &prefix);

  std::vector<Matrix> weights;  // one per width
  std::vector<Vec> biases;
  std::vector<Matrix> grad_weights;
  std::vector<Vec> grad_biases;

 private:
  std::size_t input_dim_ = 0;
  std::vector<int> widths_;
  std::vector<std::size_t> filters_;
};

// Output length of the narrow convolution: l - w + 1.
inline std::size_t feature_map_length(std::size_t l, int w) {
  return l + 1 - static_cast<std::size_t>(w);
}

// LSTM without peepholes. Gate rows of the 4h x (in + h) weight matrix are
// ordered input, forget, output, candidate.
class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(std::size_t input_dim, std::size_t hidden);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden() const { return hidden_; }

  struct Step {
    Vec h_prev, c_prev, i, f, o, g, c, h;
  };
  struct Trace {
    std::vector<Step> steps;
  };
  struct Output {
    std::vector<Vec> states;  // h after each input
    Vec last;
    Vec last_cell;
  };
  struct InputGrads {
    Matrix inputs;  // dL/dx per step
    Vec h0;
    Vec c0;
  };

  void init(Rng &rng, double range = kInitRange);
  // `inputs` holds one step per row. Throws DataError on an empty sequence.
  Output forward(const Matrix &inputs, std::span<const double> h0, std::span<const double> c0,
                 Trace *trace = nullptr) const;
  // Backpropagation through time from dL/d(last h); accumulates gradients.
  InputGrads backward(const Matrix &inputs, const Trace &trace, std::span<const double> grad_last);
  void collect(ParamList &params, const std::string &prefix);

  Matrix weight;
  Vec bias;
  Matrix grad_weight;
  Vec grad_bias;

 private:
  std::size_t input_dim_ = 0;
  std::size_t hidden_ = 0;
};

// acc += g^2; param -= lr * g / (sqrt(acc) + eps), element-wise.
class AdaGrad {
 public:
  static constexpr double kDefaultLearningRate = 0.01;
  static constexpr double kDefaultEpsilon = 1e-8;

  explicit AdaGrad(double learning_rate = kDefaultLearningRate,
                   double epsilon = kDefaultEpsilon)
      : learning_rate_(learning_rate), epsilon_(epsilon) {}

  double learning_rate() const { return learning_rate_; }
  double epsilon() const { return epsilon_; }

  // Parameters are identified by their position in the list across calls.
  void step(const ParamList &params);
  // Update only [offset, offset + count) of parameter `slot`.
  void step_range(std::size_t slot, const Param &param, std::size_t offset, std::size_t count);

  const std::vector<Vec> &accumulators() const { return accum_; }

 private:
  Vec &accumulator(std::size_t slot, std::size_t size);

  double learning_rate_;
  double epsilon_;
  std::vector<Vec> accum_;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // parameter name and coordinate of the worst entry
};

inline constexpr double kGradCheckStep = 1e-4;
inline constexpr double kGradCheckFloor = 1e-6;

// Compares each parameter's `grad` (analytic, computed by the caller at the
// current point) with central differences of `loss`. Up to `samples` random
// coordinates per parameter are checked (all when the tensor is smaller).
// Relative error = |a - n| / max(|a|, |n|, kGradCheckFloor).
// Throws NumericError when the loss is not finite.
GradCheckResult grad_check(const std::function<double()> &loss, const ParamList &params,
                           Rng &rng, std::size_t samples = 32, double step = kGradCheckStep);

}  // namespace mulr::nn
