#include "mulr/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mulr/error.hpp"

namespace mulr::nn {

void zero_grads(const ParamList &params) {
  for (const auto &p : params) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double bce_loss(std::span<const double> p, std::span<const double> m) {
  if (p.size() != m.size()) throw DataError("bce_loss: size mismatch");
  double loss = 0.0;
  for (std::size_t t = 0; t < p.size(); ++t) {
    double q = std::clamp(p[t], kBceEpsilon, 1.0 - kBceEpsilon);
    loss -= m[t] * std::log(q) + (1.0 - m[t]) * std::log(1.0 - q);
  }
  return loss;
}

// ---------------------------------------------------------------- dense

DenseLayer::DenseLayer(std::size_t in, std::size_t out)
    : weight(out, in), bias(out, 0.0), grad_weight(out, in), grad_bias(out, 0.0) {}

void DenseLayer::init(Rng &rng, double range) {
  for (double &w : weight.flat()) w = rng.uniform(-range, range);
  for (double &b : bias) b = rng.uniform(-range, range);
}

Vec DenseLayer::forward(std::span<const double> x) const {
  if (x.size() != in()) {
    throw DataError("dense layer: input dim " + std::to_string(x.size()) + ", expected " +
                    std::to_string(in()));
  }
  Vec y(bias);
  for (std::size_t r = 0; r < out(); ++r) y[r] += dot(weight.row(r), x);
  return y;
}

Vec DenseLayer::backward(std::span<const double> x, std::span<const double> grad_out) {
  Vec gx(in(), 0.0);
  for (std::size_t r = 0; r < out(); ++r) {
    const double g = grad_out[r];
    if (g == 0.0) continue;
    grad_bias[r] += g;
    axpy(g, x, grad_weight.row(r));
    axpy(g, weight.row(r), gx);
  }
  return gx;
}

void DenseLayer::collect(ParamList &params, const std::string &prefix) {
  params.push_back({prefix + ".weight", weight.flat(), grad_weight.flat()});
  params.push_back({prefix + ".bias", bias, grad_bias});
}

// ---------------------------------------------------------------- conv

ConvFilterBank::ConvFilterBank(std::size_t input_dim, std::vector<int> widths,
                               std::size_t filters_per_width)
    : ConvFilterBank(input_dim, widths, std::vector<std::size_t>(widths.size(), filters_per_width)) {}

ConvFilterBank::ConvFilterBank(std::size_t input_dim, std::vector<int> widths,
                               std::vector<std::size_t> filters)
    : input_dim_(input_dim), widths_(std::move(widths)), filters_(std::move(filters)) {
  if (widths_.empty()) throw DataError("conv filter bank needs at least one width");
  if (filters_.size() != widths_.size()) throw DataError("conv: one filter count per width");
  for (std::size_t wi = 0; wi < widths_.size(); ++wi) {
    const int w = widths_[wi];
    if (w < 1 || w > kMaxWidth) {
      throw DataError("conv filter width " + std::to_string(w) + " outside [1, 10]");
    }
    const auto cols = static_cast<std::size_t>(w) * input_dim_;
    weights.emplace_back(filters_[wi], cols);
    grad_weights.emplace_back(filters_[wi], cols);
    biases.emplace_back(filters_[wi], 0.0);
    grad_biases.emplace_back(filters_[wi], 0.0);
  }
}

std::size_t ConvFilterBank::output_dim() const {
  std::size_t n = 0;
  for (auto f : filters_) n += f;
  return n;
}

int ConvFilterBank::max_width() const {
  return widths_.empty() ? 0 : *std::max_element(widths_.begin(), widths_.end());
}

void ConvFilterBank::init(Rng &rng, double range) {
  for (auto &w : weights) {
    for (double &x : w.flat()) x = rng.uniform(-range, range);
  }
  for (auto &b : biases) {
    for (double &x : b) x = rng.uniform(-range, range);
  }
}

Vec ConvFilterBank::forward(const Matrix &input, Cache *cache) const {
  if (input.cols() != input_dim_) throw DataError("conv: input dim mismatch");
  if (input.rows() < static_cast<std::size_t>(max_width())) {
    throw DataError("conv: input length " + std::to_string(input.rows()) +
                    " shorter than filter width " + std::to_string(max_width()));
  }
  Vec out(output_dim());
  if (cache) {
    cache->argmax.assign(output_dim(), 0);
    cache->best.assign(output_dim(), 0.0);
    cache->runner_up.assign(output_dim(), -std::numeric_limits<double>::infinity());
  }
  auto flat = input.flat();
  std::size_t k = 0;
  for (std::size_t wi = 0; wi < widths_.size(); ++wi) {
    const auto w = static_cast<std::size_t>(widths_[wi]);
    const std::size_t span_len = w * input_dim_;
    const std::size_t positions = feature_map_length(input.rows(), widths_[wi]);
    for (std::size_t f = 0; f < filters_[wi]; ++f, ++k) {
      auto filt = weights[wi].row(f);
      double best = -std::numeric_limits<double>::infinity();
      double second = best;
      std::size_t arg = 0;
      for (std::size_t i = 0; i < positions; ++i) {
        double z = biases[wi][f] + dot(filt, flat.subspan(i * input_dim_, span_len));
        if (z > best) {
          second = best;
          best = z;
          arg = i;
        } else if (z > second) {
          second = z;
        }
      }
      out[k] = relu(best);
      if (cache) {
        cache->argmax[k] = arg;
        cache->best[k] = best;
        cache->runner_up[k] = second;
      }
    }
  }
  return out;
}

Matrix ConvFilterBank::backward(const Matrix &input, const Cache &cache,
                                std::span<const double> grad_out) {
  Matrix gin(input.rows(), input.cols());
  auto flat = input.flat();
  auto gflat = gin.flat();
  std::size_t k = 0;
  for (std::size_t wi = 0; wi < widths_.size(); ++wi) {
    const std::size_t span_len = static_cast<std::size_t>(widths_[wi]) * input_dim_;
    for (std::size_t f = 0; f < filters_[wi]; ++f, ++k) {
      if (cache.best[k] <= 0.0 || grad_out[k] == 0.0) continue;
      const double g = grad_out[k];
      const std::size_t off = cache.argmax[k] * input_dim_;
      grad_biases[wi][f] += g;
      axpy(g, flat.subspan(off, span_len), grad_weights[wi].row(f));
      axpy(g, weights[wi].row(f), gflat.subspan(off, span_len));
    }
  }
  return gin;
}

void ConvFilterBank::collect(ParamList &params, const std::string &prefix) {
  for (std::size_t wi = 0; wi < widths_.size(); ++wi) {
    const std::string name = prefix + ".w" + std::to_string(widths_[wi]);
    params.push_back({name + ".weight", weights[wi].flat(), grad_weights[wi].flat()});
    params.push_back({name + ".bias", biases[wi], grad_biases[wi]});
  }
}

// ---------------------------------------------------------------- lstm

LstmCell::LstmCell(std::size_t input_dim, std::size_t hidden)
    : weight(4 * hidden, input_dim + hidden),
      bias(4 * hidden, 0.0),
      grad_weight(4 * hidden, input_dim + hidden),
      grad_bias(4 * hidden, 0.0),
      input_dim_(input_dim),
      hidden_(hidden) {}

void LstmCell::init(Rng &rng, double range) {
  for (double &w : weight.flat()) w = rng.uniform(-range, range);
  for (double &b : bias) b = rng.uniform(-range, range);
}

LstmCell::Output LstmCell::forward(const Matrix &inputs, std::span<const double> h0,
                                   std::span<const double> c0, Trace *trace) const {
  if (inputs.rows() == 0) throw DataError("lstm: empty input sequence");
  if (inputs.cols() != input_dim_) throw DataError("lstm: input dim mismatch");
  if (h0.size() != hidden_ || c0.size() != hidden_) throw DataError("lstm: state dim mismatch");
  const std::size_t H = hidden_;
  Output out;
  Vec h(h0.begin(), h0.end()), c(c0.begin(), c0.end());
  Vec xh(input_dim_ + H);
  if (trace) trace->steps.clear();
  for (std::size_t t = 0; t < inputs.rows(); ++t) {
    auto x = inputs.row(t);
    std::copy(x.begin(), x.end(), xh.begin());
    std::copy(h.begin(), h.end(), xh.begin() + static_cast<std::ptrdiff_t>(input_dim_));
    Step s;
    s.h_prev = h;
    s.c_prev = c;
    s.i.resize(H);
    s.f.resize(H);
    s.o.resize(H);
    s.g.resize(H);
    s.c.resize(H);
    s.h.resize(H);
    for (std::size_t j = 0; j < H; ++j) {
      s.i[j] = sigmoid(bias[j] + dot(weight.row(j), xh));
      s.f[j] = sigmoid(bias[H + j] + dot(weight.row(H + j), xh));
      s.o[j] = sigmoid(bias[2 * H + j] + dot(weight.row(2 * H + j), xh));
      s.g[j] = std::tanh(bias[3 * H + j] + dot(weight.row(3 * H + j), xh));
      s.c[j] = s.f[j] * c[j] + s.i[j] * s.g[j];
      s.h[j] = s.o[j] * std::tanh(s.c[j]);
    }
    h = s.h;
    c = s.c;
    out.states.push_back(h);
    if (trace) trace->steps.push_back(std::move(s));
  }
  out.last = h;
  out.last_cell = c;
  return out;
}

LstmCell::InputGrads LstmCell::backward(const Matrix &inputs, const Trace &trace,
                                        std::span<const double> grad_last) {
  const std::size_t H = hidden_;
  InputGrads res;
  res.inputs = Matrix(inputs.rows(), input_dim_);
  Vec dh(grad_last.begin(), grad_last.end());
  Vec dc(H, 0.0);
  Vec dz(4 * H), dxh(input_dim_ + H), xh(input_dim_ + H);
  for (std::size_t t = trace.steps.size(); t-- > 0;) {
    const Step &s = trace.steps[t];
    for (std::size_t j = 0; j < H; ++j) {
      const double tc = std::tanh(s.c[j]);
      const double d_o = dh[j] * tc;
      const double d_c = dc[j] + dh[j] * s.o[j] * (1.0 - tc * tc);
      dz[j] = d_c * s.g[j] * s.i[j] * (1.0 - s.i[j]);
      dz[H + j] = d_c * s.c_prev[j] * s.f[j] * (1.0 - s.f[j]);
      dz[2 * H + j] = d_o * s.o[j] * (1.0 - s.o[j]);
      dz[3 * H + j] = d_c * s.i[j] * (1.0 - s.g[j] * s.g[j]);
      dc[j] = d_c * s.f[j];
    }
    auto x = inputs.row(t);
    std::copy(x.begin(), x.end(), xh.begin());
    std::copy(s.h_prev.begin(), s.h_prev.end(), xh.begin() + static_cast<std::ptrdiff_t>(input_dim_));
    std::fill(dxh.begin(), dxh.end(), 0.0);
    for (std::size_t r = 0; r < 4 * H; ++r) {
      if (dz[r] == 0.0) continue;
      grad_bias[r] += dz[r];
      axpy(dz[r], xh, grad_weight.row(r));
      axpy(dz[r], weight.row(r), dxh);
    }
    std::copy(dxh.begin(), dxh.begin() + static_cast<std::ptrdiff_t>(input_dim_),
              res.inputs.row(t).begin());
    std::copy(dxh.begin() + static_cast<std::ptrdiff_t>(input_dim_), dxh.end(), dh.begin());
  }
  res.h0 = dh;
  res.c0 = dc;
  return res;
}

void LstmCell::collect(ParamList &params, const std::string &prefix) {
  params.push_back({prefix + ".weight", weight.flat(), grad_weight.flat()});
  params.push_back({prefix + ".bias", bias, grad_bias});
}

// ---------------------------------------------------------------- adagrad

Vec &AdaGrad::accumulator(std::size_t slot, std::size_t size) {
  if (accum_.size() <= slot) accum_.resize(slot + 1);
  if (accum_[slot].size() != size) accum_[slot].assign(size, 0.0);
  return accum_[slot];
}

void AdaGrad::step(const ParamList &params) {
  for (std::size_t s = 0; s < params.size(); ++s) step_range(s, params[s], 0, params[s].value.size());
}

void AdaGrad::step_range(std::size_t slot, const Param &param, std::size_t offset,
                         std::size_t count) {
  Vec &acc = accumulator(slot, param.value.size());
  for (std::size_t i = offset; i < offset + count; ++i) {
    const double g = param.grad[i];
    if (g == 0.0) continue;
    acc[i] += g * g;
    param.value[i] -= learning_rate_ * g / (std::sqrt(acc[i]) + epsilon_);
  }
}

// ---------------------------------------------------------------- gradient check

GradCheckResult grad_check(const std::function<double()> &loss, const ParamList &params,
                           Rng &rng, std::size_t samples, double step) {
  GradCheckResult res;
  for (const auto &p : params) {
    std::vector<std::size_t> coords;
    if (p.value.size() <= samples) {
      for (std::size_t i = 0; i < p.value.size(); ++i) coords.push_back(i);
    } else {
      for (std::size_t k = 0; k < samples; ++k) coords.push_back(rng.below(p.value.size()));
    }
    for (std::size_t i : coords) {
      const double orig = p.value[i];
      p.value[i] = orig + step;
      const double up = loss();
      p.value[i] = orig - step;
      const double down = loss();
      p.value[i] = orig;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("grad_check: non-finite loss at " + p.name);
      }
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = p.grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
      const double rel = std::abs(analytic - numeric) / denom;
      ++res.checked;
      if (rel > res.max_relative_error) {
        res.max_relative_error = rel;
        res.worst = p.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return res;
}

}  // namespace mulr::nn
