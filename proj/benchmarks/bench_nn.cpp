#include <benchmark/benchmark.h>

#include "mulr/nn.hpp"
#include "mulr/rng.hpp"

namespace {

using namespace mulr;

Matrix random_input(std::size_t rows, std::size_t cols, Rng &rng) {
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = rng.uniform(-1.0, 1.0);
  }
  return m;
}

// Default CLR(CNN) shape: 40 characters of dim 10, widths 1..7, 50 filters each.
void BM_ConvForward(benchmark::State &state) {
  Rng rng(1);
  nn::ConvFilterBank bank(10, {1, 2, 3, 4, 5, 6, 7}, static_cast<std::size_t>(state.range(0)));
  bank.init(rng);
  auto input = random_input(40, 10, rng);
  for (auto _ : state) benchmark::DoNotOptimize(bank.forward(input));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ConvForward)->Arg(20)->Arg(50);

void BM_ConvBackward(benchmark::State &state) {
  Rng rng(1);
  nn::ConvFilterBank bank(10, {1, 2, 3, 4, 5, 6, 7}, 50);
  bank.init(rng);
  auto input = random_input(40, 10, rng);
  nn::ConvFilterBank::Cache cache;
  bank.forward(input, &cache);
  Vec grad(bank.output_dim(), 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(bank.backward(input, cache, grad));
}
BENCHMARK(BM_ConvBackward);

void BM_LstmForward(benchmark::State &state) {
  Rng rng(1);
  const auto hidden = static_cast<std::size_t>(state.range(0));
  nn::LstmCell cell(70, hidden);
  cell.init(rng);
  auto input = random_input(40, 70, rng);
  Vec zero(hidden, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(cell.forward(input, zero, zero));
  state.SetItemsProcessed(state.iterations() * 40);
}
BENCHMARK(BM_LstmForward)->Arg(50)->Arg(200);

void BM_LstmBackward(benchmark::State &state) {
  Rng rng(1);
  nn::LstmCell cell(70, 50);
  cell.init(rng);
  auto input = random_input(40, 70, rng);
  Vec zero(50, 0.0);
  nn::LstmCell::Trace trace;
  auto out = cell.forward(input, zero, zero, &trace);
  Vec grad(50, 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(cell.backward(input, trace, grad));
}
BENCHMARK(BM_LstmBackward);

}  // namespace
