#include <benchmark/benchmark.h>

#include "mulr/embed.hpp"
#include "mulr/synthetic.hpp"

namespace {

using namespace mulr;

const OrderProbeCorpus &probe_corpus() {
  static const OrderProbeCorpus corpus = [] {
    OrderProbeSpec spec;
    spec.entities_per_class = 100;
    spec.sentences_per_entity = 10;
    return generate_order_corpus(spec);
  }();
  return corpus;
}

// One SGNS epoch over ~2000 sentences; arg 1 selects the positional model.
void BM_SgnsEpoch(benchmark::State &state) {
  const auto &corpus = probe_corpus();
  auto vocab = build_vocabulary(corpus.stream, 1);
  SgnsConfig cfg;
  cfg.dim = 50;
  cfg.negatives = 5;
  cfg.epochs = 1;
  cfg.positional = state.range(0) != 0;
  cfg.table_size = 100'000;
  for (auto _ : state) benchmark::DoNotOptimize(train_sgns(corpus.stream, vocab, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(corpus.stream.token_count()));
}
BENCHMARK(BM_SgnsEpoch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_SubwordEpoch(benchmark::State &state) {
  const auto &corpus = probe_corpus();
  auto vocab = build_vocabulary(corpus.stream, 1);
  auto index = SubwordIndex::build(vocab, 3, 6, 1);
  SgnsConfig cfg;
  cfg.dim = 50;
  cfg.negatives = 5;
  cfg.epochs = 1;
  cfg.table_size = 100'000;
  for (auto _ : state) benchmark::DoNotOptimize(train_subword_sgns(corpus.stream, vocab, index, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(corpus.stream.token_count()));
}
BENCHMARK(BM_SubwordEpoch)->Unit(benchmark::kMillisecond);

}  // namespace
