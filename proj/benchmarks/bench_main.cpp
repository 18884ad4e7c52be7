#include <benchmark/benchmark.h>

#include "formatbias/estimator.hpp"
#include "formatbias/extractor.hpp"
#include "formatbias/format_registry.hpp"

namespace fb = formatbias;

static void BM_ScoreWrapped(benchmark::State& state) {
  const fb::FormatSpec& fmt = fb::get_format("wrap.special");
  std::string output =
      "The reasoning is long and winding, but in the end the conclusion "
      "is clear. <ANSWER>42 apples</ANSWER> That is all.";
  for (auto _ : state) {
    auto verdict = fb::score_format(output, fmt);
    benchmark::DoNotOptimize(verdict);
  }
}
BENCHMARK(BM_ScoreWrapped);

static void BM_ScoreJsonMapping(benchmark::State& state) {
  const fb::FormatSpec& fmt = fb::get_format("map.json");
  std::string output =
      R"({"Task": ["image classification", "object detection"], )"
      R"("Method": ["ResNet"], "Material": ["ImageNet"], "Metric": ["accuracy"]})";
  for (auto _ : state) {
    auto verdict = fb::score_format(output, fmt, nullptr, &fmt.map_schema);
    benchmark::DoNotOptimize(verdict);
  }
}
BENCHMARK(BM_ScoreJsonMapping);

static void BM_Aggregate(benchmark::State& state) {
  std::vector<fb::EvalRecord> records;
  for (int i = 0; i < 1000; ++i) {
    fb::EvalRecord r;
    r.sample_id = "s" + std::to_string(i);
    r.follows = i % 4 != 0;
    if (r.follows) r.score = (i % 10) / 10.0;
    records.push_back(std::move(r));
  }
  for (auto _ : state) {
    auto cell = fb::aggregate(records);
    benchmark::DoNotOptimize(cell);
  }
}
BENCHMARK(BM_Aggregate);

static void BM_TCritical(benchmark::State& state) {
  for (auto _ : state) {
    double v = fb::t_critical(0.05, 149);
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(BM_TCritical);

BENCHMARK_MAIN();
