// Serial reference kernels against their OpenMP counterparts. The second
// benchmark argument is the thread count for the parallel runs.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "roomforge/reference.hpp"
#include "test_support.hpp"

namespace {

using namespace roomforge;

const ManifestParse& manifest() {
  static const ManifestParse m = parse_manifest(rftest::synthetic_manifest(4000, 9), LabelSchema::default_schema());
  return m;
}

const std::vector<bucketing::ImageDims>& dims() {
  static const auto out = [] {
    rftest::Draw d(5);
    std::vector<bucketing::ImageDims> v;
    for (int i = 0; i < 200000; ++i) v.push_back({"i" + std::to_string(i), d.between(1, 8000), d.between(1, 8000)});
    return v;
  }();
  return out;
}

const bucketing::BucketPlan& plan() {
  static const auto p = bucketing::generate_buckets({32, 256, 1536, 1 << 20});
  return p;
}

const metrics::FeatureSet& features() {
  static const auto f = [] {
    rftest::Draw d(7);
    metrics::FeatureSet out{2000, 256, std::vector<double>(2000 * 256)};
    for (auto& v : out.values) v = d.uniform(-1, 1);
    return out;
  }();
  return f;
}

const std::vector<std::string>& captions() {
  static const auto texts = [] {
    std::vector<std::string> out;
    for (const auto& r : manifest().records) out.push_back(captioning::compose_caption(r.caption));
    return out;
  }();
  return texts;
}

const std::vector<fusion::TensorArchive>& archives() {
  static const auto loaded = [] {
    rftest::Draw d(11);
    std::vector<fusion::TensorArchive> v(3);
    for (auto& a : v) {
      for (int k = 0; k < 16; ++k) {
        std::vector<float> w(256 * 256);
        for (auto& x : w) x = static_cast<float>(d.uniform(-1, 1));
        a.tensors["block." + std::to_string(k)] = fusion::Tensor::from_f32({256, 256}, w);
      }
    }
    return v;
  }();
  return loaded;
}

fusion::MergeRecipe recipe() {
  const auto& a = archives();
  return {{{"a", &a[0], 0.5}, {"b", &a[1], 0.3}, {"c", &a[2], 0.2}}};
}

void threads(benchmark::State& state) { omp_set_num_threads(static_cast<int>(state.range(0))); }

void BM_FilterSerial(benchmark::State& state) {
  const auto& rules = quality::default_rules();
  for (auto _ : state) benchmark::DoNotOptimize(reference::filter_manifest(manifest(), rules));
}
void BM_FilterParallel(benchmark::State& state) {
  threads(state);
  const auto& rules = quality::default_rules();
  for (auto _ : state) benchmark::DoNotOptimize(quality::filter_manifest(manifest(), rules));
}

void BM_AssignSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(reference::assign_buckets(dims(), plan()));
}
void BM_AssignParallel(benchmark::State& state) {
  threads(state);
  for (auto _ : state) benchmark::DoNotOptimize(bucketing::assign_buckets(dims(), plan()));
}

void BM_StatsSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(reference::gaussian_stats(features()));
}
void BM_StatsParallel(benchmark::State& state) {
  threads(state);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::gaussian_stats(features()));
}

void BM_TokenizeSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(reference::tokenize_batch(rftest::clip_vocab(), captions()));
}
void BM_TokenizeParallel(benchmark::State& state) {
  threads(state);
  for (auto _ : state) benchmark::DoNotOptimize(captioning::tokenize_batch(rftest::clip_vocab(), captions()));
}

void BM_MergeSerial(benchmark::State& state) {
  const auto r = recipe();
  for (auto _ : state) benchmark::DoNotOptimize(reference::merge(r));
}
void BM_MergeParallel(benchmark::State& state) {
  threads(state);
  const auto r = recipe();
  for (auto _ : state) benchmark::DoNotOptimize(fusion::merge(r));
}

BENCHMARK(BM_FilterSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FilterParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_AssignSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AssignParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_StatsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StatsParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_TokenizeSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TokenizeParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_MergeSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MergeParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
