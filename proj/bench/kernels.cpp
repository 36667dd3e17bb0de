// Serial reference kernels against their OpenMP versions.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <numeric>
#include <random>

#include "hfsnn/market_data.hpp"
#include "hfsnn/snn.hpp"
#include "hfsnn/supervised.hpp"

using namespace hfsnn;

namespace {

FeatureMatrix random_features(std::size_t rows, std::size_t cols) {
    std::vector<ChannelLabel> labels;
    for (std::size_t c = 0; c < cols; ++c) labels.push_back({"x" + std::to_string(c), 0, ChannelSign::kUnsigned});
    FeatureMatrix fm(rows, labels);
    std::mt19937_64 g(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) fm.at(r, c) = u(g);
    return fm;
}

void threads(benchmark::State& state) {
    omp_set_num_threads(static_cast<int>(state.range(0)));
    state.counters["threads"] = static_cast<double>(state.range(0));
}

void BM_EncodeSerial(benchmark::State& state) {
    const FeatureMatrix fm = random_features(20'000, 2);
    for (auto _ : state) benchmark::DoNotOptimize(serial::encode_poisson(fm, 20, 7));
}

void BM_EncodeParallel(benchmark::State& state) {
    threads(state);
    const FeatureMatrix fm = random_features(20'000, 2);
    for (auto _ : state) benchmark::DoNotOptimize(encode_poisson(fm, 20, 7));
}

const SpikeTensor& inference_input() {
    static const SpikeTensor s = encode_poisson(random_features(5'000, 2), 20, 3);
    return s;
}

const NetworkState& inference_net() {
    static const NetworkState n = init_network(Topology::model1(64), LifParams{0.8, 0.8, 1}, 5);
    return n;
}

void BM_InferSerial(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(serial::infer_counts(inference_net(), inference_input()));
}

void BM_InferParallel(benchmark::State& state) {
    threads(state);
    for (auto _ : state) benchmark::DoNotOptimize(infer_counts(inference_net(), inference_input()));
}

struct GradientCase {
    TrainConfig config;
    NetworkState net;
    SpikeTensor spikes;
    std::vector<std::uint8_t> labels;
    std::vector<std::size_t> indices;
};

const GradientCase& gradient_case() {
    static const GradientCase gc = [] {
        GradientCase c;
        c.config.n_hidden = 64;
        c.spikes = encode_poisson(random_features(256, 6), 20, 9);
        c.net = make_supervised_network(6, c.config);
        c.labels.resize(256);
        for (std::size_t i = 0; i < 256; ++i) c.labels[i] = static_cast<std::uint8_t>(i % 2);
        c.indices.resize(256);
        std::iota(c.indices.begin(), c.indices.end(), 0);
        return c;
    }();
    return gc;
}

void BM_GradientSerial(benchmark::State& state) {
    const GradientCase& c = gradient_case();
    for (auto _ : state)
        benchmark::DoNotOptimize(serial::batch_gradient(c.net, c.spikes, c.labels, c.indices, c.config));
}

void BM_GradientParallel(benchmark::State& state) {
    threads(state);
    const GradientCase& c = gradient_case();
    for (auto _ : state) benchmark::DoNotOptimize(batch_gradient(c.net, c.spikes, c.labels, c.indices, c.config));
}

}  // namespace

BENCHMARK(BM_EncodeSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EncodeParallel)->Arg(1)->Arg(2)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_InferSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_InferParallel)->Arg(1)->Arg(2)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GradientSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GradientParallel)->Arg(1)->Arg(2)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
