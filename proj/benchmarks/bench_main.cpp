#include <benchmark/benchmark.h>

#include <filesystem>

#include "tsgan/data.hpp"
#include "tsgan/losses.hpp"
#include "tsgan/networks.hpp"
#include "tsgan/rng.hpp"
#include "tsgan/trainer.hpp"

namespace {

using namespace tsgan;

Tensor<float> random_float(Shape shape, std::uint64_t seed, bool grad = false) {
    SplitMix64 rng(seed);
    std::vector<float> v(static_cast<std::size_t>(shape.numel()));
    for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
    return Tensor<float>::from_data(shape, std::move(v), grad);
}

void BM_Conv2d(benchmark::State& state) {
    const auto c = state.range(0), hw = state.range(1);
    const auto x = random_float({2, c, hw, hw}, 1);
    const auto w = random_float({c, c, 3, 3}, 2);
    const auto b = Tensor<float>::zeros({c, 1, 1, 1});
    NoGradGuard guard;
    for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, b, {.padding = 1}));
    state.SetItemsProcessed(state.iterations() * 2 * c * c * 9 * hw * hw * 2);
}
BENCHMARK(BM_Conv2d)->Args({32, 64})->Args({64, 32})->Args({256, 4})->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
    const auto c = state.range(0), hw = state.range(1);
    const auto x = random_float({2, c, hw, hw}, 1, true);
    const auto w = random_float({c, c, 3, 3}, 2, true);
    const auto b = Tensor<float>::zeros({c, 1, 1, 1}, true);
    for (auto _ : state) {
        auto y = sum(conv2d(x, w, b, {.padding = 1}));
        y.backward();
    }
}
BENCHMARK(BM_Conv2dBackward)->Args({32, 64})->Args({256, 4})->Unit(benchmark::kMillisecond);

void BM_ConvTranspose2d(benchmark::State& state) {
    const auto c = state.range(0), hw = state.range(1);
    const auto x = random_float({2, c, hw, hw}, 3);
    const auto w = random_float({c, c / 2, 4, 4}, 4);
    const auto b = Tensor<float>::zeros({c / 2, 1, 1, 1});
    NoGradGuard guard;
    for (auto _ : state) benchmark::DoNotOptimize(conv_transpose2d(x, w, b, 2, 1));
}
BENCHMARK(BM_ConvTranspose2d)->Args({256, 4})->Args({64, 16})->Unit(benchmark::kMillisecond);

void BM_EncoderForward(benchmark::State& state) {
    auto model = build_model<float>(NetworkConfig{}, 1);
    const auto x = random_float({1, 3, state.range(0), state.range(0)}, 5);
    NoGradGuard guard;
    for (auto _ : state) benchmark::DoNotOptimize(encoder_forward(model, 1, x));
}
BENCHMARK(BM_EncoderForward)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_DecoderForward(benchmark::State& state) {
    auto model = build_model<float>(NetworkConfig{}, 1);
    const auto page = data::synth_webpage(1, state.range(0), state.range(0));
    const auto outline = outline_levels<float>(model.config, page.image);
    NoGradGuard guard;
    const auto features = encoder_forward(model, 1, page.image.cast<float>());
    for (auto _ : state) benchmark::DoNotOptimize(decoder_forward(model, 1, features, outline, NormMode::eval));
}
BENCHMARK(BM_DecoderForward)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_Predict(benchmark::State& state) {
    auto model = build_model<float>(NetworkConfig{}, 1);
    const auto page = data::synth_webpage(1, state.range(0), state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(predict(model, page.image));
}
BENCHMARK(BM_Predict)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_TrainEpoch(benchmark::State& state) {
    const auto dir = std::filesystem::temp_directory_path() / "tsgan_bench_train";
    TrainConfig c;
    c.epochs = 1;
    c.dataset = "synthetic:2";
    c.checkpoint_dir = (dir / "ckpt").string();
    c.log_path = (dir / "log.csv").string();
    for (auto _ : state) {
        state.PauseTiming();
        Trainer t(c);
        state.ResumeTiming();
        t.run_epoch();  // one step at batch 2, plus a checkpoint write
    }
    std::filesystem::remove_all(dir);
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace
BENCHMARK_MAIN();
