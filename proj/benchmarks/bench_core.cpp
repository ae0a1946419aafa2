/*
 * Copyright (c) 2026, the spheredepth authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <benchmark/benchmark.h>

#include "sphdepth/caf_decoder.hpp"
#include "sphdepth/erp_transfer.hpp"
#include "sphdepth/healpix_grid.hpp"
#include "sphdepth/random.hpp"
#include "sphdepth/synth_data.hpp"

namespace {

using namespace sphdepth;

void BM_GridBuild(benchmark::State& state) {
  const int nside = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(SphericalGrid(nside));
  state.SetItemsProcessed(state.iterations() * 12 * nside * nside);
}
BENCHMARK(BM_GridBuild)->Arg(8)->Arg(32)->Arg(128);

void BM_ForwardTable(benchmark::State& state) {
  const SphericalGrid g(32);
  for (auto _ : state) benchmark::DoNotOptimize(build_forward_table(g, 1024, 512));
}
BENCHMARK(BM_ForwardTable)->Unit(benchmark::kMillisecond);

void BM_InverseTable(benchmark::State& state) {
  const SphericalGrid g(32);
  for (auto _ : state) benchmark::DoNotOptimize(build_inverse_table(g, 1024, 512));
}
BENCHMARK(BM_InverseTable)->Unit(benchmark::kMillisecond);

void BM_Resample(benchmark::State& state) {
  const SphericalGrid g(32);
  const TransferTable t = build_forward_table(g, 1024, 512);
  Matrix x(1024 * 512, static_cast<std::size_t>(state.range(0)), 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(resample(t, x));
}
BENCHMARK(BM_Resample)->Arg(1)->Arg(16)->Unit(benchmark::kMicrosecond);

void BM_CafForward(benchmark::State& state) {
  const int nside = static_cast<int>(state.range(0));
  const std::size_t channels = 32;
  const LevelTopology level = LevelTopology::from_grid(SphericalGrid(nside), 2, SpeCoords::XYZ);
  CafParams p(channels, 3, 4, 2);
  Rng rng(1);
  p.visit("", [&](const std::string&, Matrix& m) {
    for (double& v : m.values()) v = rng.uniform(-0.3, 0.3);
  });
  Matrix f0(level.npix(), channels);
  Matrix f1(level.npix(), channels);
  for (double& v : f0.values()) v = rng.uniform(-1.0, 1.0);
  for (double& v : f1.values()) v = rng.uniform(-1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(caf_forward(p, level, f0, f1));
}
BENCHMARK(BM_CafForward)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_Render(benchmark::State& state) {
  const BoxScene s = random_scene(3);
  for (auto _ : state) benchmark::DoNotOptimize(render_erp(s, 256, 128));
}
BENCHMARK(BM_Render)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
