// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "axllm/error.hpp"
#include "axllm/json_io.hpp"
#include "axllm/matrix_io.hpp"
#include "axllm/workload.hpp"
#include "support.hpp"

using namespace axllm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "axllm_unit";
  fs::create_directories(dir);
  return dir / name;
}

DistributionSpec dist(DistributionSpec::Kind k, double spread) {
  DistributionSpec d;
  d.kind = k;
  d.spread = spread;
  return d;
}

}  // namespace

TEST_CASE("generators are deterministic per seed and stay in range") {
  for (auto k : {DistributionSpec::Kind::Uniform, DistributionSpec::Kind::Gaussian,
                 DistributionSpec::Kind::Laplace}) {
    const auto d = dist(k, 40.0);
    const auto a = gen_weights(d, 30, 70, 11);
    CHECK(a == gen_weights(d, 30, 70, 11));
    CHECK(a != gen_weights(d, 30, 70, 12));
    CHECK(a.scale == kSyntheticScale);
    CHECK_NOTHROW(a.validate());
  }
  auto pinned = dist(DistributionSpec::Kind::Gaussian, 10.0);
  pinned.seed = 5;
  CHECK(gen_weights(pinned, 4, 4, 1) == gen_weights(pinned, 4, 4, 2));
  CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
  CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
}

TEST_CASE("uniform weights at full spread hit the closed-form unique count") {
  // Uniform codes in [-127, 127]: magnitude 0 has mass 1/255, the rest 2/255.
  std::vector<double> p(128, 2.0 / 255.0);
  p[0] = 1.0 / 255.0;
  const double expect = testing::expected_uniques(p, 512);
  const auto w = gen_weights(dist(DistributionSpec::Kind::Uniform, 127.5), 1000, 512, 3);
  double mean = 0.0;
  for (std::size_t r = 0; r < w.rows; ++r) {
    const auto row = w.row(r);
    mean += double(testing::distinct_magnitudes(row.begin(), row.end()));
  }
  mean /= double(w.rows);
  CHECK(mean == doctest::Approx(expect).epsilon(0.003));
}

TEST_CASE("gaussian spread controls the unique count as the closed form predicts") {
  for (double sigma : {8.0, 20.0, kTunedGaussianSpread}) {
    const double expect =
        testing::expected_uniques(testing::gaussian_magnitude_probs(sigma), 256);
    const auto w = gen_weights(dist(DistributionSpec::Kind::Gaussian, sigma), 800, 256, 4);
    double mean = 0.0;
    for (std::size_t r = 0; r < w.rows; ++r) {
      const auto row = w.row(r);
      mean += double(testing::distinct_magnitudes(row.begin(), row.end()));
    }
    mean /= double(w.rows);
    CHECK(mean == doctest::Approx(expect).epsilon(0.01));
  }
}

TEST_CASE("distribution validation and names") {
  CHECK_THROWS_AS(dist(DistributionSpec::Kind::Gaussian, 0.0).validate(), InvalidArgument);
  CHECK_THROWS_AS(dist(DistributionSpec::Kind::Gaussian, NAN).validate(), InvalidArgument);
  CHECK_THROWS_AS(dist(DistributionSpec::Kind::File, 1.0).validate(), InvalidArgument);
  CHECK(parse_distribution_kind("laplace") == DistributionSpec::Kind::Laplace);
  CHECK(to_string(DistributionSpec::Kind::Uniform) == "uniform");
  CHECK_THROWS_AS(parse_distribution_kind("cauchy"), InvalidArgument);
  CHECK_THROWS_AS(gen_input(dist(DistributionSpec::Kind::File, 1.0), 4, 1), InvalidArgument);
}

TEST_CASE("AXLM round trip and error paths") {
  testing::Gen g(2);
  auto m = g.matrix(7, 13);
  m.scale = 0.0123;
  const auto bytes = encode_matrix(m);
  CHECK(bytes.size() == kMatrixHeaderBytes + 7 * 13);
  CHECK(decode_matrix(bytes) == m);

  const auto path = scratch("rt.axlm");
  write_matrix(path, m);
  CHECK(read_matrix(path) == m);
  CHECK_FALSE(fs::exists(path.string() + ".tmp"));

  auto bad = bytes;
  bad[0] = 'B';
  CHECK_THROWS_WITH_AS(decode_matrix(bad), doctest::Contains("bad magic"), InvalidArgument);
  bad = bytes;
  bad.pop_back();
  CHECK_THROWS_WITH_AS(decode_matrix(bad), doctest::Contains("truncated"), InvalidArgument);
  bad = bytes;
  bad.push_back(0);
  CHECK_THROWS_WITH_AS(decode_matrix(bad), doctest::Contains("size mismatch"), InvalidArgument);
  bad = bytes;
  bad[kMatrixHeaderBytes + 5] = 0x80;
  CHECK_THROWS_WITH_AS(decode_matrix(bad), doctest::Contains("-128"), InvalidArgument);
  bad = bytes;
  bad[4] = 9;
  CHECK_THROWS_WITH_AS(decode_matrix(bad), doctest::Contains("version"), InvalidArgument);
  CHECK_THROWS_AS(decode_matrix({'A', 'X'}), InvalidArgument);
  CHECK_THROWS_AS(read_matrix(scratch("missing.axlm")), InvalidArgument);

  // File sources must match the declared shape.
  DistributionSpec f;
  f.kind = DistributionSpec::Kind::File;
  f.path = path.string();
  CHECK(gen_weights(f, 7, 13) == m);
  CHECK_THROWS_AS(gen_weights(f, 13, 7), InvalidArgument);
}

TEST_CASE("workload validation") {
  auto w = preset_workload("square-768", {}, 1, 1, std::nullopt, 4);
  CHECK_NOTHROW(w.validate());
  auto dup = w;
  dup.layers[0].matrices.push_back(dup.layers[0].matrices[0]);
  CHECK_THROWS_AS(dup.validate(), InvalidArgument);
  auto orphan = w;
  orphan.layers[0].lora[0].target = "nope";
  CHECK_THROWS_AS(orphan.validate(), InvalidArgument);
  auto wide = w;
  wide.layers[0].lora[0].rank = 769;
  CHECK_THROWS_AS(wide.validate(), InvalidArgument);
  auto none = w;
  none.tokens = 0;
  CHECK_THROWS_AS(none.validate(), InvalidArgument);
  CHECK_THROWS_AS(preset_workload("gpt-9", {}), InvalidArgument);
}

TEST_CASE("presets carry the model shapes") {
  const auto d = preset_workload("distilbert-proxy", {});
  CHECK(d.layers.size() == 6);
  std::set<std::pair<std::size_t, std::size_t>> shapes;
  for (const auto& m : d.layers[0].matrices) shapes.insert({m.rows, m.cols});
  CHECK(shapes == std::set<std::pair<std::size_t, std::size_t>>{{768, 768}, {768, 3072}, {3072, 768}});
  CHECK(preset_workload("bert-base-proxy", {}).layers.size() == 12);
  CHECK(preset_workload("llama7b-proxy", {}).layers.size() == 32);
  CHECK(preset_workload("llama7b-proxy", {}, 1, 1, 2).layers.size() == 2);
  for (const auto& name : preset_names()) CHECK_NOTHROW(preset_workload(name, {}).validate());
}

TEST_CASE("materialize is deterministic and matches generator seeds") {
  const auto spec = preset_workload("square-768", {}, 1, 9, std::nullopt, 3);
  const auto a = materialize(spec);
  const auto b = materialize(spec);
  REQUIRE(a.matrices.size() == 1);
  CHECK(a.matrices[0].weights == b.matrices[0].weights);
  CHECK(a.matrices[0].lora_a->cols == 3);
  CHECK(a.matrices[0].lora_b->rows == 3);
  CHECK(a.matrices[0].lora_a->scale == a.matrices[0].weights.scale);
}

TEST_CASE("JSON round trips") {
  auto w = preset_workload("distilbert-proxy", dist(DistributionSpec::Kind::Laplace, 12.0), 3,
                           7, 2, 4);
  w.layer_overhead_cycles = 55;
  const auto j = to_json(w);
  CHECK(j["schema"] == kWorkloadSchema);
  CHECK(workload_from_json(parse_json(dump(j), "t")) == w);

  AcceleratorConfig c;
  c.lanes = 32;
  c.slices.num_slices = 2;
  c.slices.slice_size = 128;
  c.slices.skip_blocked_heads = true;
  c.timing.mult_latency = 5;
  c.energy.e_mult = 7.5;
  const auto back = config_from_json(parse_json(dump(to_json(c)), "t"));
  CHECK(to_json(back) == to_json(c));
  CHECK(dump(to_json(c)).back() == '\n');
}

TEST_CASE("JSON readers name unknown keys and wrong types") {
  auto j = to_json(AcceleratorConfig{});
  j["slices"]["colour"] = 1;
  CHECK_THROWS_WITH_AS(config_from_json(j), doctest::Contains("config.slices: unknown key 'colour'"), InvalidArgument);
  j = to_json(AcceleratorConfig{});
  j["lanes"] = "many";
  CHECK_THROWS_WITH_AS(config_from_json(j), doctest::Contains("lanes"), InvalidArgument);
  j = to_json(AcceleratorConfig{});
  j["schema"] = "axllm-config/0";
  CHECK_THROWS_AS(config_from_json(j), InvalidArgument);

  auto w = to_json(preset_workload("square-768", {}));
  w["layers"][0]["matrices"][0]["colz"] = 3;
  CHECK_THROWS_WITH_AS(workload_from_json(w), doctest::Contains("colz"), InvalidArgument);
  CHECK_THROWS_AS(parse_json("{", "broken"), InvalidArgument);
}
