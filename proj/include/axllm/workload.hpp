// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "axllm/quantizer.hpp"

namespace axllm {

/// Gaussian spread (in quantization steps) whose 256-wide row segments hold
/// about 77 distinct magnitudes, i.e. roughly 70% reuse at 256-entry
/// buffers. See docs/workloads.md for how it was fixed.
inline constexpr double kTunedGaussianSpread = 37.25;

/// Weight source. Synthetic kinds draw z in quantization steps and store
/// z / 127 on a full-scale-1.0 grid, so spread is independent of matrix
/// size: Gaussian sigma, Laplace b, or uniform half-width, all in steps.
struct DistributionSpec {
  enum class Kind { Uniform, Gaussian, Laplace, File };

  Kind kind = Kind::Gaussian;
  double spread = kTunedGaussianSpread;
  std::string path;             // Kind::File only
  std::optional<std::uint64_t> seed;  // unset: derived from the workload seed

  void validate() const;
  friend bool operator==(const DistributionSpec&, const DistributionSpec&) = default;
};

std::string to_string(DistributionSpec::Kind kind);
DistributionSpec::Kind parse_distribution_kind(const std::string& name);

/// Full-scale grid used by the synthetic generators.
inline constexpr double kSyntheticScale = 1.0 / kMaxCode;

/// Deterministic per seed. File sources must match rows x cols.
QuantizedMatrix gen_weights(const DistributionSpec& spec, std::size_t rows, std::size_t cols);
QuantizedMatrix gen_weights(const DistributionSpec& spec, std::size_t rows, std::size_t cols,
                            std::uint64_t seed);
QuantizedVector gen_input(const DistributionSpec& spec, std::size_t length, std::uint64_t seed);

/// Mixes a base seed with a path of integers (layer, matrix, token, ...).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path);

struct MatrixSpec {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  DistributionSpec source;

  friend bool operator==(const MatrixSpec&, const MatrixSpec&) = default;
};

struct LoraSpec {
  std::string target;  // name of a matrix in the same layer
  std::size_t rank = 0;
  DistributionSpec a;
  DistributionSpec b;

  friend bool operator==(const LoraSpec&, const LoraSpec&) = default;
};

struct LayerSpec {
  std::string name;
  std::vector<MatrixSpec> matrices;
  std::vector<LoraSpec> lora;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct WorkloadSpec {
  std::string name = "custom";
  std::vector<LayerSpec> layers;
  std::uint64_t tokens = 1;
  std::uint64_t seed = 1;
  DistributionSpec input{DistributionSpec::Kind::Gaussian, 32.0, {}, {}};
  std::uint64_t layer_overhead_cycles = 0;  // non-matmul work, per layer per token

  /// Shapes, names, LoRA targets and rank chains. Throws InvalidArgument.
  void validate() const;
  friend bool operator==(const WorkloadSpec&, const WorkloadSpec&) = default;
};

/// Shape presets standing in for the evaluated models. These are proxies:
/// shapes are real, weights come from `weights`.
std::vector<std::string> preset_names();
/// lora_rank > 0 attaches rank-r adaptors to the q and v projections.
WorkloadSpec preset_workload(const std::string& name, const DistributionSpec& weights,
                             std::uint64_t tokens = 1, std::uint64_t seed = 1,
                             std::optional<std::size_t> layers = std::nullopt,
                             std::size_t lora_rank = 0);

struct MaterializedMatrix {
  std::string layer;
  std::string name;
  QuantizedMatrix weights;
  std::optional<QuantizedMatrix> lora_a;  // on the weights' scale
  std::optional<QuantizedMatrix> lora_b;
};

struct MaterializedWorkload {
  WorkloadSpec spec;
  std::vector<MaterializedMatrix> matrices;  // layer-major order
};

MaterializedWorkload materialize(const WorkloadSpec& spec);

}  // namespace axllm
