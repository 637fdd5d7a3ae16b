// SPDX-License-Identifier: Apache-2.0
#include "axllm/workload.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "axllm/error.hpp"
#include "axllm/matrix_io.hpp"

namespace axllm {

void DistributionSpec::validate() const {
  if (kind == Kind::File) {
    if (path.empty()) throw InvalidArgument("distribution: file source needs a path");
    return;
  }
  if (!(spread > 0.0) || !std::isfinite(spread)) {
    throw InvalidArgument("distribution: spread must be a positive finite number");
  }
}

std::string to_string(DistributionSpec::Kind kind) {
  switch (kind) {
    case DistributionSpec::Kind::Uniform: return "uniform";
    case DistributionSpec::Kind::Gaussian: return "gaussian";
    case DistributionSpec::Kind::Laplace: return "laplace";
    case DistributionSpec::Kind::File: return "file";
  }
  return "?";
}

DistributionSpec::Kind parse_distribution_kind(const std::string& name) {
  if (name == "uniform") return DistributionSpec::Kind::Uniform;
  if (name == "gaussian") return DistributionSpec::Kind::Gaussian;
  if (name == "laplace") return DistributionSpec::Kind::Laplace;
  if (name == "file") return DistributionSpec::Kind::File;
  throw InvalidArgument("unknown distribution kind '" + name + "'");
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  std::vector<std::uint32_t> words{std::uint32_t(base), std::uint32_t(base >> 32)};
  for (auto p : path) {
    words.push_back(std::uint32_t(p));
    words.push_back(std::uint32_t(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (std::uint64_t(out[0]) << 32) | out[1];
}

namespace {

// Draws n values in quantization steps.
std::vector<double> draw_steps(const DistributionSpec& spec, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> z(n);
  switch (spec.kind) {
    case DistributionSpec::Kind::Uniform: {
      std::uniform_real_distribution<double> d(-spec.spread, spec.spread);
      for (auto& v : z) v = d(rng);
      break;
    }
    case DistributionSpec::Kind::Gaussian: {
      std::normal_distribution<double> d(0.0, spec.spread);
      for (auto& v : z) v = d(rng);
      break;
    }
    case DistributionSpec::Kind::Laplace: {
      std::exponential_distribution<double> mag(1.0 / spec.spread);
      std::bernoulli_distribution neg(0.5);
      for (auto& v : z) {
        const double m = mag(rng);
        v = neg(rng) ? -m : m;
      }
      break;
    }
    case DistributionSpec::Kind::File:
      throw InvalidArgument("draw_steps: file source has no distribution");
  }
  return z;
}

}  // namespace

QuantizedMatrix gen_weights(const DistributionSpec& spec, std::size_t rows, std::size_t cols,
                            std::uint64_t seed) {
  spec.validate();
  if (rows == 0 || cols == 0) throw InvalidArgument("gen_weights: rows and cols must be positive");
  if (spec.kind == DistributionSpec::Kind::File) {
    QuantizedMatrix m = read_matrix(spec.path);
    if (m.rows != rows || m.cols != cols) {
      std::ostringstream os;
      os << "gen_weights: " << spec.path << " is " << m.rows << "x" << m.cols << ", expected "
         << rows << "x" << cols;
      throw InvalidArgument(os.str());
    }
    return m;
  }
  auto z = draw_steps(spec, rows * cols, spec.seed.value_or(seed));
  // z is already in steps; rounding it is quantization against kSyntheticScale.
  std::vector<std::int8_t> codes(z.size());
  std::transform(z.begin(), z.end(), codes.begin(), [](double v) { return quantize_value(v, 1.0); });
  return QuantizedMatrix(rows, cols, std::move(codes), kSyntheticScale);
}

QuantizedMatrix gen_weights(const DistributionSpec& spec, std::size_t rows, std::size_t cols) {
  return gen_weights(spec, rows, cols, spec.seed.value_or(0));
}

QuantizedVector gen_input(const DistributionSpec& spec, std::size_t length, std::uint64_t seed) {
  spec.validate();
  if (spec.kind == DistributionSpec::Kind::File) {
    throw InvalidArgument("gen_input: activations must come from a synthetic distribution");
  }
  QuantizedVector x;
  x.scale = kSyntheticScale;
  x.data.reserve(length);
  for (double v : draw_steps(spec, length, seed)) x.data.push_back(quantize_value(v, 1.0));
  return x;
}

void WorkloadSpec::validate() const {
  if (tokens == 0) throw InvalidArgument("workload: tokens must be >= 1");
  if (layers.empty()) throw InvalidArgument("workload: no layers");
  input.validate();
  if (input.kind == DistributionSpec::Kind::File) {
    throw InvalidArgument("workload: input distribution cannot be a file");
  }
  std::set<std::string> layer_names;
  for (const auto& layer : layers) {
    const std::string where = "workload layer '" + layer.name + "': ";
    if (!layer_names.insert(layer.name).second) {
      throw InvalidArgument("workload: duplicate layer name '" + layer.name + "'");
    }
    if (layer.matrices.empty()) throw InvalidArgument(where + "no matrices");
    std::map<std::string, const MatrixSpec*> by_name;
    for (const auto& m : layer.matrices) {
      if (m.rows == 0 || m.cols == 0) {
        throw InvalidArgument(where + "matrix '" + m.name + "' has an empty shape");
      }
      m.source.validate();
      if (!by_name.emplace(m.name, &m).second) {
        throw InvalidArgument(where + "duplicate matrix name '" + m.name + "'");
      }
    }
    std::set<std::string> adapted;
    for (const auto& l : layer.lora) {
      auto it = by_name.find(l.target);
      if (it == by_name.end()) {
        throw InvalidArgument(where + "LoRA target '" + l.target + "' is not a matrix here");
      }
      if (!adapted.insert(l.target).second) {
        throw InvalidArgument(where + "two adaptors on '" + l.target + "'");
      }
      if (l.rank == 0) throw InvalidArgument(where + "LoRA rank must be >= 1");
      if (l.rank > it->second->cols) {
        throw InvalidArgument(where + "LoRA rank exceeds the target's column count");
      }
      l.a.validate();
      l.b.validate();
    }
  }
}

std::vector<std::string> preset_names() {
  return {"distilbert-proxy", "bert-base-proxy", "bert-large-proxy", "llama7b-proxy",
          "llama13b-proxy",   "square-768",      "square-1024",      "square-4096",
          "square-5120"};
}

namespace {

struct Shape {
  std::size_t layers;
  std::size_t hidden;
  std::size_t ffn;  // 0: square preset with a single matrix
  bool gated;
};

Shape preset_shape(const std::string& name) {
  static const std::map<std::string, Shape> shapes{
      {"distilbert-proxy", {6, 768, 3072, false}},  {"bert-base-proxy", {12, 768, 3072, false}},
      {"bert-large-proxy", {24, 1024, 4096, false}}, {"llama7b-proxy", {32, 4096, 11008, true}},
      {"llama13b-proxy", {40, 5120, 13824, true}},   {"square-768", {1, 768, 0, false}},
      {"square-1024", {1, 1024, 0, false}},          {"square-4096", {1, 4096, 0, false}},
      {"square-5120", {1, 5120, 0, false}},
  };
  auto it = shapes.find(name);
  if (it == shapes.end()) throw InvalidArgument("unknown preset '" + name + "'");
  return it->second;
}

}  // namespace

WorkloadSpec preset_workload(const std::string& name, const DistributionSpec& weights,
                             std::uint64_t tokens, std::uint64_t seed,
                             std::optional<std::size_t> layers, std::size_t lora_rank) {
  const Shape shape = preset_shape(name);
  WorkloadSpec w;
  w.name = name;
  w.tokens = tokens;
  w.seed = seed;
  const std::size_t n_layers = layers.value_or(shape.layers);
  if (n_layers == 0) throw InvalidArgument("preset: layer count must be >= 1");
  const std::size_t h = shape.hidden;
  for (std::size_t l = 0; l < n_layers; ++l) {
    LayerSpec layer;
    layer.name = "layer" + std::to_string(l);
    if (shape.ffn == 0) {
      layer.matrices.push_back({"w", h, h, weights});
    } else {
      for (const char* m : {"q", "k", "v", "o"}) layer.matrices.push_back({m, h, h, weights});
      if (shape.gated) {
        layer.matrices.push_back({"gate", h, shape.ffn, weights});
        layer.matrices.push_back({"up", h, shape.ffn, weights});
        layer.matrices.push_back({"down", shape.ffn, h, weights});
      } else {
        layer.matrices.push_back({"ffn1", h, shape.ffn, weights});
        layer.matrices.push_back({"ffn2", shape.ffn, h, weights});
      }
    }
    if (lora_rank > 0) {
      const auto targets = shape.ffn == 0 ? std::vector<std::string>{"w"}
                                          : std::vector<std::string>{"q", "v"};
      for (const auto& t : targets) layer.lora.push_back({t, lora_rank, weights, weights});
    }
    w.layers.push_back(std::move(layer));
  }
  w.validate();
  return w;
}

MaterializedWorkload materialize(const WorkloadSpec& spec) {
  spec.validate();
  MaterializedWorkload out;
  out.spec = spec;
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const auto& layer = spec.layers[li];
    for (std::size_t mi = 0; mi < layer.matrices.size(); ++mi) {
      const auto& m = layer.matrices[mi];
      MaterializedMatrix mm;
      mm.layer = layer.name;
      mm.name = m.name;
      mm.weights = gen_weights(m.source, m.rows, m.cols, derive_seed(spec.seed, {1, li, mi}));
      for (const auto& l : layer.lora) {
        if (l.target != m.name) continue;
        auto a = gen_weights(l.a, m.rows, l.rank, derive_seed(spec.seed, {2, li, mi}));
        // A joins W in one code space.
        if (a.scale != mm.weights.scale) a = requantize(a, mm.weights.scale);
        mm.lora_a = std::move(a);
        mm.lora_b = gen_weights(l.b, l.rank, m.cols, derive_seed(spec.seed, {3, li, mi}));
      }
      out.matrices.push_back(std::move(mm));
    }
  }
  return out;
}

}  // namespace axllm
