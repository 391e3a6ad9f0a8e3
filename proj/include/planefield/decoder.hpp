#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "planefield/graph.hpp"

namespace planefield {

/// Tiny MLP mapping [fused features | encoding] to (density, rgb) pre-activations.
struct DecoderNet {
  std::size_t input_dim = 0;
  std::size_t hidden_width = 0;
  std::vector<Tensor> weights;  // in x out
  std::vector<Tensor> biases;   // out

  static constexpr std::size_t kOutputDim = 4;
  std::size_t hidden_layers() const { return weights.empty() ? 0 : weights.size() - 1; }
};

DecoderNet init_decoder(std::size_t input_dim, std::size_t hidden_width, std::size_t hidden_layers,
                        std::uint64_t seed);

struct DecoderVars {
  std::vector<ad::Var> weights;
  std::vector<ad::Var> biases;
};

DecoderVars bind(ad::Graph& g, DecoderNet& net);

/// Activated outputs of a batch: density (n x 1, softplus) and color (n x 3, sigmoid).
struct DecodedBatch {
  ad::Var density;
  ad::Var color;
};

DecodedBatch decode(ad::Graph& g, const DecoderNet& net, const DecoderVars& vars, ad::Var input);

struct Decoded {
  double density = 0;
  std::array<double, 3> color{};
};

/// Single-point evaluation; `fused` comes first in the input, then `encoding`.
Decoded decode(DecoderNet& net, std::span<const double> fused, std::span<const double> encoding);

}  // namespace planefield
