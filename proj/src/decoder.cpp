#include "planefield/decoder.hpp"

#include <cmath>
#include <string>

#include "planefield/errors.hpp"
#include "planefield/rng.hpp"

namespace planefield {

DecoderNet init_decoder(std::size_t input_dim, std::size_t hidden_width, std::size_t hidden_layers,
                        std::uint64_t seed) {
  if (input_dim == 0 || hidden_width == 0)
    throw ContractViolation("init_decoder: dimensions must be positive");
  DecoderNet net;
  net.input_dim = input_dim;
  net.hidden_width = hidden_width;
  Rng rng(seed);
  std::size_t fan_in = input_dim;
  for (std::size_t layer = 0; layer <= hidden_layers; ++layer) {
    const std::size_t fan_out = layer == hidden_layers ? DecoderNet::kOutputDim : hidden_width;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor w({fan_in, fan_out});
    Tensor b({fan_out});
    for (auto& v : w.values()) v = rng.uniform(-bound, bound);
    for (auto& v : b.values()) v = rng.uniform(-bound, bound);
    w.set_requires_grad(true);
    b.set_requires_grad(true);
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
    fan_in = fan_out;
  }
  return net;
}

DecoderVars bind(ad::Graph& g, DecoderNet& net) {
  DecoderVars vars;
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    vars.weights.push_back(g.parameter(net.weights[i]));
    vars.biases.push_back(g.parameter(net.biases[i]));
  }
  return vars;
}

DecodedBatch decode(ad::Graph& g, const DecoderNet& net, const DecoderVars& vars, ad::Var input) {
  if (input.shape().size() != 2 || input.shape()[1] != net.input_dim)
    throw ContractViolation("decode: input " + shape_string(input.shape()) + " does not match decoder input " +
                            std::to_string(net.input_dim));
  ad::Var h = input;
  for (std::size_t i = 0; i < vars.weights.size(); ++i) {
    h = g.affine(h, vars.weights[i], vars.biases[i]);
    if (i + 1 < vars.weights.size()) h = g.relu(h);
  }
  // Column selectors split the 4 raw outputs into density and color.
  Tensor pick_density({4, 1}, 0.0);
  pick_density[0] = 1.0;
  Tensor pick_color({4, 3}, 0.0);
  for (std::size_t c = 0; c < 3; ++c) pick_color[(c + 1) * 3 + c] = 1.0;
  ad::Var raw_density = g.matmul(h, g.constant(std::move(pick_density)));
  ad::Var raw_color = g.matmul(h, g.constant(std::move(pick_color)));
  return {g.softplus(raw_density), g.sigmoid(raw_color)};
}

Decoded decode(DecoderNet& net, std::span<const double> fused, std::span<const double> encoding) {
  if (fused.size() + encoding.size() != net.input_dim)
    throw ContractViolation("decode: input length " + std::to_string(fused.size() + encoding.size()) +
                            " does not match decoder input " + std::to_string(net.input_dim));
  std::vector<double> in(fused.begin(), fused.end());
  in.insert(in.end(), encoding.begin(), encoding.end());
  ad::Graph g;
  auto vars = bind(g, net);
  auto out = decode(g, net, vars, g.constant(Tensor({1, net.input_dim}, std::move(in))));
  Decoded d;
  d.density = out.density.value()[0];
  for (std::size_t c = 0; c < 3; ++c) d.color[c] = out.color.value()[c];
  return d;
}

}  // namespace planefield
