#include "planefield/model.hpp"

#include "planefield/encoding.hpp"
#include "planefield/rng.hpp"

namespace planefield {

RadianceModel make_model(const ModelSpec& spec, std::uint64_t seed) {
  RadianceModel model;
  model.spec = spec;
  model.field = init_fieldset({spec.resolutions, spec.feat_dim, spec.frame_count}, derive_seed(seed, 1));
  const std::size_t input_dim = model.field.fused_dim() + 4 * spec.oneblob_bins;
  model.decoder = init_decoder(input_dim, spec.hidden_width, spec.hidden_layers, derive_seed(seed, 2));
  return model;
}

std::vector<NamedTensor> named_tensors(RadianceModel& model, const std::string& prefix) {
  std::vector<NamedTensor> out;
  for (std::size_t l = 0; l < model.field.levels.size(); ++l)
    for (auto& plane : model.field.levels[l].planes)
      out.push_back({prefix + "field.l" + std::to_string(l) + "." + plane_name(plane.axes), &plane.data});
  for (std::size_t i = 0; i < model.decoder.weights.size(); ++i) {
    out.push_back({prefix + "decoder.fc" + std::to_string(i) + ".weight", &model.decoder.weights[i]});
    out.push_back({prefix + "decoder.fc" + std::to_string(i) + ".bias", &model.decoder.biases[i]});
  }
  return out;
}

ModelVars bind(ad::Graph& g, RadianceModel& model) {
  return {bind(g, model.field), bind(g, model.decoder)};
}

DecodedBatch query(ad::Graph& g, const RadianceModel& model, const ModelVars& vars,
                   std::span<const Point4> points, QueryDiagnostics* diag) {
  ad::Var fused = fuse(g, model.field, vars.field, points, diag);
  ad::Var enc = g.constant(oneblob_encode(points, model.spec.oneblob_bins));
  return decode(g, model.decoder, vars.decoder, g.concat({fused, enc}));
}

}  // namespace planefield
