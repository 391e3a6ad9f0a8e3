#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "planefield/decoder.hpp"
#include "planefield/field.hpp"

namespace planefield {

struct ModelSpec {
  std::vector<std::size_t> resolutions;
  std::size_t feat_dim = 32;
  std::size_t frame_count = 1;
  std::size_t oneblob_bins = 16;
  std::size_t hidden_width = 64;
  std::size_t hidden_layers = 2;
};

/// Plane field plus decoder: maps space-time points to (density, color).
struct RadianceModel {
  ModelSpec spec;
  FieldSet field;
  DecoderNet decoder;
};

RadianceModel make_model(const ModelSpec& spec, std::uint64_t seed);

struct NamedTensor {
  std::string name;
  Tensor* tensor = nullptr;
};

/// Every tensor of the model in a fixed order (checkpoint and optimizer order).
std::vector<NamedTensor> named_tensors(RadianceModel& model, const std::string& prefix);

struct ModelVars {
  FieldVars field;
  DecoderVars decoder;
};

ModelVars bind(ad::Graph& g, RadianceModel& model);

/// Density (n x 1) and color (n x 3) at a batch of points.
DecodedBatch query(ad::Graph& g, const RadianceModel& model, const ModelVars& vars,
                   std::span<const Point4> points, QueryDiagnostics* diag = nullptr);

}  // namespace planefield
