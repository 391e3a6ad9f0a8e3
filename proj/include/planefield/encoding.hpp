#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "planefield/field.hpp"
#include "planefield/tensor.hpp"

namespace planefield {

/// One-blob encoding of a single [-1, 1] coordinate into `bins` values: each
/// bin holds the mass of a Gaussian (std = 1/bins) centred at the coordinate
/// (remapped to [0, 1]) that falls inside the bin's interval.
void oneblob_coordinate(double coord, std::size_t bins, std::span<double> out);

/// Encodes (x, y, z, tau); length 4 * bins.
std::vector<double> oneblob_encode(const Point4& p, std::size_t bins);

/// Row-per-point encoding matrix (n x 4*bins).
Tensor oneblob_encode(std::span<const Point4> points, std::size_t bins);

}  // namespace planefield
