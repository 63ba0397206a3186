#pragma once

#include "dbot/clustering.hpp"
#include "dbot/types.hpp"

#include <cstdint>
#include <vector>

namespace dbot {

/// Draws counts[c] points around centers.row(c) with isotropic Gaussian noise
/// of the given standard deviation; labels record the component.
PointDataset sample_gaussian_mixture(const Matrix& centers, double stddev,
                                     const std::vector<int>& counts, std::uint64_t seed);

/// k centers evenly spaced on a circle of the given radius.
Matrix circle_centers(int k, double radius);

}  // namespace dbot
