#include "dbot/synthetic.hpp"

#include <cmath>
#include <random>

namespace dbot {

PointDataset sample_gaussian_mixture(const Matrix& centers, double stddev,
                                     const std::vector<int>& counts, std::uint64_t seed) {
  if (static_cast<Index>(counts.size()) != centers.rows())
    throw DbotError("mixture: one count per center required");
  int total = 0;
  for (int c : counts) {
    if (c < 0) throw DbotError("mixture: negative count");
    total += c;
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, stddev);

  PointDataset data;
  data.points.resize(total, centers.cols());
  std::vector<int> labels;
  labels.reserve(static_cast<size_t>(total));

  Index row = 0;
  for (Index c = 0; c < centers.rows(); ++c) {
    for (int i = 0; i < counts[static_cast<size_t>(c)]; ++i, ++row) {
      for (Index dd = 0; dd < centers.cols(); ++dd)
        data.points(row, dd) = centers(c, dd) + noise(rng);
      labels.push_back(static_cast<int>(c));
    }
  }
  data.labels = std::move(labels);
  return data;
}

Matrix circle_centers(int k, double radius) {
  Matrix centers(k, 2);
  for (int c = 0; c < k; ++c) {
    const double angle = 2.0 * M_PI * static_cast<double>(c) / static_cast<double>(k);
    centers(c, 0) = radius * std::cos(angle);
    centers(c, 1) = radius * std::sin(angle);
  }
  return centers;
}

}  // namespace dbot
