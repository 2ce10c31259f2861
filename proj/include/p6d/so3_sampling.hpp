#pragma once

#include <cstddef>
#include <vector>

#include "p6d/geometry.hpp"
#include "p6d/random.hpp"

namespace p6d {

/// Deterministic super-Fibonacci spiral over unit quaternions (Alexa 2022).
/// Output depends only on n.
std::vector<Rotation> sample_so3(std::size_t n);

/// Haar-uniform random rotation.
Rotation random_rotation(Rng& rng);

/// Coverage statistics of a rotation set, in degrees.
struct So3Coverage {
  double mean_query_to_nearest = 0.0;   // mean over random queries
  double max_query_to_nearest = 0.0;    // empirical covering radius
  double mean_sample_spacing = 0.0;     // mean sample-to-nearest-other-sample
};

So3Coverage so3_coverage(const std::vector<Rotation>& samples, std::size_t n_queries,
                         std::uint64_t seed);

}  // namespace p6d
