#include "p6d/kdtree.hpp"

#include <cmath>

namespace p6d {

namespace {

template <int Dim>
std::vector<double> nearest_impl(std::span<const Eigen::Matrix<double, Dim, 1>> queries,
                                 std::span<const Eigen::Matrix<double, Dim, 1>> references) {
  const KdTree<Dim> tree(references);
  std::vector<double> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(std::sqrt(tree.nearest(q).first));
  return out;
}

}  // namespace

std::vector<double> nearest_distances(std::span<const Vec3> queries,
                                      std::span<const Vec3> references) {
  return nearest_impl<3>(queries, references);
}

std::vector<double> nearest_distances(std::span<const Vec2> queries,
                                      std::span<const Vec2> references) {
  return nearest_impl<2>(queries, references);
}

}  // namespace p6d
