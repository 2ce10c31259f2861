#include "p6d/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "p6d/error.hpp"
#include "p6d/random.hpp"

namespace p6d {

std::array<Vec3, 3> TriangleMesh::metric_triangle(std::size_t i) const {
  const auto& t = triangles[i];
  return {metric_vertex(t[0]), metric_vertex(t[1]), metric_vertex(t[2])};
}

TriangleMesh TriangleMesh::metric() const {
  TriangleMesh out = *this;
  for (auto& v : out.vertices) v *= scale;
  out.scale = 1.0;
  return out;
}

void validate(const TriangleMesh& mesh) {
  if (mesh.triangles.empty()) throw_data("mesh has no triangles");
  if (!(mesh.scale > 0.0) || !std::isfinite(mesh.scale))
    throw_data("mesh scale must be positive");
  for (const auto& v : mesh.vertices)
    if (!v.allFinite()) throw_data("mesh has non-finite vertices");
  const auto n = mesh.vertices.size();
  for (const auto& t : mesh.triangles)
    for (auto idx : t)
      if (idx >= n) throw_data("triangle index out of range");
}

double surface_area(const TriangleMesh& mesh) {
  double area = 0.0;
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto [a, b, c] = mesh.metric_triangle(i);
    area += 0.5 * (b - a).cross(c - a).norm();
  }
  return area;
}

namespace {

std::uint32_t parse_face_index(const std::string& token, std::size_t n_vertices,
                               const std::filesystem::path& path) {
  const std::string head = token.substr(0, token.find('/'));
  long idx = 0;
  try {
    idx = std::stol(head);
  } catch (const std::exception&) {
    throw_data(path.string() + ": bad face index '" + token + "'");
  }
  if (idx < 0) idx = static_cast<long>(n_vertices) + idx + 1;
  if (idx < 1 || static_cast<std::size_t>(idx) > n_vertices)
    throw_data(path.string() + ": face index out of range");
  return static_cast<std::uint32_t>(idx - 1);
}

}  // namespace

TriangleMesh load_obj(const std::filesystem::path& path, double scale) {
  std::ifstream in(path);
  if (!in) throw_data("cannot open mesh " + path.string());
  TriangleMesh mesh;
  mesh.scale = scale;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z()))
        throw_data(path.string() + ": malformed vertex");
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<std::string> tokens;
      std::string tok;
      while (ls >> tok) tokens.push_back(tok);
      if (tokens.size() != 3)
        throw_data(path.string() + ": only triangle faces are supported");
      std::array<std::uint32_t, 3> tri{};
      for (int k = 0; k < 3; ++k)
        tri[k] = parse_face_index(tokens[k], mesh.vertices.size(), path);
      mesh.triangles.push_back(tri);
    }
  }
  validate(mesh);
  return mesh;
}

void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw_data("cannot write mesh " + path.string());
  out << std::setprecision(17);
  for (const auto& v : mesh.vertices)
    out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles)
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

std::vector<Vec3> sample_mesh_surface(const TriangleMesh& mesh, std::size_t n,
                                      std::uint64_t seed) {
  validate(mesh);
  if (n == 0) throw_data("sample count must be positive");
  std::vector<double> cdf(mesh.triangles.size());
  double total = 0.0;
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto [a, b, c] = mesh.metric_triangle(i);
    total += 0.5 * (b - a).cross(c - a).norm();
    cdf[i] = total;
  }
  if (!(total > 0.0)) throw_data("mesh has zero surface area");

  Rng rng(seed);
  std::vector<Vec3> out;
  out.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double pick = rng.uniform() * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), pick);
    if (it == cdf.end()) --it;
    const auto [a, b, c] = mesh.metric_triangle(static_cast<std::size_t>(it - cdf.begin()));
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    out.push_back((1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c);
  }
  return out;
}

std::vector<Vec3> transform_points(const Pose& pose, const std::vector<Vec3>& points) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  const Mat3 r = pose.rotation.matrix();
  for (const auto& p : points) out.push_back(r * p + pose.translation);
  return out;
}

}  // namespace p6d
