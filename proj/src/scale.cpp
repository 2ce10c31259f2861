#include "p6d/scale.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "p6d/error.hpp"
#include "p6d/io.hpp"

namespace p6d {

void DepthMap::set(int x, int y, double d) {
  const auto i = static_cast<std::size_t>(y) * width + x;
  values[i] = d;
  valid[i] = d > 0.0 && std::isfinite(d);
}

DepthMap read_depth(const std::filesystem::path& path) {
  const Tensor t = read_tensor(path);
  if (t.shape.size() != 2) throw_data(path.string() + ": depth map must have shape [h, w]");
  DepthMap d(static_cast<int>(t.shape[1]), static_cast<int>(t.shape[0]));
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x < d.width; ++x) d.set(x, y, t.data[static_cast<std::size_t>(y) * d.width + x]);
  return d;
}

void write_depth(const std::filesystem::path& path, const DepthMap& depth) {
  Tensor t{{static_cast<std::size_t>(depth.height), static_cast<std::size_t>(depth.width)}, {}};
  t.data.reserve(depth.values.size());
  for (std::size_t i = 0; i < depth.values.size(); ++i)
    t.data.push_back(depth.valid[i] ? static_cast<float>(depth.values[i]) : 0.0f);
  write_tensor(path, t);
}

ExtentMode parse_extent_mode(const std::string& s) {
  if (s == "half") return ExtentMode::HalfExtent;
  if (s == "range") return ExtentMode::FullRange;
  throw_usage("extent mode must be 'half' or 'range', got '" + s + "'");
}

double relative_scale(const DepthMap& depth, const BinaryMask& mask, const CameraIntrinsics& k,
                      ExtentMode mode) {
  validate(k);
  if (depth.width != mask.width || depth.height != mask.height)
    throw_data("depth map and mask sizes differ");
  std::vector<Vec3> cloud;
  for (int y = 0; y < depth.height; ++y)
    for (int x = 0; x < depth.width; ++x) {
      const auto i = static_cast<std::size_t>(y) * depth.width + x;
      if (mask.bits[i] && depth.valid[i])
        cloud.push_back(backproject({x + 0.5, y + 0.5}, depth.values[i], k));
    }
  if (cloud.size() < 10) throw_numerical("degenerate object cloud");

  Vec3 mean = Vec3::Zero();
  for (const auto& p : cloud) mean += p;
  mean /= static_cast<double>(cloud.size());
  Mat3 scatter = Mat3::Zero();
  for (const auto& p : cloud) scatter += (p - mean) * (p - mean).transpose();
  const Eigen::JacobiSVD<Mat3> svd(scatter, Eigen::ComputeFullU);
  const Vec3 axis = svd.matrixU().col(0);

  double lo = 0.0, hi = 0.0, far = 0.0;
  for (const auto& p : cloud) {
    const double s = axis.dot(p - mean);
    lo = std::min(lo, s);
    hi = std::max(hi, s);
    far = std::max(far, std::abs(s));
  }
  return mode == ExtentMode::HalfExtent ? far : hi - lo;
}

void ScaleDatabase::add(const std::string& text, double scale_m, std::span<const float> e) {
  if (!(scale_m > 0.0) || !std::isfinite(scale_m)) throw_data("scale for '" + text + "' must be positive");
  if (dim == 0) dim = e.size();
  if (e.size() != dim || dim == 0) throw_data("embedding dimension mismatch for '" + text + "'");
  double n2 = 0.0;
  for (float x : e) n2 += static_cast<double>(x) * x;
  const double n = std::sqrt(n2);
  if (!(n > 0.0)) throw_data("zero embedding for '" + text + "'");
  texts.push_back(text);
  scales.push_back(scale_m);
  for (float x : e) embeddings.push_back(static_cast<float>(x / n));
}

ScaleDatabase load_scale_database(const std::filesystem::path& jsonl,
                                  const std::filesystem::path& embeddings) {
  const auto lines = read_json_lines(jsonl);
  const Tensor emb = read_tensor(embeddings);
  if (emb.shape.size() != 2 || emb.shape[0] != lines.size())
    throw_data(embeddings.string() + ": expected shape [" + std::to_string(lines.size()) + ", dim]");
  ScaleDatabase db;
  const std::size_t dim = emb.shape[1];
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      db.add(lines[i].at("text").get<std::string>(), lines[i].at("scale_m").get<double>(),
             std::span<const float>(emb.data.data() + i * dim, dim));
    } catch (const Json::exception& e) {
      throw_data(jsonl.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return db;
}

void save_scale_database(const ScaleDatabase& db, const std::filesystem::path& jsonl,
                         const std::filesystem::path& embeddings) {
  std::ofstream out(jsonl, std::ios::binary);
  if (!out) throw_data("cannot write " + jsonl.string());
  for (std::size_t i = 0; i < db.size(); ++i) {
    out << Json{{"scale_m", db.scales[i]}, {"text", db.texts[i]}}.dump() << '\n';
  }
  write_tensor(embeddings, Tensor{{db.size(), db.dim}, db.embeddings});
}

double median(std::vector<double> v) {
  if (v.empty()) throw_data("median of empty set");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double lower_median(std::vector<double> v) {
  if (v.empty()) throw_data("median of empty set");
  const std::size_t mid = (v.size() - 1) / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  return v[mid];
}

double lookup_metric_scale(std::span<const float> embedding, const ScaleDatabase& db,
                           std::size_t k_neighbors) {
  if (db.size() == 0) throw_data("empty scale database");
  if (k_neighbors == 0) throw_usage("k_neighbors must be at least 1");
  if (embedding.size() != db.dim)
    throw_data("embedding dimension " + std::to_string(embedding.size()) +
               " does not match scale database dimension " + std::to_string(db.dim));
  std::vector<double> scores(db.size());
  for (std::size_t i = 0; i < db.size(); ++i) {
    const auto e = db.embedding(i);
    double d = 0.0;
    for (std::size_t c = 0; c < db.dim; ++c) d += static_cast<double>(embedding[c]) * e[c];
    scores[i] = d;
  }
  std::vector<std::size_t> order(db.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t k = std::min(k_neighbors, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
                    });
  std::vector<double> picked;
  picked.reserve(k);
  for (std::size_t i = 0; i < k; ++i) picked.push_back(db.scales[order[i]]);
  return lower_median(std::move(picked));
}

GlobalScale global_rescale(std::span<const ScaleObservation> observations) {
  std::vector<double> ratios;
  for (const auto& o : observations) {
    if (!(o.relative > 0.0) || !std::isfinite(o.relative)) throw_data("relative scale must be positive");
    if (o.metric) {
      if (!(*o.metric > 0.0)) throw_data("metric scale must be positive");
      ratios.push_back(*o.metric / o.relative);
    }
  }
  if (ratios.empty()) throw_data("no object has both a relative and a metric scale");
  GlobalScale g;
  g.rho = median(std::move(ratios));
  g.scales.reserve(observations.size());
  for (const auto& o : observations) g.scales.push_back(o.relative * g.rho);
  return g;
}

}  // namespace p6d
