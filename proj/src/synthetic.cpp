#include "p6d/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "p6d/error.hpp"
#include "p6d/io.hpp"
#include "p6d/pose_align.hpp"
#include "p6d/raster.hpp"
#include "p6d/scale.hpp"
#include "p6d/so3_sampling.hpp"

namespace p6d {

namespace fs = std::filesystem;

namespace {

using Tri = std::array<std::uint32_t, 3>;

// Winding so that normals point away from the origin (convex, centered meshes).
void orient_outward(TriangleMesh& mesh) {
  for (Tri& t : mesh.triangles) {
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3& b = mesh.vertices[t[1]];
    const Vec3& c = mesh.vertices[t[2]];
    if ((b - a).cross(c - a).dot(a + b + c) < 0.0) std::swap(t[1], t[2]);
  }
}

}  // namespace

TriangleMesh make_icosphere(int subdivisions) {
  if (subdivisions < 0) throw_usage("subdivisions must be non-negative");
  const double p = (1.0 + std::sqrt(5.0)) / 2.0;
  TriangleMesh m;
  m.vertices = {{-1, p, 0}, {1, p, 0}, {-1, -p, 0}, {1, -p, 0}, {0, -1, p}, {0, 1, p},
                {0, -1, -p}, {0, 1, -p}, {p, 0, -1}, {p, 0, 1}, {-p, 0, -1}, {-p, 0, 1}};
  m.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                 {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                 {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (auto& v : m.vertices) v.normalize();
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> mid;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      const auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
      const auto id = static_cast<std::uint32_t>(m.vertices.size() - 1);
      mid.emplace(key, id);
      return id;
    };
    std::vector<Tri> next;
    for (const Tri& t : m.triangles) {
      const auto ab = midpoint(t[0], t[1]), bc = midpoint(t[1], t[2]), ca = midpoint(t[2], t[0]);
      next.push_back({t[0], ab, ca});
      next.push_back({t[1], bc, ab});
      next.push_back({t[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    m.triangles = std::move(next);
  }
  orient_outward(m);
  return m;
}

TriangleMesh make_box(const Vec3& h) {
  TriangleMesh m;
  for (int i = 0; i < 8; ++i)
    m.vertices.emplace_back(i & 1 ? h.x() : -h.x(), i & 2 ? h.y() : -h.y(), i & 4 ? h.z() : -h.z());
  m.triangles = {{0, 1, 3}, {0, 3, 2}, {4, 5, 7}, {4, 7, 6}, {0, 1, 5}, {0, 5, 4},
                 {2, 3, 7}, {2, 7, 6}, {0, 2, 6}, {0, 6, 4}, {1, 3, 7}, {1, 7, 5}};
  orient_outward(m);
  return m;
}

TriangleMesh make_cylinder(double radius, double half_height, int segments) {
  if (segments < 3) throw_usage("cylinder needs at least 3 segments");
  TriangleMesh m;
  const auto n = static_cast<std::uint32_t>(segments);
  for (std::uint32_t i = 0; i < n; ++i) {
    const double a = 2.0 * std::numbers::pi * i / n;
    m.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), -half_height);
    m.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), half_height);
  }
  const std::uint32_t bottom = 2 * n, top = 2 * n + 1;
  m.vertices.emplace_back(0.0, 0.0, -half_height);
  m.vertices.emplace_back(0.0, 0.0, half_height);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t j = (i + 1) % n;
    m.triangles.push_back({2 * i, 2 * j, 2 * j + 1});
    m.triangles.push_back({2 * i, 2 * j + 1, 2 * i + 1});
    m.triangles.push_back({bottom, 2 * j, 2 * i});
    m.triangles.push_back({top, 2 * i + 1, 2 * j + 1});
  }
  orient_outward(m);
  return m;
}

TriangleMesh scaled(TriangleMesh mesh, const Vec3& factors) {
  for (auto& v : mesh.vertices) v = v.cwiseProduct(factors);
  return mesh;
}

FeatureField::FeatureField(std::size_t dim, double frequency, std::uint64_t seed) {
  Rng rng(seed);
  w_.resize(static_cast<Eigen::Index>(dim), 3);
  b_.resize(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < w_.rows(); ++i) {
    for (int c = 0; c < 3; ++c) w_(i, c) = rng.normal(0.0, frequency);
    b_[i] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
}

void FeatureField::accumulate(const Vec3& p, double* out) const {
  for (Eigen::Index i = 0; i < w_.rows(); ++i)
    out[i] += std::cos(w_(i, 0) * p.x() + w_(i, 1) * p.y() + w_(i, 2) * p.z() + b_[i]);
}

BoundingBox projected_bbox(const TriangleMesh& mesh, const Pose& pose, const CameraIntrinsics& k) {
  Vec2 lo = Vec2::Constant(std::numeric_limits<double>::infinity());
  Vec2 hi = -lo;
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec2 u = project(pose * mesh.metric_vertex(i), k);
    lo = lo.cwiseMin(u);
    hi = hi.cwiseMax(u);
  }
  return {0.5 * (lo.x() + hi.x()), 0.5 * (lo.y() + hi.y()), hi.x() - lo.x(), hi.y() - lo.y()};
}

PatchGrid render_patch_grid(const TriangleMesh& mesh, const Pose& pose, const CameraIntrinsics& k,
                            const BoundingBox& crop, const FeatureField& field, std::size_t rows,
                            std::size_t cols, int ppp) {
  if (!(crop.w > 0.0) || !(crop.h > 0.0)) throw_data("crop must have positive size");
  CameraIntrinsics kc;
  kc.width = static_cast<int>(cols) * ppp;
  kc.height = static_cast<int>(rows) * ppp;
  const double sx = kc.width / crop.w;
  const double sy = kc.height / crop.h;
  if (std::abs(sx - sy) > 1e-9 * sx) throw_data("crop aspect must match the grid aspect");
  kc.f = k.f * sx;
  kc.cx = (k.cx - (crop.cx - 0.5 * crop.w)) * sx;
  kc.cy = (k.cy - (crop.cy - 0.5 * crop.h)) * sx;
  const DepthRender r = render_depth(mesh, pose, kc);

  const std::size_t dim = field.dim();
  PatchGrid grid(rows, cols, dim);
  std::vector<double> acc(rows * cols * dim, 0.0);
  std::vector<int> hits(rows * cols, 0);
  for (int y = 0; y < kc.height; ++y)
    for (int x = 0; x < kc.width; ++x) {
      if (!r.hit(x, y)) continue;
      const std::size_t patch = static_cast<std::size_t>(y / ppp) * cols + static_cast<std::size_t>(x / ppp);
      ++hits[patch];
      field.accumulate(r.model_points[static_cast<std::size_t>(y) * kc.width + x] / mesh.scale,
                       acc.data() + patch * dim);
    }
  for (std::size_t p = 0; p < rows * cols; ++p) {
    if (2 * hits[p] < ppp * ppp) continue;
    grid.foreground[p] = 1;
    for (std::size_t c = 0; c < dim; ++c)
      grid.data[p * dim + c] = static_cast<float>(acc[p * dim + c] / hits[p]);
  }
  return grid;
}

Extents view_extents(const TriangleMesh& mesh, const Rotation& r) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& v : mesh.vertices) {
    const Vec3 x = r * v;
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  const Vec3 e = hi - lo;
  return {e.x(), e.y(), e.z()};
}

ObjectEntry make_object_entry(const std::string& id, const TriangleMesh& mesh,
                              const FeatureField& field, const TemplateOptions& o) {
  TriangleMesh native = mesh;
  native.scale = 1.0;
  validate(native);
  double radius = 0.0;
  for (const auto& v : native.vertices) radius = std::max(radius, v.norm());

  CameraIntrinsics k;
  k.f = 500.0;
  k.width = k.height = 420;
  k.cx = k.cy = 210.0;
  ObjectEntry e;
  e.object_id = id;
  for (const Rotation& r : sample_so3(o.views)) {
    const Pose pose(r, Vec3(0.0, 0.0, 4.0 * radius));
    const BoundingBox crop = query_crop(projected_bbox(native, pose, k), o.padding);
    ViewRecord v;
    v.rotation = r;
    v.grid = render_patch_grid(native, pose, k, crop, field, o.rows, o.cols, o.pixels_per_patch);
    v.extents = view_extents(native, r);
    v.cls_token.assign(field.dim(), 0.0f);
    const double n = static_cast<double>(std::max<std::size_t>(1, v.grid.foreground_count()));
    for (std::size_t p = 0; p < v.grid.patch_count(); ++p)
      if (v.grid.foreground[p])
        for (std::size_t c = 0; c < field.dim(); ++c)
          v.cls_token[c] += static_cast<float>(v.grid.data[p * field.dim() + c] / n);
    e.views.push_back(std::move(v));
  }
  compute_descriptors(e);
  return e;
}

PatchGrid render_query(const TriangleMesh& mesh, const Pose& pose, const CameraIntrinsics& k,
                       const FeatureField& field, const TemplateOptions& o) {
  const BinaryMask mask = rasterize_silhouette(mesh, pose, k);
  const auto bbox = mask_bbox(mask);
  if (!bbox) throw_data("object is not visible");
  const BoundingBox crop = query_crop(*bbox, o.padding);
  PatchGrid grid = render_patch_grid(mesh, pose, k, crop, field, o.rows, o.cols, o.pixels_per_patch);
  grid.foreground = patch_foreground(mask, crop, o.rows, o.cols);
  return grid;
}

std::optional<Vec3> raycast(const TriangleMesh& mesh, const Pose& pose, const CameraIntrinsics& k,
                            const Vec2& pixel) {
  const Vec3 dir((pixel.x() - k.cx) / k.f, (pixel.y() - k.cy) / k.f, 1.0);
  const Mat3 r = pose.rotation.matrix();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    auto c = mesh.metric_triangle(t);
    for (auto& v : c) v = r * v + pose.translation;
    // Moller-Trumbore.
    const Vec3 e1 = c[1] - c[0], e2 = c[2] - c[0];
    const Vec3 pv = dir.cross(e2);
    const double det = e1.dot(pv);
    if (std::abs(det) < 1e-15) continue;
    const double inv = 1.0 / det;
    const Vec3 tv = -c[0];
    const double u = tv.dot(pv) * inv;
    if (u < 0.0 || u > 1.0) continue;
    const Vec3 qv = tv.cross(e1);
    const double v = dir.dot(qv) * inv;
    if (v < 0.0 || u + v > 1.0) continue;
    const double s = e2.dot(qv) * inv;
    if (s > 0.0 && s < best) best = s;
  }
  if (!std::isfinite(best)) return std::nullopt;
  return pose.inverse() * (best * dir);
}

std::vector<TrackFrame> oracle_tracks(const TriangleMesh& mesh, std::span<const Pose> poses,
                                      std::span<const int> frame_indices, const CameraIntrinsics& k,
                                      std::span<const Vec2> seed_pixels, std::size_t init_frame,
                                      const OracleTrackOptions& options) {
  if (poses.size() != frame_indices.size()) throw_data("pose and frame index counts differ");
  if (init_frame >= poses.size()) throw_data("init frame out of range");
  std::vector<std::optional<Vec3>> surface;
  for (const Vec2& u : seed_pixels) surface.push_back(raycast(mesh, poses[init_frame], k, u));

  Rng rng(options.seed);
  std::vector<TrackFrame> frames;
  for (std::size_t f = 0; f < poses.size(); ++f) {
    TrackFrame tf;
    tf.index = frame_indices[f];
    for (std::size_t i = 0; i < seed_pixels.size(); ++i) {
      const bool dropped = rng.uniform() < options.occlusion;
      const double nx = rng.normal(0.0, options.noise_px), ny = rng.normal(0.0, options.noise_px);
      Vec2 u(0.0, 0.0);
      bool vis = false;
      if (surface[i]) {
        const Vec3 x = poses[f] * *surface[i];
        if (x.z() > 0.0) {
          u = project(x, k);
          const bool inside = u.x() >= 0.0 && u.y() >= 0.0 && u.x() < k.width && u.y() < k.height;
          if (inside) {
            const auto front = raycast(mesh, poses[f], k, u);
            vis = front && (poses[f] * *front).z() >= x.z() * (1.0 - 1e-6);
          }
          u += Vec2(nx, ny);
        }
      }
      tf.points.push_back(u);
      tf.visible.push_back(vis && !dropped);
    }
    frames.push_back(std::move(tf));
  }
  return frames;
}

namespace {

Tensor grid_tensor(const PatchGrid& g) {
  return Tensor{{g.rows, g.cols, g.dim}, g.data};
}

std::vector<float> unit_random(Rng& rng, std::size_t dim) {
  std::vector<float> v(dim);
  double n2 = 0.0;
  for (auto& x : v) {
    x = static_cast<float>(rng.normal());
    n2 += static_cast<double>(x) * x;
  }
  for (auto& x : v) x = static_cast<float>(x / std::sqrt(n2));
  return v;
}

std::vector<float> perturbed(const std::vector<float>& v, double sigma, Rng& rng) {
  std::vector<float> out(v);
  for (auto& x : out) x += static_cast<float>(rng.normal(0.0, sigma));
  return out;
}

struct SceneObject {
  std::string id;
  std::string text;
  TriangleMesh mesh;  // native units, scale = meters per unit
  double field_frequency;
  std::uint64_t field_seed;
};

}  // namespace

fs::path write_scene_fixture(const fs::path& dir, const SceneOptions& o) {
  fs::create_directories(dir / "bundles");
  fs::create_directories(dir / "meshes");
  fs::create_directories(dir / "frames");
  Rng rng(o.seed);

  std::vector<SceneObject> objects = {
      {"box", "a cardboard box", make_box({1.0, 0.6, 0.35}), 1.5, o.seed * 100 + 1},
      {"ellipsoid", "a rubber ball", scaled(make_icosphere(2), {1.0, 0.7, 0.5}), 2.0, o.seed * 100 + 2},
      {"cylinder", "a tin can", make_cylinder(0.5, 1.0, 24), 2.0, o.seed * 100 + 3},
  };
  objects[0].mesh.scale = 0.1;
  objects[1].mesh.scale = 0.08;
  objects[2].mesh.scale = 0.06;
  const std::size_t n_scene = objects.size();
  // Database-only distractors.
  objects.push_back({"distractor_a", "a flower pot", scaled(make_icosphere(1), {1.0, 1.0, 0.6}), 2.0, o.seed * 100 + 4});
  objects.push_back({"distractor_b", "a brick", make_box({1.0, 0.5, 0.25}), 1.5, o.seed * 100 + 5});
  objects.push_back({"distractor_c", "a candle", make_cylinder(0.3, 1.0, 16), 2.0, o.seed * 100 + 6});
  for (std::size_t i = n_scene; i < objects.size(); ++i) objects[i].mesh.scale = 0.05;

  // Templates, bundles, index.
  std::vector<ObjectEntry> entries;
  for (const auto& obj : objects) {
    double radius = 0.0;
    for (const auto& v : obj.mesh.vertices) radius = std::max(radius, v.norm());
    const FeatureField field(o.feature_dim, obj.field_frequency / radius, obj.field_seed);
    ObjectEntry e = make_object_entry(obj.id, obj.mesh, field, o.templates);
    e.mesh_ref = "../../meshes/" + obj.id + ".obj";
    e.native_scale = 1.0;
    e.native_scale_trusted = false;
    TriangleMesh native = obj.mesh;
    native.scale = 1.0;
    save_obj(native, dir / "meshes" / (obj.id + ".obj"));
    save_object_bundle(e, dir / "bundles" / obj.id);
    entries.push_back(std::move(e));
  }
  build_index(entries, DescriptorMode::Ffa).save(dir / "index.p6dx");

  // Scale database: five phrasings per scene object plus distractors.
  ScaleDatabase db;
  std::vector<std::vector<float>> class_embedding;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    class_embedding.push_back(unit_random(rng, o.clip_dim));
    const double size = entries[i].characteristic_size() * objects[i].mesh.scale;
    const double jitter[] = {0.9, 0.95, 1.0, 1.05, 1.1};
    for (int v = 0; v < 5; ++v)
      db.add(objects[i].text + " (" + std::to_string(v) + ")", size * jitter[v],
             perturbed(class_embedding[i], 0.05, rng));
  }
  for (std::size_t d = 0; d < o.distractors; ++d)
    db.add("object " + std::to_string(d), std::exp(rng.uniform(std::log(0.02), std::log(3.0))),
           unit_random(rng, o.clip_dim));
  save_scale_database(db, dir / "scale_db.jsonl", dir / "scale_db.tnsr");

  // Ground-truth motion.
  const CameraIntrinsics k = default_intrinsics(o.width, o.height);
  const double base_x[] = {-0.2, 0.0, 0.2};
  std::vector<std::vector<Pose>> poses(n_scene);
  for (std::size_t i = 0; i < n_scene; ++i) {
    const Rotation r0 = random_rotation(rng);
    const Vec3 axis = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    const double speed = (1.5 + rng.uniform()) * std::numbers::pi / 180.0;
    const Vec3 t0(base_x[i], 0.03 * (static_cast<double>(i) - 1.0), 0.9 + 0.05 * static_cast<double>(i));
    const Vec3 v(rng.uniform(-2e-3, 2e-3), rng.uniform(-2e-3, 2e-3), rng.uniform(-4e-3, 4e-3));
    for (int f = 0; f < o.frames; ++f)
      poses[i].push_back(Pose(so3_exp(axis * speed * f) * r0, t0 + v * f));
  }

  // Keyframes: depth, masks, query grids, proposals.
  Json frames = Json::array();
  Json proposals = Json::array();
  for (int f = 0; f < o.frames; f += o.keyframe_stride) {
    DepthMap depth(o.width, o.height);
    std::vector<double> zbuf(static_cast<std::size_t>(o.width) * o.height,
                             std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n_scene; ++i) {
      const DepthRender r = render_depth(objects[i].mesh, poses[i][static_cast<std::size_t>(f)], k);
      for (std::size_t p = 0; p < zbuf.size(); ++p) zbuf[p] = std::min(zbuf[p], r.depth[p]);
    }
    for (int y = 0; y < o.height; ++y)
      for (int x = 0; x < o.width; ++x) {
        const double z = zbuf[static_cast<std::size_t>(y) * o.width + x];
        if (std::isfinite(z)) depth.set(x, y, z);
      }
    const std::string depth_name = "frames/depth_" + std::to_string(f) + ".tnsr";
    write_depth(dir / depth_name, depth);
    frames.push_back({{"index", f}, {"depth", depth_name}});

    for (std::size_t i = 0; i < n_scene; ++i) {
      const Pose& pose = poses[i][static_cast<std::size_t>(f)];
      double radius = 0.0;
      for (const auto& v : objects[i].mesh.vertices) radius = std::max(radius, v.norm());
      const FeatureField field(o.feature_dim, objects[i].field_frequency / radius, objects[i].field_seed);
      const std::string stem = objects[i].id + "_" + std::to_string(f);
      write_mask(dir / ("frames/mask_" + stem + ".tnsr"), rasterize_silhouette(objects[i].mesh, pose, k));
      write_tensor(dir / ("frames/grid_" + stem + ".tnsr"),
                   grid_tensor(render_query(objects[i].mesh, pose, k, field, o.templates)));
      proposals.push_back({{"frame", f},
                           {"instance", i},
                           {"mask", "frames/mask_" + stem + ".tnsr"},
                           {"grid", "frames/grid_" + stem + ".tnsr"},
                           {"clip", perturbed(class_embedding[i], 0.05, rng)}});
    }
  }
  write_json(dir / "proposals.json", Json{{"image", {{"width", o.width}, {"height", o.height}}},
                                          {"frames", frames},
                                          {"proposals", proposals}});

  Json gt_objects = Json::array();
  for (std::size_t i = 0; i < n_scene; ++i) {
    Json jp = Json::array();
    for (int f = 0; f < o.frames; ++f) {
      Json p = pose_to_json(poses[i][static_cast<std::size_t>(f)]);
      p["frame"] = f;
      jp.push_back(p);
    }
    gt_objects.push_back({{"instance", i},
                          {"object_id", objects[i].id},
                          {"mesh", "meshes/" + objects[i].id + ".obj"},
                          {"mesh_scale", objects[i].mesh.scale},
                          {"size", entries[i].characteristic_size() * objects[i].mesh.scale},
                          {"symmetry", nullptr},
                          {"poses", jp}});
  }
  write_json(dir / "gt.json", Json{{"intrinsics", intrinsics_to_json(k)},
                                   {"frames", o.frames},
                                   {"objects", gt_objects}});

  const fs::path config = dir / "config.json";
  write_json(config, Json{{"index", "index.p6dx"},
                          {"bundles", "bundles"},
                          {"scale_db", "scale_db.jsonl"},
                          {"scale_db_embeddings", "scale_db.tnsr"},
                          {"seed", 0}});
  return config;
}

std::vector<TrackFrame> fixture_tracks(const fs::path& gt_path, int instance, const Seeds& seeds,
                                       int init_frame, const OracleTrackOptions& options) {
  const Json gt = read_json(gt_path);
  const CameraIntrinsics k = intrinsics_from_json(gt.at("intrinsics"));
  for (const auto& obj : gt.at("objects")) {
    if (obj.at("instance").get<int>() != instance) continue;
    TriangleMesh mesh = load_obj(gt_path.parent_path() / obj.at("mesh").get<std::string>(),
                                 obj.at("mesh_scale").get<double>());
    std::vector<Pose> poses;
    std::vector<int> indices;
    std::optional<std::size_t> init;
    for (const auto& p : obj.at("poses")) {
      if (p.at("frame").get<int>() == init_frame) init = poses.size();
      poses.push_back(pose_from_json(p));
      indices.push_back(p.at("frame").get<int>());
    }
    if (!init) throw_data("init frame " + std::to_string(init_frame) + " not in ground truth");
    return oracle_tracks(mesh, poses, indices, k, seeds.pixels, *init, options);
  }
  throw_data("instance " + std::to_string(instance) + " not in ground truth");
}

}  // namespace p6d
