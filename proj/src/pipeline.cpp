#include "p6d/pipeline.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>

#include "p6d/error.hpp"
#include "p6d/parallel.hpp"

namespace fs = std::filesystem;

namespace p6d {

namespace {

PatchGrid grid_from_tensor(const Tensor& t, const fs::path& path) {
  if (t.shape.size() != 3) throw_data(path.string() + ": query grid must have shape [rows, cols, dim]");
  PatchGrid g(t.shape[0], t.shape[1], t.shape[2]);
  g.data = t.data;
  return g;
}

std::string proposal_label(int frame, int instance) {
  return "proposal (frame " + std::to_string(frame) + ", instance " + std::to_string(instance) + ")";
}

}  // namespace

ProposalSet load_proposals(const fs::path& path, double padding) {
  const Json j = read_json(path);
  const fs::path base = path.parent_path();
  ProposalSet set;
  try {
    const int w = j.at("image").at("width").get<int>();
    const int h = j.at("image").at("height").get<int>();
    if (j.contains("intrinsics")) {
      set.intrinsics = intrinsics_from_json(j.at("intrinsics"));
    } else {
      set.intrinsics = default_intrinsics(w, h);
      set.intrinsics_from_prior = true;
    }

    std::map<int, fs::path> depth_by_frame;
    for (const auto& f : j.value("frames", Json::array()))
      if (f.contains("depth") && !f.at("depth").is_null())
        depth_by_frame[f.at("index").get<int>()] = base / f.at("depth").get<std::string>();

    for (const auto& p : j.at("proposals")) {
      ProposalRecord rec;
      Proposal& prop = rec.proposal;
      prop.frame_index = p.at("frame").get<int>();
      prop.instance = p.at("instance").get<int>();
      const std::string label = proposal_label(prop.frame_index, prop.instance);

      const fs::path grid_path = base / p.at("grid").get<std::string>();
      prop.query_grid = grid_from_tensor(read_tensor(grid_path), grid_path);
      const auto rows = prop.query_grid.rows, cols = prop.query_grid.cols;

      if (p.contains("mask")) {
        prop.mask = read_mask(base / p.at("mask").get<std::string>());
        if (prop.mask->width != w || prop.mask->height != h)
          throw_data(label + ": mask size does not match the image");
        const auto box = mask_bbox(*prop.mask);
        if (!box) throw_data(label + ": empty mask");
        prop.bbox = *box;
        prop.query_grid.foreground = patch_foreground(*prop.mask, query_crop(prop.bbox, padding), rows, cols);
      } else if (p.contains("bbox")) {
        const auto b = p.at("bbox").get<std::vector<double>>();
        if (b.size() != 4) throw_data(label + ": bbox must be [cx, cy, w, h]");
        prop.bbox = {b[0], b[1], b[2], b[3]};
      } else {
        throw_data(label + ": needs a mask or a bbox");
      }
      if (p.contains("fg")) {
        const Tensor fg = read_tensor(base / p.at("fg").get<std::string>());
        if (fg.shape != std::vector<std::size_t>{rows, cols})
          throw_data(label + ": fg shape does not match the grid");
        for (std::size_t i = 0; i < fg.data.size(); ++i) prop.query_grid.foreground[i] = fg.data[i] > 0.5f;
      }
      if (p.contains("clip")) prop.clip_embedding = p.at("clip").get<std::vector<float>>();

      if (auto it = depth_by_frame.find(prop.frame_index); it != depth_by_frame.end()) rec.depth = it->second;
      set.records.push_back(std::move(rec));
    }
  } catch (const Json::exception& e) {
    throw_data(path.string() + ": " + e.what());
  }
  return set;
}

AlignOutput estimate_scales(const ProposalSet& proposals, const AlignConfig& config) {
  std::optional<ScaleDatabase> db;
  if (config.scale_db) {
    const fs::path emb = config.scale_db_embeddings
                             ? *config.scale_db_embeddings
                             : fs::path(*config.scale_db).replace_extension(".tnsr");
    db = load_scale_database(*config.scale_db, emb);
  }

  AlignOutput out;
  out.intrinsics = proposals.intrinsics;
  out.intrinsics_from_prior = proposals.intrinsics_from_prior;
  out.results.resize(proposals.records.size());

  std::map<fs::path, DepthMap> depth_cache;
  for (std::size_t i = 0; i < proposals.records.size(); ++i) {
    const ProposalRecord& rec = proposals.records[i];
    const Proposal& p = rec.proposal;
    AlignedProposal& a = out.results[i];
    a.frame = p.frame_index;
    a.instance = p.instance;
    if (rec.depth && p.mask) {
      auto it = depth_cache.find(*rec.depth);
      if (it == depth_cache.end()) it = depth_cache.emplace(*rec.depth, read_depth(*rec.depth)).first;
      try {
        a.relative_scale = relative_scale(it->second, *p.mask, proposals.intrinsics, config.extent_mode);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Numerical) throw;
      }
    }
    if (db && !p.clip_embedding.empty())
      a.metric_prior = lookup_metric_scale(p.clip_embedding, *db, config.k_neighbors);
  }

  std::vector<ScaleObservation> obs;
  for (const auto& a : out.results)
    if (a.relative_scale) obs.push_back({*a.relative_scale, a.metric_prior});
  const bool any_pair = std::any_of(out.results.begin(), out.results.end(),
                                    [](const auto& a) { return a.relative_scale && a.metric_prior; });
  if (any_pair) out.rho = global_rescale(obs).rho;

  std::map<int, std::vector<double>> fused;
  for (const auto& a : out.results)
    if (a.relative_scale && out.rho) fused[a.instance].push_back(*a.relative_scale * *out.rho);
  for (auto& a : out.results) {
    if (auto it = fused.find(a.instance); it != fused.end()) {
      a.scale = median(it->second);
      a.scale_source = ScaleSource::Depth;
    } else {
      a.scale = config.constant_scale;
      a.scale_source = ScaleSource::Constant;
    }
  }
  return out;
}

AlignOutput run_alignment(const ProposalSet& proposals, const AlignConfig& config) {
  AlignOutput out = estimate_scales(proposals, config);
  if (proposals.records.empty()) return out;
  const DescriptorIndex index = DescriptorIndex::load(config.index);
  const auto& records = proposals.records;
  const std::size_t n = records.size();

  std::map<std::string, std::shared_ptr<const ObjectEntry>> bundles;
  for (std::size_t i = 0; i < n; ++i) {
    AlignedProposal& a = out.results[i];
    const auto q = ffa_aggregate(std::span<const PatchGrid>(&records[i].proposal.query_grid, 1));
    if (static_cast<std::size_t>(q.size()) != index.dim())
      throw_data("query feature dimension " + std::to_string(q.size()) +
                 " does not match index dimension " + std::to_string(index.dim()));
    const auto hits = retrieve(q, index, 1);
    if (hits.empty()) throw_data("descriptor index is empty");
    a.object_id = hits[0].object_id;
    a.retrieval_score = hits[0].score;
    if (!bundles.count(a.object_id))
      bundles[a.object_id] = std::make_shared<ObjectEntry>(load_object_bundle(config.bundles / a.object_id));
  }

  parallel_for(n, config.jobs, [&](std::size_t i) {
    AlignedProposal& a = out.results[i];
    a.alignment = estimate_pose(records[i].proposal, *bundles.at(a.object_id), proposals.intrinsics, a.scale);
    a.alignment.frame_index = a.frame;
  });
  return out;
}

std::string to_string(ScaleSource s) {
  switch (s) {
    case ScaleSource::Depth: return "depth";
    case ScaleSource::Constant: return "constant";
  }
  return "constant";
}

ScaleSource parse_scale_source(const std::string& s) {
  if (s == "depth") return ScaleSource::Depth;
  if (s == "constant") return ScaleSource::Constant;
  throw_data("unknown scale source '" + s + "'");
}

Json scale_report_to_json(const AlignOutput& out) {
  Json results = Json::array();
  for (const auto& a : out.results)
    results.push_back({{"frame", a.frame},
                       {"instance", a.instance},
                       {"scale", a.scale},
                       {"scale_source", to_string(a.scale_source)},
                       {"relative", a.relative_scale ? Json(*a.relative_scale) : Json(nullptr)},
                       {"metric", a.metric_prior ? Json(*a.metric_prior) : Json(nullptr)}});
  return Json{{"rho", out.rho ? Json(*out.rho) : Json(nullptr)}, {"results", results}};
}

Json align_output_to_json(const AlignOutput& out) {
  Json results = Json::array();
  for (const auto& a : out.results) {
    Json r{{"frame", a.frame},
           {"instance", a.instance},
           {"object_id", a.object_id},
           {"retrieval_score", a.retrieval_score},
           {"pose", pose_to_json(a.alignment.pose)},
           {"view_index", a.alignment.view_index},
           {"score", a.alignment.score},
           {"scale", a.scale},
           {"scale_source", to_string(a.scale_source)},
           {"relative", a.relative_scale ? Json(*a.relative_scale) : Json(nullptr)},
           {"metric", a.metric_prior ? Json(*a.metric_prior) : Json(nullptr)}};
    results.push_back(std::move(r));
  }
  return Json{{"intrinsics", intrinsics_to_json(out.intrinsics)},
              {"intrinsics_from_prior", out.intrinsics_from_prior},
              {"rho", out.rho ? Json(*out.rho) : Json(nullptr)},
              {"results", results}};
}

AlignOutput align_output_from_json(const Json& j) {
  AlignOutput out;
  try {
    out.intrinsics = intrinsics_from_json(j.at("intrinsics"));
    out.intrinsics_from_prior = j.value("intrinsics_from_prior", false);
    if (j.contains("rho") && !j.at("rho").is_null()) out.rho = j.at("rho").get<double>();
    for (const auto& r : j.at("results")) {
      AlignedProposal a;
      a.frame = r.at("frame").get<int>();
      a.instance = r.at("instance").get<int>();
      a.object_id = r.at("object_id").get<std::string>();
      a.retrieval_score = r.value("retrieval_score", 0.0);
      a.alignment.pose = pose_from_json(r.at("pose"));
      a.alignment.view_index = r.value("view_index", std::size_t{0});
      a.alignment.score = r.at("score").get<double>();
      a.alignment.object_id = a.object_id;
      a.alignment.frame_index = a.frame;
      a.scale = r.at("scale").get<double>();
      a.scale_source = parse_scale_source(r.value("scale_source", std::string("depth")));
      if (r.contains("relative") && !r.at("relative").is_null()) a.relative_scale = r.at("relative").get<double>();
      if (r.contains("metric") && !r.at("metric").is_null()) a.metric_prior = r.at("metric").get<double>();
      out.results.push_back(std::move(a));
    }
  } catch (const Json::exception& e) {
    throw_data(std::string("alignment file: ") + e.what());
  }
  return out;
}

BundleMesh load_bundle_mesh(const fs::path& bundles, const std::string& object_id) {
  const fs::path dir = bundles / object_id;
  if (!fs::exists(dir / "object.json")) throw_data(dir.string() + ": object.json with a mesh reference is required");
  const Json meta = read_json(dir / "object.json");
  const std::string ref = meta.value("mesh", std::string{});
  if (ref.empty()) throw_data(dir.string() + ": bundle has no mesh reference");

  BundleMesh out;
  out.mesh = load_obj(dir / ref);
  for (const auto& e : read_json(dir / "extents.json"))
    for (double v : e.get<std::vector<double>>()) out.characteristic_size = std::max(out.characteristic_size, v);
  if (!(out.characteristic_size > 0.0)) throw_data(dir.string() + ": bundle has no view extents");
  return out;
}

TriangleMesh metric_mesh(const BundleMesh& bundle, double size) {
  if (!(size > 0.0)) throw_data("object scale must be positive");
  TriangleMesh m = bundle.mesh;
  m.scale = size / bundle.characteristic_size;
  return m;
}

std::vector<InstanceSeeds> seed_instances(const AlignOutput& aligned, const fs::path& bundles,
                                          std::size_t n, std::uint64_t seed) {
  std::map<int, std::vector<AlignmentResult>> by_instance;
  std::map<int, const AlignedProposal*> first;
  for (const auto& a : aligned.results) {
    by_instance[a.instance].push_back(a.alignment);
    first.emplace(a.instance, &a);
  }
  std::vector<InstanceSeeds> out;
  for (const auto& [instance, results] : by_instance) {
    const int init = select_init_frame(results);
    const AlignedProposal* chosen = nullptr;
    for (const auto& a : aligned.results)
      if (a.instance == instance && a.frame == init && (!chosen || a.alignment.score > chosen->alignment.score))
        chosen = &a;
    InstanceSeeds s;
    s.instance = instance;
    s.object_id = chosen->object_id;
    s.init_frame = init;
    s.scale = chosen->scale;
    s.init_pose = chosen->alignment.pose;
    const TriangleMesh mesh = metric_mesh(load_bundle_mesh(bundles, s.object_id), s.scale);
    s.seeds = seed_correspondences(mesh, s.init_pose, aligned.intrinsics, n,
                                   seed + static_cast<std::uint64_t>(instance));
    out.push_back(std::move(s));
  }
  return out;
}

Json seeds_file_to_json(const std::vector<InstanceSeeds>& seeds, const CameraIntrinsics& k) {
  Json list = Json::array();
  for (const auto& s : seeds) {
    Json j = seeds_to_json(s.seeds);
    j["instance"] = s.instance;
    j["object_id"] = s.object_id;
    j["init_frame"] = s.init_frame;
    j["scale"] = s.scale;
    j["init_pose"] = pose_to_json(s.init_pose);
    list.push_back(std::move(j));
  }
  return Json{{"intrinsics", intrinsics_to_json(k)}, {"instances", list}};
}

std::vector<InstanceSeeds> seeds_file_from_json(const Json& j) {
  std::vector<InstanceSeeds> out;
  try {
    for (const auto& e : j.at("instances")) {
      InstanceSeeds s;
      s.instance = e.at("instance").get<int>();
      s.object_id = e.at("object_id").get<std::string>();
      s.init_frame = e.at("init_frame").get<int>();
      s.scale = e.at("scale").get<double>();
      s.init_pose = pose_from_json(e.at("init_pose"));
      s.seeds = seeds_from_json(e);
      out.push_back(std::move(s));
    }
  } catch (const Json::exception& e) {
    throw_data(std::string("seeds file: ") + e.what());
  }
  return out;
}

const GroundTruthObject& GroundTruth::instance(int i) const {
  for (const auto& o : objects)
    if (o.instance == i) return o;
  throw_data("instance " + std::to_string(i) + " not in ground truth");
}

GroundTruth load_ground_truth(const fs::path& path) {
  const Json j = read_json(path);
  GroundTruth gt;
  try {
    gt.intrinsics = intrinsics_from_json(j.at("intrinsics"));
    for (const auto& o : j.at("objects")) {
      GroundTruthObject obj;
      obj.instance = o.at("instance").get<int>();
      obj.object_id = o.at("object_id").get<std::string>();
      obj.mesh = load_obj(path.parent_path() / o.at("mesh").get<std::string>(), o.value("mesh_scale", 1.0));
      obj.size = o.at("size").get<double>();
      obj.symmetry = symmetry_from_json(o.value("symmetry", Json(nullptr)));
      for (const auto& p : o.at("poses")) obj.poses[p.at("frame").get<int>()] = pose_from_json(p);
      gt.objects.push_back(std::move(obj));
    }
  } catch (const Json::exception& e) {
    throw_data(path.string() + ": " + e.what());
  }
  return gt;
}

SingleFrameReport evaluate_alignment(const AlignOutput& aligned, const GroundTruth& gt,
                                     const fs::path& bundles, std::size_t samples, std::uint64_t seed,
                                     unsigned jobs) {
  SingleFrameReport report;
  report.thresholds = default_thresholds(gt.intrinsics.diagonal());
  std::map<std::string, BundleMesh> meshes;
  for (const auto& a : aligned.results)
    if (!meshes.count(a.object_id)) meshes.emplace(a.object_id, load_bundle_mesh(bundles, a.object_id));

  report.rows.resize(aligned.results.size());
  parallel_for(aligned.results.size(), jobs, [&](std::size_t i) {
    const AlignedProposal& a = aligned.results[i];
    const GroundTruthObject& obj = gt.instance(a.instance);
    const auto it = obj.poses.find(a.frame);
    if (it == obj.poses.end())
      throw_data("no ground-truth pose for instance " + std::to_string(a.instance) + " at frame " +
                 std::to_string(a.frame));
    const TriangleMesh pred = metric_mesh(meshes.at(a.object_id), a.scale);
    const Pose& pose = a.alignment.pose;
    FrameErrors& row = report.rows[i];
    row.frame = a.frame;
    row.instance = a.instance;
    row.errors.id = std::to_string(a.instance) + "@" + std::to_string(a.frame);
    row.errors.cou = cou(rasterize_silhouette(obj.mesh, it->second, gt.intrinsics),
                         rasterize_silhouette(pred, pose, aligned.intrinsics));
    row.errors.ch = chamfer(obj.mesh, it->second, pred, pose, samples, seed);
    row.errors.pch = projected_chamfer(obj.mesh, it->second, gt.intrinsics, pred, pose, aligned.intrinsics,
                                       samples, seed);
  });
  if (report.rows.empty()) return report;
  std::vector<InstanceErrors> errors;
  for (const auto& r : report.rows) errors.push_back(r.errors);
  report.summary = summarize(errors, report.thresholds);
  return report;
}

TrackingErrors evaluate_trajectory(const PoseTrajectory& traj, const CameraIntrinsics& k, double scale,
                                   const GroundTruthObject& gt, const CameraIntrinsics& k_gt) {
  std::vector<Pose> pred, truth;
  for (const auto& f : traj.frames) {
    const auto it = gt.poses.find(f.index);
    if (it == gt.poses.end())
      throw_data("no ground-truth pose for instance " + std::to_string(gt.instance) + " at frame " +
                 std::to_string(f.index));
    pred.push_back(f.pose);
    truth.push_back(it->second);
  }
  return evaluate_tracking(pred, truth, gt.symmetry, k, k_gt, scale, gt.size);
}

Json single_frame_report_to_json(const SingleFrameReport& report) {
  Json rows = Json::array();
  for (const auto& r : report.rows)
    rows.push_back({{"frame", r.frame}, {"instance", r.instance}, {"cou", r.errors.cou},
                    {"ch", r.errors.ch}, {"pch", r.errors.pch}});
  Json summary = nullptr;
  if (!report.rows.empty())
    summary = {{"ar", report.summary.ar}, {"ar_cou", report.summary.ar_cou},
               {"ar_ch", report.summary.ar_ch}, {"ar_pch", report.summary.ar_pch}};
  return Json{{"thresholds", {{"cou", report.thresholds.cou}, {"ch", report.thresholds.ch},
                              {"pch", report.thresholds.pch}}},
              {"instances", rows},
              {"summary", summary}};
}

Json tracking_errors_to_json(const TrackingErrors& e) {
  return Json{{"e_rot", e.e_rot},
              {"e_proj", e.e_proj},
              {"e_depth", e.e_depth},
              {"skipped_pairs", e.skipped_pairs},
              {"gamma", e.gamma},
              {"origin", {{"offset", {e.origin.origin.x(), e.origin.origin.y(), e.origin.origin.z()}},
                          {"clamped", e.origin.clamped}}}};
}

}  // namespace p6d
