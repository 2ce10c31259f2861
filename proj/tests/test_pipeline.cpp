#include <doctest.h>

#include <functional>

#include "p6d/error.hpp"
#include "p6d/pipeline.hpp"
#include "p6d/synthetic.hpp"
#include "support.hpp"

using namespace p6d;
namespace fs = std::filesystem;

namespace {

constexpr double kDeg = 3.141592653589793 / 180.0;

// Built once; every case reads it.
const fs::path& scene() {
  static const fs::path dir = [] {
    const fs::path d = test::scratch_dir("pipeline_scene");
    SceneOptions o;
    o.frames = 12;
    o.keyframe_stride = 6;
    o.templates.views = 150;
    o.distractors = 40;
    write_scene_fixture(d, o);
    return d;
  }();
  return dir;
}

AlignConfig config_for(const fs::path& dir) {
  AlignConfig c;
  c.index = dir / "index.p6dx";
  c.bundles = dir / "bundles";
  c.scale_db = dir / "scale_db.jsonl";
  return c;
}

fs::path rewrite_proposals(const std::string& name, const std::function<void(Json&)>& edit) {
  Json j = read_json(scene() / "proposals.json");
  edit(j);
  const fs::path p = scene() / name;
  write_json(p, j);
  return p;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("proposals derive boxes from masks") {
  const ProposalSet set = load_proposals(scene() / "proposals.json");
  REQUIRE(set.records.size() == 6);
  CHECK(set.intrinsics_from_prior);
  for (const auto& r : set.records) {
    CHECK(r.depth.has_value());
    const BoundingBox box = *mask_bbox(*r.proposal.mask);
    CHECK(r.proposal.bbox.cx == box.cx);
    CHECK(r.proposal.bbox.w == box.w);
    std::size_t fg = 0;
    for (auto f : r.proposal.query_grid.foreground) fg += f;
    CHECK(fg > 0);
  }
}

TEST_CASE("proposal errors name the problem") {
  const fs::path p = rewrite_proposals("no_box.json", [](Json& j) { j["proposals"][0].erase("mask"); });
  CHECK_THROWS_AS(load_proposals(p), Error);
  CHECK_THROWS_AS(load_proposals(scene() / "missing.json"), Error);
}

TEST_CASE("empty proposal list gives empty output") {
  const fs::path p = rewrite_proposals("empty.json", [](Json& j) { j["proposals"] = Json::array(); });
  const AlignOutput out = run_alignment(load_proposals(p), config_for(scene()));
  CHECK(out.results.empty());
  CHECK(align_output_to_json(out).at("results").empty());
}

TEST_CASE("missing depth falls back to the constant scale") {
  const fs::path p = rewrite_proposals("no_depth.json", [](Json& j) {
    for (auto& f : j["frames"]) f.erase("depth");
  });
  const AlignOutput out = estimate_scales(load_proposals(p), config_for(scene()));
  REQUIRE(!out.results.empty());
  CHECK_FALSE(out.rho.has_value());
  for (const auto& r : out.results) {
    CHECK(r.scale == 0.10);
    CHECK(r.scale_source == ScaleSource::Constant);
  }
}

TEST_CASE("alignment retrieves the right objects at about the right pose") {
  const GroundTruth gt = load_ground_truth(scene() / "gt.json");
  const AlignOutput out = run_alignment(load_proposals(scene() / "proposals.json"), config_for(scene()));
  REQUIRE(out.results.size() == 6);
  REQUIRE(out.rho.has_value());
  for (const auto& r : out.results) {
    const GroundTruthObject& obj = gt.instance(r.instance);
    CHECK(r.object_id == obj.object_id);
    CHECK(r.scale_source == ScaleSource::Depth);
    const Pose& truth = obj.poses.at(r.frame);
    CHECK(std::abs(r.alignment.pose.translation.z() - truth.translation.z()) < 0.3 * truth.translation.z());
  }

  const AlignOutput back = align_output_from_json(align_output_to_json(out));
  REQUIRE(back.results.size() == out.results.size());
  CHECK(canonical_dump(align_output_to_json(back)) == canonical_dump(align_output_to_json(out)));

  AlignConfig four = config_for(scene());
  four.jobs = 4;
  const AlignOutput par = run_alignment(load_proposals(scene() / "proposals.json"), four);
  CHECK(canonical_dump(align_output_to_json(par)) == canonical_dump(align_output_to_json(out)));

  const SingleFrameReport report = evaluate_alignment(out, gt, scene() / "bundles", 300);
  CHECK(report.rows.size() == 6);
  CHECK(report.summary.ar >= 0.0);
  CHECK(report.summary.ar <= 1.0);
  CHECK(report.summary.ar_pch > 0.5);
}

TEST_CASE("seeding, tracking and evaluation close the loop") {
  const GroundTruth gt = load_ground_truth(scene() / "gt.json");
  const AlignOutput aligned = run_alignment(load_proposals(scene() / "proposals.json"), config_for(scene()));
  const auto seeds = seed_instances(aligned, scene() / "bundles", 128, 1);
  REQUIRE(seeds.size() == 3);
  const auto round = seeds_file_from_json(seeds_file_to_json(seeds, aligned.intrinsics));
  REQUIRE(round.size() == 3);
  CHECK(round[1].seeds.pixels.size() == seeds[1].seeds.pixels.size());

  for (const auto& s : seeds) {
    CorrespondenceSet corr;
    corr.points3d = s.seeds.points3d;
    corr.frames = fixture_tracks(scene() / "gt.json", s.instance, s.seeds, s.init_frame, {});
    const PoseTrajectory traj = refine_trajectory(corr, aligned.intrinsics);
    CHECK(traj.frames.size() == 12);
    const TrackingErrors e =
        evaluate_trajectory(traj, aligned.intrinsics, s.scale, gt.instance(s.instance), gt.intrinsics);
    CHECK(e.e_rot < 1.0);
    CHECK(e.e_proj < 1.0);
  }
}

TEST_CASE("oracle tracks follow the true motion") {
  TriangleMesh sphere = make_icosphere(2);
  sphere.scale = 0.05;
  const CameraIntrinsics k = default_intrinsics(320, 240);
  std::vector<Pose> poses;
  std::vector<int> idx;
  for (int f = 0; f < 5; ++f) {
    poses.emplace_back(Rotation::about_axis(Vec3(0, 1, 0), 0.1 * f), Vec3(0.01 * f, 0, 0.4));
    idx.push_back(f * 2);
  }
  const Seeds s = seed_correspondences(sphere, poses[0], k, 64, 2);
  const auto tracks = oracle_tracks(sphere, poses, idx, k, s.pixels, 0);
  REQUIRE(tracks.size() == 5);
  CHECK(tracks[3].index == 6);
  for (std::size_t i = 0; i < s.pixels.size(); ++i) {
    CHECK((tracks[0].points[i] - s.pixels[i]).norm() < 1e-6);
    const auto hit = raycast(sphere, poses[0], k, s.pixels[i]);
    REQUIRE(hit.has_value());
    if (tracks[4].visible[i]) CHECK((tracks[4].points[i] - project(poses[4] * *hit, k)).norm() < 1e-6);
  }

  OracleTrackOptions all_gone;
  all_gone.occlusion = 1.0;
  for (const auto& f : oracle_tracks(sphere, poses, idx, k, s.pixels, 0, all_gone))
    for (auto v : f.visible) CHECK(v == 0);
}

TEST_CASE("scale source names") {
  CHECK(parse_scale_source(to_string(ScaleSource::Depth)) == ScaleSource::Depth);
  CHECK(parse_scale_source(to_string(ScaleSource::Constant)) == ScaleSource::Constant);
  CHECK_THROWS_AS(parse_scale_source("guess"), Error);
}

}
