// p6d: command-line front end over the serialized pipeline formats.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "p6d/descriptor.hpp"
#include "p6d/error.hpp"
#include "p6d/io.hpp"
#include "p6d/parallel.hpp"
#include "p6d/pipeline.hpp"
#include "p6d/retarget.hpp"
#include "p6d/synthetic.hpp"
#include "p6d/track.hpp"

namespace fs = std::filesystem;
using namespace p6d;

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

// Effective configuration of one subcommand: config file, then P6D_SEED,
// then flags. Defaults read through get() are written back so the echo is
// complete.
class Settings {
 public:
  explicit Settings(CLI::App* app) : app_(app) {
    app->add_option("--config", config_path_, "JSON configuration file");
  }

  template <typename T>
  void option(const std::string& flag, const std::string& key, const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app_->add_option(flag, *value, help);
    overrides_.push_back([this, opt, value, key] {
      if (opt->count() == 0) return;
      json_[key] = *value;
      from_flag_.insert(key);
    });
  }

  void finalize() {
    if (!config_path_.empty()) {
      if (!fs::exists(config_path_)) throw_usage("config file not found: " + config_path_);
      json_ = read_json(config_path_);
      if (!json_.is_object()) throw_usage(config_path_ + ": config must be a JSON object");
      base_ = fs::path(config_path_).parent_path();
    }
    if (const char* env = std::getenv("P6D_SEED"); env && *env) {
      try {
        std::size_t used = 0;
        const unsigned long long seed = std::stoull(env, &used);
        if (used != std::string(env).size()) throw std::invalid_argument(env);
        json_["seed"] = seed;
      } catch (const std::exception&) {
        throw_usage(std::string("P6D_SEED must be a non-negative integer, got '") + env + "'");
      }
    }
    for (auto& apply : overrides_) apply();
  }

  template <typename T>
  T get(const std::string& key, const T& fallback) {
    if (!json_.contains(key) || json_[key].is_null()) {
      json_[key] = fallback;
      return fallback;
    }
    return typed<T>(key);
  }

  template <typename T>
  std::optional<T> maybe(const std::string& key) const {
    if (!json_.contains(key) || json_.at(key).is_null()) return std::nullopt;
    return typed<T>(key);
  }

  std::optional<fs::path> path(const std::string& key) const {
    const auto raw = maybe<std::string>(key);
    if (!raw) return std::nullopt;
    fs::path p(*raw);
    if (p.is_relative() && !from_flag_.count(key)) p = base_ / p;
    return p;
  }

  fs::path require_path(const std::string& key) const {
    auto p = path(key);
    if (!p) throw_usage("missing required setting '" + key + "'");
    if (!fs::exists(*p)) throw_data(key + ": not found: " + p->string());
    return *p;
  }

  const Json& echo() const { return json_; }

 private:
  template <typename T>
  T typed(const std::string& key) const {
    try {
      return json_.at(key).get<T>();
    } catch (const Json::exception&) {
      throw_usage("setting '" + key + "' has the wrong type");
    }
  }

  CLI::App* app_;
  std::string config_path_;
  Json json_ = Json::object();
  fs::path base_;
  std::set<std::string> from_flag_;
  std::vector<std::function<void()>> overrides_;
};

struct Command {
  CLI::App* app = nullptr;
  std::unique_ptr<Settings> settings;
  std::string out;
  std::function<void(Command&)> run;
};

void emit(const Command& cmd, Json j) {
  j["config"] = cmd.settings->echo();
  if (cmd.out.empty()) {
    std::cout << canonical_dump(j);
  } else {
    write_json(cmd.out, j);
  }
}

Command& add_command(std::vector<std::unique_ptr<Command>>& commands, CLI::App* parent,
                     const std::string& name, const std::string& help, bool with_out = true) {
  auto cmd = std::make_unique<Command>();
  cmd->app = parent->add_subcommand(name, help);
  cmd->settings = std::make_unique<Settings>(cmd->app);
  if (with_out) cmd->app->add_option("-o,--out", cmd->out, "Output file (default: stdout)");
  commands.push_back(std::move(cmd));
  return *commands.back();
}

unsigned jobs_of(Settings& s) {
  const int jobs = s.get<int>("jobs", 0);
  if (jobs < 0) throw_usage("jobs must be non-negative");
  return resolve_jobs(static_cast<unsigned>(jobs));
}

AlignConfig align_config(Settings& s, bool need_index) {
  AlignConfig c;
  if (need_index) {
    c.index = s.require_path("index");
    c.bundles = s.require_path("bundles");
  }
  if (s.path("scale_db")) c.scale_db = s.require_path("scale_db");
  if (s.path("scale_db_embeddings")) c.scale_db_embeddings = s.require_path("scale_db_embeddings");
  const int k = s.get<int>("k_neighbors", 5);
  if (k < 1) throw_usage("k_neighbors must be at least 1");
  c.k_neighbors = static_cast<std::size_t>(k);
  c.extent_mode = parse_extent_mode(s.get<std::string>("extent", "half"));
  c.constant_scale = s.get<double>("constant_scale", 0.10);
  if (!(c.constant_scale > 0.0)) throw_usage("constant_scale must be positive");
  c.jobs = jobs_of(s);
  return c;
}

double padding_of(Settings& s) {
  const double padding = s.get<double>("padding", 0.1);
  if (padding < 0.0) throw_usage("padding must be non-negative");
  return padding;
}

void scale_options(Settings& s) {
  s.option<std::string>("--scale-db", "scale_db", "Scale database (JSON lines)");
  s.option<std::string>("--scale-db-embeddings", "scale_db_embeddings", "Scale database embeddings (TNSR)");
  s.option<int>("--k-neighbors", "k_neighbors", "Neighbours for the metric scale lookup");
  s.option<std::string>("--extent", "extent", "Relative scale extent: half|range");
  s.option<double>("--constant-scale", "constant_scale", "Fallback object size in meters");
  s.option<double>("--padding", "padding", "Query crop padding");
}

// build-index ---------------------------------------------------------------

void cmd_build_index(Command& cmd) {
  Settings& s = *cmd.settings;
  const fs::path bundles = s.require_path("bundles");
  const DescriptorMode mode = parse_descriptor_mode(s.get<std::string>("descriptor", "ffa"));
  const int views = s.get<int>("views", 0);
  const auto index = s.path("index");
  if (!index) throw_usage("missing required setting 'index'");

  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(bundles))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw_data(bundles.string() + ": no object bundles");

  std::vector<ObjectEntry> entries(dirs.size());
  parallel_for(dirs.size(), jobs_of(s), [&](std::size_t i) { entries[i] = load_object_bundle(dirs[i]); });
  for (const auto& e : entries)
    if (views > 0 && e.views.size() != static_cast<std::size_t>(views))
      throw_data("object '" + e.object_id + "' has " + std::to_string(e.views.size()) + " views, expected " +
                 std::to_string(views));
  const DescriptorIndex built = build_index(entries, mode);
  built.save(*index);
  emit(cmd, {{"index", index->string()}, {"objects", built.size()}, {"dim", built.dim()}});
}

// retrieve ------------------------------------------------------------------

void cmd_retrieve(Command& cmd, const std::string& query_path) {
  Settings& s = *cmd.settings;
  const DescriptorIndex index = DescriptorIndex::load(s.require_path("index"));
  const int k = s.get<int>("k_retrieval", 1);
  if (k < 1) throw_usage("k_retrieval must be at least 1");

  const Tensor t = read_tensor(query_path);
  Eigen::VectorXd q;
  if (t.shape.size() == 1) {
    q = Eigen::Map<const Eigen::VectorXf>(t.data.data(), static_cast<Eigen::Index>(t.data.size())).cast<double>();
  } else if (t.shape.size() == 3) {
    PatchGrid g(t.shape[0], t.shape[1], t.shape[2]);
    g.data = t.data;
    std::fill(g.foreground.begin(), g.foreground.end(), 1);
    q = ffa_aggregate(std::span<const PatchGrid>(&g, 1));
  } else {
    throw_data(query_path + ": query must have shape [dim] or [rows, cols, dim]");
  }
  if (static_cast<std::size_t>(q.size()) != index.dim())
    throw_data("query dimension " + std::to_string(q.size()) + " does not match index dimension " +
               std::to_string(index.dim()));
  Json hits = Json::array();
  for (const auto& h : retrieve(q, index, static_cast<std::size_t>(k)))
    hits.push_back({{"object_id", h.object_id}, {"score", h.score}});
  emit(cmd, {{"hits", hits}});
}

// scale / align -------------------------------------------------------------

ProposalSet proposals_of(const std::string& path, double padding) {
  if (!fs::exists(path)) throw_data("proposals file not found: " + path);
  return load_proposals(path, padding);
}

void cmd_scale(Command& cmd, const std::string& proposals) {
  Settings& s = *cmd.settings;
  const ProposalSet set = proposals_of(proposals, padding_of(s));
  emit(cmd, scale_report_to_json(estimate_scales(set, align_config(s, false))));
}

void cmd_align(Command& cmd, const std::string& proposals) {
  Settings& s = *cmd.settings;
  const ProposalSet set = proposals_of(proposals, padding_of(s));
  const AlignConfig config = align_config(s, !set.records.empty());
  emit(cmd, align_output_to_json(run_alignment(set, config)));
}

// track ---------------------------------------------------------------------

void cmd_track_seed(Command& cmd, const std::string& poses) {
  Settings& s = *cmd.settings;
  const AlignOutput aligned = align_output_from_json(read_json(poses));
  const int n = s.get<int>("seeds", 256);
  if (n < 8) throw_usage("seeds must be at least 8");
  const auto seeds = seed_instances(aligned, s.require_path("bundles"), static_cast<std::size_t>(n),
                                    s.get<std::uint64_t>("seed", 0));
  emit(cmd, seeds_file_to_json(seeds, aligned.intrinsics));
}

const InstanceSeeds& find_instance(const std::vector<InstanceSeeds>& seeds, int instance) {
  for (const auto& s : seeds)
    if (s.instance == instance) return s;
  throw_data("instance " + std::to_string(instance) + " not in seeds file");
}

void cmd_track_refine(Command& cmd, const std::string& seeds_path, const std::string& tracks_path,
                      int instance) {
  Settings& s = *cmd.settings;
  const Json seeds_json = read_json(seeds_path);
  const CameraIntrinsics k = intrinsics_from_json(seeds_json.at("intrinsics"));
  const std::vector<InstanceSeeds> all = seeds_file_from_json(seeds_json);
  const InstanceSeeds& seeds = find_instance(all, instance);

  CorrespondenceSet corr;
  corr.points3d = seeds.seeds.points3d;
  corr.frames = tracks_from_json(read_json(tracks_path));

  TrackOptions o;
  o.pnp.inlier_threshold_px = s.get<double>("ransac_threshold_px", o.pnp.inlier_threshold_px);
  o.pnp.ransac_iterations = s.get<int>("ransac_iterations", o.pnp.ransac_iterations);
  o.pnp.seed = s.get<std::uint64_t>("seed", 0);
  o.max_rms_px = s.get<double>("max_rms_px", o.max_rms_px);
  o.jobs = jobs_of(s);
  if (!(o.pnp.inlier_threshold_px > 0.0) || o.pnp.ransac_iterations < 1 || !(o.max_rms_px > 0.0))
    throw_usage("RANSAC threshold, iterations and max_rms_px must be positive");

  Json j = trajectory_to_json(refine_trajectory(corr, k, o));
  j["instance"] = seeds.instance;
  j["object_id"] = seeds.object_id;
  j["scale"] = seeds.scale;
  j["init_frame"] = seeds.init_frame;
  j["intrinsics"] = intrinsics_to_json(k);
  emit(cmd, j);
}

// retarget ------------------------------------------------------------------

void cmd_retarget(Command& cmd, const std::string& trajectory) {
  Settings& s = *cmd.settings;
  const std::string chain_name = s.get<std::string>("chain", "panda");
  KinematicChain chain = chain_name == "panda" ? panda_chain() : chain_from_json(read_json(s.require_path("chain")));
  if (auto g = s.maybe<Json>("grasp")) chain.grasp = pose_from_json(*g);
  validate(chain);

  Pose t_rc = default_camera_in_robot();
  if (auto c = s.maybe<Json>("camera_in_robot")) t_rc = pose_from_json(*c);

  std::vector<Pose> camera_poses;
  for (const auto& f : trajectory_from_json(read_json(trajectory)).frames) camera_poses.push_back(f.pose);
  if (camera_poses.empty()) throw_data(trajectory + ": empty trajectory");
  const std::vector<Pose> in_robot = camera_to_robot(camera_poses, t_rc);

  RetargetProblem problem;
  problem.dt = s.get<double>("dt", problem.dt);
  problem.weights.pose = s.get<double>("w_pose", problem.weights.pose);
  problem.weights.velocity = s.get<double>("w_velocity", problem.weights.velocity);
  problem.weights.torque = s.get<double>("w_torque", problem.weights.torque);
  problem.weights.limits = s.get<double>("w_limits", problem.weights.limits);
  const Eigen::VectorXd home = chain.home ? *chain.home : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(chain.dof()));

  const std::string reference = s.get<std::string>("reference", "relative");
  if (reference == "relative") {
    problem.q0 = home;
    problem.targets = relative_reference(in_robot, forward_kinematics(chain, home));
  } else if (reference == "absolute") {
    problem.q0 = inverse_kinematics(chain, in_robot.front(), home);
    problem.targets = in_robot;
  } else {
    throw_usage("reference must be 'relative' or 'absolute', got '" + reference + "'");
  }

  RetargetOptions o;
  o.max_iterations = s.get<int>("max_iterations", o.max_iterations);
  o.clamp_to_limits = s.get<bool>("clamp", o.clamp_to_limits);
  if (!(problem.dt > 0.0) || o.max_iterations < 1) throw_usage("dt and max_iterations must be positive");
  emit(cmd, joint_trajectory_to_json(optimize_trajectory(problem, chain, o), problem.dt));
}

// eval ----------------------------------------------------------------------

void cmd_eval(Command& cmd, const std::string& gt_path, const std::string& poses,
              const std::vector<std::string>& trajectories) {
  Settings& s = *cmd.settings;
  if (poses.empty() && trajectories.empty()) throw_usage("eval needs --poses and/or --trajectory");
  const GroundTruth gt = load_ground_truth(gt_path);
  const int samples = s.get<int>("chamfer_samples", 1000);
  if (samples < 1) throw_usage("chamfer_samples must be positive");
  const auto seed = s.get<std::uint64_t>("seed", 0);

  Json report = Json::object();
  report["single_frame"] = nullptr;
  if (!poses.empty()) {
    const AlignOutput aligned = align_output_from_json(read_json(poses));
    report["single_frame"] = single_frame_report_to_json(
        evaluate_alignment(aligned, gt, s.require_path("bundles"), static_cast<std::size_t>(samples), seed,
                           jobs_of(s)));
  }

  Json rows = Json::array();
  double rot = 0.0, proj = 0.0, depth = 0.0;
  for (const auto& path : trajectories) {
    const Json j = read_json(path);
    const int instance = j.at("instance").get<int>();
    const TrackingErrors e = evaluate_trajectory(trajectory_from_json(j), intrinsics_from_json(j.at("intrinsics")),
                                                 j.at("scale").get<double>(), gt.instance(instance),
                                                 gt.intrinsics);
    Json row = tracking_errors_to_json(e);
    row["instance"] = instance;
    row["object_id"] = j.value("object_id", std::string{});
    rows.push_back(row);
    rot += e.e_rot;
    proj += e.e_proj;
    depth += e.e_depth;
  }
  report["tracking"] = rows;
  report["tracking_mean"] = nullptr;
  if (!rows.empty()) {
    const double n = static_cast<double>(rows.size());
    report["tracking_mean"] = {{"e_rot", rot / n}, {"e_proj", proj / n}, {"e_depth", depth / n}};
  }
  emit(cmd, report);
}

// fixtures ------------------------------------------------------------------

void cmd_fixture_scene(Command& cmd, const std::string& dir) {
  Settings& s = *cmd.settings;
  SceneOptions o;
  o.frames = s.get<int>("frames", o.frames);
  o.keyframe_stride = s.get<int>("keyframe_stride", o.keyframe_stride);
  o.templates.views = static_cast<std::size_t>(s.get<int>("views", static_cast<int>(o.templates.views)));
  o.distractors = static_cast<std::size_t>(s.get<int>("distractors", static_cast<int>(o.distractors)));
  o.seed = s.get<std::uint64_t>("seed", o.seed);
  if (o.frames < 1 || o.keyframe_stride < 1 || o.templates.views < 1)
    throw_usage("frames, keyframe_stride and views must be positive");
  const fs::path config = write_scene_fixture(dir, o);
  emit(cmd, {{"config_file", config.string()}});
}

void cmd_fixture_tracks(Command& cmd, const std::string& gt, const std::string& seeds_path, int instance) {
  Settings& s = *cmd.settings;
  const std::vector<InstanceSeeds> all = seeds_file_from_json(read_json(seeds_path));
  const InstanceSeeds& seeds = find_instance(all, instance);
  OracleTrackOptions o;
  o.occlusion = s.get<double>("occlusion", 0.0);
  o.noise_px = s.get<double>("noise_px", 0.0);
  o.seed = s.get<std::uint64_t>("seed", 0);
  if (o.occlusion < 0.0 || o.occlusion >= 1.0 || o.noise_px < 0.0)
    throw_usage("occlusion must lie in [0, 1) and noise_px must be non-negative");
  const auto frames = fixture_tracks(gt, instance, seeds.seeds, seeds.init_frame, o);
  Json j = tracks_to_json(frames);
  j["config"] = s.echo();
  if (cmd.out.empty()) {
    std::cout << canonical_dump(j);
  } else {
    write_json(cmd.out, j);
  }
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage: return kUsage;
    case ErrorKind::Data: return kData;
    case ErrorKind::Numerical: return kNumerical;
  }
  return kData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Category-level 6D pose pipeline over serialized features"};
  app.require_subcommand(1);
  std::vector<std::unique_ptr<Command>> commands;

  {
    Command& c = add_command(commands, &app, "build-index", "Build the descriptor index from object bundles");
    c.settings->option<std::string>("--bundles", "bundles", "Directory of object bundles");
    c.settings->option<std::string>("--index", "index", "Index file to write");
    c.settings->option<std::string>("--descriptor", "descriptor", "Descriptor: ffa|cls");
    c.settings->option<int>("--views", "views", "Required views per bundle (0: any)");
    c.settings->option<int>("--jobs", "jobs", "Worker threads (0: all cores)");
    c.run = cmd_build_index;
  }
  {
    auto query = std::make_shared<std::string>();
    Command& c = add_command(commands, &app, "retrieve", "Top-k objects for a query descriptor or grid");
    c.app->add_option("--query", *query, "Query TNSR, [dim] or [rows, cols, dim]")->required();
    c.settings->option<std::string>("--index", "index", "Descriptor index");
    c.settings->option<int>("-k,--k-retrieval", "k_retrieval", "Number of hits");
    c.run = [query](Command& self) { cmd_retrieve(self, *query); };
  }
  {
    auto proposals = std::make_shared<std::string>();
    Command& c = add_command(commands, &app, "scale", "Relative, prior and fused object scales");
    c.app->add_option("--proposals", *proposals, "Proposals JSON")->required();
    scale_options(*c.settings);
    c.settings->option<int>("--jobs", "jobs", "Worker threads (0: all cores)");
    c.run = [proposals](Command& self) { cmd_scale(self, *proposals); };
  }
  {
    auto proposals = std::make_shared<std::string>();
    Command& c = add_command(commands, &app, "align", "Retrieve, rotate, translate and scale proposals");
    c.app->add_option("--proposals", *proposals, "Proposals JSON")->required();
    c.settings->option<std::string>("--index", "index", "Descriptor index");
    c.settings->option<std::string>("--bundles", "bundles", "Directory of object bundles");
    scale_options(*c.settings);
    c.settings->option<int>("--jobs", "jobs", "Worker threads (0: all cores)");
    c.run = [proposals](Command& self) { cmd_align(self, *proposals); };
  }
  {
    CLI::App* track = app.add_subcommand("track", "Track-based pose refinement");
    track->require_subcommand(1);

    auto poses = std::make_shared<std::string>();
    Command& seed = add_command(commands, track, "seed", "Seed correspondences on each instance's best frame");
    seed.app->add_option("--poses", *poses, "Alignment output JSON")->required();
    seed.settings->option<std::string>("--bundles", "bundles", "Directory of object bundles");
    seed.settings->option<int>("--seeds", "seeds", "Seed points per instance");
    seed.settings->option<std::uint64_t>("--seed", "seed", "Random seed");
    seed.run = [poses](Command& self) { cmd_track_seed(self, *poses); };

    auto seeds = std::make_shared<std::string>();
    auto tracks = std::make_shared<std::string>();
    auto instance = std::make_shared<int>(0);
    Command& refine = add_command(commands, track, "refine", "Per-frame PnP over point tracks");
    refine.app->add_option("--seeds", *seeds, "Seeds JSON from 'track seed'")->required();
    refine.app->add_option("--tracks", *tracks, "Point tracks JSON")->required();
    refine.app->add_option("--instance", *instance, "Instance id")->required();
    refine.settings->option<double>("--ransac-threshold", "ransac_threshold_px", "Inlier threshold, pixels");
    refine.settings->option<int>("--ransac-iterations", "ransac_iterations", "RANSAC iterations");
    refine.settings->option<double>("--max-rms", "max_rms_px", "Frames above this RMS are interpolated");
    refine.settings->option<std::uint64_t>("--seed", "seed", "Random seed");
    refine.settings->option<int>("--jobs", "jobs", "Worker threads (0: all cores)");
    refine.run = [seeds, tracks, instance](Command& self) { cmd_track_refine(self, *seeds, *tracks, *instance); };
  }
  {
    auto trajectory = std::make_shared<std::string>();
    Command& c = add_command(commands, &app, "retarget", "Joint trajectory that reproduces an object trajectory");
    c.app->add_option("--trajectory", *trajectory, "Trajectory JSON from 'track refine'")->required();
    c.settings->option<std::string>("--chain", "chain", "'panda' or a chain JSON file");
    c.settings->option<std::string>("--reference", "reference", "relative|absolute");
    c.settings->option<double>("--dt", "dt", "Time step, seconds");
    c.settings->option<double>("--w-pose", "w_pose", "Pose tracking weight");
    c.settings->option<double>("--w-velocity", "w_velocity", "Joint velocity weight");
    c.settings->option<double>("--w-torque", "w_torque", "Torque weight");
    c.settings->option<double>("--w-limits", "w_limits", "Joint limit penalty weight");
    c.settings->option<int>("--max-iterations", "max_iterations", "iLQR iterations");
    c.settings->option<bool>("--clamp", "clamp", "Clamp the result to joint limits");
    c.run = [trajectory](Command& self) { cmd_retarget(self, *trajectory); };
  }
  {
    auto gt = std::make_shared<std::string>();
    auto poses = std::make_shared<std::string>();
    auto trajectories = std::make_shared<std::vector<std::string>>();
    Command& c = add_command(commands, &app, "eval", "Single-frame and tracking metrics");
    c.app->add_option("--gt", *gt, "Ground-truth JSON")->required();
    c.app->add_option("--poses", *poses, "Alignment output JSON");
    c.app->add_option("--trajectory", *trajectories, "Trajectory JSON (repeatable)");
    c.settings->option<std::string>("--bundles", "bundles", "Directory of object bundles");
    c.settings->option<int>("--chamfer-samples", "chamfer_samples", "Surface samples per mesh");
    c.settings->option<std::uint64_t>("--seed", "seed", "Random seed");
    c.settings->option<int>("--jobs", "jobs", "Worker threads (0: all cores)");
    c.run = [gt, poses, trajectories](Command& self) { cmd_eval(self, *gt, *poses, *trajectories); };
  }
  {
    CLI::App* fixtures = app.add_subcommand("fixtures", "Synthetic test fixtures");
    fixtures->require_subcommand(1);

    auto dir = std::make_shared<std::string>();
    Command& scene = add_command(commands, fixtures, "scene", "Three-object scene with templates and ground truth");
    scene.app->add_option("--dir", *dir, "Output directory")->required();
    scene.settings->option<int>("--frames", "frames", "Video length");
    scene.settings->option<int>("--keyframe-stride", "keyframe_stride", "Frames between proposals");
    scene.settings->option<int>("--views", "views", "Template views per object");
    scene.settings->option<int>("--distractors", "distractors", "Extra scale database entries");
    scene.settings->option<std::uint64_t>("--seed", "seed", "Random seed");
    scene.run = [dir](Command& self) { cmd_fixture_scene(self, *dir); };

    auto gt = std::make_shared<std::string>();
    auto seeds = std::make_shared<std::string>();
    auto instance = std::make_shared<int>(0);
    Command& tracks = add_command(commands, fixtures, "tracks", "Point tracks of seeds on the ground-truth motion");
    tracks.app->add_option("--gt", *gt, "Ground-truth JSON")->required();
    tracks.app->add_option("--seeds", *seeds, "Seeds JSON from 'track seed'")->required();
    tracks.app->add_option("--instance", *instance, "Instance id")->required();
    tracks.settings->option<double>("--occlusion", "occlusion", "Per point and frame drop probability");
    tracks.settings->option<double>("--noise", "noise_px", "Gaussian pixel noise");
    tracks.settings->option<std::uint64_t>("--seed", "seed", "Random seed");
    tracks.run = [gt, seeds, instance](Command& self) { cmd_fixture_tracks(self, *gt, *seeds, *instance); };
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    for (auto& c : commands) {
      if (!c->app->parsed()) continue;
      c->settings->finalize();
      c->run(*c);
    }
  } catch (const Error& e) {
    std::cerr << "p6d: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const Json::exception& e) {
    std::cerr << "p6d: " << e.what() << '\n';
    return kData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "p6d: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}
