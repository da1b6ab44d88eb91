#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <thread>

#include "ego3d/bev.hpp"
#include "ego3d/body_fit.hpp"
#include "ego3d/io.hpp"
#include "ego3d/metrics.hpp"
#include "ego3d/pose_refine.hpp"
#include "ego3d/sim.hpp"
#include "ego3d/tracker.hpp"
#include "ego3d/triangulation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ego3d;

namespace {

constexpr const char* kVersion = "0.1.0";

enum class LogLevel { Error = 0, Warn, Info, Debug };

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("EGO3D_LOG");
    if (!env) return LogLevel::Warn;
    const std::string v = env;
    if (v == "error") return LogLevel::Error;
    if (v == "info") return LogLevel::Info;
    if (v == "debug") return LogLevel::Debug;
    return LogLevel::Warn;
  }();
  return level;
}

void log(LogLevel level, const std::string& msg) {
  static const char* names[] = {"error", "warn", "info", "debug"};
  if (level <= log_level())
    std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << "\n";
}

struct RunContext {
  std::string command;
  fs::path output_dir;
  json config = json::object();  // resolved values, echoed in the manifest
  json inputs = json::object();
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = hardware default
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void write_file(const std::string& name, const std::string& content) {
    io::write_text(output_dir / name, content);
    outputs.push_back(name);
  }

  void finish() {
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - start)
                        .count();
    json manifest{{"command", command}, {"config", config}, {"inputs", inputs},
                  {"outputs", outputs}, {"seed", seed},      {"version", kVersion},
                  {"duration_ms", ms}};
    io::write_text(output_dir / "manifest.json", manifest.dump(2));
    log(LogLevel::Info, command + " finished in " + std::to_string(ms) + " ms");
  }
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  const json j = json::parse(io::read_text(path), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::ParseError, "malformed config JSON");
  return j;
}

template <typename T>
T cfg_get(const json& cfg, const char* section, const char* key, T fallback) {
  if (cfg.contains(section) && cfg[section].contains(key)) {
    try {
      return cfg[section][key].get<T>();
    } catch (const json::exception&) {
      throw Error(ErrorCode::ParseError,
                  std::string("bad config value ") + section + "." + key);
    }
  }
  return fallback;
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Output slots are
/// index-addressed by the callee, so scheduling cannot change results.
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(RunContext& ctx, const json& file_cfg) {
  SceneConfig scene_cfg;
  scene_cfg.n_subjects = cfg_get(file_cfg, "scene", "n_subjects", 3);
  scene_cfg.n_static_cams = cfg_get(file_cfg, "scene", "n_static_cams", 8);
  scene_cfg.duration_s = cfg_get(file_cfg, "scene", "duration_s", 10.0);
  scene_cfg.fps = cfg_get(file_cfg, "scene", "fps", 20.0);
  scene_cfg.arena_half_extents.x() = cfg_get(file_cfg, "scene", "arena_x", 6.0);
  scene_cfg.arena_half_extents.y() = cfg_get(file_cfg, "scene", "arena_z", 6.0);
  scene_cfg.seed = ctx.seed;
  json motion_echo = json::array();
  if (file_cfg.contains("scene") && file_cfg["scene"].contains("motion")) {
    for (const json& m : file_cfg["scene"]["motion"]) {
      MotionSpec spec;
      const std::string path = m.value("path", "circle");
      if (path == "circle")
        spec.path = MotionPath::Circle;
      else if (path == "figure-eight")
        spec.path = MotionPath::FigureEight;
      else if (path == "linear-bounce")
        spec.path = MotionPath::LinearBounce;
      else
        throw Error(ErrorCode::ParseError, "unknown motion path " + path);
      spec.speed = m.value("speed", 1.2);
      scene_cfg.motion.push_back(spec);
      motion_echo.push_back(json{{"path", path}, {"speed", spec.speed}});
    }
  }

  NoiseConfig noise;
  noise.keypoint_sigma_px = cfg_get(file_cfg, "noise", "keypoint_sigma_px", 0.0);
  noise.detection_drop_rate = cfg_get(file_cfg, "noise", "detection_drop_rate", 0.0);
  noise.false_positive_rate = cfg_get(file_cfg, "noise", "false_positive_rate", 0.0);
  noise.bbox_jitter_px = cfg_get(file_cfg, "noise", "bbox_jitter_px", 0.0);
  noise.outlier_view_rate = cfg_get(file_cfg, "noise", "outlier_view_rate", 0.0);
  noise.outlier_offset_px = cfg_get(file_cfg, "noise", "outlier_offset_px", 200.0);
  noise.occlusion = cfg_get(file_cfg, "noise", "occlusion", false);
  noise.root_sigma_m = cfg_get(file_cfg, "noise", "root_sigma_m", 0.0);

  ctx.config["scene"] = {{"n_subjects", scene_cfg.n_subjects},
                         {"n_static_cams", scene_cfg.n_static_cams},
                         {"duration_s", scene_cfg.duration_s},
                         {"fps", scene_cfg.fps},
                         {"arena_x", scene_cfg.arena_half_extents.x()},
                         {"arena_z", scene_cfg.arena_half_extents.y()},
                         {"motion", motion_echo},
                         {"seed", scene_cfg.seed}};
  ctx.config["noise"] = {{"keypoint_sigma_px", noise.keypoint_sigma_px},
                         {"detection_drop_rate", noise.detection_drop_rate},
                         {"false_positive_rate", noise.false_positive_rate},
                         {"bbox_jitter_px", noise.bbox_jitter_px},
                         {"outlier_view_rate", noise.outlier_view_rate},
                         {"outlier_offset_px", noise.outlier_offset_px},
                         {"occlusion", noise.occlusion},
                         {"root_sigma_m", noise.root_sigma_m}};

  log(LogLevel::Info, "generating scene");
  const Scene scene = generate_scene(scene_cfg);
  const RenderedScene rendered = render_detections(scene, noise, scene_cfg.seed);

  ctx.write_file("cameras.json", io::cameras_to_json(scene.static_cameras));
  ctx.write_file("ego_cameras.json", io::ego_cameras_to_json(scene.ego_cameras));
  ctx.write_file("model.json", io::kinematic_model_to_json(KinematicModel::canonical()));

  for (int s = 0; s < scene_cfg.n_subjects; ++s) {
    PoseTrajectory3D gt;
    gt.fps = scene_cfg.fps;
    for (const SubjectFrame& sf : scene.subjects[static_cast<std::size_t>(s)])
      gt.frames.push_back(sf.keypoints);
    gt.valid.assign(gt.frames.size(), std::vector<bool>(17, true));
    char name[64];
    std::snprintf(name, sizeof(name), "gt_traj_s%02d.json", s);
    ctx.write_file(name, io::trajectory_to_json(gt));
    std::snprintf(name, sizeof(name), "keypoints_s%02d.json", s);
    ctx.write_file(name,
                   io::keypoints_to_json(rendered.keypoints[static_cast<std::size_t>(s)]));
  }

  for (int c = 0; c < scene.num_cameras(); ++c) {
    io::DetectionStream stream;
    stream.camera = scene.camera_id(c);
    stream.fps = scene_cfg.fps;
    stream.frames = rendered.detections[static_cast<std::size_t>(c)];
    ctx.write_file("detections_" + stream.camera + ".json", io::detections_to_json(stream));

    std::vector<io::MotRow> gt_rows;
    for (int f = 0; f < scene.num_frames(); ++f)
      for (int s = 0; s < scene_cfg.n_subjects; ++s) {
        const CameraFrameObservation& obs =
            scene.observations[static_cast<std::size_t>(c)][static_cast<std::size_t>(f)]
                              [static_cast<std::size_t>(s)];
        if (!obs.visible) continue;
        io::MotRow row;
        row.frame = f + 1;
        row.id = s;
        row.box = obs.bbox;
        row.score = 1.0;
        row.world =
            scene.subjects[static_cast<std::size_t>(s)][static_cast<std::size_t>(f)].root;
        gt_rows.push_back(row);
      }
    ctx.write_file("gt_" + stream.camera + ".txt", io::mot_to_text(gt_rows));
  }
  return 0;
}

// -------------------------------------------------------------- triangulate

int cmd_triangulate(RunContext& ctx, const json& file_cfg, const std::string& cameras_path,
                    const std::string& ego_cameras_path, const std::string& keypoints_path,
                    double fps) {
  RansacConfig rcfg;
  rcfg.max_iterations = cfg_get(file_cfg, "ransac", "max_iterations", 100);
  rcfg.inlier_threshold = cfg_get(file_cfg, "ransac", "inlier_threshold", 10.0);
  rcfg.min_inliers = cfg_get(file_cfg, "ransac", "min_inliers", 2);
  rcfg.min_confidence = cfg_get(file_cfg, "ransac", "min_confidence", 0.1);
  rcfg.rng_seed = ctx.seed;
  ctx.config["ransac"] = {{"max_iterations", rcfg.max_iterations},
                          {"inlier_threshold", rcfg.inlier_threshold},
                          {"min_inliers", rcfg.min_inliers},
                          {"min_confidence", rcfg.min_confidence},
                          {"rng_seed", rcfg.rng_seed}};
  ctx.inputs = {{"cameras", cameras_path},
                {"ego_cameras", ego_cameras_path},
                {"keypoints", keypoints_path}};

  const std::vector<CameraView> static_cams =
      io::cameras_from_json(io::read_text(cameras_path));
  std::vector<EgoCameraStream> ego_cams;
  if (!ego_cameras_path.empty())
    ego_cams = io::ego_cameras_from_json(io::read_text(ego_cameras_path));
  const auto keyframes = io::keypoints_from_json(io::read_text(keypoints_path));

  const int frames = static_cast<int>(keyframes.size());
  int joints = 0;
  for (const auto& frame : keyframes)
    for (const auto& [id, ks] : frame)
      joints = std::max(joints, static_cast<int>(ks.points.rows()));
  if (frames == 0 || joints == 0)
    throw Error(ErrorCode::MissingInput, "keypoint file contains no observations");

  CameraMap static_map;
  for (const CameraView& c : static_cams) static_map[c.id] = c.projection();

  PoseTrajectory3D traj;
  traj.fps = fps;
  traj.frames.assign(static_cast<std::size_t>(frames), Eigen::MatrixX3d::Zero(joints, 3));
  traj.valid.assign(static_cast<std::size_t>(frames),
                    std::vector<bool>(static_cast<std::size_t>(joints), false));

  parallel_for(frames, resolve_threads(ctx.threads), [&](int f) {
    CameraMap cams = static_map;
    for (const EgoCameraStream& ego : ego_cams)
      if (f < static_cast<int>(ego.poses.size()))
        cams[ego.id] =
            compose_projection(ego.intrinsics, ego.poses[static_cast<std::size_t>(f)]);
    const auto& per_camera = keyframes[static_cast<std::size_t>(f)];
    if (per_camera.empty()) return;
    try {
      const PoseTriangulation pt = triangulate_pose(per_camera, cams, rcfg);
      traj.frames[static_cast<std::size_t>(f)] = pt.joints;
      traj.valid[static_cast<std::size_t>(f)] = pt.valid;
    } catch (const Error&) {
      // whole frame failed; joints stay invalid
    }
  });

  ctx.write_file("triangulated.json", io::trajectory_to_json(traj));
  return 0;
}

// ------------------------------------------------------------------- refine

int cmd_refine(RunContext& ctx, const json& file_cfg, const std::string& input_path) {
  RefineWeights w;
  w.limb = cfg_get(file_cfg, "refine_weights", "limb", 1.0);
  w.symm = cfg_get(file_cfg, "refine_weights", "symm", 1.0);
  w.temporal = cfg_get(file_cfg, "refine_weights", "temporal", 0.5);
  w.reg = cfg_get(file_cfg, "refine_weights", "reg", 0.1);
  OptimizeConfig opt;
  opt.max_iterations = cfg_get(file_cfg, "optimize", "max_iterations", 500);
  opt.tolerance = cfg_get(file_cfg, "optimize", "tolerance", 1e-10);
  ctx.config["refine_weights"] = {{"limb", w.limb},
                                  {"symm", w.symm},
                                  {"temporal", w.temporal},
                                  {"reg", w.reg}};
  ctx.config["optimize"] = {{"max_iterations", opt.max_iterations},
                            {"tolerance", opt.tolerance}};
  ctx.inputs = {{"trajectory", input_path}};

  const PoseTrajectory3D traj = io::trajectory_from_json(io::read_text(input_path));
  const PoseTrajectory3D refined = refine(traj, coco17_topology(), w, opt);
  ctx.write_file("refined.json", io::trajectory_to_json(refined));
  return 0;
}

// ---------------------------------------------------------------------- fit

int cmd_fit(RunContext& ctx, const json& file_cfg, const std::string& input_path,
            const std::string& model_path) {
  MeshFitWeights w;
  w.data = cfg_get(file_cfg, "mesh_weights", "data", 1.0);
  w.pose_norm = cfg_get(file_cfg, "mesh_weights", "pose_norm", 1e-3);
  w.limb = cfg_get(file_cfg, "mesh_weights", "limb", 0.1);
  w.symm = cfg_get(file_cfg, "mesh_weights", "symm", 0.1);
  w.temporal = cfg_get(file_cfg, "mesh_weights", "temporal", 0.1);
  w.shape_prior = cfg_get(file_cfg, "mesh_weights", "shape_prior", 1e-3);
  OptimizeConfig opt;
  opt.max_iterations = cfg_get(file_cfg, "optimize", "max_iterations", 400);
  ctx.config["mesh_weights"] = {{"data", w.data},         {"pose_norm", w.pose_norm},
                                {"limb", w.limb},         {"symm", w.symm},
                                {"temporal", w.temporal}, {"shape_prior", w.shape_prior}};
  ctx.config["optimize"] = {{"max_iterations", opt.max_iterations}};
  ctx.inputs = {{"trajectory", input_path}, {"model", model_path}};

  const PoseTrajectory3D target = io::trajectory_from_json(io::read_text(input_path));
  const KinematicModel model =
      model_path.empty() ? KinematicModel::canonical()
                         : io::kinematic_model_from_json(io::read_text(model_path));

  const BodyParams init = rest_init_for_target(model, target);
  const FitResult result = fit_three_stage(model, init, target, w, coco17_topology(), opt);
  ctx.config["final_loss"] = result.final_loss;
  ctx.write_file("body_params.json", io::body_sequence_to_json(result.params, target.fps));
  return 0;
}

// -------------------------------------------------------------------- track

int cmd_track(RunContext& ctx, const json& file_cfg, const std::string& detections_path) {
  AssociationConfig acfg;
  acfg.alpha = cfg_get(file_cfg, "tracker", "alpha", 0.3);
  acfg.dist_scale = cfg_get(file_cfg, "tracker", "dist_scale", 2.0);
  acfg.gate_iou = cfg_get(file_cfg, "tracker", "gate_iou", 0.1);
  acfg.gate_dist = cfg_get(file_cfg, "tracker", "gate_dist", 3.0);
  acfg.max_age = cfg_get(file_cfg, "tracker", "max_age", 30);
  acfg.min_hits = cfg_get(file_cfg, "tracker", "min_hits", 3);
  acfg.score_threshold = cfg_get(file_cfg, "tracker", "score_threshold", 0.5);
  ctx.config["tracker"] = {{"alpha", acfg.alpha},
                           {"dist_scale", acfg.dist_scale},
                           {"gate_iou", acfg.gate_iou},
                           {"gate_dist", acfg.gate_dist},
                           {"max_age", acfg.max_age},
                           {"min_hits", acfg.min_hits},
                           {"score_threshold", acfg.score_threshold}};
  ctx.inputs = {{"detections", detections_path}};

  const io::DetectionStream stream =
      io::detections_from_json(io::read_text(detections_path));
  if (!(stream.fps > 0.0))
    throw Error(ErrorCode::ParseError, "stream fps must be positive");

  MultiObjectTracker tracker(acfg);
  std::vector<io::MotRow> rows;
  const double dt = 1.0 / stream.fps;
  for (std::size_t f = 0; f < stream.frames.size(); ++f) {
    const FrameDetections& fd = stream.frames[f];
    for (const TrackOutput& t : tracker.step(fd.detections, fd.camera_pose, dt)) {
      io::MotRow row;
      row.frame = static_cast<int>(f) + 1;
      row.id = t.id;
      row.box = t.bbox;
      row.score = t.score;
      if (t.world_root) row.world = *t.world_root;
      rows.push_back(row);
    }
  }
  ctx.write_file("mot_" + stream.camera + ".txt", io::mot_to_text(rows));
  return 0;
}

// --------------------------------------------------------------------- eval

int cmd_eval(RunContext& ctx, const json& file_cfg, const std::string& mode,
             const std::string& gt_path, const std::string& pred_path) {
  ctx.inputs = {{"gt", gt_path}, {"pred", pred_path}, {"mode", mode}};
  json report{{"mode", mode}};

  if (mode == "mot") {
    const double iou_threshold = cfg_get(file_cfg, "eval", "iou_threshold", 0.5);
    ctx.config["eval"] = {{"iou_threshold", iou_threshold}};
    const auto gt_rows = io::mot_from_text(io::read_text(gt_path));
    const auto pred_rows = io::mot_from_text(io::read_text(pred_path));
    int gt_max = 0, pred_max = 0;
    for (const auto& r : gt_rows) gt_max = std::max(gt_max, r.frame);
    for (const auto& r : pred_rows) pred_max = std::max(pred_max, r.frame);
    if (pred_max > gt_max)
      throw Error(ErrorCode::MissingInput,
                  "prediction frames exceed ground truth (gt max " + std::to_string(gt_max) +
                      ", pred max " + std::to_string(pred_max) + ")");
    const MotSequence seq = io::mot_rows_to_frames(gt_rows, pred_rows);
    const ClearResult clear = clear_mot(seq, iou_threshold);
    const IdMeasures idm = idf1(seq, iou_threshold);
    const HotaResult h = hota(seq);
    report["mota"] = clear.mota;
    report["fp"] = clear.fp;
    report["fn"] = clear.fn;
    report["idsw"] = clear.idsw;
    report["gt"] = clear.gt_total;
    report["idf1"] = idm.idf1;
    report["hota"] = h.hota;
    report["deta"] = h.det_a;
    report["assa"] = h.ass_a;
  } else if (mode == "pose" || mode == "chamfer") {
    const PoseTrajectory3D gt = io::trajectory_from_json(io::read_text(gt_path));
    const PoseTrajectory3D pred = io::trajectory_from_json(io::read_text(pred_path));
    if (gt.num_frames() != pred.num_frames())
      throw Error(ErrorCode::MissingInput,
                  "frame count mismatch (gt " + std::to_string(gt.num_frames()) + ", pred " +
                      std::to_string(pred.num_frames()) + ")");
    if (mode == "pose") {
      if (gt.num_joints() != pred.num_joints())
        throw Error(ErrorCode::MissingInput, "joint count mismatch");
      double mpjpe = 0.0, pa = 0.0;
      int counted = 0;
      for (int t = 0; t < gt.num_frames(); ++t) {
        std::vector<bool> both(gt.valid[t].size());
        bool any = false;
        for (std::size_t j = 0; j < both.size(); ++j) {
          both[j] = gt.valid[t][j] && pred.valid[t][j];
          any = any || both[j];
        }
        if (!any) continue;
        const PoseMetrics m = pose_metrics(pred.frames[t], gt.frames[t], &both);
        mpjpe += m.mpjpe;
        pa += m.pa_mpjpe;
        ++counted;
      }
      if (counted == 0) throw Error(ErrorCode::MissingInput, "no jointly valid frames");
      report["mpjpe"] = mpjpe / counted;
      report["pa_mpjpe"] = pa / counted;
      report["frames"] = counted;
    } else {
      double chamfer = 0.0;
      int counted = 0;
      for (int t = 0; t < gt.num_frames(); ++t) {
        std::vector<Eigen::Vector3d> a, b;
        for (int j = 0; j < gt.num_joints(); ++j)
          if (gt.valid[t][static_cast<std::size_t>(j)])
            a.push_back(gt.frames[t].row(j).transpose());
        for (int j = 0; j < pred.num_joints(); ++j)
          if (pred.valid[t][static_cast<std::size_t>(j)])
            b.push_back(pred.frames[t].row(j).transpose());
        if (a.empty() || b.empty()) continue;
        chamfer += chamfer_bidirectional(a, b);
        ++counted;
      }
      if (counted == 0) throw Error(ErrorCode::MissingInput, "no jointly valid frames");
      report["chamfer"] = chamfer / counted;
      report["frames"] = counted;
    }
  } else {
    throw Error(ErrorCode::InvalidConfig, "unknown eval mode " + mode);
  }

  report["config"] = ctx.config;
  ctx.write_file("report.json", report.dump(2));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view human annotation and 3D tracking toolkit"};
  app.require_subcommand(1);

  std::string config_path, output_dir = ".";
  std::uint64_t seed = 0;
  int threads = 0;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed, "RNG seed")->capture_default_str();
  app.add_option("--threads", threads, "worker threads (0 = auto, 1 = serial)")
      ->capture_default_str();
  app.add_option("--output", output_dir, "output directory")->capture_default_str();

  auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic scene");

  auto* tri_cmd = app.add_subcommand("triangulate", "triangulate keypoints per frame");
  std::string cameras_path, ego_cameras_path, keypoints_path;
  double tri_fps = 20.0;
  tri_cmd->add_option("--cameras", cameras_path, "static cameras JSON")->required();
  tri_cmd->add_option("--ego-cameras", ego_cameras_path, "ego camera streams JSON");
  tri_cmd->add_option("--keypoints", keypoints_path, "per-subject keypoints JSON")
      ->required();
  tri_cmd->add_option("--fps", tri_fps, "output trajectory fps");

  auto* ref_cmd = app.add_subcommand("refine", "refine a 3D trajectory");
  std::string refine_input;
  ref_cmd->add_option("--input", refine_input, "trajectory JSON")->required();

  auto* fit_cmd = app.add_subcommand("fit", "fit body parameters to a trajectory");
  std::string fit_input, model_path;
  fit_cmd->add_option("--input", fit_input, "trajectory JSON")->required();
  fit_cmd->add_option("--model", model_path, "kinematic model JSON (default canonical)");

  auto* trk_cmd = app.add_subcommand("track", "track detections over time");
  std::string detections_path;
  trk_cmd->add_option("--detections", detections_path, "detection stream JSON")->required();

  auto* eval_cmd = app.add_subcommand("eval", "evaluate tracking or pose output");
  std::string eval_mode = "mot", gt_path, pred_path;
  eval_cmd->add_option("--mode", eval_mode, "mot | pose | chamfer")->capture_default_str();
  eval_cmd->add_option("--gt", gt_path, "ground truth file")->required();
  eval_cmd->add_option("--pred", pred_path, "prediction file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  RunContext ctx;
  ctx.output_dir = output_dir;
  ctx.seed = seed;
  ctx.threads = threads;

  try {
    const json file_cfg = load_config(config_path);
    std::filesystem::create_directories(ctx.output_dir);
    int rc = 0;
    if (sim_cmd->parsed()) {
      ctx.command = "simulate";
      rc = cmd_simulate(ctx, file_cfg);
    } else if (tri_cmd->parsed()) {
      ctx.command = "triangulate";
      rc = cmd_triangulate(ctx, file_cfg, cameras_path, ego_cameras_path, keypoints_path,
                           tri_fps);
    } else if (ref_cmd->parsed()) {
      ctx.command = "refine";
      rc = cmd_refine(ctx, file_cfg, refine_input);
    } else if (fit_cmd->parsed()) {
      ctx.command = "fit";
      rc = cmd_fit(ctx, file_cfg, fit_input, model_path);
    } else if (trk_cmd->parsed()) {
      ctx.command = "track";
      rc = cmd_track(ctx, file_cfg, detections_path);
    } else if (eval_cmd->parsed()) {
      ctx.command = "eval";
      rc = cmd_eval(ctx, file_cfg, eval_mode, gt_path, pred_path);
    }
    ctx.finish();
    return rc;
  } catch (const Error& e) {
    const json record{{"error", error_code_name(e.code())}, {"message", e.what()}};
    std::cerr << record.dump() << "\n";
    return (e.code() == ErrorCode::MissingInput || e.code() == ErrorCode::ParseError) ? 3
                                                                                      : 4;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "Unexpected"}, {"message", e.what()}}.dump() << "\n";
    return 4;
  }
}
