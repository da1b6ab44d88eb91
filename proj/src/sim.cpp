#include "ego3d/sim.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "ego3d/rng.hpp"

namespace ego3d {

namespace {

constexpr int kKeypoints = 17;
constexpr double kStrideLength = 0.7;        // meters per step cycle
constexpr double kEgoMountOffset = 0.10;     // meters above the head joint
constexpr double kOccluderRadius = 0.25;     // body cylinder for line-of-sight
constexpr double kDepthCylinderRadius = 0.4; // body cylinder for depth maps
constexpr int kMinVisibleKeypoints = 4;
constexpr double kBboxPad = 0.05;            // fraction of span per side

struct PathState {
  Eigen::Vector2d position;  // ground plane (x, z)
  double heading = 0.0;      // yaw, 0 faces +z
};

// Per-subject path parameters drawn once from the scene rng.
struct PathParams {
  MotionPath type = MotionPath::Circle;
  double speed = 1.2;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 2.0;
  double phase = 0.0;
  Eigen::Vector2d a = Eigen::Vector2d::Zero();  // bounce segment ends
  Eigen::Vector2d b = Eigen::Vector2d::Zero();
  Eigen::Vector2d fig_axes = {2.0, 1.0};
};

PathState path_at(const PathParams& p, double time_s) {
  PathState out;
  switch (p.type) {
    case MotionPath::Circle: {
      const double omega = p.speed / p.radius;
      const double u = omega * time_s + p.phase;
      out.position = p.center + p.radius * Eigen::Vector2d(std::cos(u), std::sin(u));
      const Eigen::Vector2d tangent(-std::sin(u), std::cos(u));
      out.heading = std::atan2(tangent.x(), tangent.y());
      break;
    }
    case MotionPath::FigureEight: {
      // Gerono lemniscate; parameter rate sized for roughly the target speed.
      const double omega = p.speed / std::max(0.5, p.fig_axes.norm());
      const double u = omega * time_s + p.phase;
      out.position = p.center + Eigen::Vector2d(p.fig_axes.x() * std::sin(u),
                                                p.fig_axes.y() * std::sin(u) * std::cos(u));
      const Eigen::Vector2d tangent(p.fig_axes.x() * std::cos(u),
                                    p.fig_axes.y() * std::cos(2.0 * u));
      out.heading = std::atan2(tangent.x(), tangent.y());
      break;
    }
    case MotionPath::LinearBounce: {
      const double len = (p.b - p.a).norm();
      const double u = std::fmod(p.speed * time_s / std::max(len, 1e-6) + p.phase, 2.0);
      const double s = u < 1.0 ? u : 2.0 - u;
      out.position = p.a + s * (p.b - p.a);
      const Eigen::Vector2d dir = (u < 1.0 ? 1.0 : -1.0) * (p.b - p.a).normalized();
      out.heading = std::atan2(dir.x(), dir.y());
      break;
    }
  }
  return out;
}

Eigen::Matrix3d yaw_matrix(double heading) {
  return Eigen::AngleAxisd(heading, Eigen::Vector3d::UnitY()).toRotationMatrix();
}

// Walk-cycle body parameters: root on the path, hip/knee/shoulder/elbow
// oscillation phased to the stride.
BodyParams walk_params(const PathState& state, double stride_phase) {
  BodyParams p = BodyParams::rest();
  p.global.rot6d = matrix_to_rot6d(yaw_matrix(state.heading));
  p.global.translation = {state.position.x(), 0.0, state.position.y()};

  const double swing = 0.45 * std::sin(stride_phase);
  auto set_joint = [&](int joint, const Eigen::Matrix3d& r) {
    p.pose.row(joint - 1) = matrix_to_rot6d(r).transpose();
  };
  const auto rx = [](double a) {
    return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitX()).toRotationMatrix();
  };
  const auto rz = [](double a) {
    return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  };

  set_joint(1, rx(swing));    // left hip
  set_joint(2, rx(-swing));   // right hip
  set_joint(4, rx(0.3 * (1.0 - std::cos(stride_phase))));  // left knee
  set_joint(5, rx(0.3 * (1.0 + std::cos(stride_phase))));  // right knee
  // Arms hang from the T-pose and counter-swing.
  set_joint(16, rz(-1.35) * rx(-swing));
  set_joint(17, rz(1.35) * rx(swing));
  set_joint(18, rx(-0.25));
  set_joint(19, rx(-0.25));
  return p;
}

// Camera-from-world pose looking from `center` along `forward` with y down.
RigidPose look_along(const Eigen::Vector3d& center, const Eigen::Vector3d& forward_in,
                     const Eigen::Vector3d& up = {0, 1, 0}) {
  const Eigen::Vector3d z = forward_in.normalized();
  Eigen::Vector3d y = -up;
  Eigen::Vector3d x = y.cross(z);
  const double n = x.norm();
  if (n < 1e-9) throw Error(ErrorCode::DegenerateGeometry, "camera looks along up axis");
  x /= n;
  y = z.cross(x);
  Eigen::Matrix3d r_wc;
  r_wc.col(0) = x;
  r_wc.col(1) = y;
  r_wc.col(2) = z;
  RigidPose pose;
  pose.rotation = r_wc.transpose();
  pose.translation = -(pose.rotation * center);
  return pose;
}

CameraIntrinsics static_intrinsics() {
  CameraIntrinsics k;
  k.fx = k.fy = 1200.0;
  k.cx = 960.0;
  k.cy = 540.0;
  k.width = 1920;
  k.height = 1080;
  return k;
}

CameraIntrinsics ego_intrinsics() {
  CameraIntrinsics k;
  k.fx = k.fy = 704.0;
  k.cx = k.cy = 704.0;
  k.width = 1408;
  k.height = 1408;
  return k;
}

CameraFrameObservation observe(const Eigen::MatrixX3d& keypoints_world,
                               const Eigen::Vector3d& root_world,
                               const CameraIntrinsics& k, const RigidPose& pose) {
  const ProjectionMatrix p = compose_projection(k, pose);
  CameraFrameObservation obs;
  obs.keypoints.resize(kKeypoints, 2);
  obs.keypoints.setZero();
  obs.kp_visible.assign(kKeypoints, false);
  obs.depth = pose.apply(root_world).z();

  int visible = 0;
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  for (int j = 0; j < kKeypoints; ++j) {
    const Eigen::Vector3d h = p.m * Eigen::Vector3d(keypoints_world.row(j)).homogeneous();
    if (h.z() <= 1e-9) continue;
    const Eigen::Vector2d px = h.hnormalized();
    obs.keypoints.row(j) = px.transpose();
    if (px.x() < 0 || px.x() >= k.width || px.y() < 0 || px.y() >= k.height) continue;
    obs.kp_visible[static_cast<std::size_t>(j)] = true;
    if (visible == 0) {
      x1 = x2 = px.x();
      y1 = y2 = px.y();
    } else {
      x1 = std::min(x1, px.x());
      x2 = std::max(x2, px.x());
      y1 = std::min(y1, px.y());
      y2 = std::max(y2, px.y());
    }
    ++visible;
  }
  obs.visible = visible >= kMinVisibleKeypoints;
  if (obs.visible) {
    const double pad_x = kBboxPad * (x2 - x1) + 1.0;
    const double pad_y = kBboxPad * (y2 - y1) + 1.0;
    obs.bbox.x1 = std::max(0.0, x1 - pad_x);
    obs.bbox.y1 = std::max(0.0, y1 - pad_y);
    obs.bbox.x2 = std::min(static_cast<double>(k.width), x2 + pad_x);
    obs.bbox.y2 = std::min(static_cast<double>(k.height), y2 + pad_y);
  }
  return obs;
}

Cylinder3D occluder_cylinder(const SubjectFrame& sf) {
  const double top = sf.keypoints.col(1).maxCoeff() + 0.1;
  Cylinder3D c;
  c.radius = kOccluderRadius;
  c.height = std::max(top, 0.2);
  c.center = {sf.root.x(), 0.5 * c.height, sf.root.z()};
  return c;
}

}  // namespace

void SceneConfig::validate() const {
  if (n_subjects < 1) throw Error(ErrorCode::InvalidConfig, "need at least one subject");
  if (n_static_cams < 0) throw Error(ErrorCode::InvalidConfig, "negative camera count");
  if (!(fps > 0.0) || !(duration_s > 0.0))
    throw Error(ErrorCode::InvalidConfig, "duration and fps must be positive");
  if (!(arena_half_extents.minCoeff() > 0.0))
    throw Error(ErrorCode::InvalidConfig, "arena extents must be positive");
  if (num_frames() < 1) throw Error(ErrorCode::InvalidConfig, "no frames to generate");
}

void NoiseConfig::validate() const {
  for (double rate : {detection_drop_rate, false_positive_rate, outlier_view_rate})
    if (rate < 0.0 || rate > 1.0)
      throw Error(ErrorCode::InvalidConfig, "rates must lie in [0, 1]");
  if (keypoint_sigma_px < 0.0 || bbox_jitter_px < 0.0 || root_sigma_m < 0.0 ||
      depth_scale_jitter < 0.0)
    throw Error(ErrorCode::InvalidConfig, "sigmas must be nonnegative");
}

std::string Scene::camera_id(int cam) const {
  const int n_static = static_cast<int>(static_cameras.size());
  return cam < n_static ? static_cameras[static_cast<std::size_t>(cam)].id
                        : ego_cameras[static_cast<std::size_t>(cam - n_static)].id;
}

const CameraIntrinsics& Scene::camera_intrinsics(int cam) const {
  const int n_static = static_cast<int>(static_cameras.size());
  return cam < n_static
             ? static_cameras[static_cast<std::size_t>(cam)].intrinsics
             : ego_cameras[static_cast<std::size_t>(cam - n_static)].intrinsics;
}

RigidPose Scene::camera_pose(int cam, int frame) const {
  const int n_static = static_cast<int>(static_cameras.size());
  if (cam < n_static) return static_cameras[static_cast<std::size_t>(cam)].pose;
  return ego_cameras[static_cast<std::size_t>(cam - n_static)]
      .poses[static_cast<std::size_t>(frame)];
}

ProjectionMatrix Scene::camera_projection(int cam, int frame) const {
  return compose_projection(camera_intrinsics(cam), camera_pose(cam, frame));
}

Scene generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const KinematicModel& model = KinematicModel::canonical();
  const int frames = cfg.num_frames();

  Scene scene;
  scene.config = cfg;

  // Subject paths. Each subject is confined to its own grid cell so bodies
  // never intersect in the world (identities stay geometrically meaningful);
  // from the ring cameras the subjects still cross constantly in the image.
  std::vector<PathParams> paths;
  const double margin = 1.0;
  const Eigen::Vector2d usable = cfg.arena_half_extents - Eigen::Vector2d(margin, margin);
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(cfg.n_subjects))));
  const int rows = (cfg.n_subjects + cols - 1) / cols;
  const double cell_w = 2.0 * usable.x() / cols;
  const double cell_d = 2.0 * usable.y() / rows;
  const double safe_half = std::max(0.25, 0.5 * std::min(cell_w, cell_d) - 0.3);
  for (int s = 0; s < cfg.n_subjects; ++s) {
    const MotionSpec spec = cfg.motion.empty()
                                ? MotionSpec{static_cast<MotionPath>(s % 3), 1.2}
                                : cfg.motion[static_cast<std::size_t>(s) % cfg.motion.size()];
    const int col = s % cols;
    const int row = s / cols;
    const Eigen::Vector2d cell_center(-usable.x() + (col + 0.5) * cell_w,
                                      -usable.y() + (row + 0.5) * cell_d);
    PathParams p;
    p.type = spec.path;
    p.speed = spec.speed;
    p.phase = rng.uniform(0.0, 2.0 * M_PI);
    p.center = cell_center;
    p.radius = rng.uniform(0.6, 1.0) * safe_half;
    p.fig_axes = {safe_half * rng.uniform(0.7, 0.95), safe_half * rng.uniform(0.4, 0.6)};
    p.a = cell_center + Eigen::Vector2d(rng.uniform(-safe_half, 0.0),
                                        rng.uniform(-safe_half, safe_half));
    p.b = cell_center + Eigen::Vector2d(rng.uniform(0.0, safe_half),
                                        rng.uniform(-safe_half, safe_half));
    paths.push_back(p);
  }

  // Static camera ring around the arena.
  const double ring_radius = cfg.arena_half_extents.maxCoeff() + 2.5;
  for (int c = 0; c < cfg.n_static_cams; ++c) {
    const double ang =
        2.0 * M_PI * c / std::max(1, cfg.n_static_cams) + rng.uniform(-0.1, 0.1);
    const double height = rng.uniform(2.0, 3.0);
    const Eigen::Vector3d center(ring_radius * std::sin(ang), height,
                                 ring_radius * std::cos(ang));
    CameraView cam;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "static%02d", c);
    cam.id = buf;
    cam.intrinsics = static_intrinsics();
    cam.pose = look_along(center, Eigen::Vector3d(0.0, 1.0, 0.0) - center);
    scene.static_cameras.push_back(std::move(cam));
  }

  // Subject motion + ego cameras rigidly mounted on the head joint.
  std::vector<double> stride_offset;
  for (int s = 0; s < cfg.n_subjects; ++s)
    stride_offset.push_back(rng.uniform(0.0, 2.0 * M_PI));

  scene.subjects.resize(static_cast<std::size_t>(cfg.n_subjects));
  scene.ego_cameras.resize(static_cast<std::size_t>(cfg.n_subjects));
  for (int s = 0; s < cfg.n_subjects; ++s) {
    auto& ego = scene.ego_cameras[static_cast<std::size_t>(s)];
    char buf[16];
    std::snprintf(buf, sizeof(buf), "ego%02d", s);
    ego.id = buf;
    ego.subject = s;
    ego.intrinsics = ego_intrinsics();

    auto& track = scene.subjects[static_cast<std::size_t>(s)];
    track.reserve(static_cast<std::size_t>(frames));
    const PathParams& path = paths[static_cast<std::size_t>(s)];
    for (int f = 0; f < frames; ++f) {
      const double time_s = f / cfg.fps;
      const PathState st = path_at(path, time_s);
      const double phase =
          2.0 * M_PI * (path.speed / kStrideLength) * time_s + stride_offset[static_cast<std::size_t>(s)];
      SubjectFrame sf;
      sf.params = walk_params(st, phase);
      const auto joints = forward_kinematics_joints(model, sf.params);
      sf.keypoints = model.keypoint_regressor * joints;
      sf.root = joints.row(0).transpose();
      track.push_back(std::move(sf));

      // Head-mounted camera: offset along the head's up axis, looking along
      // the head's forward axis.
      const Eigen::Matrix3d head_rot = yaw_matrix(st.heading);
      const Eigen::Vector3d head_pos = joints.row(15).transpose();
      const Eigen::Vector3d cam_center =
          head_pos + kEgoMountOffset * (head_rot * Eigen::Vector3d::UnitY());
      ego.poses.push_back(look_along(cam_center, head_rot * Eigen::Vector3d::UnitZ(),
                                     head_rot * Eigen::Vector3d::UnitY()));
    }
  }

  // Exact per-camera observations.
  const int n_cams = scene.num_cameras();
  scene.observations.resize(static_cast<std::size_t>(n_cams));
  for (int c = 0; c < n_cams; ++c) {
    auto& per_frame = scene.observations[static_cast<std::size_t>(c)];
    per_frame.resize(static_cast<std::size_t>(frames));
    for (int f = 0; f < frames; ++f) {
      auto& per_subject = per_frame[static_cast<std::size_t>(f)];
      per_subject.reserve(static_cast<std::size_t>(cfg.n_subjects));
      for (int s = 0; s < cfg.n_subjects; ++s) {
        const SubjectFrame& sf =
            scene.subjects[static_cast<std::size_t>(s)][static_cast<std::size_t>(f)];
        per_subject.push_back(observe(sf.keypoints, sf.root, scene.camera_intrinsics(c),
                                      scene.camera_pose(c, f)));
      }
    }
  }
  return scene;
}

bool segment_hits_cylinder(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                           const Cylinder3D& cyl) {
  const Eigen::Vector2d a2(a.x(), a.z());
  const Eigen::Vector2d d2(b.x() - a.x(), b.z() - a.z());
  const Eigen::Vector2d f = a2 - Eigen::Vector2d(cyl.center.x(), cyl.center.z());

  const double qa = d2.squaredNorm();
  const double qb = 2.0 * f.dot(d2);
  const double qc = f.squaredNorm() - cyl.radius * cyl.radius;

  double t0, t1;
  if (qa < 1e-12) {
    if (qc > 0.0) return false;  // vertical segment outside the circle
    t0 = 0.0;
    t1 = 1.0;
  } else {
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc <= 0.0) return false;
    const double sq = std::sqrt(disc);
    t0 = (-qb - sq) / (2.0 * qa);
    t1 = (-qb + sq) / (2.0 * qa);
  }
  // Strict interior of the segment so endpoints on the surface do not count.
  t0 = std::max(t0, 1e-6);
  t1 = std::min(t1, 1.0 - 1e-6);
  if (t0 >= t1) return false;

  const double y0 = a.y() + t0 * (b.y() - a.y());
  const double y1 = a.y() + t1 * (b.y() - a.y());
  const double ylo = cyl.center.y() - 0.5 * cyl.height;
  const double yhi = cyl.center.y() + 0.5 * cyl.height;
  return std::max(std::min(y0, y1), ylo) <= std::min(std::max(y0, y1), yhi);
}

RenderedScene render_detections(const Scene& scene, const NoiseConfig& noise,
                                std::uint64_t seed) {
  noise.validate();
  Rng rng(seed);
  const int n_cams = scene.num_cameras();
  const int frames = scene.num_frames();
  const int n_subjects = scene.config.n_subjects;
  const bool noiseless = noise.keypoint_sigma_px == 0.0 && noise.bbox_jitter_px == 0.0 &&
                         noise.root_sigma_m == 0.0;

  RenderedScene out;
  out.detections.assign(static_cast<std::size_t>(n_cams), {});
  out.keypoints.assign(static_cast<std::size_t>(n_subjects), {});
  for (int s = 0; s < n_subjects; ++s)
    out.keypoints[static_cast<std::size_t>(s)].resize(static_cast<std::size_t>(frames));

  for (int c = 0; c < n_cams; ++c) {
    auto& cam_frames = out.detections[static_cast<std::size_t>(c)];
    cam_frames.resize(static_cast<std::size_t>(frames));
    const CameraIntrinsics& intr = scene.camera_intrinsics(c);
    for (int f = 0; f < frames; ++f) {
      FrameDetections& fd = cam_frames[static_cast<std::size_t>(f)];
      fd.camera_pose = scene.camera_pose(c, f);
      const Eigen::Vector3d cam_center = fd.camera_pose.center();

      for (int s = 0; s < n_subjects; ++s) {
        const CameraFrameObservation& obs =
            scene.observations[static_cast<std::size_t>(c)][static_cast<std::size_t>(f)]
                              [static_cast<std::size_t>(s)];
        if (!obs.visible) continue;
        const SubjectFrame& sf =
            scene.subjects[static_cast<std::size_t>(s)][static_cast<std::size_t>(f)];

        std::vector<bool> kp_usable = obs.kp_visible;
        if (noise.occlusion) {
          for (int o = 0; o < n_subjects; ++o) {
            if (o == s) continue;
            const Cylinder3D cyl = occluder_cylinder(
                scene.subjects[static_cast<std::size_t>(o)][static_cast<std::size_t>(f)]);
            for (int j = 0; j < kKeypoints; ++j)
              if (kp_usable[static_cast<std::size_t>(j)] &&
                  segment_hits_cylinder(cam_center, sf.keypoints.row(j).transpose(), cyl))
                kp_usable[static_cast<std::size_t>(j)] = false;
          }
        }
        const int usable =
            static_cast<int>(std::count(kp_usable.begin(), kp_usable.end(), true));
        if (usable == 0) continue;  // fully occluded
        if (noise.detection_drop_rate > 0.0 && rng.bernoulli(noise.detection_drop_rate))
          continue;

        DetectionInput det;
        det.bbox = obs.bbox;
        if (noise.bbox_jitter_px > 0.0) {
          det.bbox.x1 += rng.normal(0.0, noise.bbox_jitter_px);
          det.bbox.y1 += rng.normal(0.0, noise.bbox_jitter_px);
          det.bbox.x2 += rng.normal(0.0, noise.bbox_jitter_px);
          det.bbox.y2 += rng.normal(0.0, noise.bbox_jitter_px);
          if (det.bbox.x2 <= det.bbox.x1) det.bbox.x2 = det.bbox.x1 + 1.0;
          if (det.bbox.y2 <= det.bbox.y1) det.bbox.y2 = det.bbox.y1 + 1.0;
        }
        Eigen::Vector3d root_cam = fd.camera_pose.apply(sf.root);
        if (noise.root_sigma_m > 0.0)
          root_cam += Eigen::Vector3d(rng.normal(0.0, noise.root_sigma_m),
                                      rng.normal(0.0, noise.root_sigma_m),
                                      rng.normal(0.0, noise.root_sigma_m));
        det.root_cam = root_cam;
        det.score = noiseless ? 1.0 : rng.uniform(0.6, 1.0);
        fd.detections.push_back(det);
        fd.subject_of.push_back(s);

        // View-level keypoint corruption: one displacement for the view.
        Eigen::Vector2d outlier_shift = Eigen::Vector2d::Zero();
        if (noise.outlier_view_rate > 0.0 && rng.bernoulli(noise.outlier_view_rate)) {
          const double ang = rng.uniform(0.0, 2.0 * M_PI);
          const double mag =
              std::max(noise.outlier_offset_px, 20.0 * noise.keypoint_sigma_px);
          outlier_shift = {mag * std::cos(ang), mag * std::sin(ang)};
        }

        KeypointSet ks;
        ks.points.resize(kKeypoints, 2);
        ks.confidence.resize(kKeypoints);
        for (int j = 0; j < kKeypoints; ++j) {
          if (!kp_usable[static_cast<std::size_t>(j)]) {
            ks.points.row(j).setZero();
            ks.confidence(j) = 0.0;
            continue;
          }
          Eigen::Vector2d px = obs.keypoints.row(j).transpose();
          if (noise.keypoint_sigma_px > 0.0)
            px += Eigen::Vector2d(rng.normal(0.0, noise.keypoint_sigma_px),
                                  rng.normal(0.0, noise.keypoint_sigma_px));
          px += outlier_shift;
          ks.points.row(j) = px.transpose();
          ks.confidence(j) = noiseless ? 1.0 : rng.uniform(0.5, 1.0);
        }
        out.keypoints[static_cast<std::size_t>(s)][static_cast<std::size_t>(f)]
            .emplace(scene.camera_id(c), std::move(ks));
      }

      if (noise.false_positive_rate > 0.0 && rng.bernoulli(noise.false_positive_rate)) {
        const double w = rng.uniform(40.0, 200.0);
        const double h = rng.uniform(80.0, 400.0);
        const double cx = rng.uniform(0.5 * w, intr.width - 0.5 * w);
        const double cy = rng.uniform(0.5 * h, intr.height - 0.5 * h);
        DetectionInput det;
        det.bbox = {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
        det.score = rng.uniform(0.5, 1.0);
        fd.detections.push_back(det);
        fd.subject_of.push_back(-1);
      }
    }
  }
  return out;
}

DepthMap render_depth(const Scene& scene, int camera, int frame, double background_depth) {
  const CameraIntrinsics& k = scene.camera_intrinsics(camera);
  const RigidPose pose = scene.camera_pose(camera, frame);
  const Eigen::Matrix3d r_wc = pose.rotation.transpose();
  const Eigen::Vector3d center = pose.center();

  std::vector<Cylinder3D> cylinders;
  for (int s = 0; s < scene.config.n_subjects; ++s) {
    const SubjectFrame& sf =
        scene.subjects[static_cast<std::size_t>(s)][static_cast<std::size_t>(frame)];
    Cylinder3D c = occluder_cylinder(sf);
    c.radius = kDepthCylinderRadius;
    cylinders.push_back(c);
  }

  DepthMap depth;
  depth.values.resize(k.height, k.width);
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      // Ray with unit camera-frame z, so the world parameter equals depth.
      const Eigen::Vector3d dir_cam((u + 0.5 - k.cx) / k.fx, (v + 0.5 - k.cy) / k.fy, 1.0);
      const Eigen::Vector3d dir = r_wc * dir_cam;
      double best = background_depth;
      for (const Cylinder3D& cyl : cylinders) {
        const Eigen::Vector2d d2(dir.x(), dir.z());
        const Eigen::Vector2d f2(center.x() - cyl.center.x(), center.z() - cyl.center.z());
        const double qa = d2.squaredNorm();
        if (qa < 1e-12) continue;
        const double qb = 2.0 * f2.dot(d2);
        const double qc = f2.squaredNorm() - cyl.radius * cyl.radius;
        const double disc = qb * qb - 4.0 * qa * qc;
        if (disc <= 0.0) continue;
        const double t = (-qb - std::sqrt(disc)) / (2.0 * qa);
        if (t <= 1e-6 || t >= best) continue;
        const double y = center.y() + t * dir.y();
        if (y >= cyl.center.y() - 0.5 * cyl.height && y <= cyl.center.y() + 0.5 * cyl.height)
          best = t;
      }
      if (best == background_depth && dir.y() < -1e-9) {
        const double t = -center.y() / dir.y();  // ground plane y = 0
        if (t > 0.0 && t < best) best = t;
      }
      depth.values(v, u) = best;
    }
  }
  return depth;
}

}  // namespace ego3d
