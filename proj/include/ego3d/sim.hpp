#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ego3d/bev.hpp"
#include "ego3d/body_fit.hpp"
#include "ego3d/geometry.hpp"
#include "ego3d/tracker.hpp"
#include "ego3d/triangulation.hpp"

namespace ego3d {

enum class MotionPath { Circle, FigureEight, LinearBounce };

struct MotionSpec {
  MotionPath path = MotionPath::Circle;
  double speed = 1.2;  // m/s
};

struct SceneConfig {
  int n_subjects = 3;
  int n_static_cams = 8;
  double duration_s = 10.0;
  double fps = 20.0;
  Eigen::Vector2d arena_half_extents = {6.0, 6.0};  // x, z
  std::vector<MotionSpec> motion;  // per subject, cycled when shorter
  std::uint64_t seed = 0;

  int num_frames() const { return static_cast<int>(std::lround(duration_s * fps)); }
  void validate() const;
};

struct NoiseConfig {
  double keypoint_sigma_px = 0.0;
  double detection_drop_rate = 0.0;
  double false_positive_rate = 0.0;  // per camera-frame
  double bbox_jitter_px = 0.0;
  double outlier_view_rate = 0.0;  // per camera-frame-subject
  double outlier_offset_px = 200.0;
  bool occlusion = false;
  double root_sigma_m = 0.0;
  double depth_scale_jitter = 0.0;  // relative scale error for depth values

  void validate() const;
};

struct SubjectFrame {
  BodyParams params;
  Eigen::MatrixX3d keypoints;  // 17 x 3 world
  Eigen::Vector3d root;        // pelvis, world
};

/// Ground-truth view of one subject from one camera at one frame.
struct CameraFrameObservation {
  bool visible = false;            // enough keypoints inside the frustum
  Eigen::MatrixX2d keypoints;      // 17 x 2 exact projections
  std::vector<bool> kp_visible;    // positive depth and inside the image
  Bbox bbox;                       // padded bounds of visible keypoints
  double depth = 0.0;              // camera-frame pelvis depth
};

struct EgoCameraStream {
  std::string id;
  int subject = 0;
  CameraIntrinsics intrinsics;
  std::vector<RigidPose> poses;  // one per frame
};

/// Deterministic synthetic capture: walking subjects, head-mounted ego
/// cameras, a ring of static cameras, exact ground truth everywhere.
struct Scene {
  SceneConfig config;
  std::vector<CameraView> static_cameras;
  std::vector<EgoCameraStream> ego_cameras;
  std::vector<std::vector<SubjectFrame>> subjects;  // [subject][frame]
  // [camera][frame][subject]; cameras ordered static first, then ego.
  std::vector<std::vector<std::vector<CameraFrameObservation>>> observations;

  int num_frames() const { return config.num_frames(); }
  int num_cameras() const {
    return static_cast<int>(static_cameras.size() + ego_cameras.size());
  }
  std::string camera_id(int cam) const;
  const CameraIntrinsics& camera_intrinsics(int cam) const;
  RigidPose camera_pose(int cam, int frame) const;
  ProjectionMatrix camera_projection(int cam, int frame) const;
};

Scene generate_scene(const SceneConfig& cfg);

/// One camera-frame worth of tracker input plus the ground-truth subject of
/// every detection (-1 for injected false positives).
struct FrameDetections {
  RigidPose camera_pose;
  std::vector<DetectionInput> detections;
  std::vector<int> subject_of;
};

struct RenderedScene {
  // detections[camera][frame]
  std::vector<std::vector<FrameDetections>> detections;
  // keypoints[subject][frame]: per-camera noisy 2D keypoints, id-resolved
  std::vector<std::vector<std::map<std::string, KeypointSet>>> keypoints;
};

/// Applies the noise model: keypoint jitter, detection dropout/jitter,
/// view-level keypoint outliers, occlusion by other subjects' cylinders,
/// injected false positives. Deterministic in (scene, noise, seed).
RenderedScene render_detections(const Scene& scene, const NoiseConfig& noise,
                                std::uint64_t seed);

/// True whether the segment camera-center -> point passes through another
/// subject's body cylinder at the given frame.
bool segment_hits_cylinder(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                           const Cylinder3D& cyl);

/// Ray-cast depth image for one camera frame: subject body cylinders, then
/// the ground plane, then `background_depth`.
DepthMap render_depth(const Scene& scene, int camera, int frame,
                      double background_depth = 30.0);

}  // namespace ego3d
