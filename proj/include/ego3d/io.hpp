#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ego3d/bev.hpp"
#include "ego3d/body_fit.hpp"
#include "ego3d/geometry.hpp"
#include "ego3d/metrics.hpp"
#include "ego3d/pose_refine.hpp"
#include "ego3d/sim.hpp"
#include "ego3d/tracker.hpp"
#include "ego3d/triangulation.hpp"

namespace ego3d::io {

/// Whole-file helpers; missing files map to MissingInput, malformed content
/// to ParseError.
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& content);

// cameras.json: { "cameras": [ { id, intrinsics, pose } ] }
std::string cameras_to_json(const std::vector<CameraView>& cams);
std::vector<CameraView> cameras_from_json(const std::string& text);

// ego_cameras.json: per-frame poses per ego stream
std::string ego_cameras_to_json(const std::vector<EgoCameraStream>& cams);
std::vector<EgoCameraStream> ego_cameras_from_json(const std::string& text);

// keypoints.json (one subject):
// { "frames": [ { "frame", "cameras": { id: { "keypoints": [[u,v,conf] x J] } } } ] }
std::string keypoints_to_json(const std::vector<std::map<std::string, KeypointSet>>& frames);
std::vector<std::map<std::string, KeypointSet>> keypoints_from_json(const std::string& text);

// trajectory.json: { "fps", "joints", "frames": TxJx3, "valid": TxJ }
std::string trajectory_to_json(const PoseTrajectory3D& traj);
PoseTrajectory3D trajectory_from_json(const std::string& text);

// detections.json (one camera stream):
// { "camera", "fps", "frames": [ { "frame", "camera_pose", "detections": [...] } ] }
struct DetectionStream {
  std::string camera;
  double fps = 20.0;
  std::vector<FrameDetections> frames;
};
std::string detections_to_json(const DetectionStream& stream);
DetectionStream detections_from_json(const std::string& text);

// MOT text rows: frame,id,x,y,w,h,score,X,Y,Z (frame is 1-based)
struct MotRow {
  int frame = 1;
  int id = 0;
  Bbox box;
  double score = 1.0;
  Eigen::Vector3d world = Eigen::Vector3d::Zero();
};
std::string mot_to_text(const std::vector<MotRow>& rows);
std::vector<MotRow> mot_from_text(const std::string& text);
/// Groups rows into per-frame annotations over frames 1..max_frame.
MotSequence mot_rows_to_frames(const std::vector<MotRow>& gt, const std::vector<MotRow>& pred);

// body params / kinematic model
std::string body_params_to_json(const BodyParams& p);
BodyParams body_params_from_json(const std::string& text);
std::string body_sequence_to_json(const std::vector<BodyParams>& seq, double fps);
std::vector<BodyParams> body_sequence_from_json(const std::string& text, double* fps = nullptr);
std::string kinematic_model_to_json(const KinematicModel& m);
KinematicModel kinematic_model_from_json(const std::string& text);

// BEV heatmap: { "bins_rho", "bins_phi", "values": row-major } + PGM dump
std::string heatmap_to_json(const BevHeatmap& h);
BevHeatmap heatmap_from_json(const std::string& text);
std::string heatmap_to_pgm(const BevHeatmap& h);

}  // namespace ego3d::io
