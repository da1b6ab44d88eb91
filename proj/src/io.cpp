#include "ego3d/io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ego3d::io {

using nlohmann::json;

namespace {

json parse(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::ParseError, "malformed JSON");
  return j;
}

template <typename T>
T field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end())
    throw Error(ErrorCode::ParseError, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::ParseError, std::string("bad value for field '") + key + "'");
  }
}

json pose_to_json(const RigidPose& pose) {
  std::vector<double> rot(9);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot[static_cast<std::size_t>(3 * r + c)] = pose.rotation(r, c);
  return json{{"rotation", rot},
              {"translation", {pose.translation.x(), pose.translation.y(), pose.translation.z()}}};
}

RigidPose pose_from_json(const json& j) {
  const auto rot = field<std::vector<double>>(j, "rotation");
  const auto tr = field<std::vector<double>>(j, "translation");
  if (rot.size() != 9 || tr.size() != 3)
    throw Error(ErrorCode::ParseError, "pose needs 9 rotation and 3 translation values");
  RigidPose pose;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) pose.rotation(r, c) = rot[static_cast<std::size_t>(3 * r + c)];
  pose.translation = {tr[0], tr[1], tr[2]};
  pose.validate(1e-6);
  return pose;
}

json intrinsics_to_json(const CameraIntrinsics& k) {
  return json{{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx},
              {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

CameraIntrinsics intrinsics_from_json(const json& j) {
  CameraIntrinsics k;
  k.fx = field<double>(j, "fx");
  k.fy = field<double>(j, "fy");
  k.cx = field<double>(j, "cx");
  k.cy = field<double>(j, "cy");
  k.width = field<int>(j, "width");
  k.height = field<int>(j, "height");
  k.validate();
  return k;
}

}  // namespace

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingInput, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::MissingInput, "cannot write " + path.string());
  out << content;
}

std::string cameras_to_json(const std::vector<CameraView>& cams) {
  json arr = json::array();
  for (const CameraView& c : cams)
    arr.push_back(json{{"id", c.id},
                       {"intrinsics", intrinsics_to_json(c.intrinsics)},
                       {"pose", pose_to_json(c.pose)}});
  return json{{"cameras", arr}}.dump(2);
}

std::vector<CameraView> cameras_from_json(const std::string& text) {
  const json j = parse(text);
  std::vector<CameraView> out;
  for (const json& c : field<json>(j, "cameras")) {
    CameraView view;
    view.id = field<std::string>(c, "id");
    view.intrinsics = intrinsics_from_json(field<json>(c, "intrinsics"));
    view.pose = pose_from_json(field<json>(c, "pose"));
    out.push_back(std::move(view));
  }
  return out;
}

std::string ego_cameras_to_json(const std::vector<EgoCameraStream>& cams) {
  json arr = json::array();
  for (const EgoCameraStream& c : cams) {
    json poses = json::array();
    for (std::size_t f = 0; f < c.poses.size(); ++f) {
      json p = pose_to_json(c.poses[f]);
      p["frame"] = static_cast<int>(f);
      poses.push_back(std::move(p));
    }
    arr.push_back(json{{"id", c.id},
                       {"subject", c.subject},
                       {"intrinsics", intrinsics_to_json(c.intrinsics)},
                       {"poses", poses}});
  }
  return json{{"cameras", arr}}.dump(2);
}

std::vector<EgoCameraStream> ego_cameras_from_json(const std::string& text) {
  const json j = parse(text);
  std::vector<EgoCameraStream> out;
  for (const json& c : field<json>(j, "cameras")) {
    EgoCameraStream s;
    s.id = field<std::string>(c, "id");
    s.subject = field<int>(c, "subject");
    s.intrinsics = intrinsics_from_json(field<json>(c, "intrinsics"));
    const json poses = field<json>(c, "poses");
    s.poses.resize(poses.size());
    for (const json& p : poses) {
      const int f = field<int>(p, "frame");
      if (f < 0 || f >= static_cast<int>(s.poses.size()))
        throw Error(ErrorCode::ParseError, "ego pose frame index out of range");
      s.poses[static_cast<std::size_t>(f)] = pose_from_json(p);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string keypoints_to_json(const std::vector<std::map<std::string, KeypointSet>>& frames) {
  json arr = json::array();
  for (std::size_t f = 0; f < frames.size(); ++f) {
    json cams = json::object();
    for (const auto& [id, ks] : frames[f]) {
      json kp = json::array();
      for (Eigen::Index j = 0; j < ks.points.rows(); ++j)
        kp.push_back({ks.points(j, 0), ks.points(j, 1), ks.confidence(j)});
      cams[id] = json{{"keypoints", kp}};
    }
    arr.push_back(json{{"frame", static_cast<int>(f)}, {"cameras", cams}});
  }
  return json{{"frames", arr}}.dump(2);
}

std::vector<std::map<std::string, KeypointSet>> keypoints_from_json(const std::string& text) {
  const json j = parse(text);
  const json frames = field<json>(j, "frames");
  std::vector<std::map<std::string, KeypointSet>> out(frames.size());
  for (const json& fj : frames) {
    const int f = field<int>(fj, "frame");
    if (f < 0 || f >= static_cast<int>(out.size()))
      throw Error(ErrorCode::ParseError, "keypoint frame index out of range");
    const json cams = field<json>(fj, "cameras");
    for (const auto& [id, entry] : cams.items()) {
      const json kp = field<json>(entry, "keypoints");
      KeypointSet ks;
      ks.points.resize(static_cast<Eigen::Index>(kp.size()), 2);
      ks.confidence.resize(static_cast<Eigen::Index>(kp.size()));
      Eigen::Index row = 0;
      for (const json& p : kp) {
        if (!p.is_array() || p.size() != 3)
          throw Error(ErrorCode::ParseError, "keypoints must be [u, v, confidence]");
        ks.points(row, 0) = p[0].get<double>();
        ks.points(row, 1) = p[1].get<double>();
        ks.confidence(row) = p[2].get<double>();
        ++row;
      }
      out[static_cast<std::size_t>(f)].emplace(id, std::move(ks));
    }
  }
  return out;
}

std::string trajectory_to_json(const PoseTrajectory3D& traj) {
  json frames = json::array();
  json valid = json::array();
  for (int t = 0; t < traj.num_frames(); ++t) {
    json fr = json::array();
    json va = json::array();
    for (int j = 0; j < traj.num_joints(); ++j) {
      fr.push_back({traj.frames[t](j, 0), traj.frames[t](j, 1), traj.frames[t](j, 2)});
      va.push_back(static_cast<bool>(traj.valid[t][j]));
    }
    frames.push_back(std::move(fr));
    valid.push_back(std::move(va));
  }
  return json{{"fps", traj.fps},
              {"joints", traj.num_joints()},
              {"frames", frames},
              {"valid", valid}}
      .dump(2);
}

PoseTrajectory3D trajectory_from_json(const std::string& text) {
  const json j = parse(text);
  PoseTrajectory3D traj;
  traj.fps = field<double>(j, "fps");
  const int joints = field<int>(j, "joints");
  const json frames = field<json>(j, "frames");
  const json valid = field<json>(j, "valid");
  if (frames.size() != valid.size())
    throw Error(ErrorCode::ParseError, "frames and valid lengths differ");
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (static_cast<int>(frames[t].size()) != joints ||
        static_cast<int>(valid[t].size()) != joints)
      throw Error(ErrorCode::ParseError, "frame joint count mismatch");
    Eigen::MatrixX3d m(joints, 3);
    std::vector<bool> v(static_cast<std::size_t>(joints));
    for (int k = 0; k < joints; ++k) {
      const json& p = frames[t][static_cast<std::size_t>(k)];
      if (!p.is_array() || p.size() != 3)
        throw Error(ErrorCode::ParseError, "joint must be [x, y, z]");
      m(k, 0) = p[0].get<double>();
      m(k, 1) = p[1].get<double>();
      m(k, 2) = p[2].get<double>();
      v[static_cast<std::size_t>(k)] = valid[t][static_cast<std::size_t>(k)].get<bool>();
    }
    traj.frames.push_back(std::move(m));
    traj.valid.push_back(std::move(v));
  }
  return traj;
}

std::string detections_to_json(const DetectionStream& stream) {
  json frames = json::array();
  for (std::size_t f = 0; f < stream.frames.size(); ++f) {
    const FrameDetections& fd = stream.frames[f];
    json dets = json::array();
    for (const DetectionInput& d : fd.detections) {
      json dj{{"bbox", {d.bbox.x1, d.bbox.y1, d.bbox.x2, d.bbox.y2}}, {"score", d.score}};
      if (d.root_cam)
        dj["root_cam"] = {d.root_cam->x(), d.root_cam->y(), d.root_cam->z()};
      dets.push_back(std::move(dj));
    }
    frames.push_back(json{{"frame", static_cast<int>(f)},
                          {"camera_pose", pose_to_json(fd.camera_pose)},
                          {"detections", dets}});
  }
  return json{{"camera", stream.camera}, {"fps", stream.fps}, {"frames", frames}}.dump(2);
}

DetectionStream detections_from_json(const std::string& text) {
  const json j = parse(text);
  DetectionStream out;
  out.camera = field<std::string>(j, "camera");
  out.fps = field<double>(j, "fps");
  const json frames = field<json>(j, "frames");
  out.frames.resize(frames.size());
  for (const json& fj : frames) {
    const int f = field<int>(fj, "frame");
    if (f < 0 || f >= static_cast<int>(out.frames.size()))
      throw Error(ErrorCode::ParseError, "detection frame index out of range");
    FrameDetections& fd = out.frames[static_cast<std::size_t>(f)];
    fd.camera_pose = pose_from_json(field<json>(fj, "camera_pose"));
    for (const json& dj : field<json>(fj, "detections")) {
      const auto bbox = field<std::vector<double>>(dj, "bbox");
      if (bbox.size() != 4)
        throw Error(ErrorCode::ParseError, "bbox must be [x1, y1, x2, y2]");
      DetectionInput d;
      d.bbox = {bbox[0], bbox[1], bbox[2], bbox[3]};
      d.score = field<double>(dj, "score");
      if (dj.contains("root_cam")) {
        const auto r = dj["root_cam"].get<std::vector<double>>();
        if (r.size() != 3) throw Error(ErrorCode::ParseError, "root_cam must be [x, y, z]");
        d.root_cam = Eigen::Vector3d(r[0], r[1], r[2]);
      }
      fd.detections.push_back(std::move(d));
      fd.subject_of.push_back(-1);
    }
  }
  return out;
}

std::string mot_to_text(const std::vector<MotRow>& rows) {
  std::ostringstream ss;
  char buf[256];
  for (const MotRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f\n",
                  r.frame, r.id, r.box.x1, r.box.y1, r.box.width(), r.box.height(),
                  r.score, r.world.x(), r.world.y(), r.world.z());
    ss << buf;
  }
  return ss.str();
}

std::vector<MotRow> mot_from_text(const std::string& text) {
  std::vector<MotRow> rows;
  std::istringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (line.empty()) continue;
    MotRow r;
    double x = 0, y = 0, w = 0, h = 0;
    const int got =
        std::sscanf(line.c_str(), "%d,%d,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf", &r.frame,
                    &r.id, &x, &y, &w, &h, &r.score, &r.world.x(), &r.world.y(),
                    &r.world.z());
    if (got < 7)
      throw Error(ErrorCode::ParseError,
                  "bad MOT row at line " + std::to_string(line_no));
    r.box = {x, y, x + w, y + h};
    rows.push_back(r);
  }
  return rows;
}

MotSequence mot_rows_to_frames(const std::vector<MotRow>& gt, const std::vector<MotRow>& pred) {
  int max_frame = 0;
  for (const MotRow& r : gt) max_frame = std::max(max_frame, r.frame);
  for (const MotRow& r : pred) max_frame = std::max(max_frame, r.frame);
  MotSequence seq(static_cast<std::size_t>(std::max(max_frame, 0)));
  for (const MotRow& r : gt) {
    if (r.frame < 1) throw Error(ErrorCode::ParseError, "MOT frames are 1-based");
    seq[static_cast<std::size_t>(r.frame - 1)].gt.push_back({r.id, r.box});
  }
  for (const MotRow& r : pred) {
    if (r.frame < 1) throw Error(ErrorCode::ParseError, "MOT frames are 1-based");
    seq[static_cast<std::size_t>(r.frame - 1)].pred.push_back({r.id, r.box});
  }
  return seq;
}

namespace {

json pose_rows_to_json(const Eigen::Matrix<double, 23, 6>& pose) {
  json rows = json::array();
  for (int r = 0; r < 23; ++r) {
    json row = json::array();
    for (int c = 0; c < 6; ++c) row.push_back(pose(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::Matrix<double, 23, 6> pose_rows_from_json(const json& rows) {
  if (!rows.is_array() || rows.size() != 23)
    throw Error(ErrorCode::ParseError, "pose must have 23 rows");
  Eigen::Matrix<double, 23, 6> out;
  for (int r = 0; r < 23; ++r) {
    const json& row = rows[static_cast<std::size_t>(r)];
    if (!row.is_array() || row.size() != 6)
      throw Error(ErrorCode::ParseError, "pose rows must have 6 entries");
    for (int c = 0; c < 6; ++c) out(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return out;
}

json global_to_json(const BodyGlobal& g) {
  json rot = json::array();
  for (int i = 0; i < 6; ++i) rot.push_back(g.rot6d(i));
  return json{{"rotation6d", rot},
              {"translation", {g.translation.x(), g.translation.y(), g.translation.z()}}};
}

BodyGlobal global_from_json(const json& j) {
  BodyGlobal g;
  if (j.contains("rotation6d")) {
    const auto rot = field<std::vector<double>>(j, "rotation6d");
    if (rot.size() != 6) throw Error(ErrorCode::ParseError, "rotation6d needs 6 values");
    for (int i = 0; i < 6; ++i) g.rot6d(i) = rot[static_cast<std::size_t>(i)];
  } else {
    // Axis-angle + translation form.
    const auto aa = field<std::vector<double>>(j, "axis_angle");
    if (aa.size() != 3) throw Error(ErrorCode::ParseError, "axis_angle needs 3 values");
    g.rot6d = matrix_to_rot6d(axis_angle_to_matrix({aa[0], aa[1], aa[2]}));
  }
  const auto tr = field<std::vector<double>>(j, "translation");
  if (tr.size() != 3) throw Error(ErrorCode::ParseError, "translation needs 3 values");
  g.translation = {tr[0], tr[1], tr[2]};
  return g;
}

std::vector<double> shape_to_vec(const Eigen::Matrix<double, 10, 1>& s) {
  return std::vector<double>(s.data(), s.data() + 10);
}

Eigen::Matrix<double, 10, 1> shape_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 10) throw Error(ErrorCode::ParseError, "shape needs 10 coefficients");
  Eigen::Matrix<double, 10, 1> out;
  for (int i = 0; i < 10; ++i) out(i) = v[static_cast<std::size_t>(i)];
  return out;
}

}  // namespace

std::string body_params_to_json(const BodyParams& p) {
  return json{{"pose", pose_rows_to_json(p.pose)},
              {"shape", shape_to_vec(p.shape)},
              {"global", global_to_json(p.global)}}
      .dump(2);
}

BodyParams body_params_from_json(const std::string& text) {
  const json j = parse(text);
  BodyParams p;
  p.pose = pose_rows_from_json(field<json>(j, "pose"));
  p.shape = shape_from_json(field<json>(j, "shape"));
  p.global = global_from_json(field<json>(j, "global"));
  return p;
}

std::string body_sequence_to_json(const std::vector<BodyParams>& seq, double fps) {
  json frames = json::array();
  for (const BodyParams& p : seq)
    frames.push_back(json{{"pose", pose_rows_to_json(p.pose)},
                          {"global", global_to_json(p.global)}});
  json j{{"fps", fps}, {"frames", frames}};
  j["shape"] = seq.empty() ? json::array() : json(shape_to_vec(seq[0].shape));
  return j.dump(2);
}

std::vector<BodyParams> body_sequence_from_json(const std::string& text, double* fps) {
  const json j = parse(text);
  if (fps) *fps = field<double>(j, "fps");
  const Eigen::Matrix<double, 10, 1> shape = shape_from_json(field<json>(j, "shape"));
  std::vector<BodyParams> out;
  for (const json& fj : field<json>(j, "frames")) {
    BodyParams p;
    p.pose = pose_rows_from_json(field<json>(fj, "pose"));
    p.global = global_from_json(field<json>(fj, "global"));
    p.shape = shape;
    out.push_back(std::move(p));
  }
  return out;
}

std::string kinematic_model_to_json(const KinematicModel& m) {
  json parents = json::array();
  for (int p : m.parents) parents.push_back(p);
  json offsets = json::array();
  for (int j = 0; j < KinematicModel::kJoints; ++j)
    offsets.push_back({m.rest_offsets(j, 0), m.rest_offsets(j, 1), m.rest_offsets(j, 2)});
  json basis = json::array();
  for (int r = 0; r < 3 * KinematicModel::kJoints; ++r) {
    json row = json::array();
    for (int c = 0; c < 10; ++c) row.push_back(m.shape_basis(r, c));
    basis.push_back(std::move(row));
  }
  json regressor = json::array();
  for (Eigen::Index r = 0; r < m.keypoint_regressor.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < KinematicModel::kJoints; ++c)
      row.push_back(m.keypoint_regressor(r, c));
    regressor.push_back(std::move(row));
  }
  return json{{"parents", parents},
              {"rest_offsets", offsets},
              {"shape_basis", basis},
              {"keypoint_regressor", regressor}}
      .dump(2);
}

KinematicModel kinematic_model_from_json(const std::string& text) {
  const json j = parse(text);
  KinematicModel m;
  const auto parents = field<std::vector<int>>(j, "parents");
  if (parents.size() != KinematicModel::kJoints)
    throw Error(ErrorCode::ParseError, "parents must have 24 entries");
  std::copy(parents.begin(), parents.end(), m.parents.begin());
  const json offsets = field<json>(j, "rest_offsets");
  if (offsets.size() != KinematicModel::kJoints)
    throw Error(ErrorCode::ParseError, "rest_offsets must have 24 rows");
  for (int r = 0; r < KinematicModel::kJoints; ++r)
    for (int c = 0; c < 3; ++c)
      m.rest_offsets(r, c) = offsets[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
  const json basis = field<json>(j, "shape_basis");
  if (basis.size() != 3 * KinematicModel::kJoints)
    throw Error(ErrorCode::ParseError, "shape_basis must have 72 rows");
  for (int r = 0; r < 3 * KinematicModel::kJoints; ++r)
    for (int c = 0; c < 10; ++c)
      m.shape_basis(r, c) = basis[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
  const json reg = field<json>(j, "keypoint_regressor");
  m.keypoint_regressor.resize(static_cast<Eigen::Index>(reg.size()), KinematicModel::kJoints);
  for (Eigen::Index r = 0; r < m.keypoint_regressor.rows(); ++r)
    for (int c = 0; c < KinematicModel::kJoints; ++c)
      m.keypoint_regressor(r, c) =
          reg[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
  m.validate();
  return m;
}

std::string heatmap_to_json(const BevHeatmap& h) {
  json values = json::array();
  for (Eigen::Index i = 0; i < h.values.rows(); ++i)
    for (Eigen::Index j = 0; j < h.values.cols(); ++j) values.push_back(h.values(i, j));
  return json{{"bins_rho", h.values.rows()}, {"bins_phi", h.values.cols()}, {"values", values}}
      .dump();
}

BevHeatmap heatmap_from_json(const std::string& text) {
  const json j = parse(text);
  const auto rows = field<int>(j, "bins_rho");
  const auto cols = field<int>(j, "bins_phi");
  const auto values = field<std::vector<double>>(j, "values");
  if (static_cast<int>(values.size()) != rows * cols)
    throw Error(ErrorCode::ParseError, "heatmap value count mismatch");
  BevHeatmap h;
  h.values.resize(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c)
      h.values(i, c) = values[static_cast<std::size_t>(i * cols + c)];
  return h;
}

std::string heatmap_to_pgm(const BevHeatmap& h) {
  const double peak = std::max(h.values.maxCoeff(), 1e-12);
  std::ostringstream ss;
  ss << "P2\n" << h.values.cols() << " " << h.values.rows() << "\n255\n";
  for (Eigen::Index i = 0; i < h.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < h.values.cols(); ++j) {
      ss << static_cast<int>(std::lround(255.0 * h.values(i, j) / peak));
      ss << (j + 1 == h.values.cols() ? '\n' : ' ');
    }
  }
  return ss.str();
}

}  // namespace ego3d::io
