#pragma once

#include <Eigen/Core>
#include <vector>

#include "ego3d/geometry.hpp"

namespace ego3d {

struct IdBox {
  int id = 0;
  Bbox box;
};

/// Ground-truth and predicted boxes of one frame. Ids must be unique within
/// a frame on each side.
struct MotFrame {
  std::vector<IdBox> gt;
  std::vector<IdBox> pred;
};

using MotSequence = std::vector<MotFrame>;

struct ClearResult {
  double mota = 0.0;
  int fp = 0;
  int fn = 0;
  int idsw = 0;
  int gt_total = 0;
};

/// CLEAR protocol: previous-frame correspondences are kept while their IoU
/// clears the threshold, the remainder is matched by Hungarian maximizing
/// IoU; IDSW counts ground-truth identities whose matched prediction changed
/// relative to their last known match. Throws EmptySequence.
ClearResult clear_mot(const MotSequence& seq, double iou_threshold = 0.5);

struct IdMeasures {
  double idf1 = 0.0;
  int idtp = 0;
  int idfp = 0;
  int idfn = 0;
};

/// Identity measures: one global trajectory-level bipartite matching
/// maximizing per-frame positional matches (IoU >= threshold), then
/// IDF1 = 2 IDTP / (2 IDTP + IDFP + IDFN).
IdMeasures idf1(const MotSequence& seq, double iou_threshold = 0.5);

struct HotaResult {
  double hota = 0.0;  // mean over alpha of sqrt(DetA_a * AssA_a)
  double det_a = 0.0;
  double ass_a = 0.0;
};

/// HOTA over alpha in {0.05, ..., 0.95}: per-frame matching on the global-
/// alignment-weighted similarity, matches below alpha discarded, association
/// accuracy from per-pair TPA/FPA/FNA counts.
HotaResult hota(const MotSequence& seq);

struct PoseMetrics {
  double mpjpe = 0.0;     // mean per-joint position error, input units
  double pa_mpjpe = 0.0;  // after Procrustes (similarity) alignment
  double pve = 0.0;       // mean point error of the supplied point set
};

/// Joint errors between two J x 3 point sets; the optional mask excludes
/// entries from every metric. PVE is the mean point-to-point error of
/// whatever set is supplied: pass regressed keypoints for MPJPE semantics,
/// skeleton joints for the PVE convention.
PoseMetrics pose_metrics(const Eigen::MatrixX3d& pred, const Eigen::MatrixX3d& gt,
                         const std::vector<bool>* valid = nullptr);

/// Symmetric mean nearest-neighbor (Euclidean) distance:
/// 0.5 * (mean_a min_b |a-b| + mean_b min_a |b-a|). Throws EmptySet.
double chamfer_bidirectional(const std::vector<Eigen::Vector3d>& a,
                             const std::vector<Eigen::Vector3d>& b);

}  // namespace ego3d
