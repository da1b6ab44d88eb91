#include "ego3d/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "ego3d/assignment.hpp"
#include "ego3d/kdtree.hpp"

namespace ego3d {

namespace {

void check_frame_ids(const MotSequence& seq) {
  for (const MotFrame& f : seq) {
    std::set<int> gt_ids, pred_ids;
    for (const IdBox& b : f.gt)
      if (!gt_ids.insert(b.id).second)
        throw Error(ErrorCode::InvalidConfig, "duplicate gt id within a frame");
    for (const IdBox& b : f.pred)
      if (!pred_ids.insert(b.id).second)
        throw Error(ErrorCode::InvalidConfig, "duplicate prediction id within a frame");
  }
}

}  // namespace

ClearResult clear_mot(const MotSequence& seq, double iou_threshold) {
  if (seq.empty()) throw Error(ErrorCode::EmptySequence, "no frames to evaluate");
  if (!(iou_threshold > 0.0) || !(iou_threshold < 1.0))
    throw Error(ErrorCode::InvalidConfig, "iou_threshold must lie in (0, 1)");
  check_frame_ids(seq);

  ClearResult res;
  std::map<int, int> last_match;  // gt id -> last matched pred id

  for (const MotFrame& frame : seq) {
    res.gt_total += static_cast<int>(frame.gt.size());
    std::vector<bool> gt_done(frame.gt.size(), false);
    std::vector<bool> pred_done(frame.pred.size(), false);

    // Keep previous correspondences that still overlap.
    for (std::size_t g = 0; g < frame.gt.size(); ++g) {
      const auto it = last_match.find(frame.gt[g].id);
      if (it == last_match.end()) continue;
      for (std::size_t p = 0; p < frame.pred.size(); ++p) {
        if (pred_done[p] || frame.pred[p].id != it->second) continue;
        if (iou(frame.gt[g].box, frame.pred[p].box) >= iou_threshold) {
          gt_done[g] = true;
          pred_done[p] = true;
        }
        break;
      }
    }

    // Hungarian on the remainder, maximizing IoU over eligible pairs.
    std::vector<std::size_t> g_rest, p_rest;
    for (std::size_t g = 0; g < frame.gt.size(); ++g)
      if (!gt_done[g]) g_rest.push_back(g);
    for (std::size_t p = 0; p < frame.pred.size(); ++p)
      if (!pred_done[p]) p_rest.push_back(p);

    if (!g_rest.empty() && !p_rest.empty()) {
      Eigen::MatrixXd cost(g_rest.size(), p_rest.size());
      for (std::size_t i = 0; i < g_rest.size(); ++i)
        for (std::size_t j = 0; j < p_rest.size(); ++j) {
          const double o = iou(frame.gt[g_rest[i]].box, frame.pred[p_rest[j]].box);
          cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
              o >= iou_threshold ? 1.0 - o : kForbiddenCost;
        }
      const std::vector<int> match = solve_assignment(cost);
      for (std::size_t i = 0; i < g_rest.size(); ++i) {
        if (match[i] < 0) continue;
        const int gt_id = frame.gt[g_rest[i]].id;
        const int pred_id = frame.pred[p_rest[static_cast<std::size_t>(match[i])]].id;
        const auto it = last_match.find(gt_id);
        if (it != last_match.end() && it->second != pred_id) ++res.idsw;
        last_match[gt_id] = pred_id;
        gt_done[g_rest[i]] = true;
        pred_done[p_rest[static_cast<std::size_t>(match[i])]] = true;
      }
    }

    for (std::size_t g = 0; g < frame.gt.size(); ++g)
      if (!gt_done[g]) ++res.fn;
    for (std::size_t p = 0; p < frame.pred.size(); ++p)
      if (!pred_done[p]) ++res.fp;
  }

  if (res.gt_total > 0)
    res.mota = 1.0 - static_cast<double>(res.fp + res.fn + res.idsw) / res.gt_total;
  else
    res.mota = (res.fp + res.idsw == 0) ? 1.0 : -std::numeric_limits<double>::infinity();
  return res;
}

IdMeasures idf1(const MotSequence& seq, double iou_threshold) {
  if (seq.empty()) throw Error(ErrorCode::EmptySequence, "no frames to evaluate");
  check_frame_ids(seq);

  std::map<int, int> gt_index, pred_index;
  int gt_boxes = 0, pred_boxes = 0;
  for (const MotFrame& f : seq) {
    for (const IdBox& b : f.gt) {
      gt_index.emplace(b.id, static_cast<int>(gt_index.size()));
      ++gt_boxes;
    }
    for (const IdBox& b : f.pred) {
      pred_index.emplace(b.id, static_cast<int>(pred_index.size()));
      ++pred_boxes;
    }
  }

  // m(g, p): frames where the pair is a positional match.
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(gt_index.size(), pred_index.size());
  for (const MotFrame& f : seq)
    for (const IdBox& g : f.gt)
      for (const IdBox& p : f.pred)
        if (iou(g.box, p.box) >= iou_threshold)
          m(gt_index.at(g.id), pred_index.at(p.id)) += 1.0;

  IdMeasures res;
  if (m.size() > 0) {
    const std::vector<int> match = solve_assignment((-m).eval());
    for (std::size_t g = 0; g < match.size(); ++g)
      if (match[g] >= 0)
        res.idtp += static_cast<int>(m(static_cast<Eigen::Index>(g), match[g]));
  }
  res.idfp = pred_boxes - res.idtp;
  res.idfn = gt_boxes - res.idtp;
  const double denom = 2.0 * res.idtp + res.idfp + res.idfn;
  res.idf1 = denom > 0.0 ? 2.0 * res.idtp / denom : 1.0;
  return res;
}

HotaResult hota(const MotSequence& seq) {
  if (seq.empty()) throw Error(ErrorCode::EmptySequence, "no frames to evaluate");
  check_frame_ids(seq);

  std::map<int, int> gt_index, pred_index;
  for (const MotFrame& f : seq) {
    for (const IdBox& b : f.gt) gt_index.emplace(b.id, static_cast<int>(gt_index.size()));
    for (const IdBox& b : f.pred)
      pred_index.emplace(b.id, static_cast<int>(pred_index.size()));
  }
  const int n_gt = static_cast<int>(gt_index.size());
  const int n_pred = static_cast<int>(pred_index.size());

  std::vector<int> gt_count(n_gt, 0), pred_count(n_pred, 0);
  Eigen::MatrixXd potential = Eigen::MatrixXd::Zero(n_gt, n_pred);

  // First pass: presence counts and the Jaccard-weighted co-occurrence scores
  // driving the global alignment.
  std::vector<Eigen::MatrixXd> sims(seq.size());
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const MotFrame& f = seq[t];
    for (const IdBox& b : f.gt) ++gt_count[gt_index.at(b.id)];
    for (const IdBox& b : f.pred) ++pred_count[pred_index.at(b.id)];
    Eigen::MatrixXd sim(f.gt.size(), f.pred.size());
    for (std::size_t i = 0; i < f.gt.size(); ++i)
      for (std::size_t j = 0; j < f.pred.size(); ++j)
        sim(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            iou(f.gt[i].box, f.pred[j].box);
    for (std::size_t i = 0; i < f.gt.size(); ++i)
      for (std::size_t j = 0; j < f.pred.size(); ++j) {
        const double s = sim(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        const double denom = sim.row(static_cast<Eigen::Index>(i)).sum() +
                             sim.col(static_cast<Eigen::Index>(j)).sum() - s;
        if (denom > 1e-12)
          potential(gt_index.at(f.gt[i].id), pred_index.at(f.pred[j].id)) += s / denom;
      }
    sims[t] = std::move(sim);
  }

  Eigen::MatrixXd alignment = Eigen::MatrixXd::Zero(n_gt, n_pred);
  for (int g = 0; g < n_gt; ++g)
    for (int p = 0; p < n_pred; ++p) {
      const double denom = gt_count[g] + pred_count[p] - potential(g, p);
      if (denom > 0.0) alignment(g, p) = potential(g, p) / denom;
    }

  // Second pass: one matching per frame on alignment-weighted similarity.
  // The matching is alpha-independent; alpha only filters matches afterward.
  struct Matched {
    int g = 0, p = 0;
    double sim = 0.0;
  };
  std::vector<Matched> matched;
  int total_gt_boxes = 0, total_pred_boxes = 0;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const MotFrame& f = seq[t];
    total_gt_boxes += static_cast<int>(f.gt.size());
    total_pred_boxes += static_cast<int>(f.pred.size());
    if (f.gt.empty() || f.pred.empty()) continue;
    Eigen::MatrixXd score(f.gt.size(), f.pred.size());
    for (std::size_t i = 0; i < f.gt.size(); ++i)
      for (std::size_t j = 0; j < f.pred.size(); ++j)
        score(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            alignment(gt_index.at(f.gt[i].id), pred_index.at(f.pred[j].id)) *
            sims[t](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    const std::vector<int> match = solve_assignment((-score).eval());
    for (std::size_t i = 0; i < f.gt.size(); ++i)
      if (match[i] >= 0)
        matched.push_back({gt_index.at(f.gt[i].id),
                           pred_index.at(f.pred[static_cast<std::size_t>(match[i])].id),
                           sims[t](static_cast<Eigen::Index>(i), match[i])});
  }

  HotaResult res;
  int n_alpha = 0;
  for (int a = 1; a <= 19; ++a) {
    const double alpha = 0.05 * a;
    Eigen::MatrixXd tpa = Eigen::MatrixXd::Zero(n_gt, n_pred);
    int tp = 0;
    for (const Matched& mm : matched)
      if (mm.sim >= alpha) {
        tpa(mm.g, mm.p) += 1.0;
        ++tp;
      }
    const int fn = total_gt_boxes - tp;
    const int fp = total_pred_boxes - tp;
    const double det_a = (tp + fn + fp) > 0
                             ? static_cast<double>(tp) / (tp + fn + fp)
                             : 0.0;
    double ass_sum = 0.0;
    for (const Matched& mm : matched)
      if (mm.sim >= alpha) {
        const double tpa_c = tpa(mm.g, mm.p);
        const double fna_c = gt_count[mm.g] - tpa_c;
        const double fpa_c = pred_count[mm.p] - tpa_c;
        ass_sum += tpa_c / (tpa_c + fna_c + fpa_c);
      }
    const double ass_a = tp > 0 ? ass_sum / tp : 0.0;
    res.hota += std::sqrt(det_a * ass_a);
    res.det_a += det_a;
    res.ass_a += ass_a;
    ++n_alpha;
  }
  res.hota /= n_alpha;
  res.det_a /= n_alpha;
  res.ass_a /= n_alpha;
  return res;
}

PoseMetrics pose_metrics(const Eigen::MatrixX3d& pred, const Eigen::MatrixX3d& gt,
                         const std::vector<bool>* valid) {
  if (pred.rows() != gt.rows())
    throw Error(ErrorCode::ShapeMismatch, "joint counts differ");
  if (valid && static_cast<Eigen::Index>(valid->size()) != pred.rows())
    throw Error(ErrorCode::ShapeMismatch, "mask length differs from joint count");

  std::vector<Eigen::Vector3d> p, g;
  for (Eigen::Index j = 0; j < pred.rows(); ++j) {
    if (valid && !(*valid)[static_cast<std::size_t>(j)]) continue;
    p.push_back(pred.row(j).transpose());
    g.push_back(gt.row(j).transpose());
  }
  if (p.empty()) throw Error(ErrorCode::ShapeMismatch, "no valid joints");

  PoseMetrics out;
  for (std::size_t j = 0; j < p.size(); ++j) out.mpjpe += (p[j] - g[j]).norm();
  out.mpjpe /= static_cast<double>(p.size());
  out.pve = out.mpjpe;

  const SimilarityTransform align = umeyama_align(p, g).transform;
  for (std::size_t j = 0; j < p.size(); ++j)
    out.pa_mpjpe += (align.apply(p[j]) - g[j]).norm();
  out.pa_mpjpe /= static_cast<double>(p.size());
  return out;
}

double chamfer_bidirectional(const std::vector<Eigen::Vector3d>& a,
                             const std::vector<Eigen::Vector3d>& b) {
  if (a.empty() || b.empty())
    throw Error(ErrorCode::EmptySet, "chamfer distance needs two non-empty sets");
  const KdTree3 tree_a(a);
  const KdTree3 tree_b(b);
  double sum_ab = 0.0;
  for (const auto& p : a) sum_ab += tree_b.nearest_distance(p);
  double sum_ba = 0.0;
  for (const auto& q : b) sum_ba += tree_a.nearest_distance(q);
  return 0.5 * (sum_ab / static_cast<double>(a.size()) +
                sum_ba / static_cast<double>(b.size()));
}

}  // namespace ego3d
