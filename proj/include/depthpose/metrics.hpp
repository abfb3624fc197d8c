#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <tuple>
#include <vector>

#include "depthpose/geometry.hpp"
#include "depthpose/skeleton.hpp"

namespace depthpose {

/// One person's joint set for evaluation. Used for both sides: a prediction
/// slot is present when the joint was estimated, a ground-truth slot when the
/// joint is labeled valid.
struct EvalPose {
  std::vector<std::optional<Point3>> joints;
};

struct EvalFrame {
  std::vector<EvalPose> predictions;
  std::vector<EvalPose> ground_truth;
};

/// Scalar summary over a run. Percentages in [0, 100]; mpjpe in millimeters.
/// Ratios with an empty denominator report their perfect-vacuous value
/// (100 for accuracy-like metrics, 0 for invalid); an mpjpe without matched
/// joints is absent. fps is filled only by timed pipeline runs.
struct MetricReport {
  double pcp{0.0};
  double pck100{0.0};
  double pck500{0.0};
  std::optional<double> mpjpe_mm;
  double recall100{0.0};
  double recall500{0.0};
  double invalid_pct{0.0};
  double f1{0.0};
  std::optional<double> fps;
};

struct MatchResult {
  std::vector<std::pair<int, int>> pairs;  // (ground_truth index, prediction index)
  std::vector<int> unmatched_ground_truth;
  std::vector<int> unmatched_predictions;
};

namespace detail {

// Mean joint distance in millimeters over joints valid in the ground truth
// and present in the prediction; empty when nothing is shared.
inline std::optional<double> eval_distance_mm(const EvalPose& gt, const EvalPose& pred) {
  const std::size_t n = std::min(gt.joints.size(), pred.joints.size());
  double sum = 0.0;
  int shared = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (!gt.joints[j] || !pred.joints[j]) continue;
    sum += (*gt.joints[j] - *pred.joints[j]).norm() * 1000.0;
    ++shared;
  }
  if (shared == 0) return std::nullopt;
  return sum / shared;
}

inline double vacuous_or_pct(long long numer, long long denom, double vacuous) {
  if (denom == 0) return vacuous;
  return 100.0 * static_cast<double>(numer) / static_cast<double>(denom);
}

}  // namespace detail

/// Greedy person matching on ascending mean-joint-distance: the closest
/// (ground truth, prediction) pair wins, each side is matched at most once,
/// and pairs farther apart than gate_mm stay unmatched. Ties break toward the
/// lower ground-truth index, then the lower prediction index.
inline MatchResult match_persons(const EvalFrame& frame, double gate_mm) {
  struct Candidate {
    double dist;
    int gt;
    int pred;
  };
  std::vector<Candidate> candidates;
  for (int g = 0; g < static_cast<int>(frame.ground_truth.size()); ++g) {
    for (int p = 0; p < static_cast<int>(frame.predictions.size()); ++p) {
      const auto d = detail::eval_distance_mm(frame.ground_truth[g], frame.predictions[p]);
      if (d && *d <= gate_mm) candidates.push_back({*d, g, p});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.dist, a.gt, a.pred) < std::tie(b.dist, b.gt, b.pred);
  });

  MatchResult result;
  std::vector<bool> gt_used(frame.ground_truth.size(), false);
  std::vector<bool> pred_used(frame.predictions.size(), false);
  for (const auto& c : candidates) {
    if (gt_used[c.gt] || pred_used[c.pred]) continue;
    gt_used[c.gt] = true;
    pred_used[c.pred] = true;
    result.pairs.emplace_back(c.gt, c.pred);
  }
  for (int g = 0; g < static_cast<int>(frame.ground_truth.size()); ++g)
    if (!gt_used[g]) result.unmatched_ground_truth.push_back(g);
  for (int p = 0; p < static_cast<int>(frame.predictions.size()); ++p)
    if (!pred_used[p]) result.unmatched_predictions.push_back(p);
  return result;
}

/// Aggregates the evaluation suite over a run:
///   mpjpe    mean joint error (mm) over matched pairs' shared joints
///   pck@t    % of matched ground-truth joints with error < t mm
///   pcp      % of limbs with both endpoints within half the GT limb length
///   recall@t % of ALL ground-truth joints (matched persons or not) with any
///            predicted joint of the same index within t mm
///   invalid  % of predictions unmatched to any ground-truth person
///   f1       harmonic mean of person precision and person recall
inline MetricReport compute_metrics(const std::vector<EvalFrame>& frames,
                                    const SkeletonDefinition& skel,
                                    double gate_mm = 500.0) {
  long long total_predictions = 0, total_gt = 0, matched_pairs = 0;
  long long pck_denom = 0, pck100_num = 0, pck500_num = 0;
  long long pcp_denom = 0, pcp_num = 0;
  long long recall_denom = 0, recall100_num = 0, recall500_num = 0;
  double mpjpe_sum = 0.0;
  long long mpjpe_count = 0;

  for (const auto& frame : frames) {
    total_predictions += static_cast<long long>(frame.predictions.size());
    total_gt += static_cast<long long>(frame.ground_truth.size());
    const MatchResult match = match_persons(frame, gate_mm);
    matched_pairs += static_cast<long long>(match.pairs.size());

    for (const auto& [g, p] : match.pairs) {
      const EvalPose& gt = frame.ground_truth[g];
      const EvalPose& pred = frame.predictions[p];
      const std::size_t n = gt.joints.size();
      for (std::size_t j = 0; j < n; ++j) {
        if (!gt.joints[j]) continue;
        ++pck_denom;
        if (j < pred.joints.size() && pred.joints[j]) {
          const double err = (*gt.joints[j] - *pred.joints[j]).norm() * 1000.0;
          mpjpe_sum += err;
          ++mpjpe_count;
          if (err < 100.0) ++pck100_num;
          if (err < 500.0) ++pck500_num;
        }
      }
      for (const auto& limb : skel.limbs) {
        const int a = limb[0], b = limb[1];
        if (a >= static_cast<int>(n) || b >= static_cast<int>(n)) continue;
        if (!gt.joints[a] || !gt.joints[b]) continue;
        ++pcp_denom;
        if (a >= static_cast<int>(pred.joints.size()) || !pred.joints[a]) continue;
        if (b >= static_cast<int>(pred.joints.size()) || !pred.joints[b]) continue;
        const double half_len = 0.5 * (*gt.joints[a] - *gt.joints[b]).norm();
        if ((*gt.joints[a] - *pred.joints[a]).norm() <= half_len &&
            (*gt.joints[b] - *pred.joints[b]).norm() <= half_len)
          ++pcp_num;
      }
    }

    // Recall counts every ground-truth joint, including those of persons the
    // matcher never paired; any same-index predicted joint can recall it.
    for (const auto& gt : frame.ground_truth) {
      for (std::size_t j = 0; j < gt.joints.size(); ++j) {
        if (!gt.joints[j]) continue;
        ++recall_denom;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& pred : frame.predictions) {
          if (j >= pred.joints.size() || !pred.joints[j]) continue;
          best = std::min(best, (*gt.joints[j] - *pred.joints[j]).norm() * 1000.0);
        }
        if (best < 100.0) ++recall100_num;
        if (best < 500.0) ++recall500_num;
      }
    }
  }

  MetricReport report;
  report.pck100 = detail::vacuous_or_pct(pck100_num, pck_denom, 100.0);
  report.pck500 = detail::vacuous_or_pct(pck500_num, pck_denom, 100.0);
  report.pcp = detail::vacuous_or_pct(pcp_num, pcp_denom, 100.0);
  report.recall100 = detail::vacuous_or_pct(recall100_num, recall_denom, 100.0);
  report.recall500 = detail::vacuous_or_pct(recall500_num, recall_denom, 100.0);
  report.invalid_pct =
      detail::vacuous_or_pct(total_predictions - matched_pairs, total_predictions, 0.0);
  if (mpjpe_count > 0) report.mpjpe_mm = mpjpe_sum / static_cast<double>(mpjpe_count);

  const double precision =
      total_predictions == 0 ? 1.0
                             : static_cast<double>(matched_pairs) /
                                   static_cast<double>(total_predictions);
  const double recall = total_gt == 0 ? 1.0
                                      : static_cast<double>(matched_pairs) /
                                            static_cast<double>(total_gt);
  report.f1 = (precision + recall) > 0.0
                  ? 100.0 * 2.0 * precision * recall / (precision + recall)
                  : 0.0;
  return report;
}

}  // namespace depthpose
