#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "depthpose/sampling.hpp"
#include "depthpose/skeleton.hpp"

namespace depthpose {

struct FusedJoint {
  Point3 position;  // world frame, meters
  int support{1};   // number of proposals averaged
};

/// Final per-person output of one frame.
struct FusedPose3D {
  int person_id{-1};
  std::vector<std::optional<FusedJoint>> joints;

  int present_count() const {
    int n = 0;
    for (const auto& j : joints) n += j.has_value() ? 1 : 0;
    return n;
  }
};

/// Persistent identity across frames. Tracking state is deliberately minimal:
/// only the fused joints from the last time-step, no motion model and no
/// temporal smoothing.
struct PersonTrack {
  int person_id{-1};
  FusedPose3D last_pose;
  int missed_frames{0};
};

struct FusionConfig {
  double match_threshold{0.8};             // proposal <-> track gating, meters
  double new_person_cluster_threshold{0.8};// unmatched proposal clustering, meters
  int drop_after{10};                      // frames a track survives unmatched
  double limb_threshold{0.5};              // outlier filter, meters; covers all
                                           // limb lengths of normal-sized persons
  int topk{3};                             // proposals averaged per joint
  int min_shared_joints{3};                // pose-distance validity
  int min_support{1};                      // joints below this are dropped

  void validate() const {
    if (!(match_threshold > 0.0) || !(new_person_cluster_threshold > 0.0) ||
        !(limb_threshold > 0.0))
      throw std::invalid_argument("fusion: thresholds must be > 0");
    if (topk < 1) throw std::invalid_argument("fusion: topk must be >= 1");
    if (drop_after < 1) throw std::invalid_argument("fusion: drop_after must be >= 1");
    if (min_shared_joints < 1)
      throw std::invalid_argument("fusion: min_shared_joints must be >= 1");
    if (min_support < 1) throw std::invalid_argument("fusion: min_support must be >= 1");
  }
};

// Uniform joint access for the pose-distance template.
inline const std::optional<JointProposal>& joint_slot(const PoseProposal3D& p, int j) {
  return p.joints[j];
}
inline const std::optional<FusedJoint>& joint_slot(const FusedPose3D& p, int j) {
  return p.joints[j];
}
inline int joint_count(const PoseProposal3D& p) { return static_cast<int>(p.joints.size()); }
inline int joint_count(const FusedPose3D& p) { return static_cast<int>(p.joints.size()); }

/// Mean Euclidean distance over joints present in both sets, or empty when
/// fewer than min_shared joints are shared (the poses are incomparable).
template <typename PoseA, typename PoseB>
std::optional<double> pose_distance(const PoseA& a, const PoseB& b, int min_shared) {
  const int n = std::min(joint_count(a), joint_count(b));
  double sum = 0.0;
  int shared = 0;
  for (int j = 0; j < n; ++j) {
    const auto& ja = joint_slot(a, j);
    const auto& jb = joint_slot(b, j);
    if (!ja || !jb) continue;
    sum += (ja->position - jb->position).norm();
    ++shared;
  }
  if (shared < min_shared) return std::nullopt;
  return sum / shared;
}

/// Result of the per-frame grouping: proposal indices per existing track,
/// plus clusters of leftover proposals that become new persons.
struct Association {
  std::vector<std::vector<int>> track_groups;  // aligned with the tracks argument
  std::vector<std::vector<int>> new_groups;
  std::size_t distance_evals{0};  // for scaling checks and benchmarks
};

/// Greedy globally-sorted matching of proposals to last-frame tracks: the
/// smallest proposal<->track distance below match_threshold wins, each
/// proposal is assigned once and each track takes at most one proposal per
/// source view. Leftover proposals are then clustered among themselves, again
/// one proposal per view per cluster: a candidate joins when it is within
/// new_person_cluster_threshold of at least one comparable member (two partial
/// views of the same person may share too few joints to be comparable with
/// each other directly). Singleton clusters are allowed, which is what makes a
/// person visible in a single view detectable at all. Ties break on
/// (view_id, proposal index, track order), making the result deterministic.
inline Association associate(const std::vector<PoseProposal3D>& proposals,
                             const std::vector<PersonTrack>& tracks,
                             const FusionConfig& cfg) {
  Association out;
  out.track_groups.resize(tracks.size());

  struct Candidate {
    double dist;
    int proposal;
    int track;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(proposals.size() * tracks.size());
  for (int pi = 0; pi < static_cast<int>(proposals.size()); ++pi) {
    for (int ti = 0; ti < static_cast<int>(tracks.size()); ++ti) {
      ++out.distance_evals;
      const auto d =
          pose_distance(proposals[pi], tracks[ti].last_pose, cfg.min_shared_joints);
      if (d && *d < cfg.match_threshold)
        candidates.push_back({*d, pi, ti});
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [&](const Candidate& a, const Candidate& b) {
              return std::tie(a.dist, proposals[a.proposal].source_view, a.proposal,
                              a.track) <
                     std::tie(b.dist, proposals[b.proposal].source_view, b.proposal,
                              b.track);
            });

  std::vector<bool> assigned(proposals.size(), false);
  // view ids already claimed per track
  std::vector<std::vector<const std::string*>> track_views(tracks.size());
  for (const auto& c : candidates) {
    if (assigned[c.proposal]) continue;
    const std::string& view = proposals[c.proposal].source_view;
    auto& views = track_views[c.track];
    const bool taken =
        std::any_of(views.begin(), views.end(),
                    [&](const std::string* v) { return *v == view; });
    if (taken) continue;
    assigned[c.proposal] = true;
    views.push_back(&view);
    out.track_groups[c.track].push_back(c.proposal);
  }

  // Cluster the unassigned proposals into new persons, in (view, index) order.
  std::vector<int> leftovers;
  for (int pi = 0; pi < static_cast<int>(proposals.size()); ++pi)
    if (!assigned[pi]) leftovers.push_back(pi);
  std::stable_sort(leftovers.begin(), leftovers.end(), [&](int a, int b) {
    return std::tie(proposals[a].source_view, a) < std::tie(proposals[b].source_view, b);
  });

  std::vector<bool> clustered(proposals.size(), false);
  for (std::size_t i = 0; i < leftovers.size(); ++i) {
    const int seed = leftovers[i];
    if (clustered[seed]) continue;
    clustered[seed] = true;
    std::vector<int> group{seed};
    for (std::size_t k = i + 1; k < leftovers.size(); ++k) {
      const int cand = leftovers[k];
      if (clustered[cand]) continue;
      const std::string& view = proposals[cand].source_view;
      bool view_taken = false;
      bool near_member = false;
      bool far_member = false;
      for (int member : group) {
        if (proposals[member].source_view == view) {
          view_taken = true;
          break;
        }
        ++out.distance_evals;
        const auto d =
            pose_distance(proposals[cand], proposals[member], cfg.min_shared_joints);
        if (!d) continue;  // incomparable members neither admit nor veto
        if (*d < cfg.new_person_cluster_threshold)
          near_member = true;
        else
          far_member = true;
      }
      if (!view_taken && near_member && !far_member) {
        clustered[cand] = true;
        group.push_back(cand);
      }
    }
    out.new_groups.push_back(std::move(group));
  }
  return out;
}

/// Removes joint proposals that sit impossibly far from the rest of the
/// person: a proposal is discarded when its distance to the averaged center
/// of its neighboring joints exceeds limb_threshold. Neighbor centers come
/// from the whole (pre-filter) group: per neighbor joint the mean over all
/// views' instances, then the mean of those. A joint whose neighbors have no
/// proposals anywhere in the group is kept.
inline std::vector<PoseProposal3D> filter_outliers(std::vector<PoseProposal3D> group,
                                                   const SkeletonDefinition& skel,
                                                   double limb_threshold) {
  if (group.empty()) return group;
  const int n = skel.joint_count();

  std::vector<Point3> sums(n, Point3::Zero());
  std::vector<int> counts(n, 0);
  for (const auto& p : group) {
    for (int j = 0; j < n && j < static_cast<int>(p.joints.size()); ++j) {
      if (!p.joints[j]) continue;
      sums[j] += p.joints[j]->position;
      ++counts[j];
    }
  }

  std::vector<std::optional<Point3>> centers(n);
  for (int j = 0; j < n; ++j) {
    Point3 acc = Point3::Zero();
    int used = 0;
    for (int nb : skel.neighbors[j]) {
      if (counts[nb] == 0) continue;
      acc += sums[nb] / counts[nb];
      ++used;
    }
    if (used > 0) centers[j] = acc / used;
  }

  for (auto& p : group) {
    for (int j = 0; j < n && j < static_cast<int>(p.joints.size()); ++j) {
      if (!p.joints[j] || !centers[j]) continue;
      if ((p.joints[j]->position - *centers[j]).norm() > limb_threshold)
        p.joints[j].reset();
    }
  }
  return group;
}

/// Per-joint fusion of a filtered group: with at most topk proposals their
/// plain mean is taken; with more, a center (mean of all) is computed and
/// only the topk proposals closest to it are averaged, rejecting stragglers
/// caused by bad 2D detections or depth edge errors. Support counts the
/// proposals averaged; joints below min_support are dropped.
inline std::vector<std::optional<FusedJoint>> fuse_group(
    const std::vector<PoseProposal3D>& group, int topk, int min_support = 1) {
  std::size_t n = 0;
  for (const auto& p : group) n = std::max(n, p.joints.size());

  std::vector<std::optional<FusedJoint>> fused(n);
  std::vector<Point3> instances;
  for (std::size_t j = 0; j < n; ++j) {
    instances.clear();
    for (const auto& p : group)
      if (j < p.joints.size() && p.joints[j]) instances.push_back(p.joints[j]->position);
    if (instances.empty()) continue;

    Point3 mean = Point3::Zero();
    for (const auto& q : instances) mean += q;
    mean /= static_cast<double>(instances.size());

    int support;
    Point3 position;
    if (static_cast<int>(instances.size()) <= topk) {
      support = static_cast<int>(instances.size());
      position = mean;
    } else {
      std::vector<int> order(instances.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return (instances[a] - mean).squaredNorm() < (instances[b] - mean).squaredNorm();
      });
      Point3 acc = Point3::Zero();
      for (int k = 0; k < topk; ++k) acc += instances[order[k]];
      position = acc / topk;
      support = topk;
    }
    if (support >= min_support) fused[j] = FusedJoint{position, support};
  }
  return fused;
}

/// Per-frame tracker composing association, outlier filtering and top-k
/// fusion. Matched tracks reset their miss counter and adopt the fused pose;
/// unmatched tracks age and are dropped after drop_after missed frames; new
/// persons get fresh monotonically increasing ids. Output is sorted by
/// person_id. Not safe for concurrent mutation; per-frame use is sequential.
class Tracker {
 public:
  Tracker(SkeletonDefinition skeleton, FusionConfig config)
      : skel_(std::move(skeleton)), cfg_(std::move(config)) {
    skel_.validate();
    cfg_.validate();
  }

  std::vector<FusedPose3D> step(const std::vector<PoseProposal3D>& proposals) {
    const Association assoc = associate(proposals, tracks_, cfg_);
    std::vector<FusedPose3D> outputs;

    auto fuse = [&](const std::vector<int>& group_indices) {
      std::vector<PoseProposal3D> group;
      group.reserve(group_indices.size());
      for (int idx : group_indices) group.push_back(proposals[idx]);
      group = filter_outliers(std::move(group), skel_, cfg_.limb_threshold);
      FusedPose3D pose;
      pose.joints = fuse_group(group, cfg_.topk, cfg_.min_support);
      return pose;
    };

    for (std::size_t ti = 0; ti < tracks_.size(); ++ti) {
      bool matched = false;
      if (!assoc.track_groups[ti].empty()) {
        FusedPose3D pose = fuse(assoc.track_groups[ti]);
        if (pose.present_count() > 0) {
          pose.person_id = tracks_[ti].person_id;
          tracks_[ti].last_pose = pose;
          tracks_[ti].missed_frames = 0;
          outputs.push_back(std::move(pose));
          matched = true;
        }
      }
      if (!matched) ++tracks_[ti].missed_frames;
    }
    std::erase_if(tracks_, [this](const PersonTrack& t) {
      return t.missed_frames >= cfg_.drop_after;
    });

    for (const auto& group : assoc.new_groups) {
      FusedPose3D pose = fuse(group);
      if (pose.present_count() == 0) continue;
      pose.person_id = next_id_++;
      tracks_.push_back(PersonTrack{pose.person_id, pose, 0});
      outputs.push_back(std::move(pose));
    }

    std::sort(outputs.begin(), outputs.end(),
              [](const FusedPose3D& a, const FusedPose3D& b) {
                return a.person_id < b.person_id;
              });
    return outputs;
  }

  const std::vector<PersonTrack>& tracks() const { return tracks_; }
  const FusionConfig& config() const { return cfg_; }
  const SkeletonDefinition& skeleton() const { return skel_; }

 private:
  SkeletonDefinition skel_;
  FusionConfig cfg_;
  std::vector<PersonTrack> tracks_;
  int next_id_ = 0;
};

}  // namespace depthpose
