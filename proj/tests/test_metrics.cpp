#include "depthpose/metrics.hpp"

#include <gtest/gtest.h>

#include <numeric>

#include "test_support.hpp"

using namespace depthpose;

namespace {

const SkeletonDefinition& skel() {
  static const SkeletonDefinition s = builtin_coco13();
  return s;
}

// A plausible 13-joint body around a base point (meters), all joints valid.
EvalPose body(const Point3& base) {
  EvalPose pose;
  pose.joints.resize(13);
  const double lateral[13] = {0, .18, -.18, .22, -.22, .24, -.24, .10, -.10, .11, -.11, .12, -.12};
  const double height[13] = {1.62, 1.45, 1.45, 1.17, 1.17, .93, .93, .95, .95, .50, .50, .08, .08};
  for (int j = 0; j < 13; ++j)
    pose.joints[j] = base + Point3(0.0, lateral[j], height[j]);
  return pose;
}

EvalPose displaced(const EvalPose& pose, const Point3& offset) {
  EvalPose out = pose;
  for (auto& j : out.joints)
    if (j) *j += offset;
  return out;
}

}  // namespace

TEST(MatchPersons, CloseSingletonPairMatches) {
  EvalFrame frame;
  frame.ground_truth = {body({0, 0, 0})};
  frame.predictions = {displaced(frame.ground_truth[0], {0.05, 0, 0})};  // 50 mm
  const MatchResult m = match_persons(frame, 500.0);
  ASSERT_EQ(m.pairs.size(), 1u);
  EXPECT_TRUE(m.unmatched_ground_truth.empty());
  EXPECT_TRUE(m.unmatched_predictions.empty());
}

TEST(MatchPersons, EquidistantPredictionGoesToLowerGtIndex) {
  EvalFrame frame;
  frame.ground_truth = {body({0, 0, 0}), body({0.2, 0, 0})};
  frame.predictions = {displaced(body({0.1, 0, 0}), {0, 0, 0})};  // 100 mm from both
  const MatchResult m = match_persons(frame, 500.0);
  ASSERT_EQ(m.pairs.size(), 1u);
  EXPECT_EQ(m.pairs[0].first, 0);
  EXPECT_EQ(m.unmatched_ground_truth, std::vector<int>{1});
}

TEST(MatchPersons, GateExcludesFarPairs) {
  EvalFrame frame;
  frame.ground_truth = {body({0, 0, 0})};
  frame.predictions = {displaced(frame.ground_truth[0], {0.6, 0, 0})};  // 600 mm
  const MatchResult m = match_persons(frame, 500.0);
  EXPECT_TRUE(m.pairs.empty());
  EXPECT_EQ(m.unmatched_predictions.size(), 1u);
}

TEST(MatchPersons, GreedyEqualsExhaustiveGreedyOnSmallInstances) {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    EvalFrame frame;
    for (int i = 0; i < 3; ++i) {
      frame.ground_truth.push_back(body({rng.uniform(-1, 1), rng.uniform(-1, 1), 0}));
      frame.predictions.push_back(body({rng.uniform(-1, 1), rng.uniform(-1, 1), 0}));
    }
    const MatchResult m = match_persons(frame, 1500.0);

    // reference: repeatedly take the globally smallest remaining pair,
    // computed against an explicit distance matrix
    double dist[3][3];
    for (int g = 0; g < 3; ++g)
      for (int p = 0; p < 3; ++p) {
        double sum = 0.0;
        for (int j = 0; j < 13; ++j)
          sum += (*frame.ground_truth[g].joints[j] - *frame.predictions[p].joints[j]).norm();
        dist[g][p] = 1000.0 * sum / 13;
      }
    std::vector<std::pair<int, int>> expected;
    bool gu[3] = {}, pu[3] = {};
    for (int round = 0; round < 3; ++round) {
      double best = 1500.0;
      int bg = -1, bp = -1;
      for (int g = 0; g < 3; ++g)
        for (int p = 0; p < 3; ++p)
          if (!gu[g] && !pu[p] && dist[g][p] < best) {
            best = dist[g][p];
            bg = g;
            bp = p;
          }
      if (bg < 0) break;
      gu[bg] = pu[bp] = true;
      expected.emplace_back(bg, bp);
    }
    std::sort(expected.begin(), expected.end());
    auto got = m.pairs;
    std::sort(got.begin(), got.end());
    EXPECT_EQ(got, expected) << "trial " << trial;
  }
}

TEST(ComputeMetrics, PerfectPredictionsScorePerfectly) {
  EvalFrame frame;
  frame.ground_truth = {body({0, 0, 0}), body({1.5, 0, 0})};
  frame.predictions = frame.ground_truth;
  const MetricReport r = compute_metrics({frame}, skel());
  ASSERT_TRUE(r.mpjpe_mm.has_value());
  EXPECT_DOUBLE_EQ(*r.mpjpe_mm, 0.0);
  EXPECT_DOUBLE_EQ(r.pck100, 100.0);
  EXPECT_DOUBLE_EQ(r.pck500, 100.0);
  EXPECT_DOUBLE_EQ(r.pcp, 100.0);
  EXPECT_DOUBLE_EQ(r.recall100, 100.0);
  EXPECT_DOUBLE_EQ(r.recall500, 100.0);
  EXPECT_DOUBLE_EQ(r.invalid_pct, 0.0);
  EXPECT_DOUBLE_EQ(r.f1, 100.0);
}

TEST(ComputeMetrics, ThresholdSemanticsAt120mm) {
  EvalFrame frame;
  frame.ground_truth = {body({0, 0, 0})};
  EvalPose pred = frame.ground_truth[0];
  *pred.joints[coco13::kLeftWrist] += Point3(0.12, 0, 0);  // 120 mm off
  frame.predictions = {pred};
  const MetricReport r = compute_metrics({frame}, skel());
  EXPECT_DOUBLE_EQ(r.pck100, 100.0 * 12 / 13);  // that joint fails @100
  EXPECT_DOUBLE_EQ(r.pck500, 100.0);            // but passes @500
  EXPECT_NEAR(*r.mpjpe_mm, 120.0 / 13, 1e-9);
}

TEST(ComputeMetrics, InvalidAndF1HandComputed) {
  // 2 exact persons plus one spurious prediction 600 mm away from everything:
  // Invalid = 1/3 = 33.3%, precision 2/3, recall 2/2, F1 = 80
  EvalFrame frame;
  frame.ground_truth = {body({0, 0, 0}), body({1.5, 0, 0})};
  frame.predictions = frame.ground_truth;
  frame.predictions.push_back(displaced(body({3.5, 0, 0}), {0.6, 0, 0}));
  const MetricReport r = compute_metrics({frame}, skel());
  EXPECT_DOUBLE_EQ(r.invalid_pct, 100.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.f1, 80.0);
}

TEST(ComputeMetrics, VacuousFrameIsPerfect) {
  const MetricReport r = compute_metrics({EvalFrame{}}, skel());
  EXPECT_FALSE(r.mpjpe_mm.has_value());
  EXPECT_DOUBLE_EQ(r.f1, 100.0);
  EXPECT_DOUBLE_EQ(r.invalid_pct, 0.0);
  EXPECT_DOUBLE_EQ(r.pck100, 100.0);
  EXPECT_DOUBLE_EQ(r.recall500, 100.0);
}

TEST(ComputeMetrics, EmptyPredictionsNonEmptyGt) {
  EvalFrame frame;
  frame.ground_truth = {body({0, 0, 0})};
  const MetricReport r = compute_metrics({frame}, skel());
  EXPECT_DOUBLE_EQ(r.recall100, 0.0);
  EXPECT_DOUBLE_EQ(r.recall500, 0.0);
  EXPECT_DOUBLE_EQ(r.f1, 0.0);
  EXPECT_FALSE(r.mpjpe_mm.has_value());
}

TEST(ComputeMetrics, RecallCountsUnmatchedGtPersons) {
  // one GT person matched, a second GT person missed entirely: recall
  // denominators include the missed person's joints
  EvalFrame frame;
  frame.ground_truth = {body({0, 0, 0}), body({2.5, 0, 0})};
  frame.predictions = {frame.ground_truth[0]};
  const MetricReport r = compute_metrics({frame}, skel());
  EXPECT_DOUBLE_EQ(r.recall100, 50.0);
  EXPECT_DOUBLE_EQ(r.pck100, 100.0);  // the matched person is exact
}

TEST(ComputeMetrics, PcpUsesHalfLimbLength) {
  EvalFrame frame;
  frame.ground_truth = {body({0, 0, 0})};
  EvalPose pred = frame.ground_truth[0];
  // lower leg is | knee(0.50) - ankle(0.08) | = 0.42 m long; half = 0.21 m.
  // displace the left ankle 0.25 m: the two limbs touching the ankle fail.
  *pred.joints[coco13::kLeftAnkle] += Point3(0.25, 0, 0);
  frame.predictions = {pred};
  const MetricReport r = compute_metrics({frame}, skel());
  // 14 limbs total, exactly one touches the left ankle
  EXPECT_DOUBLE_EQ(r.pcp, 100.0 * 13 / 14);
}

TEST(ComputeMetrics, MonotoneInThreshold) {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<EvalFrame> frames(3);
    for (auto& frame : frames) {
      for (int i = 0; i < 2; ++i) {
        const EvalPose gt = body({rng.uniform(-1, 1), rng.uniform(-1, 1), 0});
        frame.ground_truth.push_back(gt);
        EvalPose pred = gt;
        for (auto& j : pred.joints)
          if (j && rng.uniform() < 0.8)
            *j += 0.12 * Point3(rng.normal(), rng.normal(), rng.normal());
          else
            j.reset();
        frame.predictions.push_back(pred);
      }
    }
    const MetricReport r = compute_metrics(frames, skel());
    EXPECT_GE(r.pck500, r.pck100);
    EXPECT_GE(r.recall500, r.recall100);
  }
}

TEST(ComputeMetrics, RemovingASpuriousPredictionNeverHurts) {
  Rng rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    EvalFrame frame;
    frame.ground_truth = {body({0, 0, 0}), body({1.8, 0.4, 0})};
    frame.predictions = {displaced(frame.ground_truth[0], {0.02, 0, 0}),
                         displaced(frame.ground_truth[1], {0.01, -0.02, 0})};
    EvalFrame with_spurious = frame;
    with_spurious.predictions.push_back(
        body({rng.uniform(4, 8), rng.uniform(4, 8), 0}));  // far from all GT

    const MetricReport clean = compute_metrics({frame}, skel());
    const MetricReport noisy = compute_metrics({with_spurious}, skel());
    EXPECT_GE(clean.f1, noisy.f1);
    EXPECT_LE(clean.invalid_pct, noisy.invalid_pct);
  }
}

TEST(ComputeMetrics, RigidTransformInvariance) {
  Rng rng(37);
  std::vector<EvalFrame> frames(4);
  for (auto& frame : frames) {
    for (int i = 0; i < 3; ++i) {
      const EvalPose gt = body({rng.uniform(-1, 1), rng.uniform(-1, 1), 0});
      frame.ground_truth.push_back(gt);
      EvalPose pred = gt;
      for (auto& j : pred.joints)
        if (j) *j += 0.05 * Point3(rng.normal(), rng.normal(), rng.normal());
      frame.predictions.push_back(pred);
    }
    frame.predictions.push_back(body({rng.uniform(3, 5), 4, 0}));  // one spurious
  }
  const MetricReport base = compute_metrics(frames, skel());

  const RigidTransform t = depthpose::testing::random_rigid_transform(rng);
  std::vector<EvalFrame> moved = frames;
  for (auto& frame : moved) {
    for (auto& pose : frame.ground_truth)
      for (auto& j : pose.joints)
        if (j) *j = t.apply(*j);
    for (auto& pose : frame.predictions)
      for (auto& j : pose.joints)
        if (j) *j = t.apply(*j);
  }
  const MetricReport morph = compute_metrics(moved, skel());
  const double rel = 1e-9;
  EXPECT_NEAR(morph.pcp, base.pcp, rel * std::max(1.0, base.pcp));
  EXPECT_NEAR(morph.pck100, base.pck100, rel * std::max(1.0, base.pck100));
  EXPECT_NEAR(morph.pck500, base.pck500, rel * std::max(1.0, base.pck500));
  EXPECT_NEAR(*morph.mpjpe_mm, *base.mpjpe_mm, rel * std::max(1.0, *base.mpjpe_mm));
  EXPECT_NEAR(morph.recall100, base.recall100, rel * std::max(1.0, base.recall100));
  EXPECT_NEAR(morph.recall500, base.recall500, rel * std::max(1.0, base.recall500));
  EXPECT_DOUBLE_EQ(morph.invalid_pct, base.invalid_pct);
  EXPECT_DOUBLE_EQ(morph.f1, base.f1);
}
