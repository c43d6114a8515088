#include "catapult/catapults.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace catapult;

namespace {

Trajectory make(const std::vector<double>& loss, const std::vector<double>& sharp, double mss = 100.0) {
  Trajectory t;
  for (std::size_t i = 0; i < loss.size(); ++i) {
    Record r;
    r.t = static_cast<long>(i);
    r.loss = loss[i];
    r.eta = 2.0 / mss;
    r.mss = mss;
    if (!sharp.empty() && !std::isnan(sharp[i])) r.sharpness = sharp[i];
    t.records.push_back(r);
  }
  return t;
}

// Decay, spike of ~1000x with a sharpness drop from 150 to 60, then decay again.
Trajectory one_spike(int width = 20, int pre = 50, int post = 100) {
  std::vector<double> loss, sharp;
  for (int i = 0; i < pre; ++i) {
    loss.push_back(1.0 * std::exp(-0.05 * i));
    sharp.push_back(150.0);
  }
  const double base = loss.back();
  for (int i = 0; i < width; ++i) {
    const double x = std::sin(M_PI * (i + 1) / (width + 1));
    loss.push_back(base * (1 + 1000 * x));
    sharp.push_back(150.0 - 90.0 * (i + 1) / width);
  }
  for (int i = 0; i < post; ++i) {
    loss.push_back(0.5 * base * std::exp(-0.05 * i));
    sharp.push_back(60.0);
  }
  return make(loss, sharp);
}

}  // namespace

TEST(Detector, SingleSpike) {
  auto events = detect_catapults(one_spike());
  ASSERT_EQ(events.size(), 1u);
  const auto& e = events[0];
  EXPECT_LE(e.start, e.peak_step);
  EXPECT_LE(e.peak_step, e.end);
  EXPECT_GE(e.loss_spike_ratio, 5.0);
  EXPECT_DOUBLE_EQ(e.sharpness_before, 150.0);
  EXPECT_DOUBLE_EQ(e.sharpness_after, 60.0);
  EXPECT_DOUBLE_EQ(e.sharpness_drop, 90.0);
  EXPECT_DOUBLE_EQ(e.final_sharpness_over_mss, 0.6);
  EXPECT_TRUE(e.closed);
  EXPECT_FALSE(e.overshoot);
}

TEST(Detector, MonotoneLossHasNoEvents) {
  std::vector<double> loss, sharp;
  for (int i = 0; i < 500; ++i) {
    loss.push_back(std::exp(-0.01 * i));
    sharp.push_back(100.0 - 0.1 * i);
  }
  EXPECT_TRUE(detect_catapults(make(loss, sharp)).empty());
}

TEST(Detector, SpikeWithoutSharpnessDropIsDiscarded) {
  auto t = one_spike();
  for (auto& r : t.records) r.sharpness = 150.0;
  EXPECT_TRUE(detect_catapults(t).empty());
  // A smaller rho keeps a 10% drop.
  auto u = one_spike();
  for (auto& r : u.records)
    if (*r.sharpness < 135.0) r.sharpness = 135.0;
  EXPECT_TRUE(detect_catapults(u).empty());
  EXPECT_EQ(detect_catapults(u, {5.0, 0.05, 0.0}).size(), 1u);
}

TEST(Detector, OpenSeriesAndOvershoot) {
  auto t = one_spike(20, 50, 0);
  t.records.resize(t.records.size() - 5);
  auto events = detect_catapults(t);
  ASSERT_EQ(events.size(), 1u);
  EXPECT_FALSE(events[0].closed);

  auto o = one_spike();
  o.records.back().sharpness = 120.0;  // climbs back above 1.5x the post-event minimum of 60
  events = detect_catapults(o);
  ASSERT_EQ(events.size(), 1u);
  EXPECT_TRUE(events[0].overshoot);
}

TEST(Detector, LossFloorSuppressesRoundoffSpikes) {
  std::vector<double> loss{1e-30, 1e-31, 1e-29, 1e-31};
  std::vector<double> sharp{10.0, 10.0, 1.0, 1.0};
  EXPECT_EQ(detect_catapults(make(loss, sharp)).size(), 1u);
  EXPECT_TRUE(detect_catapults(make(loss, sharp), {5.0, 0.2, 1e-20}).empty());
}

TEST(Detector, IdempotentAndSubsamplingInvariant) {
  auto t = one_spike(40, 60, 200);
  auto a = detect_catapults(t);
  auto b = detect_catapults(t);
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(to_json(a), to_json(b));
  for (int k : {2, 4, 5}) {
    Trajectory sub;
    for (std::size_t i = 0; i < t.records.size(); i += k) sub.records.push_back(t.records[i]);
    auto s = detect_catapults(sub);
    ASSERT_EQ(s.size(), 1u) << "subsample " << k;
    EXPECT_DOUBLE_EQ(s[0].sharpness_after, 60.0);
  }
}

TEST(Detector, SparseSharpnessSamples) {
  auto t = one_spike();
  for (std::size_t i = 0; i < t.records.size(); ++i)
    if (i % 7 != 0) t.records[i].sharpness.reset();
  auto events = detect_catapults(t);
  ASSERT_EQ(events.size(), 1u);
  EXPECT_DOUBLE_EQ(events[0].sharpness_after, 60.0);
}

TEST(Detector, Errors) {
  EXPECT_THROW(detect_catapults(make({1.0, 2.0}, {})), std::invalid_argument);
  auto t = one_spike();
  EXPECT_THROW(detect_catapults(t, {1.0, 0.2, 0.0}), std::invalid_argument);
  EXPECT_THROW(detect_catapults(t, {5.0, -0.1, 0.0}), std::invalid_argument);
}

TEST(Detector, JsonFields) {
  auto j = to_json(detect_catapults(one_spike()));
  ASSERT_TRUE(j.is_array());
  ASSERT_EQ(j.size(), 1u);
  for (const char* k : {"start", "peak_step", "end", "loss_spike_ratio", "sharpness_drop", "final_sharpness_over_mss",
                        "closed", "overshoot"})
    EXPECT_TRUE(j[0].contains(k)) << k;
  EXPECT_TRUE(to_json(std::vector<CatapultEvent>{}).is_array());
}
