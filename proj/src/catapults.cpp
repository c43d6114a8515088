#include "catapult/catapults.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace catapult {

namespace {

// Last sampled sharpness at or before index i, else the first one after it.
std::optional<std::size_t> sample_at_or_before(const std::vector<Record>& r, std::size_t i) {
  for (std::size_t j = i + 1; j-- > 0;) {
    if (r[j].sharpness) return j;
  }
  for (std::size_t j = i + 1; j < r.size(); ++j) {
    if (r[j].sharpness) return j;
  }
  return std::nullopt;
}

std::optional<std::size_t> sample_at_or_after(const std::vector<Record>& r, std::size_t i) {
  for (std::size_t j = i; j < r.size(); ++j) {
    if (r[j].sharpness) return j;
  }
  for (std::size_t j = std::min(i, r.size() - 1) + 1; j-- > 0;) {
    if (r[j].sharpness) return j;
  }
  return std::nullopt;
}

}  // namespace

std::vector<CatapultEvent> detect_catapults(const Trajectory& traj, const DetectorOptions& options) {
  if (!(options.kappa > 1.0)) throw std::invalid_argument("detect_catapults: kappa must be > 1");
  if (!(options.rho >= 0.0)) throw std::invalid_argument("detect_catapults: rho must be >= 0");
  const auto& r = traj.records;
  if (std::none_of(r.begin(), r.end(), [](const Record& rec) { return rec.sharpness.has_value(); })) {
    throw std::invalid_argument("detect_catapults: trajectory has no sharpness samples");
  }

  std::vector<CatapultEvent> events;
  double running_min = std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  while (i < r.size()) {
    const double floor_min = std::max(running_min, options.loss_floor);
    if (!(std::isfinite(floor_min) && r[i].loss >= options.kappa * floor_min)) {
      running_min = std::min(running_min, r[i].loss);
      ++i;
      continue;
    }

    const std::size_t open = i;
    std::size_t peak = i;
    std::size_t close = i;
    bool closed = false;
    for (std::size_t j = i; j < r.size(); ++j) {
      if (r[j].loss > r[peak].loss) peak = j;
      close = j;
      if (r[j].loss < floor_min * 1.01) {
        closed = true;
        break;
      }
    }

    const auto before = sample_at_or_before(r, open == 0 ? 0 : open - 1);
    const auto after = sample_at_or_after(r, close);
    if (before && after) {
      CatapultEvent e;
      e.start = r[open].t;
      e.peak_step = r[peak].t;
      e.end = r[close].t;
      e.loss_spike_ratio = r[peak].loss / floor_min;
      e.sharpness_before = *r[*before].sharpness;
      e.sharpness_after = *r[*after].sharpness;
      e.sharpness_drop = e.sharpness_before - e.sharpness_after;
      e.final_sharpness_over_mss = e.sharpness_after / r[*after].mss;
      e.closed = closed;
      if (e.sharpness_drop >= options.rho * e.sharpness_before) {
        double post_min = e.sharpness_after;
        for (std::size_t j = *after; j < r.size(); ++j) {
          if (r[j].sharpness) post_min = std::min(post_min, *r[j].sharpness);
        }
        const auto last = traj.last_sharpness();
        e.overshoot = last && post_min > 0.0 && *last > 1.5 * post_min;
        events.push_back(e);
      }
    }
    running_min = std::min(running_min, r[close].loss);
    i = close + 1;
  }
  return events;
}

nlohmann::json to_json(const CatapultEvent& e) {
  return {
      {"start", e.start},
      {"peak_step", e.peak_step},
      {"end", e.end},
      {"loss_spike_ratio", e.loss_spike_ratio},
      {"sharpness_before", e.sharpness_before},
      {"sharpness_after", e.sharpness_after},
      {"sharpness_drop", e.sharpness_drop},
      {"final_sharpness_over_mss", e.final_sharpness_over_mss},
      {"closed", e.closed},
      {"overshoot", e.overshoot},
  };
}

nlohmann::json to_json(const std::vector<CatapultEvent>& events) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : events) arr.push_back(to_json(e));
  return arr;
}

}  // namespace catapult
