#pragma once

#include <map>
#include <string>
#include <vector>

#include "roomforge/metrics.hpp"

namespace roomforge::evalproto {

struct MetricOutcome {
  std::string name;
  double baseline = 0.0;
  double candidate = 0.0;
  metrics::Direction direction = metrics::Direction::up;
  bool improved = false;
};

struct GateDecision {
  std::vector<MetricOutcome> outcomes;  // metric name order
  std::size_t improved = 0;
  std::size_t total = 0;
  double fraction = 0.0;
  double threshold = 0.70;
  bool inclusive = false;  // pass on fraction >= threshold instead of >
  bool pass = false;

  Json to_json() const;
};

/// A metric improves only when the candidate is strictly better in its
/// direction; equal values do not count. Passes when the improved fraction
/// exceeds `threshold` (or reaches it with `inclusive`).
///
/// Throws ValidationError when the reports name different metrics, when a
/// metric has no direction, or when the threshold is outside [0, 1].
GateDecision dual_gate(const metrics::MetricReport& baseline, const metrics::MetricReport& candidate,
                       const std::map<std::string, metrics::Direction>& directions, double threshold = 0.70,
                       bool inclusive = false);

/// Directions taken from the reports themselves; they must agree.
GateDecision dual_gate(const metrics::MetricReport& baseline, const metrics::MetricReport& candidate,
                       double threshold = 0.70, bool inclusive = false);

}  // namespace roomforge::evalproto
