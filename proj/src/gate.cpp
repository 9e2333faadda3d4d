#include "roomforge/gate.hpp"

#include <cmath>

#include "roomforge/error.hpp"

namespace roomforge::evalproto {

using metrics::Direction;

Json GateDecision::to_json() const {
  Json per_metric = Json::object();
  for (const MetricOutcome& o : outcomes) {
    per_metric[o.name] = {{"baseline", o.baseline},
                          {"candidate", o.candidate},
                          {"direction", metrics::to_string(o.direction)},
                          {"outcome", o.improved ? "improved" : "not-improved"}};
  }
  return {{"metrics", per_metric}, {"improved", improved},        {"total", total},
          {"fraction", fraction},  {"threshold", threshold},      {"comparison", inclusive ? ">=" : ">"},
          {"pass", pass}};
}

GateDecision dual_gate(const metrics::MetricReport& baseline, const metrics::MetricReport& candidate,
                       const std::map<std::string, Direction>& directions, double threshold, bool inclusive) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ValidationError("gate threshold must be in [0, 1], got " + std::to_string(threshold));
  }
  for (const auto& [name, value] : baseline.metrics) {
    if (!candidate.metrics.contains(name)) throw ValidationError("metric " + name + " is missing from the candidate report");
  }
  for (const auto& [name, value] : candidate.metrics) {
    if (!baseline.metrics.contains(name)) throw ValidationError("metric " + name + " is missing from the baseline report");
  }
  if (baseline.metrics.empty()) throw ValidationError("reports contain no metrics");

  GateDecision d;
  d.threshold = threshold;
  d.inclusive = inclusive;
  for (const auto& [name, base] : baseline.metrics) {
    auto dir = directions.find(name);
    if (dir == directions.end()) throw ValidationError("no direction declared for metric " + name);
    const double b = base.value;
    const double c = candidate.metrics.at(name).value;
    if (!std::isfinite(b) || !std::isfinite(c)) throw ValidationError("metric " + name + " is not finite");
    const bool improved = dir->second == Direction::up ? c > b : c < b;
    d.outcomes.push_back({name, b, c, dir->second, improved});
    d.improved += improved ? 1 : 0;
  }
  d.total = d.outcomes.size();
  d.fraction = static_cast<double>(d.improved) / static_cast<double>(d.total);
  d.pass = inclusive ? d.fraction >= threshold : d.fraction > threshold;
  return d;
}

GateDecision dual_gate(const metrics::MetricReport& baseline, const metrics::MetricReport& candidate, double threshold,
                       bool inclusive) {
  std::map<std::string, Direction> directions;
  for (const auto& [name, base] : baseline.metrics) {
    auto it = candidate.metrics.find(name);
    if (it != candidate.metrics.end() && it->second.direction != base.direction) {
      throw ValidationError("reports disagree on the direction of " + name);
    }
    directions[name] = base.direction;
  }
  return dual_gate(baseline, candidate, directions, threshold, inclusive);
}

}  // namespace roomforge::evalproto
