#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "roomforge/error.hpp"
#include "roomforge/json_util.hpp"

namespace roomforge::evalproto {

/// Judgment relative to system A.
enum class Choice { good, same, bad };
/// What the evaluator clicked on the blinded pair.
enum class RawChoice { left, right, same };
/// Where system A's image was shown.
enum class Side { a_left, a_right };

std::string_view to_string(Choice c);
std::string_view to_string(RawChoice c);
std::string_view to_string(Side s);
Choice parse_choice(std::string_view text);
RawChoice parse_raw_choice(std::string_view text);

/// Protocol violations, tagged so the HTTP layer can pick a status code.
class GsbError : public ValidationError {
 public:
  enum class Kind { invalid, not_found, forbidden, conflict };

  GsbError(Kind kind, const std::string& what) : ValidationError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct PromptPair {
  std::string prompt_id;
  std::string prompt;
  std::string image_a;
  std::string image_b;
};

struct SessionConfig {
  std::vector<std::string> dimensions{"aesthetic", "alignment", "layout"};
  std::vector<std::string> roster;
  std::uint64_t seed = 0;
  std::size_t min_per_item = 3;
};

struct GsbSession {
  std::string id;
  std::vector<PromptPair> items;  // sorted by prompt id
  SessionConfig config;

  Json to_json() const;
  static GsbSession from_json(const Json& doc);
};

/// Items are sorted by prompt id. Throws GsbError(invalid) on no prompts,
/// repeated prompt ids, an empty or repeated dimension or evaluator, or a
/// roster smaller than min_per_item.
GsbSession create_session(std::string id, std::vector<PromptPair> prompts, SessionConfig config);

/// Same, from parallel prompt / image lists; their lengths must agree.
GsbSession create_session(std::string id, std::span<const std::pair<std::string, std::string>> prompts,
                          std::span<const std::string> images_a, std::span<const std::string> images_b,
                          SessionConfig config);

/// Side order hash: mix64(seed ^ mix64(fnv1a64(item_id) ^ mix64(fnv1a64(evaluator_id)))),
/// with mix64 the splitmix64 finalizer. Odd means system A is shown on the
/// right.
std::uint64_t side_hash(std::uint64_t seed, std::string_view item_id, std::string_view evaluator_id);
Side presented_side(std::uint64_t seed, std::string_view item_id, std::string_view evaluator_id);

struct Assignment {
  std::size_t item_index = 0;
  std::string item_id;
  std::string evaluator;
  std::string dimension;
  Side side = Side::a_left;
};

/// For dimension d and item i (sorted position), slots k = 0..m-1 go to
/// roster[(i*m + k + d) mod R]. Every (item, dimension) gets exactly m
/// distinct evaluators and per-dimension loads differ by at most one.
/// Ordered by dimension, item, slot.
std::vector<Assignment> assign_items(const GsbSession& session);

Choice unblind(Side side, RawChoice raw);

struct Judgment {
  std::string item_id;
  std::string evaluator;
  std::string dimension;
  RawChoice raw = RawChoice::same;
  Choice choice = Choice::same;
  std::int64_t timestamp_ms = 0;

  Json to_json() const;
  static Judgment from_json(const Json& doc);
  bool operator==(const Judgment&) const = default;
};

struct ItemAggregate {
  std::string item_id;
  std::string dimension;
  std::optional<Choice> outcome;  // none = excluded
  std::size_t good = 0;
  std::size_t same = 0;
  std::size_t bad = 0;
};

/// Strict majority: the choice holding more than half of the votes, else
/// excluded. Throws GsbError(conflict) with fewer than `min_votes` votes.
ItemAggregate aggregate_item(std::string item_id, std::string dimension, std::span<const Choice> votes,
                             std::size_t min_votes = 1);

/// good / (good + bad); none when both are zero.
std::optional<double> win_rate(std::size_t good, std::size_t bad);

struct DimensionSummary {
  std::string dimension;
  std::size_t good = 0;
  std::size_t same = 0;
  std::size_t bad = 0;
  std::size_t excluded = 0;
  std::size_t pending = 0;  // items still short of min_per_item judgments
  std::optional<double> win_rate;
};

struct GsbSummary {
  std::string session_id;
  bool closed = false;
  bool complete = false;
  std::vector<DimensionSummary> dimensions;

  Json to_json() const;
};

/// Live protocol state for one session. Not synchronized; the service wraps
/// it in a lock.
class SessionState {
 public:
  explicit SessionState(GsbSession session);

  const GsbSession& session() const { return session_; }
  const std::vector<Assignment>& assignments() const { return assignments_; }
  bool closed() const { return closed_; }

  std::optional<Side> side_for(std::string_view item_id, std::string_view evaluator, std::string_view dimension) const;

  /// Checks the submission and un-blinds it without changing state. Throws
  /// GsbError: conflict for a closed session or a repeated judgment,
  /// forbidden when the evaluator does not hold the assignment, invalid for
  /// an unknown dimension.
  Judgment prepare_judgment(std::string_view evaluator, std::string_view item_id, std::string_view dimension,
                            RawChoice raw, std::int64_t timestamp_ms) const;
  /// Applies a judgment produced by prepare_judgment (or replayed from a log).
  void apply(const Judgment& judgment);
  void close() { closed_ = true; }

  struct QueueEntry {
    const Assignment* assignment = nullptr;  // null when the queue is done
    std::size_t completed = 0;
    std::size_t total = 0;
  };
  /// Next unjudged assignment for the evaluator in item order. Throws
  /// GsbError(not_found) for an evaluator outside the roster.
  QueueEntry next_for(std::string_view evaluator, std::string_view dimension) const;

  std::vector<Choice> votes(std::string_view item_id, std::string_view dimension) const;
  std::vector<ItemAggregate> aggregates(std::string_view dimension) const;

  /// Throws GsbError(conflict) while judgments are outstanding on an open
  /// session (unless allow_partial) and when nothing has been aggregated.
  GsbSummary summarize(bool allow_partial = false) const;

  const std::map<std::tuple<std::string, std::string, std::string>, Judgment>& judgments() const { return judgments_; }

 private:
  using Key = std::tuple<std::string, std::string, std::string>;  // item, evaluator, dimension

  const std::string& check_dimension(std::string_view dimension) const;

  GsbSession session_;
  std::vector<Assignment> assignments_;
  std::map<Key, Side> sides_;
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> queues_;  // (evaluator, dimension)
  std::map<Key, Judgment> judgments_;
  bool closed_ = false;
};

/// prepare_judgment followed by apply.
Judgment record_judgment(SessionState& state, std::string_view evaluator, std::string_view item_id,
                         std::string_view dimension, RawChoice raw, std::int64_t timestamp_ms);

}  // namespace roomforge::evalproto
