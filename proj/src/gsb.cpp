#include "roomforge/gsb.hpp"

#include <algorithm>
#include <set>

#include "roomforge/rng.hpp"

namespace roomforge::evalproto {

namespace {

std::uint64_t fnv(std::string_view s) { return fnv1a64({s.data(), s.size()}); }

GsbError invalid(const std::string& what) { return GsbError(GsbError::Kind::invalid, what); }

}  // namespace

std::string_view to_string(Choice c) {
  switch (c) {
    case Choice::good: return "good";
    case Choice::same: return "same";
    case Choice::bad: return "bad";
  }
  return "same";
}

std::string_view to_string(RawChoice c) {
  switch (c) {
    case RawChoice::left: return "left";
    case RawChoice::right: return "right";
    case RawChoice::same: return "same";
  }
  return "same";
}

std::string_view to_string(Side s) { return s == Side::a_left ? "A-left" : "A-right"; }

Choice parse_choice(std::string_view text) {
  if (text == "good") return Choice::good;
  if (text == "same") return Choice::same;
  if (text == "bad") return Choice::bad;
  throw invalid("choice must be good, same or bad, got \"" + std::string(text) + "\"");
}

RawChoice parse_raw_choice(std::string_view text) {
  if (text == "left") return RawChoice::left;
  if (text == "right") return RawChoice::right;
  if (text == "same") return RawChoice::same;
  throw invalid("choice must be left, right or same, got \"" + std::string(text) + "\"");
}

Json GsbSession::to_json() const {
  Json items_json = Json::array();
  for (const PromptPair& p : items) {
    items_json.push_back({{"prompt_id", p.prompt_id}, {"prompt", p.prompt}, {"image_a", p.image_a}, {"image_b", p.image_b}});
  }
  return {{"session_id", id},
          {"items", items_json},
          {"dimensions", config.dimensions},
          {"roster", config.roster},
          {"seed", config.seed},
          {"min_per_item", config.min_per_item}};
}

GsbSession GsbSession::from_json(const Json& doc) {
  try {
    std::vector<PromptPair> prompts;
    for (const Json& p : doc.at("items")) {
      prompts.push_back({p.at("prompt_id").get<std::string>(), p.value("prompt", ""), p.at("image_a").get<std::string>(),
                         p.at("image_b").get<std::string>()});
    }
    SessionConfig config;
    if (doc.contains("dimensions")) config.dimensions = doc.at("dimensions").get<std::vector<std::string>>();
    config.roster = doc.at("roster").get<std::vector<std::string>>();
    config.seed = doc.value("seed", std::uint64_t{0});
    config.min_per_item = doc.value("min_per_item", std::size_t{3});
    return create_session(doc.value("session_id", ""), std::move(prompts), std::move(config));
  } catch (const Json::exception& e) {
    throw invalid(std::string("session: ") + e.what());
  }
}

GsbSession create_session(std::string id, std::vector<PromptPair> prompts, SessionConfig config) {
  if (prompts.empty()) throw invalid("session needs at least one prompt");
  if (config.min_per_item == 0) throw invalid("min_per_item must be at least 1");
  if (config.roster.size() < config.min_per_item) {
    throw invalid("roster of " + std::to_string(config.roster.size()) + " is smaller than the " +
                  std::to_string(config.min_per_item) + " evaluators required per item");
  }
  if (config.dimensions.empty()) throw invalid("session needs at least one dimension");
  auto check_unique = [](const std::vector<std::string>& values, const char* what) {
    std::set<std::string> seen;
    for (const auto& v : values) {
      if (v.empty()) throw invalid(std::string("empty ") + what);
      if (!seen.insert(v).second) throw invalid(std::string("repeated ") + what + " \"" + v + "\"");
    }
  };
  check_unique(config.dimensions, "dimension");
  check_unique(config.roster, "evaluator");
  std::sort(prompts.begin(), prompts.end(), [](const PromptPair& a, const PromptPair& b) { return a.prompt_id < b.prompt_id; });
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    if (prompts[i].prompt_id.empty()) throw invalid("empty prompt id");
    if (i > 0 && prompts[i].prompt_id == prompts[i - 1].prompt_id) throw invalid("repeated prompt id \"" + prompts[i].prompt_id + "\"");
  }
  return {std::move(id), std::move(prompts), std::move(config)};
}

GsbSession create_session(std::string id, std::span<const std::pair<std::string, std::string>> prompts,
                          std::span<const std::string> images_a, std::span<const std::string> images_b,
                          SessionConfig config) {
  if (images_a.size() != prompts.size() || images_b.size() != prompts.size()) {
    throw invalid("prompt and image lists differ in length (" + std::to_string(prompts.size()) + ", " +
                  std::to_string(images_a.size()) + ", " + std::to_string(images_b.size()) + ")");
  }
  std::vector<PromptPair> pairs;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    pairs.push_back({prompts[i].first, prompts[i].second, images_a[i], images_b[i]});
  }
  return create_session(std::move(id), std::move(pairs), std::move(config));
}

std::uint64_t side_hash(std::uint64_t seed, std::string_view item_id, std::string_view evaluator_id) {
  return mix64(seed ^ mix64(fnv(item_id) ^ mix64(fnv(evaluator_id))));
}

Side presented_side(std::uint64_t seed, std::string_view item_id, std::string_view evaluator_id) {
  return (side_hash(seed, item_id, evaluator_id) & 1) ? Side::a_right : Side::a_left;
}

std::vector<Assignment> assign_items(const GsbSession& session) {
  const auto& roster = session.config.roster;
  const std::size_t m = session.config.min_per_item;
  if (roster.size() < m) throw invalid("roster smaller than min_per_item");
  std::vector<Assignment> out;
  out.reserve(session.config.dimensions.size() * session.items.size() * m);
  for (std::size_t d = 0; d < session.config.dimensions.size(); ++d) {
    for (std::size_t i = 0; i < session.items.size(); ++i) {
      for (std::size_t k = 0; k < m; ++k) {
        const std::string& evaluator = roster[(i * m + k + d) % roster.size()];
        const std::string& item = session.items[i].prompt_id;
        out.push_back({i, item, evaluator, session.config.dimensions[d], presented_side(session.config.seed, item, evaluator)});
      }
    }
  }
  return out;
}

Choice unblind(Side side, RawChoice raw) {
  if (raw == RawChoice::same) return Choice::same;
  const bool picked_a = (raw == RawChoice::left) == (side == Side::a_left);
  return picked_a ? Choice::good : Choice::bad;
}

Json Judgment::to_json() const {
  return {{"item_id", item_id}, {"evaluator", evaluator}, {"dimension", dimension},
          {"raw", to_string(raw)},  {"choice", to_string(choice)}, {"timestamp_ms", timestamp_ms}};
}

Judgment Judgment::from_json(const Json& doc) {
  try {
    Judgment j;
    j.item_id = doc.at("item_id").get<std::string>();
    j.evaluator = doc.at("evaluator").get<std::string>();
    j.dimension = doc.at("dimension").get<std::string>();
    j.raw = parse_raw_choice(doc.at("raw").get<std::string>());
    j.choice = parse_choice(doc.at("choice").get<std::string>());
    j.timestamp_ms = doc.value("timestamp_ms", std::int64_t{0});
    return j;
  } catch (const Json::exception& e) {
    throw invalid(std::string("judgment: ") + e.what());
  }
}

ItemAggregate aggregate_item(std::string item_id, std::string dimension, std::span<const Choice> votes,
                             std::size_t min_votes) {
  if (votes.size() < min_votes || votes.empty()) {
    throw GsbError(GsbError::Kind::conflict, "item " + item_id + " has " + std::to_string(votes.size()) +
                                                 " judgments, needs " + std::to_string(std::max<std::size_t>(min_votes, 1)));
  }
  ItemAggregate a{std::move(item_id), std::move(dimension), std::nullopt, 0, 0, 0};
  for (Choice c : votes) {
    (c == Choice::good ? a.good : c == Choice::same ? a.same : a.bad) += 1;
  }
  const std::size_t n = votes.size();
  if (2 * a.good > n) a.outcome = Choice::good;
  if (2 * a.same > n) a.outcome = Choice::same;
  if (2 * a.bad > n) a.outcome = Choice::bad;
  return a;
}

std::optional<double> win_rate(std::size_t good, std::size_t bad) {
  if (good + bad == 0) return std::nullopt;
  return static_cast<double>(good) / static_cast<double>(good + bad);
}

Json GsbSummary::to_json() const {
  Json dims = Json::object();
  for (const DimensionSummary& d : dimensions) {
    dims[d.dimension] = {{"good", d.good},         {"same", d.same},       {"bad", d.bad},
                         {"excluded", d.excluded}, {"pending", d.pending},
                         {"win_rate", d.win_rate ? Json(*d.win_rate) : Json(nullptr)}};
  }
  return {{"session_id", session_id}, {"closed", closed}, {"complete", complete}, {"dimensions", dims}};
}

SessionState::SessionState(GsbSession session) : session_(std::move(session)), assignments_(assign_items(session_)) {
  for (std::size_t i = 0; i < assignments_.size(); ++i) {
    const Assignment& a = assignments_[i];
    sides_[{a.item_id, a.evaluator, a.dimension}] = a.side;
    queues_[{a.evaluator, a.dimension}].push_back(i);
  }
}

const std::string& SessionState::check_dimension(std::string_view dimension) const {
  for (const auto& d : session_.config.dimensions) {
    if (d == dimension) return d;
  }
  throw invalid("unknown dimension \"" + std::string(dimension) + "\"");
}

std::optional<Side> SessionState::side_for(std::string_view item_id, std::string_view evaluator,
                                           std::string_view dimension) const {
  auto it = sides_.find({std::string(item_id), std::string(evaluator), std::string(dimension)});
  if (it == sides_.end()) return std::nullopt;
  return it->second;
}

Judgment SessionState::prepare_judgment(std::string_view evaluator, std::string_view item_id, std::string_view dimension,
                                        RawChoice raw, std::int64_t timestamp_ms) const {
  if (closed_) throw GsbError(GsbError::Kind::conflict, "session " + session_.id + " is closed");
  check_dimension(dimension);
  const std::optional<Side> side = side_for(item_id, evaluator, dimension);
  if (!side) {
    throw GsbError(GsbError::Kind::forbidden, "evaluator " + std::string(evaluator) + " is not assigned item " +
                                                  std::string(item_id) + " for " + std::string(dimension));
  }
  Key key{std::string(item_id), std::string(evaluator), std::string(dimension)};
  if (judgments_.contains(key)) {
    throw GsbError(GsbError::Kind::conflict, "evaluator " + std::string(evaluator) + " already judged item " +
                                                 std::string(item_id) + " for " + std::string(dimension));
  }
  return {std::string(item_id), std::string(evaluator), std::string(dimension), raw, unblind(*side, raw), timestamp_ms};
}

void SessionState::apply(const Judgment& j) {
  const Judgment checked = prepare_judgment(j.evaluator, j.item_id, j.dimension, j.raw, j.timestamp_ms);
  if (checked.choice != j.choice) throw invalid("judgment choice disagrees with the stored side order");
  judgments_.emplace(Key{j.item_id, j.evaluator, j.dimension}, checked);
}

SessionState::QueueEntry SessionState::next_for(std::string_view evaluator, std::string_view dimension) const {
  check_dimension(dimension);
  const auto& roster = session_.config.roster;
  if (std::find(roster.begin(), roster.end(), evaluator) == roster.end()) {
    throw GsbError(GsbError::Kind::not_found, "evaluator " + std::string(evaluator) + " is not on the roster");
  }
  QueueEntry entry;
  auto q = queues_.find({std::string(evaluator), std::string(dimension)});
  if (q == queues_.end()) return entry;
  entry.total = q->second.size();
  for (std::size_t index : q->second) {
    const Assignment& a = assignments_[index];
    if (judgments_.contains({a.item_id, a.evaluator, a.dimension})) {
      ++entry.completed;
    } else if (entry.assignment == nullptr) {
      entry.assignment = &a;
    }
  }
  return entry;
}

std::vector<Choice> SessionState::votes(std::string_view item_id, std::string_view dimension) const {
  std::vector<Choice> out;
  for (const auto& evaluator : session_.config.roster) {
    auto it = judgments_.find({std::string(item_id), evaluator, std::string(dimension)});
    if (it != judgments_.end()) out.push_back(it->second.choice);
  }
  return out;
}

std::vector<ItemAggregate> SessionState::aggregates(std::string_view dimension) const {
  const std::string& dim = check_dimension(dimension);
  std::vector<ItemAggregate> out;
  for (const PromptPair& item : session_.items) {
    const std::vector<Choice> v = votes(item.prompt_id, dim);
    if (v.size() >= session_.config.min_per_item) out.push_back(aggregate_item(item.prompt_id, dim, v, session_.config.min_per_item));
  }
  return out;
}

GsbSummary SessionState::summarize(bool allow_partial) const {
  GsbSummary summary;
  summary.session_id = session_.id;
  summary.closed = closed_;
  summary.complete = true;
  std::size_t aggregated = 0;
  for (const std::string& dim : session_.config.dimensions) {
    DimensionSummary d;
    d.dimension = dim;
    const std::vector<ItemAggregate> aggs = aggregates(dim);
    d.pending = session_.items.size() - aggs.size();
    for (const ItemAggregate& a : aggs) {
      if (!a.outcome) {
        ++d.excluded;
      } else {
        (*a.outcome == Choice::good ? d.good : *a.outcome == Choice::same ? d.same : d.bad) += 1;
      }
    }
    d.win_rate = win_rate(d.good, d.bad);
    summary.complete = summary.complete && d.pending == 0;
    aggregated += aggs.size();
    summary.dimensions.push_back(std::move(d));
  }
  if (!summary.complete && !closed_ && !allow_partial) {
    throw GsbError(GsbError::Kind::conflict, "session " + session_.id + " is still collecting judgments");
  }
  if (aggregated == 0) throw GsbError(GsbError::Kind::conflict, "session " + session_.id + " has no aggregated items");
  return summary;
}

Judgment record_judgment(SessionState& state, std::string_view evaluator, std::string_view item_id,
                         std::string_view dimension, RawChoice raw, std::int64_t timestamp_ms) {
  Judgment j = state.prepare_judgment(evaluator, item_id, dimension, raw, timestamp_ms);
  state.apply(j);
  return j;
}

}  // namespace roomforge::evalproto
