#include "crowdval/revision.hpp"

#include <algorithm>
#include <sstream>

#include "crowdval/error.hpp"

namespace crowdval {

using nlohmann::json;

json to_json(const DecisionEvent& e) {
  return json{{"seq", e.sequence_no},
              {"timestamp", format_timestamp(e.timestamp)},
              {"user_id", e.user_id},
              {"pair_id", e.pair_id},
              {"value", to_string(e.value)},
              {"origin", to_string(e.origin)}};
}

DecisionEvent decision_event_from_json(const json& j) {
  DecisionEvent e;
  e.sequence_no = j.at("seq").get<std::uint64_t>();
  const auto& ts = j.at("timestamp");
  e.timestamp = ts.is_number_integer() ? ts.get<Timestamp>() : parse_timestamp(ts.get<std::string>());
  e.user_id = j.at("user_id").get<std::string>();
  e.pair_id = j.at("pair_id").get<std::string>();
  e.value = decision_from_string(j.at("value").get<std::string>());
  e.origin = origin_from_string(j.at("origin").get<std::string>());
  return e;
}

// ---------------------------------------------------------------- RevisionLog

RevisionLog::RevisionLog(const RevisionLog& other) {
  std::shared_lock lock(other.mutex_);
  events_ = other.events_;
  index_ = other.index_;
}

RevisionLog& RevisionLog::operator=(const RevisionLog& other) {
  if (this == &other) return *this;
  std::vector<DecisionEvent> events;
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> index;
  {
    std::shared_lock lock(other.mutex_);
    events = other.events_;
    index = other.index_;
  }
  std::unique_lock lock(mutex_);
  events_ = std::move(events);
  index_ = std::move(index);
  return *this;
}

bool RevisionLog::later(const DecisionEvent& a, const DecisionEvent& b) {
  if (a.timestamp != b.timestamp) return a.timestamp > b.timestamp;
  return a.sequence_no > b.sequence_no;
}

DecisionEvent RevisionLog::append(std::string user_id, std::string pair_id, Decision value, Origin origin,
                                  Timestamp now) {
  std::unique_lock lock(mutex_);
  DecisionEvent e{events_.size() + 1, now, std::move(user_id), std::move(pair_id), value, origin};
  index_[{e.user_id, e.pair_id}].push_back(events_.size());
  events_.push_back(e);
  return e;
}

std::vector<DecisionEvent> RevisionLog::events() const {
  std::shared_lock lock(mutex_);
  return events_;
}

std::size_t RevisionLog::size() const {
  std::shared_lock lock(mutex_);
  return events_.size();
}

namespace {

CurrentDecision as_current(const DecisionEvent& e) { return {e.value, e.origin, e.sequence_no, e.timestamp}; }

}  // namespace

std::optional<CurrentDecision> RevisionLog::current(std::string_view user_id, std::string_view pair_id,
                                                    std::optional<Timestamp> as_of) const {
  std::shared_lock lock(mutex_);
  auto it = index_.find({std::string(user_id), std::string(pair_id)});
  if (it == index_.end()) return std::nullopt;
  const DecisionEvent* best = nullptr;
  for (std::size_t i : it->second) {
    const auto& e = events_[i];
    if (as_of && e.timestamp > *as_of) continue;
    if (!best || later(e, *best)) best = &e;
  }
  if (!best) return std::nullopt;
  return as_current(*best);
}

Decision RevisionLog::current_decision(std::string_view user_id, std::string_view pair_id,
                                       std::optional<Timestamp> as_of) const {
  auto c = current(user_id, pair_id, as_of);
  return c ? c->value : Decision::NA;
}

std::optional<CurrentDecision> RevisionLog::before(std::string_view user_id, std::string_view pair_id,
                                                   std::uint64_t sequence_no) const {
  std::shared_lock lock(mutex_);
  auto it = index_.find({std::string(user_id), std::string(pair_id)});
  if (it == index_.end()) return std::nullopt;
  const DecisionEvent* best = nullptr;
  for (std::size_t i : it->second) {
    const auto& e = events_[i];
    if (e.sequence_no >= sequence_no) continue;
    if (!best || later(e, *best)) best = &e;
  }
  if (!best) return std::nullopt;
  return as_current(*best);
}

DecisionState RevisionLog::state(std::optional<Timestamp> as_of) const {
  std::shared_lock lock(mutex_);
  DecisionState out;
  for (const auto& e : events_) {
    if (as_of && e.timestamp > *as_of) continue;
    auto& slot = out[e.user_id];
    auto it = slot.find(e.pair_id);
    if (it == slot.end() || e.timestamp >= it->second.timestamp) {
      slot[e.pair_id] = as_current(e);
    }
  }
  return out;
}

std::optional<Timestamp> RevisionLog::latest_timestamp() const {
  std::shared_lock lock(mutex_);
  std::optional<Timestamp> out;
  for (const auto& e : events_) {
    if (!out || e.timestamp > *out) out = e.timestamp;
  }
  return out;
}

std::string RevisionLog::to_ndjson() const {
  std::shared_lock lock(mutex_);
  std::string out;
  for (const auto& e : events_) {
    out += to_json(e).dump();
    out += '\n';
  }
  return out;
}

RevisionLog RevisionLog::from_ndjson(std::string_view text) {
  RevisionLog log;
  std::size_t line_no = 0, offset = 0;
  while (offset < text.size()) {
    std::size_t end = text.find('\n', offset);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(offset, end - offset);
    ++line_no;
    if (!line.empty() && line.find_first_not_of(" \t\r") != std::string_view::npos) {
      DecisionEvent e;
      try {
        e = decision_event_from_json(json::parse(line));
      } catch (const Error& err) {
        throw ParseError(err.what(), line_no, offset);
      } catch (const std::exception& err) {
        throw ParseError(std::string("malformed event: ") + err.what(), line_no, offset);
      }
      if (e.sequence_no != log.events_.size() + 1) {
        throw ParseError("sequence number " + std::to_string(e.sequence_no) + " out of order", line_no,
                         offset);
      }
      log.index_[{e.user_id, e.pair_id}].push_back(log.events_.size());
      log.events_.push_back(std::move(e));
    }
    offset = end + 1;
  }
  return log;
}

// ------------------------------------------------------------- TaskDefinition

const AnnotationPair* TaskDefinition::find_pair(std::string_view pair_id) const {
  for (const auto& p : pairs) {
    if (p.id == pair_id) return &p;
  }
  return nullptr;
}

std::size_t TaskDefinition::seed_count() const {
  return static_cast<std::size_t>(std::count_if(pairs.begin(), pairs.end(), [](const auto& p) { return p.is_seed(); }));
}

const char* to_string(PairStatus s) {
  switch (s) {
    case PairStatus::Accepted: return "accepted";
    case PairStatus::Rejected: return "rejected";
    case PairStatus::Undecided: return "undecided";
  }
  return "undecided";
}

namespace {

json tau_json(const std::optional<double>& tau) { return tau ? json(*tau) : json(nullptr); }

json outcome_json(const PairOutcome& o) {
  return json{{"status", to_string(o.status)},
              {"N", o.score.n_users},
              {"equivalent_votes", o.score.equivalent_votes},
              {"S", o.score.raw_score},
              {"W", o.score.normalized_share},
              {"accepted", o.score.accepted}};
}

}  // namespace

json TaskSnapshot::to_json() const {
  json j;
  j["task_id"] = task_id;
  j["as_of"] = as_of ? json(format_timestamp(*as_of)) : json(nullptr);
  j["threshold"] = threshold;
  j["weighted"] = weighted;
  json t = json::object();
  for (const auto& [user, p] : trust) {
    t[user] = {{"m", p.m}, {"n", p.n}, {"complete", p.complete}, {"tau", tau_json(p.tau)}};
  }
  j["trust"] = std::move(t);
  json ps = json::object();
  for (const auto& [id, o] : pairs) ps[id] = outcome_json(o);
  j["pairs"] = std::move(ps);
  return j;
}

json ChangeSet::to_json() const {
  json trust = json::array();
  for (const auto& t : recomputed_trust) {
    trust.push_back({{"user_id", t.user_id}, {"old_tau", tau_json(t.old_tau)}, {"new_tau", tau_json(t.new_tau)}});
  }
  json scores = json::array();
  for (const auto& s : recomputed_scores) {
    scores.push_back({{"pair_id", s.pair_id}, {"old", outcome_json(s.old_outcome)}, {"new", outcome_json(s.new_outcome)}});
  }
  auto prefill_list = [](const std::vector<PrefillChange>& changes) {
    json out = json::array();
    for (const auto& c : changes) {
      out.push_back({{"task_id", c.task_id},
                     {"user_id", c.user_id},
                     {"pair_id", c.prefill.pair_id},
                     {"value", crowdval::to_string(c.prefill.value)},
                     {"rule", crowdval::to_string(c.prefill.rule)},
                     {"explanation", c.prefill.explanation}});
    }
    return out;
  };
  return json{{"recomputed_trust", std::move(trust)},
              {"recomputed_scores", std::move(scores)},
              {"prefills_added", prefill_list(prefills_added)},
              {"prefills_retracted", prefill_list(prefills_retracted)}};
}

// ----------------------------------------------------------------- TaskLedger

TaskLedger::TaskLedger(TaskDefinition definition, double threshold, bool open)
    : definition_(std::move(definition)), threshold_(threshold), open_(open) {
  live_ = compute({}, std::nullopt, weighted());
}

void TaskLedger::set_threshold(double threshold) {
  std::unique_lock lock(mutex_);
  threshold_ = threshold;
  live_ = compute(live_state_, std::nullopt, weighted());
}

double TaskLedger::threshold() const {
  std::shared_lock lock(mutex_);
  return threshold_;
}

void TaskLedger::set_open(bool open) {
  std::unique_lock lock(mutex_);
  open_ = open;
}

bool TaskLedger::open() const {
  std::shared_lock lock(mutex_);
  return open_;
}

bool TaskLedger::weighted() const { return definition_.settings.trust_enabled && definition_.seed_count() > 0; }

DecisionEvent TaskLedger::record_decision(const std::string& user_id, const std::string& pair_id, Decision value,
                                          Origin origin, Timestamp now) {
  {
    std::shared_lock lock(mutex_);
    if (!open_) throw Error(ErrorCode::TaskClosed, "task '" + definition_.id + "' is closed");
  }
  return append_unchecked(user_id, pair_id, value, origin, now);
}

DecisionEvent TaskLedger::append_unchecked(const std::string& user_id, const std::string& pair_id, Decision value,
                                           Origin origin, Timestamp now) {
  if (user_id.empty()) throw Error(ErrorCode::NotFound, "unknown user");
  if (!definition_.find_pair(pair_id)) {
    throw Error(ErrorCode::NotFound, "pair '" + pair_id + "' not in task '" + definition_.id + "'");
  }
  return log_.append(user_id, pair_id, value, origin, now);
}

Decision TaskLedger::current_decision(std::string_view user_id, std::string_view pair_id,
                                      std::optional<Timestamp> as_of) const {
  return log_.current_decision(user_id, pair_id, as_of);
}

std::optional<TrustProfile> TaskLedger::profile_for(
    const std::string& user, const std::map<std::string, CurrentDecision>* decisions) const {
  if (!weighted()) return std::nullopt;
  DecisionMap map;
  if (decisions) {
    for (const auto& [pair, c] : *decisions) map.emplace(pair, c.value);
  }
  return trustworthiness(user, definition_.id, definition_.pairs, map);
}

PairOutcome TaskLedger::outcome_for(const AnnotationPair& pair, const DecisionState& state,
                                    const std::map<std::string, TrustProfile>& trust, bool use_weights) const {
  std::vector<Vote> votes;
  for (const auto& [user, decisions] : state) {
    auto it = decisions.find(pair.id);
    if (it == decisions.end() || it->second.value == Decision::NA) continue;
    double tau = 1.0;
    if (use_weights) {
      auto t = trust.find(user);
      if (t == trust.end() || !t->second.complete) continue;
      tau = *t->second.tau;
    }
    votes.push_back({tau, it->second.value});
  }
  PairOutcome out;
  out.score.pair_id = pair.id;
  if (votes.empty()) return out;
  out.score = agreement_score(pair.id, votes);
  out.score.accepted = accept(out.score, threshold_, use_weights);
  out.status = out.score.accepted ? PairStatus::Accepted : PairStatus::Rejected;
  return out;
}

TaskSnapshot TaskLedger::compute(const DecisionState& state, std::optional<Timestamp> as_of,
                                 bool use_weights) const {
  TaskSnapshot snap;
  snap.task_id = definition_.id;
  snap.as_of = as_of;
  snap.threshold = threshold_;
  snap.weighted = use_weights && weighted();
  if (weighted()) {
    for (const auto& [user, decisions] : state) snap.trust.emplace(user, *profile_for(user, &decisions));
  }
  for (const auto& pair : definition_.pairs) {
    if (pair.is_seed()) continue;
    snap.pairs.emplace(pair.id, outcome_for(pair, state, snap.trust, snap.weighted));
  }
  return snap;
}

TaskSnapshot TaskLedger::decision_snapshot(std::optional<Timestamp> as_of,
                                           std::optional<bool> weighted_override) const {
  std::shared_lock lock(mutex_);
  DecisionState state = log_.state(as_of);
  auto label = as_of ? as_of : log_.latest_timestamp();
  return compute(state, label, weighted_override.value_or(true));
}

TaskSnapshot TaskLedger::live_snapshot() const {
  std::shared_lock lock(mutex_);
  TaskSnapshot out = live_;
  out.as_of = log_.latest_timestamp();
  return out;
}

void TaskLedger::rebuild_live_locked(std::uint64_t through_sequence) {
  live_state_.clear();
  for (const auto& e : log_.events()) {
    if (e.sequence_no > through_sequence) break;
    auto& slot = live_state_[e.user_id];
    auto it = slot.find(e.pair_id);
    if (it == slot.end() || e.timestamp >= it->second.timestamp) slot[e.pair_id] = as_current(e);
  }
  live_sequence_ = through_sequence;
  live_ = compute(live_state_, std::nullopt, true);
}

ChangeSet TaskLedger::recompute_after_revision(const DecisionEvent& event) {
  std::unique_lock lock(mutex_);
  ChangeSet changes;
  if (event.sequence_no <= live_sequence_) return changes;
  if (event.sequence_no != live_sequence_ + 1) rebuild_live_locked(event.sequence_no - 1);

  auto& slot = live_state_[event.user_id];
  auto it = slot.find(event.pair_id);
  Decision before = it == slot.end() ? Decision::NA : it->second.value;
  if (it == slot.end() || event.timestamp >= it->second.timestamp) slot[event.pair_id] = as_current(event);
  Decision after = slot[event.pair_id].value;
  live_sequence_ = event.sequence_no;
  // A user's first event registers them even when it decides nothing.
  if (before == after) {
    if (weighted() && !live_.trust.count(event.user_id)) live_.trust[event.user_id] = *profile_for(event.user_id, &slot);
    return changes;
  }

  const AnnotationPair* pair = definition_.find_pair(event.pair_id);
  bool cascade = false;
  if (weighted()) {
    std::optional<TrustProfile> old_profile;
    if (auto t = live_.trust.find(event.user_id); t != live_.trust.end()) old_profile = t->second;
    TrustProfile fresh = *profile_for(event.user_id, &slot);
    bool moved = !old_profile || old_profile->tau != fresh.tau || old_profile->complete != fresh.complete;
    if (pair->is_seed() || moved) {
      changes.recomputed_trust.push_back(
          {event.user_id, old_profile ? old_profile->tau : std::nullopt, fresh.tau});
    }
    cascade = moved;
    live_.trust[event.user_id] = fresh;
  }

  std::vector<const AnnotationPair*> affected;
  if (cascade) {
    for (const auto& [pid, c] : slot) {
      const AnnotationPair* p = definition_.find_pair(pid);
      if (p && !p->is_seed()) affected.push_back(p);
    }
  } else if (!pair->is_seed()) {
    affected.push_back(pair);
  }
  for (const AnnotationPair* p : affected) {
    PairOutcome fresh = outcome_for(*p, live_state_, live_.trust, live_.weighted);
    PairOutcome& cached = live_.pairs[p->id];
    changes.recomputed_scores.push_back({p->id, cached, fresh});
    cached = fresh;
  }
  return changes;
}

}  // namespace crowdval
