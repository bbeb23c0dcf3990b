#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdval/coherence.hpp"
#include "crowdval/seeds.hpp"
#include "crowdval/trust.hpp"
#include "crowdval/types.hpp"

namespace crowdval {

struct DecisionEvent {
  std::uint64_t sequence_no = 0;
  Timestamp timestamp = 0;
  std::string user_id;
  std::string pair_id;
  Decision value = Decision::NA;
  Origin origin = Origin::Manual;

  friend bool operator==(const DecisionEvent&, const DecisionEvent&) = default;
};

nlohmann::json to_json(const DecisionEvent& e);
DecisionEvent decision_event_from_json(const nlohmann::json& j);

struct CurrentDecision {
  Decision value = Decision::NA;
  Origin origin = Origin::Manual;
  std::uint64_t sequence_no = 0;
  Timestamp timestamp = 0;
};

// user id -> pair id -> latest decision
using DecisionState = std::map<std::string, std::map<std::string, CurrentDecision>>;

// Append-only, timestamped decision history. Sequence numbers start at 1 and
// have no gaps; "latest" means greatest (timestamp, sequence_no).
class RevisionLog {
 public:
  RevisionLog() = default;
  RevisionLog(const RevisionLog& other);
  RevisionLog& operator=(const RevisionLog& other);

  DecisionEvent append(std::string user_id, std::string pair_id, Decision value, Origin origin,
                       Timestamp now);

  std::vector<DecisionEvent> events() const;
  std::size_t size() const;

  // Latest decision at or before as_of (all events when absent).
  std::optional<CurrentDecision> current(std::string_view user_id, std::string_view pair_id,
                                         std::optional<Timestamp> as_of = std::nullopt) const;
  Decision current_decision(std::string_view user_id, std::string_view pair_id,
                            std::optional<Timestamp> as_of = std::nullopt) const;
  // Latest decision ordered strictly before the event with sequence_no.
  std::optional<CurrentDecision> before(std::string_view user_id, std::string_view pair_id,
                                        std::uint64_t sequence_no) const;

  DecisionState state(std::optional<Timestamp> as_of = std::nullopt) const;
  std::optional<Timestamp> latest_timestamp() const;

  // Newline-delimited JSON, one event per line.
  std::string to_ndjson() const;
  // Rejects gaps or reordering in sequence numbers (ParseError).
  static RevisionLog from_ndjson(std::string_view text);

 private:
  static bool later(const DecisionEvent& a, const DecisionEvent& b);

  mutable std::shared_mutex mutex_;
  std::vector<DecisionEvent> events_;
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> index_;
};

struct TaskSettings {
  bool trust_enabled = true;
  bool prefill_enabled = true;
  bool one_to_one = true;

  friend bool operator==(const TaskSettings&, const TaskSettings&) = default;
};

// An annotation task: one matcher against one dataset.
struct TaskDefinition {
  std::string id;
  std::string matcher_id;
  std::string dataset_id;
  std::vector<AnnotationPair> pairs;
  TaskSettings settings;

  const AnnotationPair* find_pair(std::string_view pair_id) const;
  std::size_t seed_count() const;
};

enum class PairStatus { Accepted, Rejected, Undecided };
const char* to_string(PairStatus s);

struct PairOutcome {
  PairStatus status = PairStatus::Undecided;
  AgreementScore score;

  friend bool operator==(const PairOutcome&, const PairOutcome&) = default;
};

struct TaskSnapshot {
  std::string task_id;
  std::optional<Timestamp> as_of;
  double threshold = 0.5;
  bool weighted = false;
  std::map<std::string, TrustProfile> trust;  // by user, only when weighting applies
  std::map<std::string, PairOutcome> pairs;   // non-seed pairs only

  // Stable serialization; identical event prefixes give identical bytes.
  nlohmann::json to_json() const;
};

struct TrustChange {
  std::string user_id;
  std::optional<double> old_tau;
  std::optional<double> new_tau;
};

struct ScoreChange {
  std::string pair_id;
  PairOutcome old_outcome;
  PairOutcome new_outcome;
};

struct PrefillChange {
  std::string task_id;
  std::string user_id;
  PreFill prefill;
};

struct ChangeSet {
  std::vector<TrustChange> recomputed_trust;
  std::vector<ScoreChange> recomputed_scores;
  std::vector<PrefillChange> prefills_added;
  std::vector<PrefillChange> prefills_retracted;

  bool empty() const {
    return recomputed_trust.empty() && recomputed_scores.empty() && prefills_added.empty() &&
           prefills_retracted.empty();
  }
  nlohmann::json to_json() const;
};

// Decision history of one task plus the trust/agreement state derived from
// it. Appends are single-writer; snapshots can be taken concurrently.
class TaskLedger {
 public:
  explicit TaskLedger(TaskDefinition definition, double threshold = 0.5, bool open = true);

  const TaskDefinition& definition() const { return definition_; }
  const RevisionLog& log() const { return log_; }

  void set_threshold(double threshold);
  double threshold() const;
  void set_open(bool open);
  bool open() const;

  // Throws NotFound for an unknown pair, TaskClosed when closed.
  DecisionEvent record_decision(const std::string& user_id, const std::string& pair_id, Decision value,
                                Origin origin, Timestamp now);
  // Appends without the open/closed check; used when replaying persisted
  // history and for retracting pre-fills after a task closes.
  DecisionEvent append_unchecked(const std::string& user_id, const std::string& pair_id,
                                 Decision value, Origin origin, Timestamp now);

  Decision current_decision(std::string_view user_id, std::string_view pair_id,
                            std::optional<Timestamp> as_of = std::nullopt) const;

  // Brings the live state up to `event` and reports what moved: a seed
  // answer cascades through the user's τ into every pair they voted on; a
  // non-seed answer rescores that pair (and all of the user's pairs if it
  // toggles their completion). Empty for a no-op revision.
  ChangeSet recompute_after_revision(const DecisionEvent& event);

  // Full recomputation from the events at or before as_of.
  TaskSnapshot decision_snapshot(std::optional<Timestamp> as_of = std::nullopt,
                                 std::optional<bool> weighted_override = std::nullopt) const;

  // Snapshot maintained incrementally by recompute_after_revision.
  TaskSnapshot live_snapshot() const;

  bool weighted() const;

 private:
  TaskSnapshot compute(const DecisionState& state, std::optional<Timestamp> as_of, bool weighted) const;
  std::optional<TrustProfile> profile_for(const std::string& user,
                                          const std::map<std::string, CurrentDecision>* decisions) const;
  PairOutcome outcome_for(const AnnotationPair& pair, const DecisionState& state,
                          const std::map<std::string, TrustProfile>& trust, bool weighted) const;
  void rebuild_live_locked(std::uint64_t through_sequence);

  TaskDefinition definition_;
  RevisionLog log_;
  mutable std::shared_mutex mutex_;
  double threshold_;
  bool open_;

  // Live state incorporating events with sequence_no <= live_sequence_.
  std::uint64_t live_sequence_ = 0;
  DecisionState live_state_;
  TaskSnapshot live_;
};

}  // namespace crowdval
