#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crowdval/seeds.hpp"
#include "crowdval/types.hpp"

namespace crowdval {

struct TrustProfile {
  std::string user_id;
  std::string task_id;
  std::size_t m = 0;  // seed pairs in the task
  std::size_t n = 0;  // seeds answered with the gold answer
  std::optional<double> tau;  // n / m, only once complete
  bool complete = false;

  friend bool operator==(const TrustProfile&, const TrustProfile&) = default;
};

// pair id -> the user's current decision; missing entries are NA.
using DecisionMap = std::map<std::string, Decision, std::less<>>;

// complete iff every pair of the task has a non-NA decision. Throws
// TrustUnavailable when the task has no seeds.
TrustProfile trustworthiness(std::string_view user_id, std::string_view task_id,
                             std::span<const AnnotationPair> pairs, const DecisionMap& decisions);

struct Vote {
  double tau = 1.0;
  Decision decision = Decision::Equivalent;  // never NA
};

struct AgreementScore {
  std::string pair_id;
  std::size_t n_users = 0;          // N
  std::size_t equivalent_votes = 0;
  double raw_score = 0.0;           // S = (1/N) Σ τ·a
  double normalized_share = 0.0;    // W = Σ τ·a / Σ τ (0 when Σ τ = 0)
  bool accepted = false;

  friend bool operator==(const AgreementScore&, const AgreementScore&) = default;
};

// a(u,q) = 1 iff the vote is Equivalent. Throws NoVotes on an empty list and
// BadRequest on an NA vote or a τ outside [0,1].
AgreementScore agreement_score(std::string_view pair_id, std::span<const Vote> votes);

// Strict: weighted compares W > θ, unweighted compares the Equivalent share > θ.
bool accept(const AgreementScore& score, double threshold, bool weighted);

// Plain majority vote, the baseline without trust weighting.
bool unweighted_majority(std::string_view pair_id, std::span<const Decision> votes, double threshold);

}  // namespace crowdval
