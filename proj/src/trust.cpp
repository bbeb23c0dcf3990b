#include "crowdval/trust.hpp"

#include "crowdval/error.hpp"

namespace crowdval {

TrustProfile trustworthiness(std::string_view user_id, std::string_view task_id,
                             std::span<const AnnotationPair> pairs, const DecisionMap& decisions) {
  TrustProfile profile{std::string(user_id), std::string(task_id), 0, 0, std::nullopt, true};
  for (const auto& pair : pairs) {
    auto it = decisions.find(pair.id);
    Decision d = it == decisions.end() ? Decision::NA : it->second;
    if (d == Decision::NA) profile.complete = false;
    if (!pair.is_seed()) continue;
    ++profile.m;
    if (d == pair.seed->gold_answer) ++profile.n;
  }
  if (profile.m == 0) {
    throw Error(ErrorCode::TrustUnavailable,
                "task '" + std::string(task_id) + "' has no seed pairs; trust weighting is unavailable");
  }
  if (profile.complete) {
    profile.tau = static_cast<double>(profile.n) / static_cast<double>(profile.m);
  }
  return profile;
}

AgreementScore agreement_score(std::string_view pair_id, std::span<const Vote> votes) {
  if (votes.empty()) {
    throw Error(ErrorCode::NoVotes, "pair '" + std::string(pair_id) + "' has no votes");
  }
  AgreementScore score;
  score.pair_id = std::string(pair_id);
  score.n_users = votes.size();
  double weighted = 0.0, total = 0.0;
  for (const auto& v : votes) {
    if (v.decision == Decision::NA) {
      throw Error(ErrorCode::BadRequest, "NA decisions are not votes");
    }
    if (!(v.tau >= 0.0 && v.tau <= 1.0)) {
      throw Error(ErrorCode::BadRequest, "trustworthiness outside [0,1]");
    }
    total += v.tau;
    if (v.decision == Decision::Equivalent) {
      weighted += v.tau;
      ++score.equivalent_votes;
    }
  }
  score.raw_score = weighted / static_cast<double>(score.n_users);
  score.normalized_share = total > 0.0 ? weighted / total : 0.0;
  return score;
}

bool accept(const AgreementScore& score, double threshold, bool weighted) {
  if (score.n_users == 0) return false;
  // W carries rounding from the τ sums; a share within this distance of θ
  // is a tie and ties are rejected.
  constexpr double tie = 1e-12;
  if (weighted) return score.normalized_share > threshold + tie;
  return static_cast<double>(score.equivalent_votes) / static_cast<double>(score.n_users) > threshold;
}

bool unweighted_majority(std::string_view pair_id, std::span<const Decision> votes, double threshold) {
  std::vector<Vote> as_votes;
  as_votes.reserve(votes.size());
  for (Decision d : votes) as_votes.push_back({1.0, d});
  return accept(agreement_score(pair_id, as_votes), threshold, false);
}

}  // namespace crowdval
