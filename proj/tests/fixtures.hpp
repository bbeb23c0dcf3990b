#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdval/revision.hpp"
#include "crowdval/rng.hpp"
#include "crowdval/service.hpp"

namespace fixtures {

using nlohmann::json;

// Two small conference ontologies in canonical JSON.
//   cmt:  Document > Paper > {AcceptedPaper, RejectedPaper}, Person > {Author, Reviewer},
//         Disjoint(Person, Document), Disjoint(AcceptedPaper, RejectedPaper)
//   conf: Contribution > {Paper, Poster}, Person > {Contributor, Reviewer}, Chair
std::string cmt_ontology();
std::string conf_ontology();
std::string reference_alignment();  // 5 cells
std::string matcher_alignment();    // 3 agreeing cells, 2 extras, 2 missing

// Random task definition: `pairs` non-seed pairs and `seeds` seed pairs.
crowdval::TaskDefinition random_task(crowdval::Rng& rng, std::size_t pairs, std::size_t seeds,
                                     bool trust_enabled = true);

struct RandomEvent {
  std::string user;
  std::string pair;
  crowdval::Decision value;
  crowdval::Origin origin;
  crowdval::Timestamp at;
};
// Timestamps wander (sometimes backwards, sometimes repeated) so ordering by
// (timestamp, sequence) matters.
std::vector<RandomEvent> random_events(crowdval::Rng& rng, const crowdval::TaskDefinition& def,
                                       std::size_t count, std::size_t users);

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// A service with an admin, a developer with a registered matcher, two
// consenting annotators, the "conference" domain and one open dataset.
struct World {
  std::unique_ptr<crowdval::Service> service;
  std::string admin, developer, annotator, annotator2, outsider;  // tokens
  std::string admin_id, developer_id, annotator_id, annotator2_id, outsider_id;
  std::string domain_id, dataset_id, matcher_id, task_id;

  static World build(crowdval::ServiceConfig config = {}, json task_settings = json::object(),
                     bool submit = true);

  json call(const std::string& method, const std::string& path, const std::optional<std::string>& token,
            const json& body = nullptr, int expect = 0);
};

// One row of the role x endpoint matrix: who calls what, and the status
// the service must answer with.
struct AuthCase {
  std::string label;
  std::optional<std::string> token;
  std::string method;
  std::string path;
  json body;
  int expect;
};
std::vector<AuthCase> authorization_matrix(World& w);

crowdval::ServiceConfig fixed_clock_config(std::optional<std::filesystem::path> dir = std::nullopt);

}  // namespace fixtures
