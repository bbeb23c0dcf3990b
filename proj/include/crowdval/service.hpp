#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdval/coherence.hpp"
#include "crowdval/error.hpp"
#include "crowdval/ontology.hpp"
#include "crowdval/revision.hpp"
#include "crowdval/seeds.hpp"

namespace crowdval {

enum class Role { Administrator, Developer, Annotator };
const char* to_string(Role r);
Role role_from_string(std::string_view text);

struct User {
  std::string id;
  std::string display_name;
  std::set<Role> roles;
  bool consent = false;
  std::string token;

  bool has(Role r) const { return roles.count(r) > 0; }
};

struct Matcher {
  std::string id;
  std::string name;
  std::string description;
  std::vector<std::string> developer_ids;
};

enum class TaskStatus { Active, Complete };
const char* to_string(TaskStatus s);

struct ServiceConfig {
  std::optional<std::filesystem::path> data_dir;  // in-memory only when absent
  std::uint64_t seed = 42;
  std::function<Timestamp()> clock;               // system clock when empty
};

// Reads CROWDVAL_DATA_DIR and CROWDVAL_SEED.
ServiceConfig config_from_env();

int http_status(ErrorCode code);
nlohmann::json error_body(const Error& e);

struct Request {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::optional<std::string> token;  // bearer token
  std::string body;
};

struct Response {
  int status = 200;
  nlohmann::json body;
};

// The platform: users, domains, datasets, matchers and annotation tasks.
// Every method authenticates the bearer token first (Unauthorized), then
// checks roles (Forbidden). Writes are serialized; reads share a lock.
class Service {
 public:
  explicit Service(ServiceConfig config = {});
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // The first registered user may claim any role; afterwards only an
  // administrator may create administrators.
  nlohmann::json create_user(const std::optional<std::string>& token, const nlohmann::json& body);
  nlohmann::json set_consent(const std::optional<std::string>& token, const std::string& user_id,
                             const nlohmann::json& body);
  nlohmann::json get_user(const std::optional<std::string>& token, const std::string& user_id) const;

  nlohmann::json create_domain(const std::optional<std::string>& token, const nlohmann::json& body);
  nlohmann::json update_domain(const std::optional<std::string>& token, const std::string& domain_id,
                               const nlohmann::json& body);

  // body: domain_id, name, ontology_a/ontology_b {content, format},
  // reference {content, format}
  nlohmann::json upload_dataset(const std::optional<std::string>& token, const nlohmann::json& body);
  // body: threshold in [0.5, 1], status open|closed
  nlohmann::json configure_dataset(const std::optional<std::string>& token, const std::string& dataset_id,
                                   const nlohmann::json& body);

  nlohmann::json register_matcher(const std::optional<std::string>& token, const nlohmann::json& body);
  // body: dataset_id, alignment {content, format}, settings {trust_enabled,
  // prefill_enabled, one_to_one}
  nlohmann::json submit_alignment(const std::optional<std::string>& token, const std::string& matcher_id,
                                  const nlohmann::json& body);

  nlohmann::json list_tasks(const std::optional<std::string>& token) const;
  nlohmann::json get_task(const std::optional<std::string>& token, const std::string& task_id) const;
  // view: "annotator" or "developer"; chosen from the caller's roles when absent.
  nlohmann::json fetch_pairs(const std::optional<std::string>& token, const std::string& task_id,
                             const std::optional<std::string>& view = std::nullopt) const;
  nlohmann::json submit_decision(const std::optional<std::string>& token, const std::string& task_id,
                                 const std::string& pair_id, const nlohmann::json& body);
  nlohmann::json task_results(const std::optional<std::string>& token, const std::string& task_id,
                              const std::optional<std::string>& as_of = std::nullopt) const;

  // Routes one HTTP request; errors become {"error", "detail"} bodies.
  Response handle(const Request& request);

  // Full ChangeSet of the most recent decision (tests and admin tooling).
  const ChangeSet& last_changes() const { return last_changes_; }

 private:
  struct DomainRecord {
    DomainGroup group;
    std::map<std::string, std::shared_ptr<const Ontology>> ontologies;
  };
  struct DatasetRecord {
    Dataset dataset;
  };
  struct TaskRecord {
    TaskDefinition definition;
    TaskStatus status = TaskStatus::Active;
    std::unique_ptr<TaskLedger> ledger;
    nlohmann::json seed_report;  // developer-facing summary of seed generation
    // user -> pair -> pre-fill behind the user's current prefill event
    std::map<std::string, std::map<std::string, PreFill>> prefills;
    std::map<std::string, std::vector<ConflictFinding>> conflicts;  // by user
  };

  const User& authenticate(const std::optional<std::string>& token) const;
  void require(const User& user, Role role) const;
  const Matcher& matcher_at(const std::string& id) const;
  const DatasetRecord& dataset_at(const std::string& id) const;
  const TaskRecord& task_at(const std::string& id) const;
  TaskRecord& task_at(const std::string& id);
  bool is_developer_of(const User& user, const Matcher& matcher) const;
  bool may_annotate(const User& user, const TaskRecord& task) const;
  bool task_open(const TaskRecord& task) const;
  void sync_open_state();

  nlohmann::json user_json(const User& user, bool with_token) const;
  nlohmann::json dataset_json(const DatasetRecord& record) const;
  nlohmann::json task_summary(const TaskRecord& task, bool developer) const;
  nlohmann::json entity_view(const Ontology& ontology, const std::string& iri) const;

  // Re-runs coherence inference for one user across the domain and appends
  // prefill events for every change. Returns the added/retracted pre-fills.
  void refresh_prefills(const std::string& user_id, const std::string& domain_id, Timestamp now,
                        bool append, ChangeSet& changes);

  Timestamp now();
  std::string next_id(const std::string& kind);

  void load();
  void save_catalog() const;
  void persist_event(const std::string& task_id, const DecisionEvent& event) const;
  nlohmann::json catalog_json() const;

  ServiceConfig config_;
  mutable std::shared_mutex mutex_;
  Timestamp last_time_ = 0;
  std::map<std::string, std::uint64_t> counters_;
  std::map<std::string, User> users_;
  std::map<std::string, std::string> tokens_;
  std::map<std::string, DomainRecord> domains_;
  std::map<std::string, DatasetRecord> datasets_;
  std::map<std::string, Matcher> matchers_;
  std::map<std::string, TaskRecord> tasks_;
  std::map<std::pair<std::string, std::string>, std::string> submissions_;  // (matcher, dataset) -> task
  ChangeSet last_changes_;
};

}  // namespace crowdval
