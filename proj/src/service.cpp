#include "crowdval/service.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "crowdval/diff.hpp"
#include "crowdval/ontology_io.hpp"
#include "crowdval/rng.hpp"

namespace crowdval {

using nlohmann::json;
namespace fs = std::filesystem;

const char* to_string(Role r) {
  switch (r) {
    case Role::Administrator: return "administrator";
    case Role::Developer: return "developer";
    case Role::Annotator: return "annotator";
  }
  return "annotator";
}

Role role_from_string(std::string_view text) {
  if (text == "administrator" || text == "admin") return Role::Administrator;
  if (text == "developer") return Role::Developer;
  if (text == "annotator") return Role::Annotator;
  throw Error(ErrorCode::BadRequest, "unknown role '" + std::string(text) + "'");
}

const char* to_string(TaskStatus s) { return s == TaskStatus::Active ? "active" : "complete"; }

ServiceConfig config_from_env() {
  ServiceConfig cfg;
  if (const char* dir = std::getenv("CROWDVAL_DATA_DIR"); dir && *dir) cfg.data_dir = fs::path(dir);
  if (const char* seed = std::getenv("CROWDVAL_SEED"); seed && *seed) cfg.seed = std::stoull(seed);
  return cfg;
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError:
    case ErrorCode::BadRequest: return 400;
    case ErrorCode::Unauthorized: return 401;
    case ErrorCode::Forbidden: return 403;
    case ErrorCode::NotFound: return 404;
    case ErrorCode::Conflict:
    case ErrorCode::TaskClosed: return 409;
    case ErrorCode::IoError: return 500;
    default: return 422;
  }
}

json error_body(const Error& e) { return json{{"error", to_string(e.code())}, {"detail", e.what()}}; }

namespace {

std::string random_token() {
  std::random_device rd;
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (int i = 0; i < 4; ++i) {
    std::uint32_t word = rd();
    for (int k = 0; k < 8; ++k) {
      out += hex[word & 0xF];
      word >>= 4;
    }
  }
  return out;
}

const json& field(const json& body, const char* name) {
  if (!body.is_object() || !body.contains(name)) {
    throw Error(ErrorCode::BadRequest, std::string("missing field '") + name + "'");
  }
  return body.at(name);
}

std::string string_field(const json& body, const char* name) {
  const json& v = field(body, name);
  if (!v.is_string()) throw Error(ErrorCode::BadRequest, std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

bool bool_field(const json& body, const char* name, bool fallback) {
  if (!body.is_object() || !body.contains(name)) return fallback;
  const json& v = body.at(name);
  if (!v.is_boolean()) throw Error(ErrorCode::BadRequest, std::string("field '") + name + "' must be a boolean");
  return v.get<bool>();
}

// {content, format} upload object.
std::pair<std::string, std::string> file_field(const json& body, const char* name) {
  if (!body.is_object() || !body.contains(name) || !body.at(name).is_object()) {
    throw Error(ErrorCode::BadRequest, std::string("missing file '") + name + "'");
  }
  const json& f = body.at(name);
  return {string_field(f, "content"), f.contains("format") ? string_field(f, "format") : std::string("json")};
}

Alignment read_alignment(const std::pair<std::string, std::string>& file, const Ontology& a, const Ontology& b) {
  AlignmentFormat format = alignment_format_from_string(file.second);
  AlignmentParseOptions options;
  if (format == AlignmentFormat::OaeiRdf) {
    options.source_ontology_id = a.id();
    options.target_ontology_id = b.id();
  }
  return parse_alignment(file.first, format, options);
}

json seed_json(const SeedPair& s) {
  return json{{"polarity", to_string(s.polarity)},
              {"difficulty", to_string(s.difficulty)},
              {"gold_answer", to_string(s.gold_answer)},
              {"provenance", to_string(s.provenance)}};
}

SeedPair seed_from_json(const AnnotationPair& p, const json& j) {
  SeedPair s;
  s.source = p.source;
  s.target = p.target;
  s.polarity = j.at("polarity") == "positive" ? Polarity::Positive : Polarity::Negative;
  s.difficulty = j.at("difficulty") == "trivial" ? Difficulty::Trivial : Difficulty::NonTrivial;
  s.gold_answer = decision_from_string(j.at("gold_answer").get<std::string>());
  const std::string prov = j.at("provenance").get<std::string>();
  s.provenance = prov == "from-non-disputed"        ? SeedProvenance::FromNonDisputed
                 : prov == "one-to-one-permutation" ? SeedProvenance::OneToOnePermutation
                                                    : SeedProvenance::CoherenceFailure;
  return s;
}

json prefill_json(const PreFill& p) {
  return json{{"value", to_string(p.value)}, {"rule", to_string(p.rule)}, {"explanation", p.explanation}};
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::string part;
  std::istringstream in(path);
  while (std::getline(in, part, '/')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

}  // namespace

// ------------------------------------------------------------------ plumbing

Service::Service(ServiceConfig config) : config_(std::move(config)) {
  if (config_.data_dir) load();
}

Service::~Service() = default;

Timestamp Service::now() {
  Timestamp t;
  if (config_.clock) {
    t = config_.clock();
  } else {
    using namespace std::chrono;
    t = duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
  }
  if (t < last_time_) t = last_time_;
  last_time_ = t;
  return t;
}

std::string Service::next_id(const std::string& kind) { return kind + "-" + std::to_string(++counters_[kind]); }

const User& Service::authenticate(const std::optional<std::string>& token) const {
  if (!token) throw Error(ErrorCode::Unauthorized, "missing bearer token");
  auto it = tokens_.find(*token);
  if (it == tokens_.end()) throw Error(ErrorCode::Unauthorized, "invalid bearer token");
  return users_.at(it->second);
}

void Service::require(const User& user, Role role) const {
  if (!user.has(role)) {
    throw Error(ErrorCode::Forbidden, "user '" + user.id + "' lacks the " + to_string(role) + " role");
  }
}

const Matcher& Service::matcher_at(const std::string& id) const {
  auto it = matchers_.find(id);
  if (it == matchers_.end()) throw Error(ErrorCode::NotFound, "no matcher '" + id + "'");
  return it->second;
}

const Service::DatasetRecord& Service::dataset_at(const std::string& id) const {
  auto it = datasets_.find(id);
  if (it == datasets_.end()) throw Error(ErrorCode::NotFound, "no dataset '" + id + "'");
  return it->second;
}

const Service::TaskRecord& Service::task_at(const std::string& id) const {
  auto it = tasks_.find(id);
  if (it == tasks_.end()) throw Error(ErrorCode::NotFound, "no task '" + id + "'");
  return it->second;
}

Service::TaskRecord& Service::task_at(const std::string& id) {
  auto it = tasks_.find(id);
  if (it == tasks_.end()) throw Error(ErrorCode::NotFound, "no task '" + id + "'");
  return it->second;
}

bool Service::is_developer_of(const User& user, const Matcher& matcher) const {
  return std::find(matcher.developer_ids.begin(), matcher.developer_ids.end(), user.id) !=
         matcher.developer_ids.end();
}

bool Service::may_annotate(const User& user, const TaskRecord& task) const {
  return user.has(Role::Annotator) && user.consent &&
         !is_developer_of(user, matcher_at(task.definition.matcher_id));
}

bool Service::task_open(const TaskRecord& task) const {
  const auto& ds = dataset_at(task.definition.dataset_id).dataset;
  return ds.status == OpenStatus::Open && domains_.at(ds.domain_id).group.status == OpenStatus::Open;
}

void Service::sync_open_state() {
  for (auto& [id, task] : tasks_) {
    task.ledger->set_open(task_open(task));
    task.ledger->set_threshold(dataset_at(task.definition.dataset_id).dataset.confidence_threshold);
  }
}

json Service::user_json(const User& user, bool with_token) const {
  json roles = json::array();
  for (Role r : user.roles) roles.push_back(to_string(r));
  json j{{"id", user.id}, {"display_name", user.display_name}, {"roles", roles}, {"consent", user.consent}};
  if (with_token) j["token"] = user.token;
  return j;
}

json Service::dataset_json(const DatasetRecord& record) const {
  const Dataset& d = record.dataset;
  return json{{"id", d.id},
              {"name", d.name},
              {"domain_id", d.domain_id},
              {"ontology_a", d.ontology_a.id()},
              {"ontology_b", d.ontology_b.id()},
              {"reference_size", d.reference.size()},
              {"status", to_string(d.status)},
              {"threshold", d.confidence_threshold}};
}

json Service::task_summary(const TaskRecord& task, bool developer) const {
  const auto& def = task.definition;
  const auto& ds = dataset_at(def.dataset_id).dataset;
  std::size_t visible = def.pairs.size();
  json j{{"id", def.id},
         {"matcher_id", def.matcher_id},
         {"dataset_id", def.dataset_id},
         {"dataset_name", ds.name},
         {"domain_id", ds.domain_id},
         {"status", to_string(task.status)},
         {"open", task_open(task)},
         {"pair_count", visible}};
  if (developer) {
    j["settings"] = {{"trust_enabled", def.settings.trust_enabled},
                     {"prefill_enabled", def.settings.prefill_enabled},
                     {"one_to_one", def.settings.one_to_one}};
    j["seed_report"] = task.seed_report;
    j["threshold"] = ds.confidence_threshold;
  }
  return j;
}

json Service::entity_view(const Ontology& ontology, const std::string& iri) const {
  const EntityRef& e = ontology.at(iri);
  auto walk = [&](bool up) {
    json out = json::array();
    std::set<std::string> seen{iri};
    std::vector<std::string> frontier{iri};
    for (int depth = 1; depth <= 2; ++depth) {
      std::vector<std::string> next;
      for (const auto& x : frontier) {
        for (const auto& y : up ? ontology.direct_parents(x) : ontology.direct_children(x)) {
          if (!seen.insert(y).second) continue;
          out.push_back({{"iri", y}, {"local_name", local_name_of(y)}, {"depth", depth}});
          next.push_back(y);
        }
      }
      frontier = std::move(next);
    }
    return out;
  };
  json axioms = json::array();
  for (const auto& p : ontology.direct_parents(iri)) {
    axioms.push_back("SubClassOf(" + e.local_name + ", " + local_name_of(p) + ")");
  }
  for (const auto& d : ontology.disjoint_with(iri)) {
    axioms.push_back("DisjointWith(" + e.local_name + ", " + local_name_of(d) + ")");
  }
  return json{{"iri", e.iri},
              {"ontology_id", ontology.id()},
              {"local_name", e.local_name},
              {"labels", e.labels},
              {"description", e.description ? json(*e.description) : json(nullptr)},
              {"ancestors", walk(true)},
              {"descendants", walk(false)},
              {"axioms", axioms}};
}

// --------------------------------------------------------------------- users

json Service::create_user(const std::optional<std::string>& token, const json& body) {
  std::unique_lock lock(mutex_);
  std::string name = string_field(body, "display_name");
  std::set<Role> roles;
  if (body.contains("roles")) {
    if (!body.at("roles").is_array()) throw Error(ErrorCode::BadRequest, "roles must be an array");
    for (const auto& r : body.at("roles")) roles.insert(role_from_string(r.get<std::string>()));
  } else {
    roles.insert(Role::Annotator);
  }
  if (roles.count(Role::Administrator) && !users_.empty()) {
    require(authenticate(token), Role::Administrator);
  }
  User user{next_id("user"), name, roles, false, random_token()};
  tokens_[user.token] = user.id;
  users_[user.id] = user;
  save_catalog();
  return user_json(user, true);
}

json Service::set_consent(const std::optional<std::string>& token, const std::string& user_id, const json& body) {
  std::unique_lock lock(mutex_);
  const User& caller = authenticate(token);
  auto it = users_.find(user_id);
  if (it == users_.end()) throw Error(ErrorCode::NotFound, "no user '" + user_id + "'");
  if (caller.id != user_id) throw Error(ErrorCode::Forbidden, "consent can only be given by the user");
  it->second.consent = bool_field(body, "consent", true);
  save_catalog();
  return user_json(it->second, false);
}

json Service::get_user(const std::optional<std::string>& token, const std::string& user_id) const {
  std::shared_lock lock(mutex_);
  require(authenticate(token), Role::Administrator);
  auto it = users_.find(user_id);
  if (it == users_.end()) throw Error(ErrorCode::NotFound, "no user '" + user_id + "'");
  json j = user_json(it->second, false);
  json tasks = json::object();
  for (const auto& [id, task] : tasks_) {
    auto state = task.ledger->log().state();
    auto mine = state.find(user_id);
    if (mine == state.end()) continue;
    json decisions = json::object();
    for (const auto& [pid, c] : mine->second) {
      decisions[pid] = {{"value", to_string(c.value)}, {"origin", to_string(c.origin)}};
    }
    json entry{{"decisions", decisions}};
    auto snap = task.ledger->live_snapshot();
    if (auto t = snap.trust.find(user_id); t != snap.trust.end()) {
      entry["trust"] = {{"m", t->second.m},
                        {"n", t->second.n},
                        {"complete", t->second.complete},
                        {"tau", t->second.tau ? json(*t->second.tau) : json(nullptr)}};
    }
    tasks[id] = std::move(entry);
  }
  j["tasks"] = std::move(tasks);
  return j;
}

// ------------------------------------------------------------ admin catalog

json Service::create_domain(const std::optional<std::string>& token, const json& body) {
  std::unique_lock lock(mutex_);
  require(authenticate(token), Role::Administrator);
  std::string name = string_field(body, "name");
  if (name.empty()) throw Error(ErrorCode::BadRequest, "domain name is empty");
  for (const auto& [id, d] : domains_) {
    if (d.group.name == name) throw Error(ErrorCode::Conflict, "domain '" + name + "' already exists");
  }
  DomainRecord record;
  record.group.id = next_id("domain");
  record.group.name = name;
  record.group.status = body.contains("status") ? open_status_from_string(string_field(body, "status"))
                                                : OpenStatus::Open;
  json out{{"id", record.group.id}, {"name", name}, {"status", to_string(record.group.status)},
           {"dataset_ids", json::array()}};
  domains_[record.group.id] = std::move(record);
  save_catalog();
  return out;
}

json Service::update_domain(const std::optional<std::string>& token, const std::string& domain_id,
                            const json& body) {
  std::unique_lock lock(mutex_);
  require(authenticate(token), Role::Administrator);
  auto it = domains_.find(domain_id);
  if (it == domains_.end()) throw Error(ErrorCode::NotFound, "no domain '" + domain_id + "'");
  auto& group = it->second.group;
  if (body.contains("status")) group.status = open_status_from_string(string_field(body, "status"));
  sync_open_state();
  save_catalog();
  return json{{"id", group.id}, {"name", group.name}, {"status", to_string(group.status)},
              {"dataset_ids", group.dataset_ids}};
}

json Service::upload_dataset(const std::optional<std::string>& token, const json& body) {
  std::unique_lock lock(mutex_);
  require(authenticate(token), Role::Administrator);
  std::string domain_id = string_field(body, "domain_id");
  auto dom = domains_.find(domain_id);
  if (dom == domains_.end()) throw Error(ErrorCode::NotFound, "no domain '" + domain_id + "'");
  std::string name = string_field(body, "name");
  auto file_a = file_field(body, "ontology_a");
  auto file_b = file_field(body, "ontology_b");
  auto file_r = file_field(body, "reference");

  Ontology a = parse_ontology(file_a.first, ontology_format_from_string(file_a.second));
  Ontology b = parse_ontology(file_b.first, ontology_format_from_string(file_b.second));
  if (a.id() == b.id()) throw Error(ErrorCode::ValidationError, "both ontologies have id '" + a.id() + "'");
  Alignment reference = read_alignment(file_r, a, b);
  resolve_alignment(reference, a, b);

  for (const auto& did : dom->second.group.dataset_ids) {
    if (datasets_.at(did).dataset.name == name) {
      throw Error(ErrorCode::Conflict, "dataset '" + name + "' already exists in the domain");
    }
  }
  for (const Ontology* o : {&a, &b}) {
    auto known = dom->second.ontologies.find(o->id());
    if (known != dom->second.ontologies.end() && !(*known->second == *o)) {
      throw Error(ErrorCode::Conflict, "ontology '" + o->id() + "' differs from the domain's copy");
    }
  }

  DatasetRecord record;
  record.dataset.id = next_id("dataset");
  record.dataset.name = name;
  record.dataset.domain_id = domain_id;
  record.dataset.ontology_a = std::move(a);
  record.dataset.ontology_b = std::move(b);
  record.dataset.reference = std::move(reference);
  for (const Ontology* o : {&record.dataset.ontology_a, &record.dataset.ontology_b}) {
    dom->second.ontologies.emplace(o->id(), std::make_shared<const Ontology>(*o));
  }
  dom->second.group.dataset_ids.push_back(record.dataset.id);
  std::string id = record.dataset.id;
  datasets_[id] = std::move(record);
  save_catalog();
  return dataset_json(datasets_.at(id));
}

json Service::configure_dataset(const std::optional<std::string>& token, const std::string& dataset_id,
                                const json& body) {
  std::unique_lock lock(mutex_);
  require(authenticate(token), Role::Administrator);
  auto it = datasets_.find(dataset_id);
  if (it == datasets_.end()) throw Error(ErrorCode::NotFound, "no dataset '" + dataset_id + "'");
  Dataset& d = it->second.dataset;
  std::optional<double> theta;
  if (body.contains("threshold")) {
    if (!body.at("threshold").is_number()) throw Error(ErrorCode::BadRequest, "threshold must be a number");
    theta = body.at("threshold").get<double>();
    if (!valid_threshold(*theta)) throw Error(ErrorCode::BadRequest, "threshold must lie in [0.5, 1.0]");
  }
  std::optional<OpenStatus> status;
  if (body.contains("status")) status = open_status_from_string(string_field(body, "status"));
  if (theta) d.confidence_threshold = *theta;
  if (status) d.status = *status;
  sync_open_state();
  save_catalog();
  return dataset_json(it->second);
}

// ------------------------------------------------------------------ matchers

json Service::register_matcher(const std::optional<std::string>& token, const json& body) {
  std::unique_lock lock(mutex_);
  const User& caller = authenticate(token);
  require(caller, Role::Developer);
  Matcher m;
  m.name = string_field(body, "name");
  m.description = body.contains("description") ? string_field(body, "description") : std::string();
  if (m.name.empty()) throw Error(ErrorCode::ValidationError, "matcher name is empty");
  if (m.description.empty()) throw Error(ErrorCode::ValidationError, "matcher description is empty");
  if (body.contains("developer_ids")) {
    for (const auto& d : body.at("developer_ids")) {
      std::string id = d.get<std::string>();
      auto u = users_.find(id);
      if (u == users_.end() || !u->second.has(Role::Developer)) {
        throw Error(ErrorCode::ValidationError, "'" + id + "' is not a registered developer");
      }
      if (std::find(m.developer_ids.begin(), m.developer_ids.end(), id) == m.developer_ids.end()) {
        m.developer_ids.push_back(id);
      }
    }
  }
  if (std::find(m.developer_ids.begin(), m.developer_ids.end(), caller.id) == m.developer_ids.end()) {
    m.developer_ids.insert(m.developer_ids.begin(), caller.id);
  }
  m.id = next_id("matcher");
  matchers_[m.id] = m;
  save_catalog();
  return json{{"id", m.id}, {"name", m.name}, {"description", m.description}, {"developer_ids", m.developer_ids}};
}

json Service::submit_alignment(const std::optional<std::string>& token, const std::string& matcher_id,
                               const json& body) {
  std::unique_lock lock(mutex_);
  const User& caller = authenticate(token);
  const Matcher& matcher = matcher_at(matcher_id);
  if (!is_developer_of(caller, matcher)) {
    throw Error(ErrorCode::Forbidden, "only the matcher's developers may submit alignments");
  }
  std::string dataset_id = string_field(body, "dataset_id");
  const Dataset& ds = dataset_at(dataset_id).dataset;
  TaskSettings settings;
  if (body.contains("settings")) {
    const json& s = body.at("settings");
    settings.trust_enabled = bool_field(s, "trust_enabled", true);
    settings.prefill_enabled = bool_field(s, "prefill_enabled", true);
    settings.one_to_one = bool_field(s, "one_to_one", true);
  }
  Alignment alignment = read_alignment(file_field(body, "alignment"), ds.ontology_a, ds.ontology_b);
  resolve_alignment(alignment, ds.ontology_a, ds.ontology_b);
  MappingPartition partition = partition_mappings(ds.reference, alignment);

  std::string task_id;
  auto prior = submissions_.find({matcher_id, dataset_id});
  if (prior != submissions_.end()) {
    if (task_at(prior->second).ledger->log().size() > 0) {
      throw Error(ErrorCode::Conflict, "task '" + prior->second + "' already has decisions");
    }
    task_id = prior->second;
  } else {
    task_id = next_id("task");
  }

  TaskRecord record;
  record.definition.id = task_id;
  record.definition.matcher_id = matcher_id;
  record.definition.dataset_id = dataset_id;
  record.definition.settings = settings;
  auto disputed = disputed_pairs(partition);
  std::uint64_t base = derive_seed(config_.seed, hash_string(task_id));
  json report{{"non_disputed", partition.non_disputed.size()},
              {"reference_only", partition.reference_only.size()},
              {"matcher_only", partition.matcher_only.size()}};
  std::vector<SeedPair> seeds;
  if (!disputed.empty() && settings.trust_enabled) {
    auto positive = generate_positive_seeds(partition, ds.ontology_a, ds.ontology_b, derive_seed(base, 1));
    auto negative = generate_negative_seeds(partition, ds.ontology_a, ds.ontology_b, positive.profile,
                                            derive_seed(base, 2));
    report["positive_seeds"] = positive.seeds.size();
    report["negative_seeds"] = negative.seeds.size();
    report["trivial_positive"] = positive.profile.trivial_count;
    std::size_t trivial_negative = 0;
    for (const auto& s : negative.seeds) trivial_negative += s.difficulty == Difficulty::Trivial;
    report["trivial_negative"] = trivial_negative;
    if (negative.shortfall) {
      report["shortfall"] = {{"requested_trivial", negative.shortfall->requested_trivial},
                             {"requested_nontrivial", negative.shortfall->requested_nontrivial},
                             {"achieved_trivial", negative.shortfall->achieved_trivial},
                             {"achieved_nontrivial", negative.shortfall->achieved_nontrivial}};
    }
    seeds = std::move(positive.seeds);
    seeds.insert(seeds.end(), negative.seeds.begin(), negative.seeds.end());
  }
  record.definition.pairs = blend_seeds(disputed, seeds, derive_seed(base, 3));
  record.status = disputed.empty() ? TaskStatus::Complete : TaskStatus::Active;
  record.seed_report = std::move(report);
  record.ledger = std::make_unique<TaskLedger>(record.definition, ds.confidence_threshold, false);

  submissions_[{matcher_id, dataset_id}] = task_id;
  tasks_[task_id] = std::move(record);
  sync_open_state();
  save_catalog();
  if (config_.data_dir) {
    std::ofstream(*config_.data_dir / "tasks" / (task_id + ".ndjson"), std::ios::trunc);
  }
  return task_summary(tasks_.at(task_id), true);
}

// --------------------------------------------------------------------- tasks

json Service::list_tasks(const std::optional<std::string>& token) const {
  std::shared_lock lock(mutex_);
  const User& caller = authenticate(token);
  require(caller, Role::Annotator);
  if (!caller.consent) throw Error(ErrorCode::Forbidden, "consent has not been given");
  json out = json::array();
  for (const auto& [id, task] : tasks_) {
    if (task.status != TaskStatus::Active || !task_open(task) || !may_annotate(caller, task)) continue;
    out.push_back(task_summary(task, false));
  }
  return out;
}

json Service::get_task(const std::optional<std::string>& token, const std::string& task_id) const {
  std::shared_lock lock(mutex_);
  const User& caller = authenticate(token);
  const TaskRecord& task = task_at(task_id);
  if (is_developer_of(caller, matcher_at(task.definition.matcher_id)) || caller.has(Role::Administrator)) {
    return task_summary(task, true);
  }
  if (may_annotate(caller, task)) return task_summary(task, false);
  throw Error(ErrorCode::Forbidden, "task '" + task_id + "' is not visible to the caller");
}

json Service::fetch_pairs(const std::optional<std::string>& token, const std::string& task_id,
                          const std::optional<std::string>& view) const {
  std::shared_lock lock(mutex_);
  const User& caller = authenticate(token);
  const TaskRecord& task = task_at(task_id);
  bool own = is_developer_of(caller, matcher_at(task.definition.matcher_id));
  bool dev_allowed = own || caller.has(Role::Administrator);
  bool ann_allowed = may_annotate(caller, task);
  bool developer;
  if (view == std::optional<std::string>("developer")) {
    if (!dev_allowed) throw Error(ErrorCode::Forbidden, "developer view requires the matcher's developer");
    developer = true;
  } else if (view == std::optional<std::string>("annotator")) {
    if (!ann_allowed) throw Error(ErrorCode::Forbidden, "caller may not annotate this task");
    developer = false;
  } else if (view) {
    throw Error(ErrorCode::BadRequest, "view must be annotator or developer");
  } else if (own) {
    developer = true;
  } else if (ann_allowed) {
    developer = false;
  } else if (dev_allowed) {
    developer = true;
  } else {
    throw Error(ErrorCode::Forbidden, "task '" + task_id + "' is not visible to the caller");
  }

  const Dataset& ds = dataset_at(task.definition.dataset_id).dataset;
  json pairs = json::array();
  bool complete = true;
  std::map<std::string, std::vector<json>> prefills_by_pair;
  std::map<std::string, json> conflicts_by_pair;
  if (developer) {
    for (const auto& [user, by_pair] : task.prefills) {
      for (const auto& [pid, p] : by_pair) {
        json pj = prefill_json(p);
        auto& list = prefills_by_pair[pid];
        if (std::find(list.begin(), list.end(), pj) == list.end()) list.push_back(pj);
      }
    }
    for (const auto& [user, list] : task.conflicts) {
      for (const auto& c : list) {
        auto& entry = conflicts_by_pair[c.pair_id];
        if (entry.is_null()) {
          json rules = json::array();
          for (auto r : c.negative_rules) rules.push_back(to_string(r));
          entry = {{"pair_id", c.pair_id}, {"negative_rules", rules}, {"users", 0}};
        }
        entry["users"] = entry["users"].get<int>() + 1;
      }
    }
  }
  for (const auto& p : task.definition.pairs) {
    json j{{"pair_id", p.id},
           {"source", entity_view(ds.ontology_a, p.source)},
           {"target", entity_view(ds.ontology_b, p.target)}};
    if (developer) {
      j["kind"] = to_string(p.kind);
      j["seed"] = p.seed ? seed_json(*p.seed) : json(nullptr);
      j["prefills"] = prefills_by_pair.count(p.id) ? json(prefills_by_pair[p.id]) : json::array();
    } else {
      auto c = task.ledger->log().current(caller.id, p.id);
      Decision value = c ? c->value : Decision::NA;
      if (value == Decision::NA) complete = false;
      j["decision"] = to_string(value);
      j["origin"] = c ? json(to_string(c->origin)) : json(nullptr);
      json prefill = nullptr;
      if (c && c->origin == Origin::Prefill && value != Decision::NA) {
        auto u = task.prefills.find(caller.id);
        if (u != task.prefills.end()) {
          if (auto f = u->second.find(p.id); f != u->second.end()) prefill = prefill_json(f->second);
        }
      }
      j["prefill"] = prefill;
    }
    pairs.push_back(std::move(j));
  }
  json out{{"task_id", task_id}, {"open", task_open(task)}, {"view", developer ? "developer" : "annotator"},
           {"pairs", std::move(pairs)}};
  if (developer) {
    out["seed_report"] = task.seed_report;
    json conflicts = json::array();
    for (auto& [pid, c] : conflicts_by_pair) conflicts.push_back(c);
    out["conflicts"] = std::move(conflicts);
  } else {
    out["complete"] = complete;
  }
  return out;
}

void Service::refresh_prefills(const std::string& user_id, const std::string& domain_id, Timestamp at,
                               bool append, ChangeSet& changes) {
  const DomainRecord& domain = domains_.at(domain_id);
  std::vector<std::shared_ptr<const Ontology>> ontologies;
  for (const auto& [id, o] : domain.ontologies) ontologies.push_back(o);
  std::vector<DatasetBinding> bindings;
  for (const auto& did : domain.group.dataset_ids) {
    const Dataset& d = datasets_.at(did).dataset;
    bindings.push_back({d.id, d.ontology_a.id(), d.ontology_b.id()});
  }
  std::vector<TaskRecord*> in_domain;
  std::vector<Assertion> assertions;
  for (auto& [tid, task] : tasks_) {
    if (datasets_.at(task.definition.dataset_id).dataset.domain_id != domain_id) continue;
    in_domain.push_back(&task);
    for (const auto& p : task.definition.pairs) {
      if (p.is_seed()) continue;
      auto c = task.ledger->log().current(user_id, p.id);
      if (!c || c->origin != Origin::Manual || c->value == Decision::NA) continue;
      assertions.push_back({p.source, p.target, c->value, AssertionSource::UserDecision, task.definition.dataset_id});
    }
  }
  OntologyNetwork network = build_network(std::move(ontologies), std::move(bindings), std::move(assertions));

  const User& user = users_.at(user_id);
  for (TaskRecord* task : in_domain) {
    const auto& def = task->definition;
    if (!def.settings.prefill_enabled || task->status != TaskStatus::Active) continue;
    if (append && (!task_open(*task) || !may_annotate(user, *task))) continue;
    bool started = false;
    std::vector<CandidatePair> pending;
    std::map<std::string, std::optional<Decision>> current_prefill;
    for (const auto& p : def.pairs) {
      auto c = task->ledger->log().current(user_id, p.id);
      if (c && c->origin == Origin::Manual) started = true;
      if (p.is_seed()) continue;
      if (c && c->origin == Origin::Manual && c->value != Decision::NA) continue;
      pending.push_back({p.id, p.source, p.target, def.dataset_id});
      if (c && c->origin == Origin::Prefill && c->value != Decision::NA) current_prefill[p.id] = c->value;
    }
    if (!started) continue;
    InferenceResult inferred = infer_prefills(network, pending, {def.settings.one_to_one, true});
    task->conflicts[user_id] = inferred.conflicts;
    if (task->conflicts[user_id].empty()) task->conflicts.erase(user_id);
    std::map<std::string, PreFill> desired;
    for (auto& p : inferred.prefills) desired.emplace(p.pair_id, std::move(p));
    auto& cache = task->prefills[user_id];

    auto emit = [&](const std::string& pair_id, Decision value) {
      DecisionEvent e = task->ledger->append_unchecked(user_id, pair_id, value, Origin::Prefill, at);
      persist_event(def.id, e);
      ChangeSet c = task->ledger->recompute_after_revision(e);
      changes.recomputed_trust.insert(changes.recomputed_trust.end(), c.recomputed_trust.begin(),
                                      c.recomputed_trust.end());
      changes.recomputed_scores.insert(changes.recomputed_scores.end(), c.recomputed_scores.begin(),
                                       c.recomputed_scores.end());
    };
    for (const auto& cand : pending) {
      auto want = desired.find(cand.id);
      auto have = current_prefill.find(cand.id);
      if (want != desired.end()) {
        if (have == current_prefill.end() || have->second != want->second.value) {
          if (!append) continue;
          emit(cand.id, want->second.value);
          changes.prefills_added.push_back({def.id, user_id, want->second});
        }
        cache[cand.id] = want->second;
      } else if (have != current_prefill.end()) {
        if (!append) continue;
        emit(cand.id, Decision::NA);
        PreFill gone;
        if (auto old = cache.find(cand.id); old != cache.end()) gone = old->second;
        gone.pair_id = cand.id;
        gone.source = cand.source;
        gone.target = cand.target;
        if (gone.value == Decision::NA) gone.value = *have->second;
        changes.prefills_retracted.push_back({def.id, user_id, gone});
        cache.erase(cand.id);
      } else {
        cache.erase(cand.id);
      }
    }
    if (cache.empty()) task->prefills.erase(user_id);
  }
}

json Service::submit_decision(const std::optional<std::string>& token, const std::string& task_id,
                              const std::string& pair_id, const json& body) {
  std::unique_lock lock(mutex_);
  const User& caller = authenticate(token);
  TaskRecord& task = task_at(task_id);
  if (is_developer_of(caller, matcher_at(task.definition.matcher_id))) {
    throw Error(ErrorCode::Forbidden, "developers may not annotate their own matcher's tasks");
  }
  if (!may_annotate(caller, task)) throw Error(ErrorCode::Forbidden, "caller may not annotate this task");
  if (!task_open(task)) throw Error(ErrorCode::TaskClosed, "task '" + task_id + "' is closed");
  Decision value = decision_from_string(string_field(body, "value"));
  if (!task.definition.find_pair(pair_id)) {
    throw Error(ErrorCode::NotFound, "pair '" + pair_id + "' not in task '" + task_id + "'");
  }

  Timestamp at = now();
  DecisionEvent event = task.ledger->record_decision(caller.id, pair_id, value, Origin::Manual, at);
  persist_event(task_id, event);
  ChangeSet changes = task.ledger->recompute_after_revision(event);
  if (!changes.empty() || value != Decision::NA) {
    refresh_prefills(caller.id, dataset_at(task.definition.dataset_id).dataset.domain_id, at, true, changes);
  }
  last_changes_ = changes;

  bool complete = true;
  for (const auto& p : task.definition.pairs) {
    if (task.ledger->log().current_decision(caller.id, p.id) == Decision::NA) complete = false;
  }
  auto mine = [&](const std::vector<PrefillChange>& list) {
    json out = json::array();
    for (const auto& c : list) {
      if (c.user_id != caller.id) continue;
      json j = prefill_json(c.prefill);
      j["task_id"] = c.task_id;
      j["pair_id"] = c.prefill.pair_id;
      out.push_back(std::move(j));
    }
    return out;
  };
  return json{{"event", to_json(event)},
              {"complete", complete},
              {"changed", !changes.empty()},
              {"prefills_added", mine(changes.prefills_added)},
              {"prefills_retracted", mine(changes.prefills_retracted)}};
}

json Service::task_results(const std::optional<std::string>& token, const std::string& task_id,
                           const std::optional<std::string>& as_of) const {
  std::shared_lock lock(mutex_);
  const User& caller = authenticate(token);
  const TaskRecord& task = task_at(task_id);
  if (!caller.has(Role::Administrator) && !is_developer_of(caller, matcher_at(task.definition.matcher_id))) {
    throw Error(ErrorCode::Forbidden, "results are visible to the matcher's developers and administrators");
  }
  std::optional<Timestamp> t;
  if (as_of) t = parse_timestamp(*as_of);
  TaskSnapshot snap = task.ledger->decision_snapshot(t);
  json j = snap.to_json();
  j.erase("trust");
  j["status"] = to_string(task.status);
  for (const auto& p : task.definition.pairs) {
    if (p.is_seed()) continue;
    auto& entry = j["pairs"][p.id];
    entry["kind"] = to_string(p.kind);
    entry["source"] = p.source;
    entry["target"] = p.target;
  }
  return j;
}

// ------------------------------------------------------------------- routing

Response Service::handle(const Request& request) {
  try {
    auto parts = split_path(request.path);
    json body = json::object();
    if (!request.body.empty()) {
      try {
        body = json::parse(request.body);
      } catch (const json::parse_error& e) {
        throw Error(ErrorCode::BadRequest, std::string("malformed JSON body: ") + e.what());
      }
    }
    auto query = [&](const char* key) -> std::optional<std::string> {
      auto it = request.query.find(key);
      if (it == request.query.end()) return std::nullopt;
      return it->second;
    };
    const std::string& m = request.method;
    const auto& tok = request.token;
    std::size_t n = parts.size();
    auto is = [&](std::size_t i, const char* s) { return i < n && parts[i] == s; };

    if (is(0, "users")) {
      if (n == 1 && m == "POST") return {201, create_user(tok, body)};
      if (n == 2 && m == "GET") return {200, get_user(tok, parts[1])};
      if (n == 3 && is(2, "consent") && m == "POST") return {200, set_consent(tok, parts[1], body)};
    } else if (is(0, "domains")) {
      if (n == 1 && m == "POST") return {201, create_domain(tok, body)};
      if (n == 2 && m == "PATCH") return {200, update_domain(tok, parts[1], body)};
    } else if (is(0, "datasets")) {
      if (n == 1 && m == "POST") return {201, upload_dataset(tok, body)};
      if (n == 2 && m == "PATCH") return {200, configure_dataset(tok, parts[1], body)};
    } else if (is(0, "matchers")) {
      if (n == 1 && m == "POST") return {201, register_matcher(tok, body)};
      if (n == 3 && is(2, "alignments") && m == "POST") return {201, submit_alignment(tok, parts[1], body)};
    } else if (is(0, "tasks")) {
      if (n == 1 && m == "GET") return {200, list_tasks(tok)};
      if (n == 2 && m == "GET") return {200, get_task(tok, parts[1])};
      if (n == 3 && is(2, "pairs") && m == "GET") return {200, fetch_pairs(tok, parts[1], query("view"))};
      if (n == 3 && is(2, "results") && m == "GET") return {200, task_results(tok, parts[1], query("as_of"))};
      if (n == 5 && is(2, "pairs") && is(4, "decision") && m == "POST") {
        return {200, submit_decision(tok, parts[1], parts[3], body)};
      }
    }
    throw Error(ErrorCode::NotFound, "no route for " + m + " " + request.path);
  } catch (const Error& e) {
    return {http_status(e.code()), error_body(e)};
  } catch (const json::exception& e) {
    return {400, json{{"error", "BadRequest"}, {"detail", e.what()}}};
  }
}

// --------------------------------------------------------------- persistence

json Service::catalog_json() const {
  json users = json::array();
  for (const auto& [id, u] : users_) users.push_back(user_json(u, true));
  json domains = json::array();
  for (const auto& [id, d] : domains_) {
    domains.push_back({{"id", id}, {"name", d.group.name}, {"status", to_string(d.group.status)},
                       {"dataset_ids", d.group.dataset_ids}});
  }
  json datasets = json::array();
  for (const auto& [id, r] : datasets_) {
    const Dataset& d = r.dataset;
    datasets.push_back({{"id", id},
                        {"name", d.name},
                        {"domain_id", d.domain_id},
                        {"status", to_string(d.status)},
                        {"threshold", d.confidence_threshold},
                        {"ontology_a", serialize_ontology(d.ontology_a)},
                        {"ontology_b", serialize_ontology(d.ontology_b)},
                        {"reference", serialize_alignment(d.reference)}});
  }
  json matchers = json::array();
  for (const auto& [id, m] : matchers_) {
    matchers.push_back({{"id", id}, {"name", m.name}, {"description", m.description},
                        {"developer_ids", m.developer_ids}});
  }
  json tasks = json::array();
  for (const auto& [id, t] : tasks_) {
    const auto& def = t.definition;
    json pairs = json::array();
    for (const auto& p : def.pairs) {
      pairs.push_back({{"id", p.id}, {"source", p.source}, {"target", p.target}, {"kind", to_string(p.kind)},
                       {"seed", p.seed ? seed_json(*p.seed) : json(nullptr)}});
    }
    tasks.push_back({{"id", id},
                     {"matcher_id", def.matcher_id},
                     {"dataset_id", def.dataset_id},
                     {"status", to_string(t.status)},
                     {"settings", {{"trust_enabled", def.settings.trust_enabled},
                                   {"prefill_enabled", def.settings.prefill_enabled},
                                   {"one_to_one", def.settings.one_to_one}}},
                     {"seed_report", t.seed_report},
                     {"pairs", pairs}});
  }
  return json{{"counters", counters_}, {"users", users},       {"domains", domains},
              {"datasets", datasets},  {"matchers", matchers}, {"tasks", tasks}};
}

void Service::save_catalog() const {
  if (!config_.data_dir) return;
  fs::path target = *config_.data_dir / "catalog.json";
  fs::path tmp = *config_.data_dir / "catalog.json.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out << catalog_json().dump(1) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot replace " + target.string() + ": " + ec.message());
}

void Service::persist_event(const std::string& task_id, const DecisionEvent& event) const {
  if (!config_.data_dir) return;
  fs::path path = *config_.data_dir / "tasks" / (task_id + ".ndjson");
  std::ofstream out(path, std::ios::app);
  out << to_json(event).dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "cannot append to " + path.string());
}

void Service::load() {
  const fs::path& dir = *config_.data_dir;
  std::error_code ec;
  fs::create_directories(dir / "tasks", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + (dir / "tasks").string() + ": " + ec.message());
  fs::path catalog_path = dir / "catalog.json";
  if (!fs::exists(catalog_path)) return;

  std::ifstream in(catalog_path);
  json catalog;
  try {
    catalog = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, std::string("corrupt catalog: ") + e.what());
  }
  counters_ = catalog.at("counters").get<std::map<std::string, std::uint64_t>>();
  for (const auto& u : catalog.at("users")) {
    User user;
    user.id = u.at("id");
    user.display_name = u.at("display_name");
    for (const auto& r : u.at("roles")) user.roles.insert(role_from_string(r.get<std::string>()));
    user.consent = u.at("consent");
    user.token = u.at("token");
    tokens_[user.token] = user.id;
    users_[user.id] = std::move(user);
  }
  for (const auto& d : catalog.at("domains")) {
    DomainRecord record;
    record.group.id = d.at("id");
    record.group.name = d.at("name");
    record.group.status = open_status_from_string(d.at("status").get<std::string>());
    record.group.dataset_ids = d.at("dataset_ids").get<std::vector<std::string>>();
    domains_[record.group.id] = std::move(record);
  }
  for (const auto& d : catalog.at("datasets")) {
    DatasetRecord record;
    Dataset& ds = record.dataset;
    ds.id = d.at("id");
    ds.name = d.at("name");
    ds.domain_id = d.at("domain_id");
    ds.status = open_status_from_string(d.at("status").get<std::string>());
    ds.confidence_threshold = d.at("threshold");
    ds.ontology_a = parse_ontology(d.at("ontology_a").get<std::string>(), OntologyFormat::CanonicalJson);
    ds.ontology_b = parse_ontology(d.at("ontology_b").get<std::string>(), OntologyFormat::CanonicalJson);
    ds.reference = parse_alignment(d.at("reference").get<std::string>(), AlignmentFormat::CanonicalJson);
    auto& dom = domains_.at(ds.domain_id);
    for (const Ontology* o : {&ds.ontology_a, &ds.ontology_b}) {
      dom.ontologies.emplace(o->id(), std::make_shared<const Ontology>(*o));
    }
    datasets_[ds.id] = std::move(record);
  }
  for (const auto& m : catalog.at("matchers")) {
    Matcher matcher{m.at("id"), m.at("name"), m.at("description"),
                    m.at("developer_ids").get<std::vector<std::string>>()};
    matchers_[matcher.id] = std::move(matcher);
  }
  for (const auto& t : catalog.at("tasks")) {
    TaskRecord record;
    auto& def = record.definition;
    def.id = t.at("id");
    def.matcher_id = t.at("matcher_id");
    def.dataset_id = t.at("dataset_id");
    const auto& s = t.at("settings");
    def.settings = {s.at("trust_enabled"), s.at("prefill_enabled"), s.at("one_to_one")};
    for (const auto& p : t.at("pairs")) {
      AnnotationPair pair;
      pair.id = p.at("id");
      pair.source = p.at("source");
      pair.target = p.at("target");
      pair.kind = pair_kind_from_string(p.at("kind").get<std::string>());
      if (!p.at("seed").is_null()) pair.seed = seed_from_json(pair, p.at("seed"));
      def.pairs.push_back(std::move(pair));
    }
    record.status = t.at("status") == "active" ? TaskStatus::Active : TaskStatus::Complete;
    record.seed_report = t.at("seed_report");
    record.ledger = std::make_unique<TaskLedger>(def, dataset_at(def.dataset_id).dataset.confidence_threshold, false);

    fs::path log_path = dir / "tasks" / (def.id + ".ndjson");
    if (fs::exists(log_path)) {
      std::ifstream log_in(log_path);
      std::stringstream buffer;
      buffer << log_in.rdbuf();
      RevisionLog replay = RevisionLog::from_ndjson(buffer.str());
      std::optional<DecisionEvent> last;
      for (const auto& e : replay.events()) {
        last = record.ledger->append_unchecked(e.user_id, e.pair_id, e.value, e.origin, e.timestamp);
        if (e.timestamp > last_time_) last_time_ = e.timestamp;
      }
      if (last) record.ledger->recompute_after_revision(*last);
    }
    submissions_[{def.matcher_id, def.dataset_id}] = def.id;
    tasks_[def.id] = std::move(record);
  }
  sync_open_state();

  // Rebuild pre-fill explanations from the replayed state.
  std::set<std::pair<std::string, std::string>> users_by_domain;
  for (const auto& [tid, task] : tasks_) {
    const std::string& domain = datasets_.at(task.definition.dataset_id).dataset.domain_id;
    for (const auto& e : task.ledger->log().events()) {
      if (e.origin == Origin::Manual) users_by_domain.insert({e.user_id, domain});
    }
  }
  ChangeSet ignored;
  for (const auto& [user, domain] : users_by_domain) {
    if (users_.count(user)) refresh_prefills(user, domain, last_time_, false, ignored);
  }
}

}  // namespace crowdval
