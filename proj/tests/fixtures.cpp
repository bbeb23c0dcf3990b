#include "fixtures.hpp"

#include <atomic>
#include <memory>
#include <stdexcept>

#include <unistd.h>

namespace fixtures {

using namespace crowdval;

namespace {

// A braced list of string pairs would otherwise become a JSON object.
json edges(const std::vector<std::pair<std::string, std::string>>& list) {
  json out = json::array();
  for (const auto& [a, b] : list) out.push_back(json::array({a, b}));
  return out;
}

}  // namespace

std::string cmt_ontology() {
  json j{{"id", "cmt"},
         {"entities",
          {{{"iri", "http://cmt#Document"}, {"labels", {"document"}}},
           {{"iri", "http://cmt#Paper"}, {"labels", {"paper"}}, {"description", "A submitted paper."}},
           {{"iri", "http://cmt#AcceptedPaper"}, {"labels", {"accepted paper"}}},
           {{"iri", "http://cmt#RejectedPaper"}, {"labels", {"rejected paper"}}},
           {{"iri", "http://cmt#Person"}, {"labels", {"person"}}},
           {{"iri", "http://cmt#Author"}, {"labels", {"author"}}},
           {{"iri", "http://cmt#Reviewer"}, {"labels", {"reviewer"}}}}},
         {"subclass",
          edges({{"http://cmt#Paper", "http://cmt#Document"},
           {"http://cmt#AcceptedPaper", "http://cmt#Paper"},
           {"http://cmt#RejectedPaper", "http://cmt#Paper"},
           {"http://cmt#Author", "http://cmt#Person"},
           {"http://cmt#Reviewer", "http://cmt#Person"}})},
         {"disjoint",
          edges({{"http://cmt#Person", "http://cmt#Document"}, {"http://cmt#AcceptedPaper", "http://cmt#RejectedPaper"}})}};
  return j.dump();
}

std::string conf_ontology() {
  json j{{"id", "conf"},
         {"entities",
          {{{"iri", "http://conf#Contribution"}, {"labels", {"contribution"}}},
           {{"iri", "http://conf#Paper"}, {"labels", {"paper"}}},
           {{"iri", "http://conf#Poster"}, {"labels", {"poster"}}},
           {{"iri", "http://conf#Person"}, {"labels", {"person"}}},
           {{"iri", "http://conf#Contributor"}, {"labels", {"contributor"}}},
           {{"iri", "http://conf#Reviewer"}, {"labels", {"reviewer"}}},
           {{"iri", "http://conf#Chair"}, {"labels", {"chair"}}}}},
         {"subclass",
          edges({{"http://conf#Paper", "http://conf#Contribution"},
           {"http://conf#Poster", "http://conf#Contribution"},
           {"http://conf#Contributor", "http://conf#Person"},
           {"http://conf#Reviewer", "http://conf#Person"},
           {"http://conf#Chair", "http://conf#Person"}})},
         {"disjoint", json::array()}};
  return j.dump();
}

namespace {

json cell(const char* a, const char* b) {
  return {{"e1", std::string("http://cmt#") + a}, {"e2", std::string("http://conf#") + b}, {"relation", "="},
          {"measure", 1.0}};
}

}  // namespace

std::string reference_alignment() {
  json j{{"source", "cmt"},
         {"target", "conf"},
         {"cells",
          {cell("Document", "Contribution"), cell("Paper", "Paper"), cell("Person", "Person"),
           cell("Author", "Contributor"), cell("Reviewer", "Reviewer")}}};
  return j.dump();
}

std::string matcher_alignment() {
  json j{{"source", "cmt"},
         {"target", "conf"},
         {"cells",
          {cell("Paper", "Paper"), cell("Person", "Person"), cell("Reviewer", "Reviewer"),
           cell("AcceptedPaper", "Poster"), cell("Author", "Person")}}};
  return j.dump();
}

TaskDefinition random_task(Rng& rng, std::size_t pairs, std::size_t seeds, bool trust_enabled) {
  TaskDefinition def;
  def.id = "task-r";
  def.matcher_id = "m";
  def.dataset_id = "d";
  def.settings.trust_enabled = trust_enabled;
  std::vector<AnnotationPair> all;
  for (std::size_t i = 0; i < pairs; ++i) {
    all.push_back({"", "s" + std::to_string(i), "t" + std::to_string(i),
                   rng.bernoulli(0.5) ? PairKind::ReferenceOnly : PairKind::MatcherOnly, std::nullopt});
  }
  for (std::size_t i = 0; i < seeds; ++i) {
    SeedPair s;
    s.source = "ss" + std::to_string(i);
    s.target = "st" + std::to_string(i);
    s.polarity = rng.bernoulli(0.5) ? Polarity::Positive : Polarity::Negative;
    s.gold_answer = s.polarity == Polarity::Positive ? Decision::Equivalent : Decision::NotEquivalent;
    all.push_back({"", s.source, s.target, PairKind::Seed, s});
  }
  rng.shuffle(all);
  for (std::size_t i = 0; i < all.size(); ++i) all[i].id = "q" + std::to_string(i + 1);
  def.pairs = std::move(all);
  return def;
}

std::vector<RandomEvent> random_events(Rng& rng, const TaskDefinition& def, std::size_t count, std::size_t users) {
  std::vector<RandomEvent> out;
  Timestamp t = 1'700'000'000'000;
  const Decision values[3] = {Decision::Equivalent, Decision::NotEquivalent, Decision::NA};
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t step = rng.uniform_index(10);
    if (step < 6) t += static_cast<Timestamp>(rng.uniform_index(5000));
    else if (step < 8) t -= static_cast<Timestamp>(rng.uniform_index(3000));
    RandomEvent e;
    e.user = "u" + std::to_string(rng.uniform_index(users));
    e.pair = def.pairs[rng.uniform_index(def.pairs.size())].id;
    // Skew toward real answers so users complete tasks.
    e.value = values[rng.uniform_index(10) < 9 ? rng.uniform_index(2) : 2];
    e.origin = rng.bernoulli(0.1) ? Origin::Prefill : Origin::Manual;
    e.at = t;
    out.push_back(e);
  }
  return out;
}

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("crowdval-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::vector<AuthCase> authorization_matrix(World& w) {
  json pairs = w.call("GET", "/tasks/" + w.task_id + "/pairs?view=developer", w.developer, nullptr, 200);
  std::string pair = pairs.at("pairs").at(0).at("pair_id");
  std::string task = "/tasks/" + w.task_id;
  std::string decide = task + "/pairs/" + pair + "/decision";
  json yes{{"value", "Equivalent"}};
  std::optional<std::string> none;
  std::optional<std::string> bogus = std::string("not-a-token");
  json upload{{"domain_id", w.domain_id},
              {"name", "second"},
              {"ontology_a", {{"content", cmt_ontology()}}},
              {"ontology_b", {{"content", conf_ontology()}}},
              {"reference", {{"content", reference_alignment()}}}};
  json align{{"dataset_id", w.dataset_id}, {"alignment", {{"content", matcher_alignment()}}}};
  return {
      {"anonymous lists tasks", none, "GET", "/tasks", nullptr, 401},
      {"unknown token lists tasks", bogus, "GET", "/tasks", nullptr, 401},
      {"annotator lists tasks", w.annotator, "GET", "/tasks", nullptr, 200},
      {"developer-only lists tasks", w.outsider, "GET", "/tasks", nullptr, 403},
      {"admin lists tasks", w.admin, "GET", "/tasks", nullptr, 403},
      {"developer creates domain", w.developer, "POST", "/domains", json{{"name", "x"}}, 403},
      {"annotator creates domain", w.annotator, "POST", "/domains", json{{"name", "x"}}, 403},
      {"admin creates domain", w.admin, "POST", "/domains", json{{"name", "biomed"}}, 201},
      {"developer uploads dataset", w.developer, "POST", "/datasets", upload, 403},
      {"annotator configures dataset", w.annotator, "PATCH", "/datasets/" + w.dataset_id, json{{"threshold", 0.6}},
       403},
      {"admin configures dataset", w.admin, "PATCH", "/datasets/" + w.dataset_id, json{{"threshold", 0.5}}, 200},
      {"annotator closes domain", w.annotator, "PATCH", "/domains/" + w.domain_id, json{{"status", "closed"}}, 403},
      {"annotator registers matcher", w.annotator, "POST", "/matchers", json{{"name", "m"}, {"description", "d"}},
       403},
      {"other developer submits alignment", w.outsider, "POST", "/matchers/" + w.matcher_id + "/alignments", align,
       403},
      {"annotator submits alignment", w.annotator, "POST", "/matchers/" + w.matcher_id + "/alignments", align, 403},
      {"owner reads task", w.developer, "GET", task, nullptr, 200},
      {"annotator reads task", w.annotator, "GET", task, nullptr, 200},
      {"admin reads task", w.admin, "GET", task, nullptr, 200},
      {"other developer reads task", w.outsider, "GET", task, nullptr, 403},
      {"owner developer view", w.developer, "GET", task + "/pairs?view=developer", nullptr, 200},
      {"admin developer view", w.admin, "GET", task + "/pairs?view=developer", nullptr, 200},
      {"annotator developer view", w.annotator, "GET", task + "/pairs?view=developer", nullptr, 403},
      {"owner annotator view", w.developer, "GET", task + "/pairs?view=annotator", nullptr, 403},
      {"annotator annotator view", w.annotator, "GET", task + "/pairs?view=annotator", nullptr, 200},
      {"other developer pairs", w.outsider, "GET", task + "/pairs", nullptr, 403},
      {"owner annotates own matcher", w.developer, "POST", decide, yes, 403},
      {"other developer annotates", w.outsider, "POST", decide, yes, 403},
      {"admin annotates", w.admin, "POST", decide, yes, 403},
      {"anonymous annotates", none, "POST", decide, yes, 401},
      {"annotator annotates", w.annotator, "POST", decide, yes, 200},
      {"owner reads results", w.developer, "GET", task + "/results", nullptr, 200},
      {"admin reads results", w.admin, "GET", task + "/results", nullptr, 200},
      {"annotator reads results", w.annotator, "GET", task + "/results", nullptr, 403},
      {"other developer reads results", w.outsider, "GET", task + "/results", nullptr, 403},
      {"annotator reads user", w.annotator, "GET", "/users/" + w.annotator_id, nullptr, 403},
      {"admin reads user", w.admin, "GET", "/users/" + w.annotator_id, nullptr, 200},
      {"consent for someone else", w.annotator, "POST", "/users/" + w.annotator2_id + "/consent",
       json{{"consent", true}}, 403},
      {"non-admin creates admin", w.annotator, "POST", "/users",
       json{{"display_name", "x"}, {"roles", {"administrator"}}}, 403},
  };
}

ServiceConfig fixed_clock_config(std::optional<std::filesystem::path> dir) {
  ServiceConfig cfg;
  cfg.data_dir = std::move(dir);
  cfg.seed = 42;
  auto t = std::make_shared<Timestamp>(1'700'000'000'000);
  cfg.clock = [t] { return *t += 1000; };
  return cfg;
}

json World::call(const std::string& method, const std::string& path, const std::optional<std::string>& token,
                 const json& body, int expect) {
  Request r;
  auto q = path.find('?');
  r.path = path.substr(0, q);
  if (q != std::string::npos) {
    std::string rest = path.substr(q + 1);
    auto eq = rest.find('=');
    r.query[rest.substr(0, eq)] = eq == std::string::npos ? "" : rest.substr(eq + 1);
  }
  r.method = method;
  r.token = token;
  if (!body.is_null()) r.body = body.dump();
  Response resp = service->handle(r);
  if (expect != 0 && resp.status != expect) {
    throw std::runtime_error(method + " " + path + " returned " + std::to_string(resp.status) + ": " +
                             resp.body.dump());
  }
  return resp.body;
}

World World::build(ServiceConfig config, json task_settings, bool submit) {
  World w;
  w.service = std::make_unique<Service>(std::move(config));
  auto user = [&](const char* name, json roles, std::string& token, std::string& id, const std::string& auth) {
    json body{{"display_name", name}, {"roles", roles}};
    json u = w.call("POST", "/users", auth.empty() ? std::nullopt : std::optional<std::string>(auth), body, 201);
    token = u.at("token");
    id = u.at("id");
  };
  user("admin", {"administrator"}, w.admin, w.admin_id, "");
  user("dev", {"developer", "annotator"}, w.developer, w.developer_id, "");
  user("ann", {"annotator"}, w.annotator, w.annotator_id, "");
  user("ann2", {"annotator"}, w.annotator2, w.annotator2_id, "");
  user("outsider", {"developer"}, w.outsider, w.outsider_id, "");
  for (auto* who : {&w.developer, &w.annotator, &w.annotator2}) {
    std::string id = who == &w.developer ? w.developer_id : who == &w.annotator ? w.annotator_id : w.annotator2_id;
    w.call("POST", "/users/" + id + "/consent", *who, json{{"consent", true}}, 200);
  }
  w.domain_id = w.call("POST", "/domains", w.admin, json{{"name", "conference"}}, 201).at("id");
  json upload{{"domain_id", w.domain_id},
              {"name", "cmt-conference"},
              {"ontology_a", {{"content", cmt_ontology()}, {"format", "json"}}},
              {"ontology_b", {{"content", conf_ontology()}, {"format", "json"}}},
              {"reference", {{"content", reference_alignment()}, {"format", "json"}}}};
  w.dataset_id = w.call("POST", "/datasets", w.admin, upload, 201).at("id");
  w.call("PATCH", "/datasets/" + w.dataset_id, w.admin, json{{"threshold", 0.5}, {"status", "open"}}, 200);
  w.matcher_id =
      w.call("POST", "/matchers", w.developer, json{{"name", "toy-matcher"}, {"description", "string matcher"}}, 201)
          .at("id");
  if (submit) {
    json body{{"dataset_id", w.dataset_id},
              {"alignment", {{"content", matcher_alignment()}, {"format", "json"}}},
              {"settings", task_settings}};
    w.task_id = w.call("POST", "/matchers/" + w.matcher_id + "/alignments", w.developer, body, 201).at("id");
  }
  return w;
}

}  // namespace fixtures
