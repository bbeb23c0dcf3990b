#include "crowdval/ontology_io.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <json.hpp>

#include "crowdval/error.hpp"

namespace crowdval {

using nlohmann::json;

OntologyFormat ontology_format_from_string(std::string_view name) {
  if (name == "canonical-json" || name == "json") return OntologyFormat::CanonicalJson;
  if (name == "simple-tsv" || name == "tsv") return OntologyFormat::SimpleTsv;
  throw Error(ErrorCode::BadRequest, "unsupported ontology format '" + std::string(name) + "'");
}

AlignmentFormat alignment_format_from_string(std::string_view name) {
  if (name == "canonical-json" || name == "json") return AlignmentFormat::CanonicalJson;
  if (name == "oaei-rdf-subset" || name == "oaei" || name == "rdf") return AlignmentFormat::OaeiRdf;
  throw Error(ErrorCode::BadRequest, "unsupported alignment format '" + std::string(name) + "'");
}

const char* to_string(ValidationFinding::Kind kind) {
  switch (kind) {
    case ValidationFinding::Kind::DanglingEdge: return "dangling-edge";
    case ValidationFinding::Kind::Cycle: return "cycle";
    case ValidationFinding::Kind::ReflexiveDisjoint: return "reflexive-disjoint";
    case ValidationFinding::Kind::DanglingDisjoint: return "dangling-disjoint";
    case ValidationFinding::Kind::EmptyIri: return "empty-iri";
  }
  return "unknown";
}

namespace {

// Tarjan's strongly connected components over the subclass graph. Any SCC
// with more than one member, or a single member with a self edge, is a cycle.
std::vector<std::vector<std::string>> find_cycles(const Ontology& o) {
  std::map<std::string, std::vector<std::string>> adj;
  for (const auto& [child, parent] : o.subclass_edges()) {
    adj[child].push_back(parent);
    adj.try_emplace(parent);
  }
  std::map<std::string, int> index, low;
  std::map<std::string, bool> on_stack;
  std::vector<std::string> stack;
  std::vector<std::vector<std::string>> cycles;
  int counter = 0;

  std::function<void(const std::string&)> strongconnect = [&](const std::string& v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    for (const auto& w : adj[v]) {
      if (!index.count(w)) {
        strongconnect(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      std::vector<std::string> scc;
      std::string w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        scc.push_back(w);
      } while (w != v);
      bool self_loop = o.subclass_edges().count({v, v}) > 0;
      if (scc.size() > 1 || self_loop) {
        std::sort(scc.begin(), scc.end());
        cycles.push_back(std::move(scc));
      }
    }
  };
  for (const auto& [v, _] : adj) {
    if (!index.count(v)) strongconnect(v);
  }
  std::sort(cycles.begin(), cycles.end());
  return cycles;
}

void throw_if_invalid(const Ontology& o) {
  auto report = validate_ontology(o);
  if (report.ok()) return;
  const auto& f = report.findings.front();
  throw Error(ErrorCode::ValidationError, f.message);
}

std::size_t line_of(std::string_view bytes, std::size_t offset) {
  offset = std::min(offset, bytes.size());
  return 1 + static_cast<std::size_t>(std::count(bytes.begin(), bytes.begin() + offset, '\n'));
}

json parse_json_document(std::string_view bytes) {
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    std::size_t offset = e.byte > 0 ? e.byte - 1 : 0;
    throw ParseError(e.what(), line_of(bytes, offset), offset);
  }
}

[[noreturn]] void schema_error(const std::string& what) { throw ParseError(what, 1, 0); }

std::string required_string(const json& obj, const char* key, const char* context) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    schema_error(std::string(context) + ": missing string field '" + key + "'");
  }
  return it->get<std::string>();
}

std::vector<std::pair<std::string, std::string>> string_pairs(const json& doc, const char* key) {
  std::vector<std::pair<std::string, std::string>> out;
  auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) return out;
  if (!it->is_array()) schema_error(std::string("'") + key + "' must be an array");
  for (const auto& item : *it) {
    if (!item.is_array() || item.size() != 2 || !item[0].is_string() || !item[1].is_string()) {
      schema_error(std::string("'") + key + "' entries must be [string, string]");
    }
    out.emplace_back(item[0].get<std::string>(), item[1].get<std::string>());
  }
  return out;
}

Ontology ontology_from_json(std::string_view bytes) {
  json doc = parse_json_document(bytes);
  if (!doc.is_object()) schema_error("ontology document must be a JSON object");
  Ontology o(doc.contains("id") && doc["id"].is_string() ? doc["id"].get<std::string>() : "");
  std::set<std::string> seen;
  if (auto it = doc.find("entities"); it != doc.end() && !it->is_null()) {
    if (!it->is_array()) schema_error("'entities' must be an array");
    for (const auto& e : *it) {
      if (!e.is_object()) schema_error("entity must be an object");
      EntityRef ref;
      ref.iri = required_string(e, "iri", "entity");
      if (!seen.insert(ref.iri).second) {
        throw Error(ErrorCode::ValidationError, "duplicate entity iri '" + ref.iri + "'");
      }
      if (auto l = e.find("labels"); l != e.end() && !l->is_null()) {
        if (!l->is_array()) schema_error("entity labels must be an array");
        for (const auto& label : *l) {
          if (!label.is_string()) schema_error("entity labels must be strings");
          ref.labels.push_back(label.get<std::string>());
        }
      }
      if (auto d = e.find("description"); d != e.end() && d->is_string()) {
        ref.description = d->get<std::string>();
      }
      o.add_entity(std::move(ref));
    }
  }
  for (auto& [child, parent] : string_pairs(doc, "subclass")) o.add_subclass(child, parent);
  for (auto& [a, b] : string_pairs(doc, "disjoint")) o.add_disjoint(a, b);
  return o;
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos
                                                                       : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

Ontology ontology_from_tsv(std::string_view bytes) {
  Ontology o;
  std::vector<EntityRef> entities;
  std::vector<std::pair<std::string, std::string>> subclass, disjoint;
  std::set<std::string> seen;
  std::string id;
  std::size_t offset = 0, line_no = 0;
  while (offset <= bytes.size()) {
    auto end = bytes.find('\n', offset);
    std::string_view line = bytes.substr(offset, end == std::string_view::npos ? std::string_view::npos
                                                                               : end - offset);
    ++line_no;
    std::size_t line_offset = offset;
    offset = end == std::string_view::npos ? bytes.size() + 1 : end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;

    auto fields = split(line, '\t');
    const std::string& kind = fields[0];
    auto need = [&](std::size_t n) {
      if (fields.size() < n) {
        throw ParseError("record '" + kind + "' needs " + std::to_string(n - 1) + " fields", line_no,
                         line_offset);
      }
    };
    if (kind == "id") {
      need(2);
      id = fields[1];
    } else if (kind == "entity") {
      need(2);
      EntityRef ref;
      ref.iri = fields[1];
      if (ref.iri.empty()) throw ParseError("entity iri is empty", line_no, line_offset);
      if (!seen.insert(ref.iri).second) {
        throw Error(ErrorCode::ValidationError, "duplicate entity iri '" + ref.iri + "'");
      }
      if (fields.size() > 2 && !fields[2].empty()) ref.labels = split(fields[2], '|');
      if (fields.size() > 3 && !fields[3].empty()) ref.description = fields[3];
      entities.push_back(std::move(ref));
    } else if (kind == "subclass") {
      need(3);
      subclass.emplace_back(fields[1], fields[2]);
    } else if (kind == "disjoint") {
      need(3);
      disjoint.emplace_back(fields[1], fields[2]);
    } else {
      throw ParseError("unknown record kind '" + kind + "'", line_no, line_offset);
    }
  }
  o = Ontology(id);
  for (auto& e : entities) o.add_entity(std::move(e));
  for (auto& [c, p] : subclass) o.add_subclass(c, p);
  for (auto& [a, b] : disjoint) o.add_disjoint(a, b);
  return o;
}

double parse_measure(const std::string& text) {
  std::size_t used = 0;
  double value = 0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ParseError("measure '" + text + "' is not a number", 1, 0);
  }
  while (used < text.size() && std::isspace(static_cast<unsigned char>(text[used]))) ++used;
  if (used != text.size()) throw ParseError("measure '" + text + "' is not a number", 1, 0);
  return value;
}

void add_checked_cell(Alignment& alignment, std::string source, std::string target,
                      const std::string& relation, double measure) {
  if (relation != kEquivalenceRelation) {
    throw Error(ErrorCode::UnsupportedRelation,
                "relation '" + relation + "' on (" + source + ", " + target +
                    ") is not supported; only '=' cells are accepted");
  }
  if (!(measure >= 0.0 && measure <= 1.0)) {
    throw Error(ErrorCode::ValidationError, "measure " + std::to_string(measure) + " on (" + source +
                                                ", " + target + ") outside [0,1]");
  }
  alignment.add({std::move(source), std::move(target), measure});
}

Alignment alignment_from_json(std::string_view bytes, const AlignmentParseOptions& options) {
  json doc = parse_json_document(bytes);
  if (!doc.is_object()) schema_error("alignment document must be a JSON object");
  std::string source = options.source_ontology_id.value_or(
      doc.contains("source") && doc["source"].is_string() ? doc["source"].get<std::string>() : "");
  std::string target = options.target_ontology_id.value_or(
      doc.contains("target") && doc["target"].is_string() ? doc["target"].get<std::string>() : "");
  Alignment alignment(source, target);
  if (auto it = doc.find("cells"); it != doc.end() && !it->is_null()) {
    if (!it->is_array()) schema_error("'cells' must be an array");
    for (const auto& cell : *it) {
      if (!cell.is_object()) schema_error("cell must be an object");
      std::string e1 = required_string(cell, "e1", "cell");
      std::string e2 = required_string(cell, "e2", "cell");
      std::string relation = "=";
      if (auto r = cell.find("relation"); r != cell.end()) {
        if (!r->is_string()) schema_error("cell relation must be a string");
        relation = r->get<std::string>();
      }
      double measure = 1.0;
      if (auto m = cell.find("measure"); m != cell.end()) {
        if (!m->is_number()) schema_error("cell measure must be a number");
        measure = m->get<double>();
      }
      add_checked_cell(alignment, std::move(e1), std::move(e2), relation, measure);
    }
  }
  return alignment;
}

// --- OAEI RDF/XML subset -----------------------------------------------------

using boost::property_tree::ptree;

std::string_view strip_prefix(std::string_view name) {
  auto pos = name.find(':');
  return pos == std::string_view::npos ? name : name.substr(pos + 1);
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

const ptree* child_local(const ptree& node, std::string_view local) {
  for (const auto& [name, child] : node) {
    if (strip_prefix(name) == local) return &child;
  }
  return nullptr;
}

std::optional<std::string> attribute_local(const ptree& node, std::string_view local) {
  const ptree* attrs = nullptr;
  if (auto it = node.find("<xmlattr>"); it != node.not_found()) attrs = &it->second;
  if (attrs == nullptr) return std::nullopt;
  for (const auto& [name, value] : *attrs) {
    if (strip_prefix(name) == local) return value.data();
  }
  return std::nullopt;
}

// <entity1 rdf:resource="..."/> or <entity1>iri</entity1>
std::optional<std::string> entity_iri(const ptree& cell, std::string_view local) {
  const ptree* e = child_local(cell, local);
  if (e == nullptr) return std::nullopt;
  if (auto r = attribute_local(*e, "resource")) return trim(*r);
  std::string text = trim(e->data());
  if (text.empty()) return std::nullopt;
  return text;
}

// <onto1><Ontology rdf:about="iri"/></onto1> or <onto1>iri</onto1>
std::string ontology_iri(const ptree& alignment, std::string_view local) {
  const ptree* o = child_local(alignment, local);
  if (o == nullptr) return {};
  if (const ptree* inner = child_local(*o, "Ontology")) {
    if (auto about = attribute_local(*inner, "about")) return trim(*about);
  }
  return trim(o->data());
}

void collect(const ptree& node, std::string_view local, std::vector<const ptree*>& out) {
  for (const auto& [name, child] : node) {
    if (name == "<xmlattr>" || name == "<xmlcomment>") continue;
    if (strip_prefix(name) == local) out.push_back(&child);
    collect(child, local, out);
  }
}

Alignment alignment_from_oaei(std::string_view bytes, const AlignmentParseOptions& options) {
  ptree tree;
  std::istringstream in{std::string(bytes)};
  try {
    boost::property_tree::read_xml(in, tree);
  } catch (const boost::property_tree::xml_parser_error& e) {
    throw ParseError(e.message(), e.line(), 0);
  }
  std::vector<const ptree*> alignments;
  collect(tree, "Alignment", alignments);
  std::string source, target;
  if (!alignments.empty()) {
    source = ontology_iri(*alignments.front(), "onto1");
    target = ontology_iri(*alignments.front(), "onto2");
  }
  Alignment alignment(options.source_ontology_id.value_or(source),
                      options.target_ontology_id.value_or(target));
  std::vector<const ptree*> cells;
  collect(tree, "Cell", cells);
  std::size_t index = 0;
  for (const ptree* cell : cells) {
    ++index;
    auto e1 = entity_iri(*cell, "entity1");
    auto e2 = entity_iri(*cell, "entity2");
    if (!e1 || !e2) {
      throw ParseError("Cell #" + std::to_string(index) + " lacks " + (e1 ? "entity2" : "entity1"), 1,
                       0);
    }
    std::string relation = "=";
    if (const ptree* r = child_local(*cell, "relation")) relation = trim(r->data());
    double measure = 1.0;
    if (const ptree* m = child_local(*cell, "measure")) measure = parse_measure(trim(m->data()));
    add_checked_cell(alignment, std::move(*e1), std::move(*e2), relation, measure);
  }
  return alignment;
}

}  // namespace

ValidationReport validate_ontology(const Ontology& o) {
  ValidationReport report;
  using Kind = ValidationFinding::Kind;
  for (const auto& e : o.entities()) {
    if (e.iri.empty()) report.findings.push_back({Kind::EmptyIri, {}, "entity with empty iri"});
  }
  for (const auto& [child, parent] : o.subclass_edges()) {
    std::vector<std::string> missing;
    if (!o.contains(child)) missing.push_back(child);
    if (!o.contains(parent) && parent != child) missing.push_back(parent);
    if (!missing.empty()) {
      report.findings.push_back({Kind::DanglingEdge, missing,
                                 "subclass edge (" + child + ", " + parent +
                                     ") references undeclared entity " + missing.front()});
    }
  }
  for (const auto& [a, b] : o.disjoint_pairs()) {
    if (a == b) {
      report.findings.push_back(
          {Kind::ReflexiveDisjoint, {a}, "entity " + a + " declared disjoint with itself"});
      continue;
    }
    std::vector<std::string> missing;
    if (!o.contains(a)) missing.push_back(a);
    if (!o.contains(b)) missing.push_back(b);
    if (!missing.empty()) {
      report.findings.push_back({Kind::DanglingDisjoint, missing,
                                 "disjointness (" + a + ", " + b +
                                     ") references undeclared entity " + missing.front()});
    }
  }
  for (auto& cycle : find_cycles(o)) {
    std::string text;
    for (const auto& c : cycle) text += (text.empty() ? "" : " ") + c;
    report.findings.push_back({Kind::Cycle, cycle, "strict subclass cycle: [" + text + "]"});
  }
  return report;
}

Ontology parse_ontology(std::string_view bytes, OntologyFormat format) {
  Ontology o = format == OntologyFormat::CanonicalJson ? ontology_from_json(bytes)
                                                       : ontology_from_tsv(bytes);
  throw_if_invalid(o);
  return o;
}

std::string serialize_ontology(const Ontology& o) {
  json doc;
  doc["id"] = o.id();
  doc["entities"] = json::array();
  for (const auto& e : o.entities()) {
    json entity{{"iri", e.iri}, {"labels", e.labels}};
    if (e.description) entity["description"] = *e.description;
    doc["entities"].push_back(std::move(entity));
  }
  doc["subclass"] = json::array();
  for (const auto& [c, p] : o.subclass_edges()) doc["subclass"].push_back({c, p});
  doc["disjoint"] = json::array();
  for (const auto& [a, b] : o.disjoint_pairs()) doc["disjoint"].push_back({a, b});
  return doc.dump(2);
}

Alignment parse_alignment(std::string_view bytes, AlignmentFormat format,
                          const AlignmentParseOptions& options) {
  return format == AlignmentFormat::CanonicalJson ? alignment_from_json(bytes, options)
                                                  : alignment_from_oaei(bytes, options);
}

std::string serialize_alignment(const Alignment& alignment) {
  json doc{{"source", alignment.source_ontology_id()},
           {"target", alignment.target_ontology_id()},
           {"cells", json::array()}};
  for (const auto& c : alignment.cells()) {
    doc["cells"].push_back({{"e1", c.source}, {"e2", c.target}, {"relation", "="}, {"measure", c.measure}});
  }
  return doc.dump(2);
}

}  // namespace crowdval
