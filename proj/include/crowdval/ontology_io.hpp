#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crowdval/ontology.hpp"

namespace crowdval {

enum class OntologyFormat { CanonicalJson, SimpleTsv };
enum class AlignmentFormat { CanonicalJson, OaeiRdf };

OntologyFormat ontology_format_from_string(std::string_view name);
AlignmentFormat alignment_format_from_string(std::string_view name);

struct ValidationFinding {
  enum class Kind { DanglingEdge, Cycle, ReflexiveDisjoint, DanglingDisjoint, EmptyIri };
  Kind kind;
  std::vector<std::string> entities;
  std::string message;
};

const char* to_string(ValidationFinding::Kind kind);

struct ValidationReport {
  std::vector<ValidationFinding> findings;
  bool ok() const { return findings.empty(); }
};

ValidationReport validate_ontology(const Ontology& ontology);

// Canonical JSON:
//   { "id", "entities": [{"iri","labels","description"}],
//     "subclass": [["child","parent"]], "disjoint": [["x","y"]] }
// Simple TSV, one record per line, '#' comments:
//   id        <ontology-id>
//   entity    <iri> [<label>|<label>...] [<description>]
//   subclass  <child> <parent>
//   disjoint  <x> <y>
Ontology parse_ontology(std::string_view bytes, OntologyFormat format);
std::string serialize_ontology(const Ontology& ontology);

struct AlignmentParseOptions {
  // Override the ontology ids declared by the document (OAEI files name
  // ontologies by IRI, which rarely matches the platform's ontology ids).
  std::optional<std::string> source_ontology_id;
  std::optional<std::string> target_ontology_id;
};

// Canonical JSON:
//   { "source", "target", "cells": [{"e1","e2","relation":"=","measure"}] }
// OAEI RDF/XML: Cell elements with entity1/entity2 (rdf:resource),
// relation and measure; everything else is ignored.
Alignment parse_alignment(std::string_view bytes, AlignmentFormat format,
                          const AlignmentParseOptions& options = {});
std::string serialize_alignment(const Alignment& alignment);

}  // namespace crowdval
