#pragma once

#include <expreuse/language.hpp>

#include <nlohmann/json.hpp>

namespace expreuse::codec {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Tagged form. Lossless; reals travel as decimal strings so keys survive a round
// trip bit for bit. Used by the journal and wherever exactness matters.
// ---------------------------------------------------------------------------

json to_json(const Value& v);
Value value_from_json(const json& j);

json to_json(const Binding& b);
Binding binding_from_json(const json& j);

json to_json(const Query& q);
Query query_from_json(const json& j);

json to_json(const Answer& a);
Answer answer_from_json(const json& j);

json to_json(const Request& r);
Request request_from_json(const json& j);

json to_json(const Response& r);
Response response_from_json(const json& j);

json to_json(const ExperimentSpec& s);
ExperimentSpec spec_from_json(const json& j);

json to_json(const ResultMeta& m);
ResultMeta meta_from_json(const json& j);

// ---------------------------------------------------------------------------
// Plain form for people and clients: numbers as numbers, symbols and profiles as
// strings, "*" for unspecified, boxes as {"var": {"min","max","step","include_max"}}.
// Parsing is driven by the language's domains.
// ---------------------------------------------------------------------------

/// Throws SchemeMismatch for unknown variables and DomainViolation for values that
/// do not fit the variable's domain kind.
Binding parse_plain_binding(const QueryLanguage& lang, const json& j);

json plain(const Value& v);
json plain(const Binding& b);
json plain(const Answer& a);

/// Language description for clients that generate forms.
json describe(const QueryLanguage& lang);

}  // namespace expreuse::codec
