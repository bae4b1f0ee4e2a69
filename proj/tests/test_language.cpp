#include <doctest.h>

#include <expreuse/battery.hpp>
#include <expreuse/error.hpp>
#include <expreuse/json_codec.hpp>
#include <expreuse/registry.hpp>
#include <expreuse/train.hpp>

using namespace expreuse;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::IoError;
}

LanguageRegistry both() {
  LanguageRegistry r;
  train::register_train(r);
  battery::register_battery(r);
  return r;
}

}  // namespace

TEST_CASE("registering a language id twice is rejected") {
  LanguageRegistry r;
  train::register_train(r);
  QueryLanguage dup{train::kEngLanguage, {"x"}, {{"x"}}, {{"x", RealDomain{}}}, AnswerKind::Boolean, {}};
  CHECK(code_of([&] { r.register_language(dup); }) == ErrorCode::DuplicateId);
}

TEST_CASE("malformed languages are rejected") {
  LanguageRegistry r;
  QueryLanguage no_domain{"q", {"x"}, {{"x"}}, {}, AnswerKind::Boolean, {}};
  CHECK(code_of([&] { r.register_language(no_domain); }) == ErrorCode::MalformedLanguage);
  QueryLanguage stray{"q2", {"x"}, {{"x", "y"}}, {{"x", RealDomain{}}}, AnswerKind::Boolean, {}};
  CHECK(code_of([&] { r.register_language(stray); }) == ErrorCode::MalformedLanguage);
}

TEST_CASE("spec kind order must be acyclic") {
  LanguageRegistry r;
  SpecLanguage cyc{"s", {{"a", "b"}, {{"a", "b"}, {"b", "a"}}}, {"b"}, {}};
  CHECK(code_of([&] { r.register_language(cyc); }) == ErrorCode::MalformedLanguage);
  SpecLanguage ok{"s2", {{"a", "b"}, {{"a", "b"}}}, {"b"}, {{"y", "m"}}};
  r.register_language(ok);
  CHECK(r.precedes("s2", "a", "b"));
  CHECK_FALSE(r.precedes("s2", "b", "a"));
}

TEST_CASE("query validation errors") {
  const auto r = both();
  CHECK(code_of([&] { validate_query(r, Query{"nope", {}}); }) == ErrorCode::UnknownLanguage);

  auto q = train::eng_query({100, 1, 100, 0.1, 0}, 500);
  q.binding.erase("mu");
  CHECK(code_of([&] { validate_query(r, q); }) == ErrorCode::SchemeMismatch);

  auto neg = train::eng_query({-5, 1, 100, 0.1, 0}, 500);
  CHECK(code_of([&] { validate_query(r, neg); }) == ErrorCode::DomainViolation);

  auto unknown_train = train::sale_query("t9");
  CHECK(code_of([&] { validate_query(r, unknown_train); }) == ErrorCode::DomainViolation);

  CHECK_NOTHROW(validate_query(r, train::sale_query("t1")));
  CHECK_NOTHROW(validate_query(r, train::sale_query("t1", "lvl2")));
}

TEST_CASE("aliases resolve to canonical variable names") {
  const auto r = both();
  const auto& lang = r.query_language(train::kEngLanguage);
  const auto j = nlohmann::json::parse(
      R"({"m":100,"F_B":1,"v":100,"slip":0.1,"slope":2,"dist":500})");
  const Query q = r.canonicalize(Query{train::kEngLanguage, codec::parse_plain_binding(lang, j)});
  CHECK(q.binding.count("mu") == 1);
  CHECK(q.binding.count("theta") == 1);
  CHECK(q.key() == train::eng_query({100, 1, 100, 0.1, 2}, 500).key());
}

TEST_CASE("decomposition is de-duplicated and non-empty") {
  const auto r = both();
  CHECK(decompose(r, train::eng_query({100, 1, 100, 0.1, 0}, 500)).size() == 1);
  CHECK(decompose(r, train::sale_query("t1")).size() == 2);
  CHECK(decompose(r, train::sale_query("t1", "lvl1")).size() == 1);

  BoxConstraint box{{{"Voltage", 200, 210, 1, false}, {"MaxTorque", 400, 410, 1, false},
                     {"InternalRes", 0.02, 0.5, 0.12, true}}};
  CHECK(decompose(r, battery::box_query(box)).size() == 500);

  BoxConstraint empty{{{"Voltage", 200, 200, 1, false}, {"MaxTorque", 400, 410, 1, false},
                       {"InternalRes", 0.02, 0.5, 0.12, true}}};
  CHECK(code_of([&] { (void)decompose(r, battery::box_query(empty)); }) == ErrorCode::EmptyDecomposition);
}

TEST_CASE("completion is ordered by the kind order") {
  const auto r = both();
  const auto req = battery::layout_request({300, 800, 0.1}, {"SoC", "TBL"});
  const auto specs = complete(r, req);
  REQUIRE(specs.size() == 2);
  CHECK(specs[0].kind == "Load");
  CHECK(specs[1].kind == "Execute");
  CHECK(result_specs(r, specs).size() == 1);
  CHECK(specs[1].origin_request == req.key());
}

TEST_CASE("spec identity ignores provenance references") {
  const auto r = both();
  auto specs = complete(r, battery::layout_request({300, 800, 0.1}, {"SoC"}));
  auto other = specs[1];
  other.origin_request = "elsewhere";
  other.origin_query = "elsewhere";
  CHECK(other.key() == specs[1].key());
}

TEST_CASE("describe lists every registered query language") {
  const auto r = both();
  const auto ids = r.query_language_ids();
  CHECK(ids.size() == 3);
  for (const auto& id : ids) {
    const auto d = codec::describe(r.query_language(id));
    CHECK(d.at("id") == id);
    CHECK(d.contains("schemes"));
    CHECK(d.contains("variables"));
  }
}

TEST_CASE("compatibility reports wrong answers and pipeline errors") {
  const auto r = both();
  std::vector<Query> qs{train::eng_query({100, 1, 100, 0.1, 0}, 500), train::eng_query({-1, 1, 100, 0.1, 0}, 500)};
  const auto rep = check_compatibility(r, train::kEngLanguage, qs, [](const Query&, const Answer&) { return true; });
  CHECK(rep.checked == 2);
  CHECK(rep.failures.size() == 1);
  const auto bad = check_compatibility(r, train::kEngLanguage, std::span(qs).first(1),
                                       [](const Query&, const Answer&) { return false; });
  CHECK_FALSE(bad.passed());
}
