#include <doctest.h>

#include <expreuse/service.hpp>

#include <httplib.h>

using namespace expreuse;
using nlohmann::json;

namespace {

const char* kEng = R"({"languageId":"train-eng","binding":{"m":500,"F_B":1,"v":120,"mu":0.2,"theta":0,"dist":800}})";

Config test_config() {
  Config c;
  c.service.port = 0;
  c.service.workers = 2;
  return c;
}

StoreOptions manual_store(std::shared_ptr<ManualClock> clock) {
  StoreOptions o;
  o.clock = std::move(clock);
  return o;
}

}  // namespace

TEST_CASE("query handler answers and reports executions") {
  Service s(test_config());
  const auto r = s.query(kEng);
  REQUIRE(r.status == 200);
  const auto j = json::parse(r.body);
  CHECK(j["executed"] == 1);
  CHECK(j["answer"].is_boolean());
  CHECK(j["userMechanism"] == "none");
  const auto again = json::parse(s.query(kEng).body);
  CHECK(again["executed"] == 0);
  CHECK(again["userMechanism"] == "direct");
  CHECK(again["answer"].dump() == j["answer"].dump());
  CHECK(again["queryKey"] == j["queryKey"]);
}

TEST_CASE("bad input maps to 400 with an error code") {
  Service s(test_config());
  struct Case {
    const char* body;
    const char* code;
  };
  const Case cases[] = {
      {"{not json", "MalformedJson"},
      {R"({"binding":{}})", "MalformedEnvelope"},
      {R"({"languageId":"nope","binding":{}})", "UnknownLanguage"},
      {R"({"languageId":"train-eng","binding":{"m":500}})", "SchemeMismatch"},
      {R"({"languageId":"train-eng","binding":{"m":-5,"F_B":1,"v":120,"mu":0.2,"theta":0,"dist":800}})",
       "DomainViolation"},
      {R"({"languageId":"train-sale","binding":{"train":"t9"}})", "DomainViolation"},
  };
  for (const auto& c : cases) {
    const auto r = s.query(c.body);
    CHECK(r.status == 400);
    CHECK(json::parse(r.body)["error"] == c.code);
  }
}

TEST_CASE("requestId replays the first reply byte for byte") {
  Service s(test_config());
  auto with_id = json::parse(kEng);
  with_id["requestId"] = "abc";
  const auto a = s.query(with_id.dump());
  const auto b = s.query(with_id.dump());
  CHECK(a.body == b.body);
  CHECK(json::parse(s.stats().body)["user"]["direct"] == 0);
}

TEST_CASE("purge honours the store ttl") {
  auto clock = std::make_shared<ManualClock>(0.0);
  auto cfg = test_config();
  auto opts = manual_store(clock);
  opts.ttl = {10, 10, 10};
  Service s(cfg, opts);
  s.query(kEng);
  auto p = json::parse(s.purge(R"({"now": 5})").body);
  CHECK(p["purged"] == 0);
  p = json::parse(s.purge(R"({"now": 11})").body);
  CHECK(p["purged"].get<int>() >= 3);
  CHECK(p["stats"]["answers"] == 0);
  CHECK(s.purge("junk").status == 400);
}

TEST_CASE("languages and events") {
  Service s(test_config());
  const auto langs = json::parse(s.languages().body);
  REQUIRE(langs.is_array());
  CHECK(langs.size() == 3);
  s.query(kEng);
  const auto frames = s.event_frames(0);
  CHECK(frames.find("id: 1\n") != std::string::npos);
  CHECK(frames.find("event: reuse\n") != std::string::npos);
  CHECK(s.event_frames(s.events().last_seq()).empty());
}

TEST_CASE("http endpoints") {
  Service s(test_config());
  const int port = s.start();
  REQUIRE(port > 0);
  httplib::Client cli("127.0.0.1", port);
  cli.set_read_timeout(10, 0);

  auto r = cli.Post("/query", kEng, "application/json");
  REQUIRE(r);
  CHECK(r->status == 200);
  const auto first = json::parse(r->body);

  r = cli.Post("/query", kEng, "application/json");
  REQUIRE(r);
  CHECK(json::parse(r->body)["answer"].dump() == first["answer"].dump());
  CHECK(json::parse(r->body)["executed"] == 0);

  r = cli.Post("/query", "[]", "application/json");
  REQUIRE(r);
  CHECK(r->status == 400);

  r = cli.Get("/stats");
  REQUIRE(r);
  CHECK(json::parse(r->body)["answers"] == 1);

  r = cli.Get("/languages");
  REQUIRE(r);
  CHECK(json::parse(r->body).size() == 3);

  r = cli.Get("/events?since=0&follow=0");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(r->get_header_value("Content-Type").find("text/event-stream") == 0);
  CHECK(r->body.find("event: reuse") != std::string::npos);

  r = cli.Get("/events?follow=0", {{"Last-Event-ID", std::to_string(s.events().last_seq())}});
  REQUIRE(r);
  CHECK(r->body.empty());

  r = cli.Get("/events?since=x&follow=0");
  REQUIRE(r);
  CHECK(r->status == 400);

  r = cli.Post("/admin/purge", "{}", "application/json");
  REQUIRE(r);
  CHECK(r->status == 200);
  s.stop();
}

TEST_CASE("streaming events deliver new frames") {
  Service s(test_config());
  const int port = s.start();
  std::string got;
  std::thread reader([&] {
    httplib::Client cli("127.0.0.1", port);
    cli.set_read_timeout(10, 0);
    cli.Get("/events?since=0", [&](const char* data, size_t len) {
      got.append(data, len);
      return got.find("event: reuse") == std::string::npos;
    });
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(100));
  s.query(kEng);
  reader.join();
  CHECK(got.find("event: reuse") != std::string::npos);
  s.stop();
}
