/*
 * Copyright 2026 The mbbminer Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <set>
#include <thread>
#include <unistd.h>

#include "fixtures.hpp"
#include "mbbminer/app.hpp"
#include "mbbminer/io.hpp"
#include "mbbminer/service.hpp"
// After the Eigen-dependent headers.
#include "httplib.h"

namespace mbbminer {
namespace {

using testing::at_s;
using testing::t0;

std::shared_ptr<const SeriesStore> make_store() {
  auto s = std::make_shared<SeriesStore>(SeriesStore::in_memory(default_schema()));
  auto records = testing::step_event_records();
  for (auto& r : records) {
    r.values["operator"] = std::string("opA");
    r.values["latitude"] = 59.0 + to_seconds(r.ts - t0()) / 1200.0;
    r.values["longitude"] = 10.0;
  }
  auto dip = testing::to_records(testing::dip_series(), "n2", "i1", "rtt");
  records.insert(records.end(), dip.begin(), dip.end());
  s->append(records);
  return s;
}

const std::shared_ptr<const SeriesStore>& store() {
  static const auto s = make_store();
  return s;
}

ApiResponse get(Service& svc, const std::string& path, std::map<std::string, std::string> q) {
  return svc.handle({"GET", path, std::move(q), ""});
}

ApiResponse post(Service& svc, const std::string& path, const Json& body) {
  return svc.handle({"POST", path, {}, body.dump()});
}

Json detect_body() {
  return Json{{"method", "rolling"},
              {"target", "rtt"},
              {"scope", {{"node", "n1"}, {"interface", "i1"}, {"from", format_timestamp(t0())}, {"to", format_timestamp(at_s(1200))}}},
              {"params", Json::object()}};
}

void expect_error(const ApiResponse& r, int status, const std::string& code) {
  EXPECT_EQ(r.status, status) << r.body;
  const auto j = Json::parse(r.body);
  EXPECT_EQ(j.at("error").at("status"), status);
  EXPECT_EQ(j.at("error").at("code"), code);
  EXPECT_FALSE(j.at("error").at("message").get<std::string>().empty());
}

TEST(Service, SeriesPicksGranularityFromTheLadder) {
  Service svc(store());
  const auto r = get(svc, "/api/series",
                     {{"node", "n1"}, {"iface", "i1"}, {"feature", "rtt"}, {"from", format_timestamp(t0())},
                      {"to", format_timestamp(t0() + std::chrono::days(7))}, {"max_points", "5000"}});
  ASSERT_EQ(r.status, 200) << r.body;
  const auto j = Json::parse(r.body);
  EXPECT_EQ(j.at("granularity"), "30m");
  EXPECT_EQ(j.at("series").at("rtt").size(), 1u);
  const auto hour = Json::parse(get(svc, "/api/series",
                                    {{"node", "n1"}, {"iface", "i1"}, {"feature", "rtt"},
                                     {"from", format_timestamp(t0())}, {"to", format_timestamp(at_s(3600))}})
                                    .body);
  EXPECT_EQ(hour.at("granularity"), "1s");
  EXPECT_EQ(hour.at("series").at("rtt").size(), 1200u);
}

TEST(Service, ErrorEnvelopes) {
  Service svc(store());
  expect_error(get(svc, "/api/series",
                   {{"node", "n1"}, {"iface", "i1"}, {"feature", "rtt"}, {"from", format_timestamp(at_s(10))},
                    {"to", format_timestamp(at_s(10))}}),
               422, "invalid_argument");
  expect_error(get(svc, "/api/series",
                   {{"node", "nope"}, {"iface", "i1"}, {"feature", "rtt"}, {"from", format_timestamp(t0())},
                    {"to", format_timestamp(at_s(10))}}),
               404, "unknown_key");
  expect_error(get(svc, "/api/series", {{"node", "n1"}}), 400, "parse");
  expect_error(svc.handle({"POST", "/api/detect", {}, "{not json"}), 400, "parse");
  expect_error(get(svc, "/api/nowhere", {}), 404, "not_found");
  expect_error(get(svc, "/api/detect", {}), 404, "not_found");
  auto bad = detect_body();
  bad["params"]["k_sigma"] = -2;
  expect_error(post(svc, "/api/detect", bad), 422, "invalid_argument");
}

TEST(Service, Nodes) {
  Service svc(store());
  const auto r = get(svc, "/api/nodes", {});
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(Json::parse(r.body), interfaces_to_json(*store()));
}

TEST(Service, DetectAndExplainMatchTheLibrary) {
  Service svc(store());
  const auto d = post(svc, "/api/detect", detect_body());
  ASSERT_EQ(d.status, 200) << d.body;
  const auto dj = Json::parse(d.body);
  EXPECT_EQ(dj, detect_outcome_to_json(run_detect(*store(), detect_request_from_json(detect_body()))));
  ASSERT_EQ(dj.at("regions").size(), 1u);
  const Json eb{{"regions", dj.at("regions")}, {"features", Json::array({"event_type"})}};
  const auto x = post(svc, "/api/explain", eb);
  ASSERT_EQ(x.status, 200) << x.body;
  const auto xj = Json::parse(x.body);
  EXPECT_EQ(xj, explain_outcome_to_json(run_explain(*store(), explain_request_from_json(eb))));
  EXPECT_EQ(xj.at("rows")[0].at("subset"), Json::parse(R"([{"feature":"event_type","value":"task_started"}])"));

  // "all" keeps only features stored on the region's interface, minus the target.
  const auto all = post(svc, "/api/explain", Json{{"regions", dj.at("regions")}, {"features", "all"}});
  ASSERT_EQ(all.status, 200) << all.body;
  std::set<std::string> expected;
  const Json nodes = Json::parse(get(svc, "/api/nodes", {}).body);
  for (const auto& [name, ext] : nodes.at("nodes")[0].at("interfaces")[0].at("features").items()) {
    if (name != "rtt") expected.insert(name);
  }
  const auto got = Json::parse(all.body).at("features").get<std::set<std::string>>();
  EXPECT_EQ(got, expected);
  EXPECT_FALSE(got.count("cid"));
}

TEST(Service, Geo) {
  Service svc(store());
  const auto r = get(svc, "/api/geo",
                     {{"from", format_timestamp(t0())}, {"to", format_timestamp(at_s(1200))}, {"step", "10s"},
                      {"bbox", "59.5,0,60,20"}, {"feature", "rtt"}});
  ASSERT_EQ(r.status, 200) << r.body;
  const auto j = Json::parse(r.body);
  EXPECT_EQ(j.at("features"), Json::array({"latitude", "longitude", "rtt"}));
  EXPECT_EQ(j.at("instances").size(), 60u);
  for (const auto& inst : j.at("instances")) EXPECT_GE(inst.at("values").at("latitude").get<double>(), 59.5);
  const auto csv = get(svc, "/api/geo",
                       {{"from", format_timestamp(t0())}, {"to", format_timestamp(at_s(1200))}, {"step", "10s"},
                        {"bbox", "59.5,0,60,20"}, {"format", "csv"}});
  EXPECT_EQ(csv.content_type, "text/csv");
  expect_error(get(svc, "/api/geo", {{"from", format_timestamp(t0())}, {"to", format_timestamp(at_s(10))}, {"bbox", "1,2"}}),
               400, "parse");
}

TEST(Service, FleetAndExport) {
  Service svc(store());
  const auto f = get(svc, "/api/fleet",
                     {{"from", format_timestamp(t0())}, {"to", format_timestamp(at_s(7200))}, {"operator", "opA"}});
  ASSERT_EQ(f.status, 200) << f.body;
  const auto fj = Json::parse(f.body);
  EXPECT_EQ(fj.at("operator"), "opA");
  EXPECT_EQ(fj.at("buckets").size(), 24u);
  const Json eb{{"scope", {{"node", "n1"}, {"interface", "i1"}, {"from", format_timestamp(t0())}, {"to", format_timestamp(at_s(60))}}},
                {"labels", Json::array()},
                {"features", Json::array({"rtt"})}};
  const auto e = post(svc, "/api/export", eb);
  ASSERT_EQ(e.status, 200) << e.body;
  EXPECT_EQ(e.content_type, "text/csv");
  EXPECT_EQ(e.body.substr(0, e.body.find('\n')), "ts,node,iface,rtt,anomaly");
  EXPECT_EQ(std::count(e.body.begin(), e.body.end(), '\n'), 61);
}

TEST(Service, BudgetOverrunIsTimeout) {
  ServiceOptions opt;
  opt.budget = std::chrono::milliseconds(1);
  Service svc(store(), opt);
  auto body = detect_body();
  body["method"] = "baseline";
  body["params"] = Json{{"features", "event_type"}, {"n_trees", 2000}};
  expect_error(post(svc, "/api/detect", body), 422, "timeout");
}

TEST(Service, ConcurrentRequestsMatchSequentialOnes) {
  Service svc(store());
  const std::vector<ApiRequest> reqs{
      {"POST", "/api/detect", {}, detect_body().dump()},
      {"GET", "/api/nodes", {}, ""},
      {"GET", "/api/series", {{"node", "n2"}, {"iface", "i1"}, {"feature", "rtt"}, {"from", format_timestamp(t0())}, {"to", format_timestamp(at_s(7200))}, {"max_points", "300"}}, ""},
      {"GET", "/api/fleet", {{"from", format_timestamp(t0())}, {"to", format_timestamp(at_s(7200))}}, ""},
  };
  std::vector<std::string> want;
  for (const auto& r : reqs) want.push_back(svc.handle(r).body);
  std::vector<std::string> got(reqs.size() * 4);
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < got.size(); ++i) {
    threads.emplace_back([&, i] { got[i] = svc.handle(reqs[i % reqs.size()]).body; });
  }
  for (auto& t : threads) t.join();
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i], want[i % reqs.size()]) << i;
}

TEST(Service, ReloadsWhenTheStoreChanges) {
  testing::TempDir dir;
  {
    SeriesStore s = SeriesStore::create(dir / "store", default_schema());
    s.append(testing::to_records(testing::step_series(), "n1", "i1", "rtt"));
  }
  ServiceOptions opt;
  opt.store_path = dir / "store";
  Service svc(opt);
  EXPECT_EQ(Json::parse(get(svc, "/api/nodes", {}).body).at("nodes").size(), 1u);
  std::this_thread::sleep_for(std::chrono::milliseconds(20));
  {
    SeriesStore s = SeriesStore::open(dir / "store");
    s.append(testing::to_records(testing::step_series(), "n9", "i1", "rtt"));
  }
  EXPECT_EQ(Json::parse(get(svc, "/api/nodes", {}).body).at("nodes").size(), 2u);
}

TEST(Service, HttpRoundTripWithCors) {
  ServiceOptions opt;
  opt.host = "127.0.0.1";
  opt.cors_origin = "http://localhost:5173";
  int port = 0;
  std::unique_ptr<Service> svc;
  std::thread server;
  std::unique_ptr<httplib::Client> client;
  for (int attempt = 0; attempt < 20 && !client; ++attempt) {
    port = 20000 + static_cast<int>((::getpid() * 7 + attempt * 131) % 20000);
    opt.port = port;
    svc = std::make_unique<Service>(store(), opt);
    server = std::thread([&] { svc->serve(); });
    auto c = std::make_unique<httplib::Client>("127.0.0.1", port);
    for (int i = 0; i < 100; ++i) {
      if (auto res = c->Get("/api/nodes")) {
        client = std::move(c);
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    if (!client) {
      svc->stop();
      server.join();
    }
  }
  ASSERT_TRUE(client) << "could not start the server";

  auto res = client->Get("/api/nodes");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "http://localhost:5173");
  EXPECT_EQ(Json::parse(res->body), interfaces_to_json(*store()));

  res = client->Post("/api/detect", detect_body().dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->body, post(*svc, "/api/detect", detect_body()).body);

  res = client->Get("/api/series?node=n1&iface=i1&feature=rtt&from=2018-06-03T12:00:00Z&to=2018-06-03T12:00:00Z");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 422);

  res = client->Options("/api/detect");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 204);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Methods"), "GET, POST, OPTIONS");

  svc->stop();
  server.join();
}

}  // namespace
}  // namespace mbbminer
