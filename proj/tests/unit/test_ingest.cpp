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

#include <sstream>

#include "fixtures.hpp"
#include "json.hpp"
#include "mbbminer/error.hpp"
#include "mbbminer/ingest.hpp"
#include "mbbminer/random.hpp"
#include "mbbminer/store.hpp"

namespace mbbminer {
namespace {

using testing::at_s;
using testing::t0;

ParseResult parse(const std::string& text, InputFormat f = InputFormat::kNdjson, bool strict = false) {
  std::istringstream in(text);
  return parse_records(in, default_schema(), f, ParseOptions{strict});
}

TEST(Ingest, SingleNdjsonRecord) {
  const auto r = parse(R"({"ts":"2018-06-03T12:00:00Z","node":"n1","iface":"i1","fields":{"rtt":102.5}})");
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_TRUE(r.errors.empty());
  EXPECT_EQ(r.records[0].ts, t0());
  EXPECT_EQ(r.records[0].node_id, "n1");
  EXPECT_EQ(std::get<double>(r.records[0].values.at("rtt")), 102.5);
}

TEST(Ingest, TypeMismatchIsALineError) {
  const auto r = parse(R"({"ts":"2018-06-03T12:00:00Z","node":"n1","iface":"i1","fields":{"rtt":"fast"}})");
  EXPECT_TRUE(r.records.empty());
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0].line, 1);
  EXPECT_NE(r.errors[0].reason.find("type mismatch"), std::string::npos);
}

TEST(Ingest, CorruptedLinesCountedByLineOracle) {
  Rng rng(10);
  std::string text;
  std::size_t oracle_good = 0, oracle_bad = 0;
  std::vector<int> bad_lines;
  auto make = [](const std::string& ts, const std::string& node, const std::string& rtt) {
    return R"({"ts":)" + ts + R"(,"node":)" + node + R"(,"iface":"i1","fields":{"rtt":)" + rtt + "}}";
  };
  for (int i = 0; i < 10000; ++i) {
    const std::string ts = std::to_string(testing::kT0 + i * 1000000000LL);
    const std::string rtt = std::to_string(rng.uniform(50, 150));
    std::string line = make(ts, R"("n1")", rtt);
    if (i % 100 == 37) {
      switch (rng.uniform_index(4)) {
        case 0: line = line.substr(0, line.size() / 2); break;
        case 1: line = make(R"("bogus")", R"("n1")", rtt); break;
        case 2: line = make(ts, R"("n1")", R"("x")"); break;
        default: line = make(ts, R"("")", rtt); break;
      }
      bad_lines.push_back(i + 1);
    }
    text += line + "\n";
  }
  // Oracle: a line is good iff it is well-formed JSON with the expected shape.
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line, nullptr, false);
    const bool good = !j.is_discarded() && j.contains("ts") && j["ts"].is_number_integer() &&
                      j["node"].is_string() && !j["node"].get<std::string>().empty() &&
                      j["fields"]["rtt"].is_number();
    (good ? oracle_good : oracle_bad)++;
  }
  const auto r = parse(text);
  EXPECT_EQ(oracle_good, 9900u);
  EXPECT_EQ(r.records.size(), oracle_good);
  EXPECT_EQ(r.errors.size(), oracle_bad);
  EXPECT_EQ(r.lines, 10000u);
  for (std::size_t i = 0; i < r.errors.size(); ++i) EXPECT_EQ(r.errors[i].line, bad_lines[i]);
}

TEST(Ingest, UnknownFieldsWarnOrFailInStrictMode) {
  const std::string line = R"({"ts":0,"node":"n","iface":"i","fields":{"rtt":1,"colour":"red"}})";
  const auto lax = parse(line);
  EXPECT_EQ(lax.records.size(), 1u);
  EXPECT_EQ(lax.warnings.size(), 1u);
  EXPECT_FALSE(lax.records[0].values.contains("colour"));
  const auto strict = parse(line, InputFormat::kNdjson, true);
  EXPECT_TRUE(strict.records.empty());
  EXPECT_EQ(strict.errors.size(), 1u);
}

TEST(Ingest, TopLevelFeatureKeysAreNotSilentlyDropped) {
  const std::string line = R"({"ts":0,"node":"n","iface":"i","rtt":1})";
  const auto lax = parse(line);
  ASSERT_EQ(lax.records.size(), 1u);
  EXPECT_TRUE(lax.records[0].values.empty());
  ASSERT_EQ(lax.warnings.size(), 1u);
  EXPECT_NE(lax.warnings[0].reason.find("outside 'fields'"), std::string::npos);
  const auto strict = parse(line, InputFormat::kNdjson, true);
  EXPECT_TRUE(strict.records.empty());
  EXPECT_EQ(strict.errors.size(), 1u);
}

TEST(Ingest, CsvWithHeader) {
  const auto r = parse(
      "ts,node,iface,rtt,device_mode\n"
      "2018-06-03T12:00:00Z,n1,i1,100.5,LTE\n"
      "2018-06-03T12:00:01Z,n1,i1,,3G\n"
      "2018-06-03T12:00:02Z,n1,i1,abc,LTE\n"
      "2018-06-03T12:00:03Z,n1,i1,99\n",
      InputFormat::kCsv);
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.lines, 4u);
  ASSERT_EQ(r.errors.size(), 2u);
  EXPECT_EQ(r.errors[0].line, 4);
  EXPECT_EQ(r.errors[1].line, 5);
  EXPECT_FALSE(r.records[1].values.contains("rtt"));
  EXPECT_EQ(std::get<std::string>(r.records[1].values.at("device_mode")), "3G");
}

TEST(Ingest, CsvWithoutHeaderColumnsIsAnError) {
  const auto r = parse("a,b,c\n1,2,3\n", InputFormat::kCsv);
  EXPECT_TRUE(r.records.empty());
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0].line, 1);
}

TEST(Ingest, ParseSerializeParseRoundTrip) {
  Rng rng(3);
  const Schema schema = default_schema();
  std::vector<MeasurementRecord> recs;
  for (int i = 0; i < 500; ++i) {
    MeasurementRecord r{from_ns(static_cast<std::int64_t>(rng.next() >> 2)), "n" + std::to_string(i % 3), "if 1", {}};
    r.values["rtt"] = rng.normal(100, 20);
    if (i % 2) r.values["device_mode"] = std::string(i % 4 ? "LTE" : "3G");
    if (i % 5 == 0) r.values["rsrq"] = FeatureValue{};
    recs.push_back(std::move(r));
  }
  std::istringstream in(serialize_ndjson(recs, schema));
  const auto once = parse_records(in, schema, InputFormat::kNdjson);
  EXPECT_TRUE(once.errors.empty());
  EXPECT_EQ(once.records, recs);
  std::istringstream in2(serialize_ndjson(once.records, schema));
  EXPECT_EQ(parse_records(in2, schema, InputFormat::kNdjson).records, recs);
}

TEST(Load, EmptySequence) {
  SeriesStore store = SeriesStore::in_memory(default_schema());
  const LoadReport r = load({}, default_schema(), store);
  EXPECT_EQ(r.accepted, 0u);
  EXPECT_EQ(r.rejected, 0u);
  EXPECT_FALSE(r.time_extent);
}

TEST(Load, LastWriteWins) {
  SeriesStore store = SeriesStore::in_memory(default_schema());
  const std::vector<MeasurementRecord> a{{t0(), "n1", "i1", {{"rtt", 5.0}}}};
  const std::vector<MeasurementRecord> b{{t0(), "n1", "i1", {{"rtt", 7.0}}}};
  load(a, default_schema(), store);
  load(b, default_schema(), store);
  const auto obs = store.observations({"n1", "i1", "rtt"}, t0(), at_s(1));
  ASSERT_EQ(obs.size(), 1u);
  EXPECT_EQ(std::get<double>(obs[0].value), 7.0);
  // Within one batch the later record wins too.
  SeriesStore s2 = SeriesStore::in_memory(default_schema());
  std::vector<MeasurementRecord> both = a;
  both.push_back(b[0]);
  load(both, default_schema(), s2);
  EXPECT_EQ(std::get<double>(s2.observations({"n1", "i1", "rtt"}, t0(), at_s(1))[0].value), 7.0);
}

TEST(Load, OutOfOrderBatchIsStoredSorted) {
  Rng rng(4);
  std::vector<MeasurementRecord> recs;
  for (int i = 0; i < 2000; ++i) {
    recs.push_back({at_s(rng.uniform(0, 3600)), "n1", "i1", {{"rtt", rng.uniform(0, 100)}}});
  }
  SeriesStore store = SeriesStore::in_memory(default_schema());
  const LoadReport r = load(recs, default_schema(), store);
  EXPECT_EQ(r.accepted, 2000u);
  Timestamp lo = recs[0].ts, hi = recs[0].ts;
  for (const auto& x : recs) {
    lo = std::min(lo, x.ts);
    hi = std::max(hi, x.ts);
  }
  EXPECT_EQ(r.time_extent, (TimeExtent{lo, hi}));
  // Full scan oracle over the raw log and every ladder level.
  const auto obs = store.observations({"n1", "i1", "rtt"}, at_s(-1), at_s(4000));
  for (std::size_t i = 1; i < obs.size(); ++i) EXPECT_LT(obs[i - 1].ts, obs[i].ts);
  for (auto level : store.ladder().levels) {
    const auto b = store.buckets({"n1", "i1", "rtt"}, level, at_s(-3600), at_s(7200));
    for (std::size_t i = 1; i < b.size(); ++i) EXPECT_LT(b[i - 1].start, b[i].start);
  }
}

TEST(Load, IdempotentForIdenticalBatches) {
  const auto recs = testing::to_records(testing::step_series(), "n1", "i1", "rtt");
  SeriesStore once = SeriesStore::in_memory(default_schema());
  SeriesStore twice = SeriesStore::in_memory(default_schema());
  load(recs, default_schema(), once);
  load(recs, default_schema(), twice);
  load(recs, default_schema(), twice);
  const SeriesId id{"n1", "i1", "rtt"};
  EXPECT_EQ(once.observations(id, at_s(0), at_s(2000)), twice.observations(id, at_s(0), at_s(2000)));
  for (auto level : once.ladder().levels) {
    EXPECT_EQ(once.buckets(id, level, at_s(-3600), at_s(7200)), twice.buckets(id, level, at_s(-3600), at_s(7200)));
  }
}

TEST(Load, RejectsInvalidRecordsAndSchemaMismatch) {
  SeriesStore store = SeriesStore::in_memory(default_schema());
  const std::vector<MeasurementRecord> recs{{t0(), "n1", "i1", {{"rtt", 1.0}}},
                                            {t0(), "", "i1", {{"rtt", 1.0}}},
                                            {t0(), "n1", "i1", {{"rtt", std::string("x")}}}};
  const LoadReport r = load(recs, default_schema(), store);
  EXPECT_EQ(r.accepted, 1u);
  EXPECT_EQ(r.rejected, 2u);
  EXPECT_EQ(r.rejections.size(), 2u);

  Schema other = default_schema();
  for (auto& f : other.features) {
    if (f.name == "rtt") f.aggregation = Aggregation::kMax;
  }
  try {
    load(recs, other, store);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaMismatch);
  }
}

}  // namespace
}  // namespace mbbminer
