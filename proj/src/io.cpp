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

#include "mbbminer/io.hpp"

#include <map>
#include <sstream>

#include "mbbminer/csv.hpp"
#include "mbbminer/error.hpp"

namespace mbbminer {

Json value_to_json(const FeatureValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  return nullptr;
}

namespace {

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::kParse, msg); }

Timestamp ts_from(const std::string& s, const std::string& what) {
  auto t = parse_timestamp(s);
  if (!t) bad("bad " + what + " timestamp '" + s + "'");
  return *t;
}

double number_from(const std::string& s, const std::string& what) {
  auto v = parse_double(s);
  if (!v) bad("bad " + what + " '" + s + "'");
  return *v;
}

std::uint64_t count_from(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::exception&) {
  }
  bad("bad " + what + " '" + s + "'");
}

// Header-indexed CSV reader.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> lines;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    bad("missing CSV column '" + name + "'");
  }
};

Table read_table(std::istream& in) {
  Table t;
  int line = 0;
  if (!read_csv_row(in, t.header, line)) bad("empty CSV input");
  std::vector<std::string> row;
  while (read_csv_row(in, row, line)) {
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != t.header.size()) {
      bad("CSV line " + std::to_string(line) + ": expected " + std::to_string(t.header.size()) +
          " fields, got " + std::to_string(row.size()));
    }
    t.rows.push_back(row);
    t.lines.push_back(line);
  }
  return t;
}

}  // namespace

Json region_to_json(const AnomalyRegion& r) {
  Json j;
  j["node"] = r.node_id;
  j["interface"] = r.interface_id;
  j["feature"] = r.feature;
  j["detector"] = std::string(detector_name(r.detector));
  j["start"] = format_timestamp(r.start);
  j["end"] = format_timestamp(r.end);
  j["score"] = r.score;
  j["direction"] = std::string(direction_name(r.direction));
  j["n_outliers"] = r.outliers.size();
  Json outliers = Json::array();
  for (auto t : r.outliers) outliers.push_back(format_timestamp(t));
  j["outliers"] = std::move(outliers);
  Json params = Json::object();
  for (const auto& [k, v] : r.params) params[k] = v;
  j["params"] = std::move(params);
  return j;
}

AnomalyRegion region_from_json(const Json& j) {
  if (!j.is_object()) bad("region must be a JSON object");
  AnomalyRegion r;
  try {
    r.node_id = j.value("node", "");
    r.interface_id = j.value("interface", "");
    r.feature = j.value("feature", "");
    if (j.contains("detector")) {
      auto d = parse_detector(j.at("detector").get<std::string>());
      if (!d) bad("unknown detector '" + j.at("detector").get<std::string>() + "'");
      r.detector = *d;
    }
    r.start = ts_from(j.at("start").get<std::string>(), "region start");
    r.end = ts_from(j.at("end").get<std::string>(), "region end");
    r.score = j.value("score", 0.0);
    if (j.contains("direction")) {
      auto d = parse_direction(j.at("direction").get<std::string>());
      if (!d) bad("unknown direction '" + j.at("direction").get<std::string>() + "'");
      r.direction = *d;
    }
    if (j.contains("outliers")) {
      for (const auto& t : j.at("outliers")) r.outliers.push_back(ts_from(t.get<std::string>(), "outlier"));
    }
    if (j.contains("params")) {
      for (const auto& [k, v] : j.at("params").items()) r.params[k] = v.get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("region: ") + e.what());
  }
  if (r.end < r.start) throw Error(ErrorCode::kInvalidArgument, "region end precedes its start");
  return r;
}

Json regions_to_json(std::span<const AnomalyRegion> regions) {
  Json arr = Json::array();
  for (const auto& r : regions) arr.push_back(region_to_json(r));
  return arr;
}

std::string regions_to_csv(std::span<const AnomalyRegion> regions) {
  std::string out = "node,interface,feature,detector,start,end,score,direction,n_outliers\n";
  for (const auto& r : regions) {
    out += csv_join({r.node_id, r.interface_id, r.feature, std::string(detector_name(r.detector)),
                     format_timestamp(r.start), format_timestamp(r.end), format_double(r.score),
                     std::string(direction_name(r.direction)), std::to_string(r.outliers.size())});
    out += '\n';
  }
  return out;
}

std::vector<AnomalyRegion> regions_from_csv(std::istream& in) {
  const Table t = read_table(in);
  const auto c_node = t.column("node"), c_iface = t.column("interface"), c_feat = t.column("feature"),
             c_det = t.column("detector"), c_start = t.column("start"), c_end = t.column("end"),
             c_score = t.column("score"), c_dir = t.column("direction");
  std::vector<AnomalyRegion> out;
  for (const auto& row : t.rows) {
    AnomalyRegion r;
    r.node_id = row[c_node];
    r.interface_id = row[c_iface];
    r.feature = row[c_feat];
    auto det = parse_detector(row[c_det]);
    if (!det) bad("unknown detector '" + row[c_det] + "'");
    r.detector = *det;
    r.start = ts_from(row[c_start], "region start");
    r.end = ts_from(row[c_end], "region end");
    r.score = number_from(row[c_score], "score");
    auto dir = parse_direction(row[c_dir]);
    if (!dir) bad("unknown direction '" + row[c_dir] + "'");
    r.direction = *dir;
    out.push_back(std::move(r));
  }
  return out;
}

Json rows_to_json(std::span<const EnrichmentRow> rows) {
  Json arr = Json::array();
  for (const auto& r : rows) {
    Json subset = Json::array();
    for (const auto& [f, v] : r.subset) subset.push_back(Json{{"feature", f}, {"value", v}});
    Json j;
    j["subset"] = std::move(subset);
    j["label"] = subset_label(r.subset);
    j["count"] = r.n;
    j["count_class"] = r.k;
    j["enrichment"] = r.enrichment;
    j["p_value"] = r.p_value;
    j["q_value"] = r.q_value;
    arr.push_back(std::move(j));
  }
  return arr;
}

std::string rows_to_csv(std::span<const EnrichmentRow> rows) {
  std::string out = "subset,count,count_class,enrichment,p_value,q_value\n";
  for (const auto& r : rows) {
    out += csv_join({subset_label(r.subset), std::to_string(r.n), std::to_string(r.k), format_double(r.enrichment),
                     format_double(r.p_value), format_double(r.q_value)});
    out += '\n';
  }
  return out;
}

namespace {

// Inverse of subset_label: "f=v & g=w". Values may contain '=' but features
// may not.
Subset parse_subset_label(const std::string& label) {
  Subset s;
  std::size_t pos = 0;
  while (pos <= label.size()) {
    std::size_t amp = label.find(" & ", pos);
    const std::string part = label.substr(pos, amp == std::string::npos ? std::string::npos : amp - pos);
    const auto eq = part.find('=');
    if (eq == std::string::npos) bad("bad subset '" + label + "'");
    s.emplace_back(part.substr(0, eq), part.substr(eq + 1));
    if (amp == std::string::npos) break;
    pos = amp + 3;
  }
  return s;
}

}  // namespace

std::vector<EnrichmentRow> rows_from_csv(std::istream& in) {
  const Table t = read_table(in);
  const auto c_sub = t.column("subset"), c_n = t.column("count"), c_k = t.column("count_class"),
             c_e = t.column("enrichment"), c_p = t.column("p_value"), c_q = t.column("q_value");
  std::vector<EnrichmentRow> out;
  for (const auto& row : t.rows) {
    EnrichmentRow r;
    r.subset = parse_subset_label(row[c_sub]);
    r.n = count_from(row[c_n], "count");
    r.k = count_from(row[c_k], "count_class");
    r.enrichment = number_from(row[c_e], "enrichment");
    r.p_value = number_from(row[c_p], "p_value");
    r.q_value = number_from(row[c_q], "q_value");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<EnrichmentRow> rows_from_json(const Json& j) {
  std::vector<EnrichmentRow> out;
  try {
    for (const auto& e : j) {
      EnrichmentRow r;
      for (const auto& s : e.at("subset")) {
        r.subset.emplace_back(s.at("feature").get<std::string>(), s.at("value").get<std::string>());
      }
      r.n = e.at("count").get<std::uint64_t>();
      r.k = e.at("count_class").get<std::uint64_t>();
      r.enrichment = e.at("enrichment").get<double>();
      r.p_value = e.at("p_value").get<double>();
      r.q_value = e.at("q_value").get<double>();
      out.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("enrichment rows: ") + e.what());
  }
  return out;
}

Json query_to_json(const QueryResult& r, const SeriesStore& store) {
  Json j;
  j["granularity"] = format_duration(r.granularity);
  Json series = Json::object();
  for (const auto& [feature, buckets] : r.series) {
    const bool numeric = store.schema().at(feature).kind == FeatureKind::kNumeric;
    Json arr = Json::array();
    for (const auto& b : buckets) {
      Json e;
      e["start"] = format_timestamp(b.start);
      e["value"] = value_to_json(b.value);
      e["count"] = b.count;
      if (numeric) {
        e["min"] = b.min;
        e["max"] = b.max;
      }
      arr.push_back(std::move(e));
    }
    series[feature] = std::move(arr);
  }
  j["series"] = std::move(series);
  return j;
}

std::string query_to_csv(const QueryResult& r, const SeriesStore& store) {
  std::string out = "feature,start,count,value,min,max\n";
  for (const auto& [feature, buckets] : r.series) {
    const bool numeric = store.schema().at(feature).kind == FeatureKind::kNumeric;
    for (const auto& b : buckets) {
      std::string value;
      if (const auto* d = std::get_if<double>(&b.value)) value = format_double(*d);
      else if (const auto* s = std::get_if<std::string>(&b.value)) value = *s;
      out += csv_join({feature, format_timestamp(b.start), std::to_string(b.count), value,
                       numeric ? format_double(b.min) : "", numeric ? format_double(b.max) : ""});
      out += '\n';
    }
  }
  return out;
}

Json fleet_to_json(const FleetResult& r) {
  Json j;
  j["mean"] = r.mean;
  j["sd"] = r.sd;
  j["threshold"] = r.threshold;
  Json arr = Json::array();
  for (const auto& b : r.buckets) {
    arr.push_back(Json{{"start", format_timestamp(b.start)}, {"count", b.count}, {"flagged", b.flagged}});
  }
  j["buckets"] = std::move(arr);
  return j;
}

std::string fleet_to_csv(const FleetResult& r) {
  std::string out = "bucket_start,count,flagged\n";
  for (const auto& b : r.buckets) {
    out += format_timestamp(b.start) + "," + std::to_string(b.count) + "," + (b.flagged ? "1" : "0") + "\n";
  }
  return out;
}

Json interfaces_to_json(const SeriesStore& store) {
  std::map<std::string, Json> nodes;
  for (const auto& info : store.interfaces()) {
    Json features = Json::object();
    for (const auto& [name, ext] : info.features) {
      features[name] = Json{{"first", format_timestamp(ext.first)}, {"last", format_timestamp(ext.last)}};
    }
    auto& node = nodes[info.node_id];
    if (node.is_null()) node = Json{{"node", info.node_id}, {"interfaces", Json::array()}};
    node["interfaces"].push_back(Json{{"interface", info.interface_id}, {"features", std::move(features)}});
  }
  Json j;
  Json arr = Json::array();
  for (auto& [name, node] : nodes) arr.push_back(std::move(node));
  j["nodes"] = std::move(arr);
  Json feats = Json::array();
  for (const auto& f : store.schema().features) {
    feats.push_back(Json{{"name", f.name},
                         {"kind", std::string(kind_name(f.kind))},
                         {"unit", f.unit},
                         {"orientation", std::string(orientation_name(f.orientation))}});
  }
  j["features"] = std::move(feats);
  j["granularities"] = Json::array();
  for (auto level : store.ladder().levels) j["granularities"].push_back(format_duration(level));
  return j;
}

std::string instances_to_csv(std::span<const Instance> instances, const std::vector<std::string>& features) {
  std::vector<std::string> header{"ts", "node", "iface"};
  header.insert(header.end(), features.begin(), features.end());
  header.push_back("anomaly");
  std::string out = csv_join(header) + "\n";
  std::vector<std::string> row;
  for (const auto& inst : instances) {
    row.clear();
    row.push_back(format_timestamp(inst.ts));
    row.push_back(inst.node_id);
    row.push_back(inst.interface_id);
    for (const auto& f : features) {
      const FeatureValue& v = inst.value(f);
      if (const auto* d = std::get_if<double>(&v)) row.push_back(format_double(*d));
      else if (const auto* s = std::get_if<std::string>(&v)) row.push_back(*s);
      else row.emplace_back();
    }
    row.push_back(!inst.label ? "" : *inst.label == Label::kAnomalous ? "1" : "0");
    out += csv_join(row);
    out += '\n';
  }
  return out;
}

LabeledDataset instances_from_csv(std::istream& in, const Schema& schema) {
  const Table t = read_table(in);
  const auto c_ts = t.column("ts"), c_node = t.column("node"), c_iface = t.column("iface"),
             c_label = t.column("anomaly");
  LabeledDataset data;
  std::vector<std::size_t> cols;
  std::vector<bool> numeric;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (c == c_ts || c == c_node || c == c_iface || c == c_label) continue;
    cols.push_back(c);
    data.features.push_back(t.header[c]);
    if (const auto* spec = schema.find(t.header[c])) {
      numeric.push_back(spec->kind == FeatureKind::kNumeric);
    } else {
      bool all_numbers = true;
      for (const auto& row : t.rows) {
        if (!row[c].empty() && !parse_double(row[c])) all_numbers = false;
      }
      numeric.push_back(all_numbers);
    }
  }
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = "CSV line " + std::to_string(t.lines[r]);
    Instance inst;
    inst.ts = ts_from(row[c_ts], where);
    inst.node_id = row[c_node];
    inst.interface_id = row[c_iface];
    for (std::size_t i = 0; i < cols.size(); ++i) {
      const std::string& cell = row[cols[i]];
      if (cell.empty()) continue;
      if (numeric[i]) inst.values[data.features[i]] = number_from(cell, where + " value");
      else inst.values[data.features[i]] = cell;
    }
    const std::string& label = row[c_label];
    if (label == "1") inst.label = Label::kAnomalous;
    else if (label == "0") inst.label = Label::kRegular;
    else if (!label.empty()) bad(where + ": anomaly must be 1, 0 or empty");
    data.instances.push_back(std::move(inst));
  }
  return data;
}

}  // namespace mbbminer
