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

#include "mbbminer/app.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "mbbminer/csv.hpp"
#include "mbbminer/error.hpp"
#include "mbbminer/parallel.hpp"

namespace mbbminer {
namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::kInvalidArgument, msg); }
[[noreturn]] void malformed(const std::string& msg) { throw Error(ErrorCode::kParse, msg); }

double to_real(const std::string& key, const std::string& v) {
  auto d = parse_double(v);
  if (!d || !std::isfinite(*d)) invalid(key + ": expected a number, got '" + v + "'");
  return *d;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) invalid(key + ": expected an integer, got '" + v + "'");
  return out;
}

Duration to_duration(const std::string& key, const std::string& v) {
  if (auto d = parse_duration(v); d && v.find_first_not_of("0123456789") != std::string::npos) return *d;
  // A bare number means seconds.
  if (auto s = parse_double(v); s && std::isfinite(*s)) {
    return std::chrono::duration_cast<Duration>(std::chrono::duration<double>(*s));
  }
  invalid(key + ": expected a duration, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= v.size()) {
    const auto comma = v.find(',', pos);
    std::string item = v.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string json_scalar_text(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_float()) return format_double(v.get<double>());
  if (v.is_number()) return v.dump();
  if (v.is_array()) {
    std::string out;
    for (const auto& e : v) out += (out.empty() ? "" : ",") + json_scalar_text(e);
    return out;
  }
  malformed("parameter values must be strings, numbers or lists");
}

Timestamp json_ts(const Json& j, const std::string& what) {
  if (j.is_number_integer()) return from_ns(j.get<std::int64_t>());
  if (!j.is_string()) malformed(what + " must be an RFC3339 string");
  auto t = parse_timestamp(j.get<std::string>());
  if (!t) malformed("bad " + what + " '" + j.get<std::string>() + "'");
  return *t;
}

Scope scope_from_json(const Json& j) {
  if (!j.is_object()) malformed("scope must be an object");
  Scope s;
  s.node_id = j.value("node", "");
  s.interface_id = j.contains("interface") ? j.value("interface", "") : j.value("iface", "");
  if (j.contains("from")) s.from = json_ts(j.at("from"), "scope.from");
  if (j.contains("to")) s.to = json_ts(j.at("to"), "scope.to");
  if (j.contains("step")) s.step = to_duration("step", json_scalar_text(j.at("step")));
  return s;
}

void require_interface(const SeriesStore& store, const std::string& node, const std::string& iface) {
  if (!store.has_interface(node, iface)) {
    throw Error(ErrorCode::kUnknownKey, "unknown interface '" + iface + "' on node '" + node + "'");
  }
}

// [first, last + 1ns) over the given features; nullopt without data.
std::optional<std::pair<Timestamp, Timestamp>> stored_range(const SeriesStore& store, const std::string& node,
                                                            const std::string& iface,
                                                            const std::vector<std::string>& features) {
  std::optional<std::pair<Timestamp, Timestamp>> out;
  for (const auto& f : features) {
    auto ext = store.extent(SeriesId{node, iface, f});
    if (!ext) continue;
    const Timestamp end = ext->last + Duration(1);
    if (!out) out = std::pair{ext->first, end};
    else out = std::pair{std::min(out->first, ext->first), std::max(out->second, end)};
  }
  return out;
}

std::pair<Timestamp, Timestamp> resolve_range(const SeriesStore& store, const Scope& scope,
                                              const std::vector<std::string>& features) {
  Timestamp from, to;
  if (!scope.from || !scope.to) {
    auto r = stored_range(store, scope.node_id, scope.interface_id, features);
    if (!r) throw Error(ErrorCode::kTooFewPoints, "no stored data for the requested scope");
    from = scope.from.value_or(r->first);
    to = scope.to.value_or(r->second);
  } else {
    from = *scope.from;
    to = *scope.to;
  }
  if (from >= to) invalid("range is empty (from >= to)");
  return {from, to};
}

std::vector<Point> raw_points(const SeriesStore& store, const SeriesId& id, Timestamp from, Timestamp to) {
  std::vector<Point> out;
  for (const auto& o : store.observations(id, from, to)) {
    if (const auto* v = std::get_if<double>(&o.value)) out.push_back({o.ts, *v});
  }
  return out;
}

void tag(std::vector<AnomalyRegion>& regions, const std::string& node, const std::string& iface,
         const std::string& feature) {
  for (auto& r : regions) {
    r.node_id = node;
    r.interface_id = iface;
    r.feature = feature;
  }
}

}  // namespace

void set_detect_param(DetectRequest& req, const std::string& key, const std::string& value) {
  auto& r = req.rolling;
  auto& b = req.baseline;
  auto& d = req.dist;
  if (key == "window") r.window = to_duration(key, value);
  else if (key == "k_sigma") r.k_sigma = to_real(key, value);
  else if (key == "sigma_floor") r.sigma_floor = to_real(key, value);
  else if (key == "min_cluster") r.min_cluster = b.min_cluster = to_int<int>(key, value);
  else if (key == "max_gap") r.max_gap = b.max_gap = to_duration(key, value);
  else if (key == "features") b.features = split_list(value);
  else if (key == "quantile") b.quantile = to_real(key, value);
  else if (key == "residual_quantile") b.residual_quantile = to_real(key, value);
  else if (key == "n_trees") b.forest.n_trees = to_int<int>(key, value);
  else if (key == "min_leaf") b.forest.min_leaf = to_int<int>(key, value);
  else if (key == "mtry") b.forest.mtry = to_int<int>(key, value);
  else if (key == "max_depth") b.forest.max_depth = to_int<int>(key, value);
  else if (key == "seed") b.forest.seed = to_int<std::uint64_t>(key, value);
  else if (key == "threads") b.forest.threads = to_int<int>(key, value);
  else if (key == "segment") d.segment = to_duration(key, value);
  else if (key == "kl_threshold") d.kl_threshold = to_real(key, value);
  else if (key == "grid_points") d.grid_points = to_int<int>(key, value);
  else if (key == "density_floor") d.density_floor = to_real(key, value);
  else invalid("unknown detector parameter '" + key + "'");
}

Json default_params_json() {
  Json j;
  Json rolling = Json::object();
  for (const auto& [k, v] : RollingParams{}.snapshot()) rolling[k] = v;
  Json baseline = Json::object();
  BaselineParams bp;
  for (const auto& [k, v] : bp.snapshot(Orientation::kLowerIsBetter)) baseline[k] = v;
  baseline["quantile"] = "0.1 (lower_is_better) / 0.9 (otherwise)";
  baseline["mtry"] = "ceil(sqrt(#features))";
  baseline["max_depth"] = "unlimited";
  Json dist = Json::object();
  for (const auto& [k, v] : DistParams{}.snapshot()) dist[k] = v;
  j["rolling"] = std::move(rolling);
  j["baseline"] = std::move(baseline);
  j["distribution"] = std::move(dist);
  j["explain"] = Json{{"max_subset_size", 2}, {"discretization", "quartile"}, {"top_m", 50}};
  j["fleet"] = Json{{"bucket", "5m"}, {"flag_sigma", 2.0}, {"feature", "rtt"}};
  return j;
}

DetectOutcome run_detect(const SeriesStore& store, const DetectRequest& req) {
  const FeatureSpec& spec = store.schema().at(req.target);
  if (spec.kind != FeatureKind::kNumeric) invalid("target '" + req.target + "' is not numeric");
  const Scope& sc = req.scope;
  require_interface(store, sc.node_id, sc.interface_id);
  const auto [from, to] = resolve_range(store, sc, {req.target});
  const SeriesId id{sc.node_id, sc.interface_id, req.target};

  DetectOutcome out;
  switch (req.method) {
    case Detector::kRolling: {
      out.regions = detect_rolling(raw_points(store, id, from, to), req.rolling);
      break;
    }
    case Detector::kDistribution: {
      auto res = detect_distribution(raw_points(store, id, from, to), req.dist);
      out.regions = std::move(res.regions);
      out.pairs = std::move(res.pairs);
      out.skipped_pairs = std::move(res.skipped);
      if (!out.skipped_pairs.empty()) {
        out.warnings.push_back(std::to_string(out.skipped_pairs.size()) +
                               " segment pairs skipped (fewer than 10 points)");
      }
      break;
    }
    case Detector::kBaseline: {
      req.baseline.validate();
      std::vector<std::string> features{req.target};
      for (const auto& f : req.baseline.features) {
        store.schema().at(f);
        if (f == req.target) invalid("the target cannot be a context feature");
        features.push_back(f);
      }
      if (sc.step <= Duration::zero()) invalid("step must be positive");
      const auto eval = store.instances(sc.node_id, sc.interface_id, features, Axis{from, to, sc.step});
      std::vector<Instance> train_own;
      std::span<const Instance> train = eval;
      if (req.train_from || req.train_to) {
        const Timestamp tf = req.train_from.value_or(from), tt = req.train_to.value_or(to);
        if (tf >= tt) invalid("training range is empty");
        train_own = store.instances(sc.node_id, sc.interface_id, features, Axis{tf, tt, sc.step});
        train = train_own;
      }
      auto res = detect_baseline(train, eval, req.target, spec.orientation, req.baseline);
      out.regions = std::move(res.regions);
      out.warnings = std::move(res.warnings);
      out.threshold = res.threshold;
      out.baseline = std::move(res.baseline);
      break;
    }
  }
  tag(out.regions, sc.node_id, sc.interface_id, req.target);
  return out;
}

Json detect_outcome_to_json(const DetectOutcome& out) {
  Json j;
  j["regions"] = regions_to_json(out.regions);
  j["warnings"] = out.warnings;
  if (out.threshold) j["threshold"] = *out.threshold;
  if (!out.baseline.empty()) {
    Json arr = Json::array();
    for (const auto& p : out.baseline) arr.push_back(Json{{"ts", format_timestamp(p.ts)}, {"value", p.value}});
    j["baseline"] = std::move(arr);
  }
  auto pairs = [](const std::vector<SegmentPair>& ps) {
    Json arr = Json::array();
    for (const auto& p : ps) {
      arr.push_back(Json{{"first_start", format_timestamp(p.first_start)},
                         {"second_start", format_timestamp(p.second_start)},
                         {"n_first", p.n_first},
                         {"n_second", p.n_second},
                         {"kl", p.kl},
                         {"flagged", p.flagged}});
    }
    return arr;
  };
  if (!out.pairs.empty() || !out.skipped_pairs.empty()) {
    j["pairs"] = pairs(out.pairs);
    j["skipped_pairs"] = pairs(out.skipped_pairs);
  }
  return j;
}

DetectRequest detect_request_from_json(const Json& j) {
  if (!j.is_object()) malformed("request body must be a JSON object");
  DetectRequest req;
  try {
    const std::string method = j.value("method", "rolling");
    auto m = parse_detector(method);
    if (!m) invalid("unknown method '" + method + "'");
    req.method = *m;
    if (!j.contains("target") || !j.at("target").is_string()) malformed("missing string field 'target'");
    req.target = j.at("target").get<std::string>();
    if (!j.contains("scope")) malformed("missing field 'scope'");
    req.scope = scope_from_json(j.at("scope"));
    if (j.contains("params")) {
      if (!j.at("params").is_object()) malformed("params must be an object");
      for (const auto& [k, v] : j.at("params").items()) set_detect_param(req, k, json_scalar_text(v));
    }
    if (j.contains("train")) {
      const Json& t = j.at("train");
      if (t.contains("from")) req.train_from = json_ts(t.at("from"), "train.from");
      if (t.contains("to")) req.train_to = json_ts(t.at("to"), "train.to");
    }
  } catch (const nlohmann::json::exception& e) {
    malformed(e.what());
  }
  if (req.scope.node_id.empty() || req.scope.interface_id.empty()) malformed("scope needs node and interface");
  return req;
}

LabeledDataset build_dataset(const SeriesStore& store, const ExplainRequest& req) {
  if (req.regions.empty() && !req.scope) invalid("need at least one region or a scope");
  LabeledDataset data;
  data.features = req.features;
  if (data.features.empty()) {
    std::set<std::string> targets;
    for (const auto& r : req.regions) targets.insert(r.feature);
    for (const auto& name : store.schema().feature_names()) {
      if (!targets.count(name)) data.features.push_back(name);
    }
  }
  for (const auto& f : data.features) store.schema().at(f);

  std::vector<Scope> scopes;
  if (req.scope) {
    scopes.push_back(*req.scope);
  } else {
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& r : req.regions) {
      if (r.node_id.empty() || r.interface_id.empty()) invalid("region lacks node/interface and no scope was given");
      if (!seen.emplace(r.node_id, r.interface_id).second) continue;
      Scope sc;
      sc.node_id = r.node_id;
      sc.interface_id = r.interface_id;
      scopes.push_back(std::move(sc));
    }
  }
  for (const auto& sc : scopes) require_interface(store, sc.node_id, sc.interface_id);
  if (req.features.empty()) {
    // Features never stored on these interfaces would only add all-null rows.
    std::erase_if(data.features, [&](const std::string& f) {
      return std::none_of(scopes.begin(), scopes.end(), [&](const Scope& sc) {
        return store.extent(SeriesId{sc.node_id, sc.interface_id, f}).has_value();
      });
    });
  }
  if (data.features.empty()) invalid("no features to explain with");
  for (const auto& sc : scopes) {
    if (sc.step <= Duration::zero()) invalid("step must be positive");
    const auto [from, to] = resolve_range(store, sc, data.features);
    auto inst = store.instances(sc.node_id, sc.interface_id, data.features, Axis{from, to, sc.step});
    label_instances(inst, req.regions);
    std::move(inst.begin(), inst.end(), std::back_inserter(data.instances));
  }
  return data;
}

ExplainOutcome explain_dataset(const LabeledDataset& data, const GroupsParams& groups) {
  ExplainOutcome out;
  out.rows = significant_groups(data, groups);
  out.total = data.total();
  out.anomalous = data.anomalous();
  out.features = data.features;
  return out;
}

ExplainOutcome run_explain(const SeriesStore& store, const ExplainRequest& req) {
  return explain_dataset(build_dataset(store, req), req.groups);
}

Json explain_outcome_to_json(const ExplainOutcome& out) {
  Json j;
  j["N"] = out.total;
  j["K"] = out.anomalous;
  j["features"] = out.features;
  j["rows"] = rows_to_json(out.rows);
  return j;
}

ExplainRequest explain_request_from_json(const Json& j) {
  if (!j.is_object()) malformed("request body must be a JSON object");
  ExplainRequest req;
  try {
    if (j.contains("region")) req.regions.push_back(region_from_json(j.at("region")));
    if (j.contains("regions")) {
      if (!j.at("regions").is_array()) malformed("regions must be an array");
      for (const auto& r : j.at("regions")) req.regions.push_back(region_from_json(r));
    }
    if (req.regions.empty()) malformed("missing field 'region'");
    if (j.contains("features")) {
      const Json& f = j.at("features");
      if (f.is_string() && f.get<std::string>() != "all") req.features = split_list(f.get<std::string>());
      else if (f.is_array()) req.features = f.get<std::vector<std::string>>();
    }
    if (j.contains("max_subset_size")) req.groups.max_subset_size = j.at("max_subset_size").get<int>();
    if (j.contains("top_m")) req.groups.top_m = j.at("top_m").get<int>();
    if (j.contains("discretization")) {
      auto d = parse_discretization(j.at("discretization").get<std::string>());
      if (!d) invalid("discretization must be 'quartile' or 'none'");
      req.groups.discretization = *d;
    }
    if (j.contains("scope")) req.scope = scope_from_json(j.at("scope"));
  } catch (const nlohmann::json::exception& e) {
    malformed(e.what());
  }
  return req;
}

std::string run_export(const SeriesStore& store, const ExplainRequest& req) {
  const LabeledDataset data = build_dataset(store, req);
  return instances_to_csv(data.instances, data.features);
}

ExplainRequest export_request_from_json(const Json& j) {
  if (!j.is_object()) malformed("request body must be a JSON object");
  ExplainRequest req;
  try {
    if (!j.contains("scope")) malformed("missing field 'scope'");
    req.scope = scope_from_json(j.at("scope"));
    if (req.scope->node_id.empty() || req.scope->interface_id.empty()) {
      malformed("scope needs node and interface");
    }
    if (j.contains("labels")) {
      if (!j.at("labels").is_array()) malformed("labels must be an array of regions");
      for (const auto& r : j.at("labels")) req.regions.push_back(region_from_json(r));
    }
    if (j.contains("features")) {
      const Json& f = j.at("features");
      if (f.is_string() && f.get<std::string>() != "all") req.features = split_list(f.get<std::string>());
      else if (f.is_array()) req.features = f.get<std::vector<std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    malformed(e.what());
  }
  return req;
}

std::string interface_operator(const SeriesStore& store, const std::string& node_id,
                               const std::string& interface_id, Timestamp from, Timestamp to) {
  const std::string& field = store.schema().operator_field;
  if (!store.schema().find(field)) return {};
  std::map<std::string, std::size_t> counts;
  for (const auto& o : store.observations(SeriesId{node_id, interface_id, field}, from, to)) {
    if (const auto* s = std::get_if<std::string>(&o.value)) ++counts[*s];
  }
  std::string best;
  std::size_t best_n = 0;
  for (const auto& [name, n] : counts) {
    if (n > best_n) {
      best = name;
      best_n = n;
    }
  }
  return best;
}

FleetOutcome run_fleet(const SeriesStore& store, const FleetRequest& req) {
  if (req.from >= req.to) invalid("range is empty (from >= to)");
  if (req.bucket <= Duration::zero()) invalid("bucket must be positive");
  if (store.schema().at(req.feature).kind != FeatureKind::kNumeric) {
    invalid("feature '" + req.feature + "' is not numeric");
  }
  req.rolling.validate();
  std::vector<InterfaceInfo> chosen;
  for (auto& info : store.interfaces()) {
    if (!info.features.count(req.feature)) continue;
    if (!req.operator_name.empty() &&
        interface_operator(store, info.node_id, info.interface_id, req.from, req.to) != req.operator_name) {
      continue;
    }
    chosen.push_back(std::move(info));
  }
  std::vector<std::vector<AnomalyRegion>> found(chosen.size());
  parallel_for(chosen.size(), req.threads, [&](std::size_t i) {
    const auto& info = chosen[i];
    const auto pts = raw_points(store, SeriesId{info.node_id, info.interface_id, req.feature}, req.from, req.to);
    if (pts.size() < 3) return;
    found[i] = detect_rolling(pts, req.rolling);
    tag(found[i], info.node_id, info.interface_id, req.feature);
  });
  FleetOutcome out;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    out.regions[chosen[i].node_id + "/" + chosen[i].interface_id] = std::move(found[i]);
  }
  out.result = fleet_count(out.regions, req.from, req.to, req.bucket, req.flag_sigma);
  return out;
}

Json fleet_outcome_to_json(const FleetOutcome& out) {
  Json j = fleet_to_json(out.result);
  Json ifaces = Json::array();
  Json regions = Json::object();
  for (const auto& [key, rs] : out.regions) {
    ifaces.push_back(key);
    regions[key] = regions_to_json(rs);
  }
  j["interfaces"] = std::move(ifaces);
  j["regions"] = std::move(regions);
  return j;
}

}  // namespace mbbminer
