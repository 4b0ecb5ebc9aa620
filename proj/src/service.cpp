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

#include "mbbminer/service.hpp"

#include <cstdio>
#include <future>
#include <iostream>
#include <mutex>
#include <random>
#include <thread>

#include "mbbminer/app.hpp"
#include "mbbminer/csv.hpp"
#include "mbbminer/error.hpp"

// After Eigen: <resolv.h> defines a `_res` macro that collides with Eigen
// parameter names.
#include "httplib.h"

namespace mbbminer {

namespace fs = std::filesystem;

ApiError to_api_error(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    ApiError out;
    out.code = std::string(error_code_name(err->code()));
    out.message = err->what();
    switch (err->code()) {
      case ErrorCode::kParse: out.status = 400; return out;
      case ErrorCode::kUnknownKey: out.status = 404; return out;
      case ErrorCode::kStorageIO:
      case ErrorCode::kUnfittedModel: break;
      default: out.status = 422; return out;
    }
  }
  std::random_device rd;
  char id[17];
  std::snprintf(id, sizeof id, "%08x%08x", rd(), rd());
  std::cerr << "mbbminer serve: internal error " << id << ": " << e.what() << "\n";
  return ApiError{500, "internal", std::string("internal error (id ") + id + ")"};
}

namespace {

[[noreturn]] void malformed(const std::string& msg) { throw Error(ErrorCode::kParse, msg); }

ApiResponse json_response(const Json& j) { return ApiResponse{200, "application/json", j.dump()}; }

ApiResponse error_response(const ApiError& e) {
  Json j;
  j["error"] = Json{{"status", e.status}, {"code", e.code}, {"message", e.message}};
  return ApiResponse{e.status, "application/json", j.dump()};
}

const std::string& param(const ApiRequest& req, const std::string& key) {
  auto it = req.query.find(key);
  if (it == req.query.end() || it->second.empty()) malformed("missing query parameter '" + key + "'");
  return it->second;
}

std::string param_or(const ApiRequest& req, const std::string& key, const std::string& fallback) {
  auto it = req.query.find(key);
  return it == req.query.end() || it->second.empty() ? fallback : it->second;
}

Timestamp ts_param(const ApiRequest& req, const std::string& key) {
  const std::string& v = param(req, key);
  auto t = parse_timestamp(v);
  if (!t) malformed("bad timestamp '" + v + "' for '" + key + "'");
  return *t;
}

Duration duration_param(const ApiRequest& req, const std::string& key, Duration fallback) {
  const std::string v = param_or(req, key, "");
  if (v.empty()) return fallback;
  auto d = parse_duration(v);
  if (!d) malformed("bad duration '" + v + "' for '" + key + "'");
  return *d;
}

double number_param(const ApiRequest& req, const std::string& key, double fallback) {
  const std::string v = param_or(req, key, "");
  if (v.empty()) return fallback;
  auto d = parse_double(v);
  if (!d) malformed("bad number '" + v + "' for '" + key + "'");
  return *d;
}

std::vector<std::string> list_param(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

Json parse_body(const ApiRequest& req) {
  try {
    return Json::parse(req.body);
  } catch (const nlohmann::json::exception& e) {
    malformed(std::string("request body is not valid JSON: ") + e.what());
  }
}

}  // namespace

struct Service::Impl {
  ServiceOptions options;
  std::mutex mu;
  std::shared_ptr<const SeriesStore> store;
  bool reloadable = false;
  fs::file_time_type manifest_time{};
  httplib::Server server;

  std::shared_ptr<const SeriesStore> current() {
    std::lock_guard lock(mu);
    if (reloadable) {
      std::error_code ec;
      const auto t = fs::last_write_time(options.store_path / "MANIFEST", ec);
      if (!ec && t != manifest_time) {
        store = std::make_shared<const SeriesStore>(SeriesStore::open(options.store_path));
        manifest_time = t;
      }
    }
    return store;
  }

  // Runs fn on its own thread and waits up to the budget. On overrun the
  // worker is left to finish in the background; it holds its own store
  // snapshot.
  template <typename Fn>
  Json within_budget(Fn fn) {
    auto task = std::make_shared<std::packaged_task<Json()>>(std::move(fn));
    auto result = task->get_future();
    std::thread([task] { (*task)(); }).detach();
    if (result.wait_for(options.budget) != std::future_status::ready) {
      throw Error(ErrorCode::kTimeout, "request exceeded the " + format_duration(options.budget) + " budget");
    }
    return result.get();
  }

  ApiResponse nodes() { return json_response(interfaces_to_json(*current())); }

  ApiResponse series(const ApiRequest& req) {
    auto s = current();
    SeriesQuery q;
    q.node_id = param(req, "node");
    q.interface_id = param(req, "iface");
    q.features = list_param(param(req, "feature"));
    q.from = ts_param(req, "from");
    q.to = ts_param(req, "to");
    const double mp = number_param(req, "max_points", 5000);
    if (mp != std::floor(mp)) malformed("max_points must be an integer");
    q.max_points = static_cast<std::int64_t>(mp);
    const QueryResult r = s->query(q);
    Json j;
    j["node"] = q.node_id;
    j["interface"] = q.interface_id;
    j["from"] = format_timestamp(q.from);
    j["to"] = format_timestamp(q.to);
    j["max_points"] = q.max_points;
    const Json body = query_to_json(r, *s);
    for (const auto& [k, v] : body.items()) j[k] = v;
    return json_response(j);
  }

  ApiResponse detect(const ApiRequest& req) {
    DetectRequest dr = detect_request_from_json(parse_body(req));
    if (dr.baseline.forest.threads == 0) dr.baseline.forest.threads = options.threads;
    auto s = current();
    return json_response(within_budget([s, dr] { return detect_outcome_to_json(run_detect(*s, dr)); }));
  }

  ApiResponse explain(const ApiRequest& req) {
    ExplainRequest er = explain_request_from_json(parse_body(req));
    er.groups.threads = options.threads;
    auto s = current();
    return json_response(within_budget([s, er] { return explain_outcome_to_json(run_explain(*s, er)); }));
  }

  ApiResponse geo(const ApiRequest& req) {
    auto s = current();
    GeoQuery q;
    q.from = ts_param(req, "from");
    q.to = ts_param(req, "to");
    q.step = duration_param(req, "step", std::chrono::seconds(1));
    q.features = list_param(param_or(req, "feature", ""));
    q.node_id = param_or(req, "node", "");
    q.interface_id = param_or(req, "iface", "");
    const std::string bbox = param_or(req, "bbox", "");
    if (!bbox.empty()) {
      const auto parts = list_param(bbox);
      if (parts.size() != 4) malformed("bbox must be lat_min,lon_min,lat_max,lon_max");
      double v[4];
      for (int i = 0; i < 4; ++i) {
        auto d = parse_double(parts[static_cast<std::size_t>(i)]);
        if (!d) malformed("bad bbox value '" + parts[static_cast<std::size_t>(i)] + "'");
        v[i] = *d;
      }
      q.box = GeoBox{v[0], v[2], v[1], v[3]};
    }
    const auto instances = s->geo_select(q);
    std::vector<std::string> features{s->schema().latitude_field, s->schema().longitude_field};
    for (const auto& f : q.features) {
      if (std::find(features.begin(), features.end(), f) == features.end()) features.push_back(f);
    }
    if (param_or(req, "format", "json") == "csv") {
      return ApiResponse{200, "text/csv", instances_to_csv(instances, features)};
    }
    Json arr = Json::array();
    for (const auto& inst : instances) {
      Json values = Json::object();
      for (const auto& f : features) values[f] = value_to_json(inst.value(f));
      arr.push_back(Json{{"ts", format_timestamp(inst.ts)},
                         {"node", inst.node_id},
                         {"interface", inst.interface_id},
                         {"values", std::move(values)}});
    }
    return json_response(Json{{"features", features}, {"instances", std::move(arr)}});
  }

  ApiResponse fleet(const ApiRequest& req) {
    auto s = current();
    FleetRequest fr;
    fr.operator_name = param_or(req, "operator", "");
    fr.feature = param_or(req, "feature", "rtt");
    fr.from = ts_param(req, "from");
    fr.to = ts_param(req, "to");
    fr.bucket = duration_param(req, "bucket", fr.bucket);
    fr.flag_sigma = number_param(req, "flag_sigma", fr.flag_sigma);
    fr.rolling.window = duration_param(req, "window", fr.rolling.window);
    fr.rolling.k_sigma = number_param(req, "k_sigma", fr.rolling.k_sigma);
    fr.rolling.min_cluster = static_cast<int>(number_param(req, "min_cluster", fr.rolling.min_cluster));
    fr.rolling.max_gap = duration_param(req, "max_gap", fr.rolling.max_gap);
    fr.threads = options.threads;
    Json j = fleet_outcome_to_json(run_fleet(*s, fr));
    j["operator"] = fr.operator_name;
    j["feature"] = fr.feature;
    return json_response(j);
  }

  ApiResponse export_csv(const ApiRequest& req) {
    const ExplainRequest er = export_request_from_json(parse_body(req));
    return ApiResponse{200, "text/csv", run_export(*current(), er)};
  }

  ApiResponse dispatch(const ApiRequest& req) {
    const auto& m = req.method;
    const auto& p = req.path;
    if (m == "GET" && p == "/api/nodes") return nodes();
    if (m == "GET" && p == "/api/series") return series(req);
    if (m == "POST" && p == "/api/detect") return detect(req);
    if (m == "POST" && p == "/api/explain") return explain(req);
    if (m == "GET" && p == "/api/geo") return geo(req);
    if (m == "GET" && p == "/api/fleet") return fleet(req);
    if (m == "POST" && p == "/api/export") return export_csv(req);
    return error_response(ApiError{404, "not_found", "no endpoint " + m + " " + p});
  }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
  impl_->store = std::make_shared<const SeriesStore>(SeriesStore::open(impl_->options.store_path));
  impl_->reloadable = true;
  std::error_code ec;
  impl_->manifest_time = fs::last_write_time(impl_->options.store_path / "MANIFEST", ec);
}

Service::Service(std::shared_ptr<const SeriesStore> store, ServiceOptions options)
    : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
  impl_->store = std::move(store);
}

Service::~Service() = default;

ApiResponse Service::handle(const ApiRequest& req) {
  try {
    return impl_->dispatch(req);
  } catch (const std::exception& e) {
    return error_response(to_api_error(e));
  } catch (...) {
    return error_response(to_api_error(std::runtime_error("unknown failure")));
  }
}

bool Service::serve() {
  auto& srv = impl_->server;
  const std::string origin = impl_->options.cors_origin;
  auto adapt = [this, origin](const httplib::Request& hreq, httplib::Response& hres) {
    ApiRequest req;
    req.method = hreq.method;
    req.path = hreq.path;
    for (const auto& [k, v] : hreq.params) req.query[k] = v;
    req.body = hreq.body;
    const ApiResponse res = handle(req);
    hres.status = res.status;
    hres.set_content(res.body, res.content_type);
    if (!origin.empty()) hres.set_header("Access-Control-Allow-Origin", origin);
  };
  srv.Get(R"(/api/.*)", adapt);
  srv.Post(R"(/api/.*)", adapt);
  srv.Options(R"(/api/.*)", [origin](const httplib::Request&, httplib::Response& hres) {
    if (!origin.empty()) {
      hres.set_header("Access-Control-Allow-Origin", origin);
      hres.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      hres.set_header("Access-Control-Allow-Headers", "Content-Type");
    }
    hres.status = 204;
  });
  return srv.listen(impl_->options.host, impl_->options.port);
}

void Service::stop() { impl_->server.stop(); }

}  // namespace mbbminer
