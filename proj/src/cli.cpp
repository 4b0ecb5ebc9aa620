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

#include "mbbminer/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "mbbminer/app.hpp"
#include "mbbminer/csv.hpp"
#include "mbbminer/error.hpp"
#include "mbbminer/ingest.hpp"
#include "mbbminer/service.hpp"

namespace mbbminer {
namespace {

[[noreturn]] void usage(const std::string& msg) { throw Error(ErrorCode::kInvalidArgument, msg); }

Timestamp ts_arg(const std::string& s, const std::string& flag) {
  auto t = parse_timestamp(s);
  if (!t) usage(flag + ": bad timestamp '" + s + "'");
  return *t;
}

std::optional<Timestamp> opt_ts(const std::string& s, const std::string& flag) {
  if (s.empty()) return std::nullopt;
  return ts_arg(s, flag);
}

Duration dur_arg(const std::string& s, const std::string& flag) {
  auto d = parse_duration(s);
  if (!d) usage(flag + ": bad duration '" + s + "'");
  return *d;
}

std::vector<std::string> list_arg(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ',')) {
      if (!part.empty()) out.push_back(part);
    }
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kStorageIO, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<AnomalyRegion> read_regions(const std::string& path) {
  const std::string text = read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && (text[first] == '[' || text[first] == '{')) {
    Json j;
    try {
      j = Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, path + ": " + e.what());
    }
    const Json& arr = j.is_object() ? j.at("regions") : j;
    std::vector<AnomalyRegion> out;
    for (const auto& r : arr) out.push_back(region_from_json(r));
    return out;
  }
  std::istringstream in(text);
  return regions_from_csv(in);
}

struct Globals {
  std::string store;
  bool json = false;
  int threads = 0;
  bool show_defaults = false;
  std::string output;
};

class Runner {
 public:
  Runner(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int main(std::vector<std::string> args) {
    CLI::App app{"Mobile broadband measurement mining: ingest, resample, detect, explain.", "mbbminer"};
    app.fallthrough();
    app.require_subcommand(0, 1);
    app.footer("Exit codes: 0 success, 1 usage error, 2 data error.\n"
               "Environment: MBBMINER_STORE is the default for --store.");
    if (const char* env = std::getenv("MBBMINER_STORE")) g_.store = env;
    app.add_option("--store", g_.store, "Store directory (default: $MBBMINER_STORE)");
    app.add_flag("--json", g_.json, "Write JSON instead of CSV");
    app.add_option("--threads", g_.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    app.add_flag("--show-defaults", g_.show_defaults, "Print every detector default and exit");
    app.add_option("-o,--output", g_.output, "Write machine output to this file");

    setup_ingest(app);
    setup_resample(app);
    setup_query(app);
    setup_detect(app);
    setup_explain(app);
    setup_fleet(app);
    setup_export(app);
    setup_serve(app);

    std::reverse(args.begin(), args.end());
    try {
      app.parse(args);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out_, err_);
      if (code == 0) return kExitOk;
      err_ << "usage: mbbminer [--store DIR] [--json] <ingest|resample|query|detect|explain|fleet|export|serve> "
              "[options]\n";
      return kExitUsage;
    }
    if (g_.show_defaults) {
      emit(default_params_json().dump(2) + "\n");
      return kExitOk;
    }
    if (!action_) {
      err_ << app.help();
      return kExitUsage;
    }
    try {
      return action_();
    } catch (const Error& e) {
      err_ << "mbbminer: " << error_code_name(e.code()) << ": " << e.what() << "\n";
      return e.code() == ErrorCode::kInvalidArgument ? kExitUsage : kExitData;
    } catch (const std::exception& e) {
      err_ << "mbbminer: " << e.what() << "\n";
      return kExitData;
    }
  }

 private:
  void emit(const std::string& text) {
    if (g_.output.empty()) {
      out_ << text;
      out_.flush();
      return;
    }
    std::ofstream f(g_.output, std::ios::binary);
    if (!(f << text)) throw Error(ErrorCode::kStorageIO, "cannot write '" + g_.output + "'");
  }

  void emit_json(const Json& j) { emit(j.dump(2) + "\n"); }

  SeriesStore open_store() const {
    if (g_.store.empty()) usage("no store given (use --store or MBBMINER_STORE)");
    return SeriesStore::open(g_.store);
  }

  // ---- ingest ---------------------------------------------------------
  struct IngestOpts {
    std::vector<std::string> inputs;
    std::string schema;
    std::string format;
    bool strict = false;
  } ingest_;

  void setup_ingest(CLI::App& app) {
    auto* sub = app.add_subcommand("ingest", "Parse measurement logs and load them into the store");
    sub->add_option("inputs", ingest_.inputs, "NDJSON or CSV files ('-' for stdin)")->required();
    sub->add_option("--schema", ingest_.schema, "Schema file (default: the store's, or the built-in one)");
    sub->add_option("--format", ingest_.format, "ndjson or csv (default: by extension)")
        ->check(CLI::IsMember({"ndjson", "csv"}));
    sub->add_flag("--strict", ingest_.strict, "Treat unknown fields as errors");
    sub->callback([this] { action_ = [this] { return do_ingest(); }; });
  }

  void report_lines(const std::string& path, const char* kind, const std::vector<ParseError>& items) {
    constexpr std::size_t kShown = 20;
    for (std::size_t i = 0; i < items.size() && i < kShown; ++i) {
      err_ << path << ":" << items[i].line << ": " << kind << ": " << items[i].reason << "\n";
    }
    if (items.size() > kShown) err_ << path << ": " << items.size() - kShown << " more " << kind << "s\n";
  }

  int do_ingest() {
    if (g_.store.empty()) usage("no store given (use --store or MBBMINER_STORE)");
    std::optional<Schema> given;
    if (!ingest_.schema.empty()) given = load_schema(ingest_.schema);
    SeriesStore store = SeriesStore::exists(g_.store)
                            ? SeriesStore::open(g_.store)
                            : SeriesStore::create(g_.store, given.value_or(default_schema()));
    const Schema& schema = given ? *given : store.schema();
    std::string csv = "file,lines,accepted,rejected,parse_errors,first,last\n";
    Json report = Json::array();
    bool had_errors = false;
    for (const auto& path : ingest_.inputs) {
      InputFormat fmt = InputFormat::kNdjson;
      if (ingest_.format == "csv" || (ingest_.format.empty() && path.size() > 4 &&
                                      path.compare(path.size() - 4, 4, ".csv") == 0)) {
        fmt = InputFormat::kCsv;
      }
      ParseResult parsed;
      if (path == "-") {
        parsed = parse_records(std::cin, schema, fmt, ParseOptions{ingest_.strict});
      } else {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error(ErrorCode::kStorageIO, "cannot open '" + path + "'");
        parsed = parse_records(in, schema, fmt, ParseOptions{ingest_.strict});
      }
      report_lines(path, "warning", parsed.warnings);
      report_lines(path, "error", parsed.errors);
      const LoadReport lr = load(parsed.records, schema, store);
      for (const auto& r : lr.rejections) err_ << path << ": rejected: " << r << "\n";
      had_errors = had_errors || !parsed.errors.empty() || lr.rejected > 0;
      const std::string first = lr.time_extent ? format_timestamp(lr.time_extent->first) : "";
      const std::string last = lr.time_extent ? format_timestamp(lr.time_extent->last) : "";
      // Lines that failed to parse count as rejected.
      const std::size_t rejected = parsed.lines - lr.accepted;
      csv += csv_join({path, std::to_string(parsed.lines), std::to_string(lr.accepted), std::to_string(rejected),
                       std::to_string(parsed.errors.size()), first, last}) +
             "\n";
      report.push_back(Json{{"file", path},
                            {"lines", parsed.lines},
                            {"accepted", lr.accepted},
                            {"rejected", rejected},
                            {"parse_errors", parsed.errors.size()},
                            {"first", first},
                            {"last", last}});
      err_ << path << ": " << lr.accepted << " records loaded\n";
    }
    if (g_.json) emit_json(report);
    else emit(csv);
    return had_errors ? kExitData : kExitOk;
  }

  // ---- resample / query ----------------------------------------------
  struct RangeOpts {
    std::string node, iface, from, to;
    std::vector<std::string> features;
  };
  RangeOpts resample_;
  std::string resample_level_;
  RangeOpts query_;
  std::int64_t max_points_ = 5000;

  void add_range(CLI::App* sub, RangeOpts& r) {
    sub->add_option("--node", r.node, "Node id")->required();
    sub->add_option("--iface", r.iface, "Interface id")->required();
    sub->add_option("--feature", r.features, "Feature names (repeat or comma-separate)")->required();
    sub->add_option("--from", r.from, "Range start (RFC3339 or epoch ns)")->required();
    sub->add_option("--to", r.to, "Range end, exclusive")->required();
  }

  void setup_resample(CLI::App& app) {
    auto* sub = app.add_subcommand("resample", "Read stored buckets at one granularity level");
    add_range(sub, resample_);
    sub->add_option("--level", resample_level_, "Ladder level, e.g. 10ms, 1s, 1m, 30m")->required();
    sub->callback([this] { action_ = [this] { return do_resample(); }; });
  }

  int do_resample() {
    const SeriesStore store = open_store();
    const Duration level = dur_arg(resample_level_, "--level");
    if (!store.ladder().contains(level)) usage("--level " + resample_level_ + " is not a ladder level");
    const Timestamp from = ts_arg(resample_.from, "--from"), to = ts_arg(resample_.to, "--to");
    if (from >= to) usage("--from must precede --to");
    if (!store.has_interface(resample_.node, resample_.iface)) {
      throw Error(ErrorCode::kUnknownKey, "unknown interface '" + resample_.iface + "' on node '" + resample_.node + "'");
    }
    QueryResult r;
    r.granularity = level;
    for (const auto& f : list_arg(resample_.features)) {
      store.schema().at(f);
      r.series[f] = store.buckets(SeriesId{resample_.node, resample_.iface, f}, level, from, to);
    }
    if (g_.json) emit_json(query_to_json(r, store));
    else emit(query_to_csv(r, store));
    return kExitOk;
  }

  void setup_query(CLI::App& app) {
    auto* sub = app.add_subcommand("query", "Range query with automatic granularity");
    add_range(sub, query_);
    sub->add_option("--max-points", max_points_, "Point budget per series")->capture_default_str();
    sub->callback([this] { action_ = [this] { return do_query(); }; });
  }

  int do_query() {
    const SeriesStore store = open_store();
    SeriesQuery q{query_.node, query_.iface, list_arg(query_.features), ts_arg(query_.from, "--from"),
                  ts_arg(query_.to, "--to"), max_points_};
    const QueryResult r = store.query(q);
    err_ << "granularity " << format_duration(r.granularity) << "\n";
    if (g_.json) emit_json(query_to_json(r, store));
    else emit(query_to_csv(r, store));
    return kExitOk;
  }

  // ---- detect ---------------------------------------------------------
  struct DetectOpts {
    std::string method = "rolling";
    std::string node, iface, feature, from, to, step = "1s", train_from, train_to;
    std::map<std::string, std::string> params;
  } detect_;

  void add_param(CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help) {
    sub->add_option_function<std::string>(
        flag, [this, key](const std::string& v) { detect_.params[key] = v; }, help);
  }

  void setup_detect(CLI::App& app) {
    auto* sub = app.add_subcommand("detect", "Detect anomalous regions in one interface's target series");
    sub->add_option("--method", detect_.method, "rolling, baseline or distribution")
        ->check(CLI::IsMember({"rolling", "baseline", "distribution"}))
        ->capture_default_str();
    sub->add_option("--node", detect_.node, "Node id")->required();
    sub->add_option("--iface", detect_.iface, "Interface id")->required();
    sub->add_option("--feature", detect_.feature, "Target feature")->required();
    sub->add_option("--from", detect_.from, "Range start (default: first stored point)");
    sub->add_option("--to", detect_.to, "Range end, exclusive (default: after the last point)");
    sub->add_option("--step", detect_.step, "Merge step for the baseline detector")->capture_default_str();
    sub->add_option("--train-from", detect_.train_from, "Baseline training start (default: --from)");
    sub->add_option("--train-to", detect_.train_to, "Baseline training end (default: --to)");
    add_param(sub, "--window", "window", "Rolling window [5m]");
    add_param(sub, "--k-sigma", "k_sigma", "Rolling sigma multiplier [3]");
    add_param(sub, "--sigma-floor", "sigma_floor", "Rolling sigma floor [1e-9]");
    add_param(sub, "--min-cluster", "min_cluster", "Outliers per region [5]");
    add_param(sub, "--max-gap", "max_gap", "Largest gap inside a cluster [60s]");
    add_param(sub, "--context", "features", "Baseline context features, comma-separated");
    add_param(sub, "--quantile", "quantile", "Baseline quantile [0.1 lower-is-better, else 0.9]");
    add_param(sub, "--residual-quantile", "residual_quantile", "Training residual quantile [0.99]");
    add_param(sub, "--n-trees", "n_trees", "Forest size [100]");
    add_param(sub, "--min-leaf", "min_leaf", "Minimum leaf size [5]");
    add_param(sub, "--mtry", "mtry", "Features tried per split [ceil(sqrt(p))]");
    add_param(sub, "--max-depth", "max_depth", "Tree depth limit [unlimited]");
    add_param(sub, "--seed", "seed", "Forest seed [42]");
    add_param(sub, "--segment", "segment", "Distribution segment length [15m]");
    add_param(sub, "--kl-threshold", "kl_threshold", "Distribution KL threshold [0.5]");
    add_param(sub, "--grid-points", "grid_points", "KDE grid size [512]");
    add_param(sub, "--density-floor", "density_floor", "KDE density floor [1e-12]");
    sub->callback([this] { action_ = [this] { return do_detect(); }; });
  }

  int do_detect() {
    const SeriesStore store = open_store();
    DetectRequest req;
    req.method = *parse_detector(detect_.method);
    req.target = detect_.feature;
    req.scope.node_id = detect_.node;
    req.scope.interface_id = detect_.iface;
    req.scope.from = opt_ts(detect_.from, "--from");
    req.scope.to = opt_ts(detect_.to, "--to");
    req.scope.step = dur_arg(detect_.step, "--step");
    req.train_from = opt_ts(detect_.train_from, "--train-from");
    req.train_to = opt_ts(detect_.train_to, "--train-to");
    req.baseline.forest.threads = g_.threads;
    for (const auto& [k, v] : detect_.params) set_detect_param(req, k, v);
    req.rolling.validate();
    req.dist.validate();
    if (req.method == Detector::kBaseline) req.baseline.validate();
    const DetectOutcome outcome = run_detect(store, req);
    for (const auto& w : outcome.warnings) err_ << "warning: " << w << "\n";
    err_ << outcome.regions.size() << " region(s)\n";
    if (g_.json) emit_json(detect_outcome_to_json(outcome));
    else emit(regions_to_csv(outcome.regions));
    return kExitOk;
  }

  // ---- explain --------------------------------------------------------
  struct ExplainOpts {
    std::string regions, instances, schema;
    std::vector<std::string> features{"all"};
    int max_subset_size = 2;
    std::string discretization = "quartile";
    int top_m = 50;
    std::string node, iface, from, to, step = "1s";
    std::string permutation;
    int R = 1000;
    std::uint64_t seed = 42;
    std::string ttest;
  } explain_;

  void setup_explain(CLI::App& app) {
    auto* sub = app.add_subcommand("explain", "Rank feature-value subsets enriched in anomalous regions");
    auto* regions = sub->add_option("--regions", explain_.regions, "Region file from 'detect' (CSV or JSON)");
    auto* instances = sub->add_option("--instances", explain_.instances, "Labeled instance CSV from 'export'");
    regions->excludes(instances);
    sub->add_option("--schema", explain_.schema, "Schema for --instances feature kinds");
    sub->add_option("--features", explain_.features, "Features to test, or 'all'")->capture_default_str();
    sub->add_option("--max-subset-size", explain_.max_subset_size, "Largest subset (1-3)")->capture_default_str();
    sub->add_option("--discretization", explain_.discretization, "quartile or none")
        ->check(CLI::IsMember({"quartile", "none"}))
        ->capture_default_str();
    sub->add_option("--top-m", explain_.top_m, "Singletons seeding larger subsets")->capture_default_str();
    sub->add_option("--node", explain_.node, "Scope node (default: from the regions)");
    sub->add_option("--iface", explain_.iface, "Scope interface (default: from the regions)");
    sub->add_option("--from", explain_.from, "Scope start (default: stored extent)");
    sub->add_option("--to", explain_.to, "Scope end (default: stored extent)");
    sub->add_option("--step", explain_.step, "Instance step")->capture_default_str();
    sub->add_option("--permutation", explain_.permutation, "Permutation-test this subset, e.g. 'mode=3G'");
    sub->add_option("--R", explain_.R, "Permutation replicates")->capture_default_str();
    sub->add_option("--seed", explain_.seed, "Permutation seed")->capture_default_str();
    sub->add_option("--ttest", explain_.ttest, "Welch t-test on this numeric feature");
    sub->callback([this] { action_ = [this] { return do_explain(); }; });
  }

  Subset parse_subset(const std::string& text) {
    Subset s;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const auto amp = text.find('&', pos);
      std::string part = text.substr(pos, amp == std::string::npos ? std::string::npos : amp - pos);
      part.erase(0, part.find_first_not_of(' '));
      part.erase(part.find_last_not_of(' ') + 1);
      const auto eq = part.find('=');
      if (eq == std::string::npos) usage("--permutation: expected feature=value, got '" + part + "'");
      s.emplace_back(part.substr(0, eq), part.substr(eq + 1));
      if (amp == std::string::npos) break;
      pos = amp + 1;
    }
    std::sort(s.begin(), s.end());
    return s;
  }

  int do_explain() {
    GroupsParams groups;
    groups.max_subset_size = explain_.max_subset_size;
    groups.discretization = *parse_discretization(explain_.discretization);
    groups.top_m = explain_.top_m;
    groups.threads = g_.threads;
    std::vector<std::string> features = list_arg(explain_.features);
    if (features.size() == 1 && features[0] == "all") features.clear();

    LabeledDataset data;
    if (!explain_.instances.empty()) {
      Schema schema = !explain_.schema.empty()                                  ? load_schema(explain_.schema)
                      : !g_.store.empty() && SeriesStore::exists(g_.store)      ? SeriesStore::open(g_.store).schema()
                                                                                : default_schema();
      std::ifstream in(explain_.instances, std::ios::binary);
      if (!in) throw Error(ErrorCode::kStorageIO, "cannot open '" + explain_.instances + "'");
      data = instances_from_csv(in, schema);
      if (!features.empty()) data.features = features;
    } else if (!explain_.regions.empty()) {
      const SeriesStore store = open_store();
      ExplainRequest req;
      req.regions = read_regions(explain_.regions);
      req.features = features;
      req.groups = groups;
      if (!explain_.node.empty() || !explain_.iface.empty() || !explain_.from.empty() || !explain_.to.empty()) {
        Scope sc;
        sc.node_id = explain_.node;
        sc.interface_id = explain_.iface;
        sc.from = opt_ts(explain_.from, "--from");
        sc.to = opt_ts(explain_.to, "--to");
        sc.step = dur_arg(explain_.step, "--step");
        if (sc.node_id.empty() || sc.interface_id.empty()) usage("--node and --iface are both needed for a scope");
        req.scope = sc;
      }
      data = build_dataset(store, req);
    } else {
      usage("explain needs --regions or --instances");
    }
    err_ << data.instances.size() << " instances, " << data.anomalous() << " anomalous\n";

    if (!explain_.permutation.empty() || !explain_.ttest.empty()) {
      std::string csv = "test,target,statistic,df,p_value\n";
      Json tests = Json::array();
      if (!explain_.permutation.empty()) {
        const Subset s = parse_subset(explain_.permutation);
        const double p = permutation_test(data, s, explain_.R, explain_.seed, groups.discretization, g_.threads);
        csv += csv_join({"permutation", subset_label(s), "", std::to_string(explain_.R), format_double(p)}) + "\n";
        tests.push_back(Json{{"test", "permutation"}, {"target", subset_label(s)}, {"R", explain_.R}, {"p_value", p}});
      }
      if (!explain_.ttest.empty()) {
        const TTestResult t = welch_t_test(data, explain_.ttest);
        csv += csv_join({"welch_t", explain_.ttest, format_double(t.t), format_double(t.df), format_double(t.p)}) + "\n";
        tests.push_back(Json{{"test", "welch_t"},
                             {"target", explain_.ttest},
                             {"t", std::isfinite(t.t) ? Json(t.t) : Json(t.t > 0 ? "inf" : "-inf")},
                             {"df", t.df},
                             {"p_value", t.p}});
      }
      if (g_.json) emit_json(Json{{"tests", tests}});
      else emit(csv);
      return kExitOk;
    }
    const ExplainOutcome outcome = explain_dataset(data, groups);
    if (g_.json) emit_json(explain_outcome_to_json(outcome));
    else emit(rows_to_csv(outcome.rows));
    return kExitOk;
  }

  // ---- fleet ----------------------------------------------------------
  struct FleetOpts {
    std::string op, feature = "rtt", from, to, bucket = "5m", regions;
    double flag_sigma = 2.0;
    std::map<std::string, std::string> params;
  } fleet_;

  void setup_fleet(CLI::App& app) {
    auto* sub = app.add_subcommand("fleet", "Count interfaces with concurrent anomalies per time bucket");
    sub->add_option("--operator", fleet_.op, "Only interfaces of this operator");
    sub->add_option("--feature", fleet_.feature, "Target feature")->capture_default_str();
    sub->add_option("--from", fleet_.from, "Range start")->required();
    sub->add_option("--to", fleet_.to, "Range end, exclusive")->required();
    sub->add_option("--bucket", fleet_.bucket, "Bucket width")->capture_default_str();
    sub->add_option("--flag-sigma", fleet_.flag_sigma, "Flag counts above mean + this many sd")->capture_default_str();
    sub->add_option("--regions", fleet_.regions, "Use these regions instead of running the rolling detector");
    for (const auto& [flag, key] : std::vector<std::pair<std::string, std::string>>{
             {"--window", "window"}, {"--k-sigma", "k_sigma"}, {"--min-cluster", "min_cluster"},
             {"--max-gap", "max_gap"}, {"--sigma-floor", "sigma_floor"}}) {
      const std::string k = key;
      sub->add_option_function<std::string>(flag, [this, k](const std::string& v) { fleet_.params[k] = v; },
                                            "Rolling detector parameter");
    }
    sub->callback([this] { action_ = [this] { return do_fleet(); }; });
  }

  int do_fleet() {
    FleetRequest fr;
    fr.operator_name = fleet_.op;
    fr.feature = fleet_.feature;
    fr.from = ts_arg(fleet_.from, "--from");
    fr.to = ts_arg(fleet_.to, "--to");
    fr.bucket = dur_arg(fleet_.bucket, "--bucket");
    fr.flag_sigma = fleet_.flag_sigma;
    fr.threads = g_.threads;
    DetectRequest tmp;
    for (const auto& [k, v] : fleet_.params) set_detect_param(tmp, k, v);
    fr.rolling = tmp.rolling;
    fr.rolling.validate();
    FleetOutcome outcome;
    if (!fleet_.regions.empty()) {
      if (fr.from >= fr.to) usage("--from must precede --to");
      for (auto& r : read_regions(fleet_.regions)) {
        outcome.regions[r.node_id + "/" + r.interface_id].push_back(std::move(r));
      }
      outcome.result = fleet_count(outcome.regions, fr.from, fr.to, fr.bucket, fr.flag_sigma);
    } else {
      outcome = run_fleet(open_store(), fr);
    }
    if (g_.json) emit_json(fleet_outcome_to_json(outcome));
    else emit(fleet_to_csv(outcome.result));
    return kExitOk;
  }

  // ---- export ---------------------------------------------------------
  struct ExportOpts {
    std::string node, iface, from, to, step = "1s", regions, bbox;
    std::vector<std::string> features{"all"};
  } export_;

  void setup_export(CLI::App& app) {
    auto* sub = app.add_subcommand("export", "Write labeled instances (or a geographic selection) as CSV");
    sub->add_option("--node", export_.node, "Node id");
    sub->add_option("--iface", export_.iface, "Interface id");
    sub->add_option("--from", export_.from, "Range start");
    sub->add_option("--to", export_.to, "Range end, exclusive");
    sub->add_option("--step", export_.step, "Instance step")->capture_default_str();
    sub->add_option("--features", export_.features, "Features, or 'all'")->capture_default_str();
    sub->add_option("--regions", export_.regions, "Regions used as anomaly labels");
    sub->add_option("--bbox", export_.bbox, "lat_min,lon_min,lat_max,lon_max: export a geographic selection");
    sub->callback([this] { action_ = [this] { return do_export(); }; });
  }

  int do_export() {
    const SeriesStore store = open_store();
    std::vector<std::string> features = list_arg(export_.features);
    if (features.size() == 1 && features[0] == "all") features.clear();
    if (!export_.bbox.empty()) {
      const auto parts = list_arg({export_.bbox});
      if (parts.size() != 4) usage("--bbox must be lat_min,lon_min,lat_max,lon_max");
      double v[4];
      for (std::size_t i = 0; i < 4; ++i) {
        auto d = parse_double(parts[i]);
        if (!d) usage("--bbox: bad number '" + parts[i] + "'");
        v[i] = *d;
      }
      GeoQuery q;
      q.from = ts_arg(export_.from, "--from");
      q.to = ts_arg(export_.to, "--to");
      q.step = dur_arg(export_.step, "--step");
      q.box = GeoBox{v[0], v[2], v[1], v[3]};
      q.features = features;
      q.node_id = export_.node;
      q.interface_id = export_.iface;
      std::vector<std::string> cols{store.schema().latitude_field, store.schema().longitude_field};
      for (const auto& f : features) {
        if (std::find(cols.begin(), cols.end(), f) == cols.end()) cols.push_back(f);
      }
      emit(instances_to_csv(store.geo_select(q), cols));
      return kExitOk;
    }
    if (export_.node.empty() || export_.iface.empty()) usage("export needs --node and --iface (or --bbox)");
    ExplainRequest req;
    Scope sc;
    sc.node_id = export_.node;
    sc.interface_id = export_.iface;
    sc.from = opt_ts(export_.from, "--from");
    sc.to = opt_ts(export_.to, "--to");
    sc.step = dur_arg(export_.step, "--step");
    req.scope = sc;
    req.features = features;
    if (!export_.regions.empty()) req.regions = read_regions(export_.regions);
    emit(run_export(store, req));
    return kExitOk;
  }

  // ---- serve ----------------------------------------------------------
  struct ServeOpts {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string cors;
    std::string budget = "30s";
  } serve_;

  void setup_serve(CLI::App& app) {
    auto* sub = app.add_subcommand("serve", "Serve the HTTP API over the store");
    sub->add_option("--host", serve_.host, "Bind address")->capture_default_str();
    sub->add_option("--port", serve_.port, "Port")->capture_default_str();
    sub->add_option("--cors-origin", serve_.cors, "Allowed browser origin for the explorer");
    sub->add_option("--budget", serve_.budget, "Detect/explain time budget")->capture_default_str();
    sub->callback([this] { action_ = [this] { return do_serve(); }; });
  }

  int do_serve() {
    if (g_.store.empty()) usage("no store given (use --store or MBBMINER_STORE)");
    ServiceOptions opts;
    opts.store_path = g_.store;
    opts.host = serve_.host;
    opts.port = serve_.port;
    opts.cors_origin = serve_.cors;
    opts.budget = dur_arg(serve_.budget, "--budget");
    opts.threads = g_.threads;
    Service service(opts);
    err_ << "serving " << g_.store << " on http://" << opts.host << ":" << opts.port << "\n";
    if (!service.serve()) {
      err_ << "mbbminer: cannot bind " << opts.host << ":" << opts.port << "\n";
      return kExitData;
    }
    return kExitOk;
  }

  std::ostream& out_;
  std::ostream& err_;
  Globals g_;
  std::function<int()> action_;
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Runner runner(out, err);
  return runner.main(args);
}

}  // namespace mbbminer
