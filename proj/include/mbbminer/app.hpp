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

// Request-level operations shared by the CLI and the HTTP service so both
// front ends produce the same values for the same inputs.

#ifndef MBBMINER_APP_HPP
#define MBBMINER_APP_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mbbminer/detect.hpp"
#include "mbbminer/io.hpp"
#include "mbbminer/rootcause.hpp"
#include "mbbminer/store.hpp"

namespace mbbminer {

struct Scope {
  std::string node_id;
  std::string interface_id;
  // Empty bounds default to the interface's stored extent.
  std::optional<Timestamp> from;
  std::optional<Timestamp> to;
  Duration step = std::chrono::seconds(1);
};

struct DetectRequest {
  Detector method = Detector::kRolling;
  std::string target;
  Scope scope;
  RollingParams rolling;
  BaselineParams baseline;
  DistParams dist;
  // Baseline training range; defaults to the scope's range.
  std::optional<Timestamp> train_from;
  std::optional<Timestamp> train_to;
};

// Sets one detector parameter by name ("window", "k_sigma", "features",
// "n_trees", "segment", ...). Durations accept "5m"-style text; a bare
// number means seconds. Throws Error(kInvalidArgument) for an unknown key or
// a malformed value.
void set_detect_param(DetectRequest& req, const std::string& key, const std::string& value);
Json default_params_json();

struct DetectOutcome {
  std::vector<AnomalyRegion> regions;
  std::vector<std::string> warnings;
  // Baseline only.
  std::optional<double> threshold;
  std::vector<Point> baseline;
  // Distribution only.
  std::vector<SegmentPair> pairs;
  std::vector<SegmentPair> skipped_pairs;
};

// Rolling and distribution detectors run on the raw observations of the
// target in [from, to); the baseline detector on instances merged at the
// scope's step.
DetectOutcome run_detect(const SeriesStore& store, const DetectRequest& req);
Json detect_outcome_to_json(const DetectOutcome& out);
DetectRequest detect_request_from_json(const Json& j);

struct ExplainRequest {
  std::vector<AnomalyRegion> regions;
  // Defaults: the interfaces named by the regions over their full extent.
  std::optional<Scope> scope;
  // Empty: every schema feature except the regions' target features.
  std::vector<std::string> features;
  GroupsParams groups;
};

struct ExplainOutcome {
  std::vector<EnrichmentRow> rows;
  std::uint64_t total = 0;
  std::uint64_t anomalous = 0;
  std::vector<std::string> features;
};

// Labeled instances for the request's scope.
LabeledDataset build_dataset(const SeriesStore& store, const ExplainRequest& req);
ExplainOutcome run_explain(const SeriesStore& store, const ExplainRequest& req);
ExplainOutcome explain_dataset(const LabeledDataset& data, const GroupsParams& groups);
Json explain_outcome_to_json(const ExplainOutcome& out);
ExplainRequest explain_request_from_json(const Json& j);

// Labeled-instance CSV (see instances_to_csv) for a scope; regions act as
// labels and may be empty.
std::string run_export(const SeriesStore& store, const ExplainRequest& req);
// {"scope": {...}, "labels": [regions...], "features": [...]}
ExplainRequest export_request_from_json(const Json& j);

struct FleetRequest {
  // Empty matches every interface.
  std::string operator_name;
  std::string feature = "rtt";
  Timestamp from;
  Timestamp to;
  Duration bucket = std::chrono::minutes(5);
  double flag_sigma = 2.0;
  RollingParams rolling;
  int threads = 0;
};

struct FleetOutcome {
  FleetResult result;
  // Keyed "node/interface".
  std::map<std::string, std::vector<AnomalyRegion>> regions;
};

// Most frequent operator value of an interface over [from, to); empty when
// unknown.
std::string interface_operator(const SeriesStore& store, const std::string& node_id,
                               const std::string& interface_id, Timestamp from, Timestamp to);
FleetOutcome run_fleet(const SeriesStore& store, const FleetRequest& req);
Json fleet_outcome_to_json(const FleetOutcome& out);

}  // namespace mbbminer

#endif  // MBBMINER_APP_HPP
