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

#ifndef MBBMINER_IO_HPP
#define MBBMINER_IO_HPP

#include <istream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mbbminer/detect.hpp"
#include "mbbminer/rootcause.hpp"
#include "mbbminer/store.hpp"

namespace mbbminer {

using Json = nlohmann::ordered_json;

Json value_to_json(const FeatureValue& v);

// Region CSV columns:
// node,interface,feature,detector,start,end,score,direction,n_outliers
Json region_to_json(const AnomalyRegion& r);
AnomalyRegion region_from_json(const Json& j);
Json regions_to_json(std::span<const AnomalyRegion> regions);
std::string regions_to_csv(std::span<const AnomalyRegion> regions);
// The outlier list and parameter snapshot are not part of the CSV.
std::vector<AnomalyRegion> regions_from_csv(std::istream& in);

// Enrichment CSV columns: subset,count,count_class,enrichment,p_value,q_value
Json rows_to_json(std::span<const EnrichmentRow> rows);
std::string rows_to_csv(std::span<const EnrichmentRow> rows);
std::vector<EnrichmentRow> rows_from_csv(std::istream& in);
std::vector<EnrichmentRow> rows_from_json(const Json& j);

Json query_to_json(const QueryResult& r, const SeriesStore& store);
// Columns: feature,start,count,value,min,max
std::string query_to_csv(const QueryResult& r, const SeriesStore& store);

Json fleet_to_json(const FleetResult& r);
// Columns: bucket_start,count,flagged
std::string fleet_to_csv(const FleetResult& r);

Json interfaces_to_json(const SeriesStore& store);

// Columns: ts,node,iface,<features...>,anomaly with anomaly 1, 0 or empty.
std::string instances_to_csv(std::span<const Instance> instances, const std::vector<std::string>& features);
// Feature kinds come from `schema` when it declares the column; other
// columns are numeric when every non-empty cell parses as a number.
LabeledDataset instances_from_csv(std::istream& in, const Schema& schema);

}  // namespace mbbminer

#endif  // MBBMINER_IO_HPP
