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

#ifndef MBBMINER_STORE_HPP
#define MBBMINER_STORE_HPP

#include <compare>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mbbminer/bucket.hpp"
#include "mbbminer/ingest.hpp"
#include "mbbminer/merge.hpp"
#include "mbbminer/schema.hpp"

namespace mbbminer {

struct SeriesId {
  std::string node_id;
  std::string interface_id;
  std::string feature;
  auto operator<=>(const SeriesId&) const = default;
};

// Granularity zero denotes the raw observation log.
struct SeriesKey {
  SeriesId id;
  Duration granularity{0};
  auto operator<=>(const SeriesKey&) const = default;
};

struct PartitionInfo {
  SeriesKey key;
  std::string file;
  TimeExtent extent;
  std::size_t rows = 0;
};

struct Manifest {
  Schema schema;
  GranularityLadder ladder;
  std::uint64_t generation = 0;
  std::vector<PartitionInfo> partitions;
};

struct SeriesQuery {
  std::string node_id;
  std::string interface_id;
  std::vector<std::string> features;
  Timestamp from;
  Timestamp to;
  std::int64_t max_points = 5000;
};

struct QueryResult {
  Duration granularity{0};
  std::map<std::string, std::vector<Bucket>> series;
};

struct GeoBox {
  double lat_min = -90.0;
  double lat_max = 90.0;
  double lon_min = -180.0;
  double lon_max = 180.0;
  bool contains(double lat, double lon) const {
    return lat >= lat_min && lat <= lat_max && lon >= lon_min && lon <= lon_max;
  }
};

struct GeoQuery {
  Timestamp from;
  Timestamp to;
  Duration step = std::chrono::seconds(1);
  GeoBox box;
  std::vector<std::string> features;
  // Empty means every node / interface.
  std::string node_id;
  std::string interface_id;
};

struct InterfaceInfo {
  std::string node_id;
  std::string interface_id;
  std::map<std::string, TimeExtent> features;
};

// Partitioned multi-granularity store. Each (node, interface, feature) keeps
// a raw observation log (last write wins per timestamp) from which every
// ladder level is materialised. Directory-backed stores persist each load
// as new partition files plus an atomically swapped manifest; see
// docs/store-format.md. Readers may run concurrently with one writer.
class SeriesStore {
 public:
  static SeriesStore in_memory(Schema schema,
                               GranularityLadder ladder = GranularityLadder::standard());
  // Creates the directory layout; throws Error(kStorageIO) if a manifest
  // already exists there.
  static SeriesStore create(const std::filesystem::path& dir, Schema schema,
                            GranularityLadder ladder = GranularityLadder::standard());
  static SeriesStore open(const std::filesystem::path& dir);
  static bool exists(const std::filesystem::path& dir);

  SeriesStore(SeriesStore&&) noexcept;
  SeriesStore& operator=(SeriesStore&&) noexcept;
  ~SeriesStore();

  const Schema& schema() const;
  const GranularityLadder& ladder() const;
  const std::filesystem::path& path() const;
  Manifest manifest() const;

  // Records must already satisfy the schema (see ingest's load()).
  void append(std::span<const MeasurementRecord> records);

  std::vector<InterfaceInfo> interfaces() const;
  bool has_interface(const std::string& node_id, const std::string& interface_id) const;
  std::optional<TimeExtent> extent(const SeriesId& id) const;

  // Raw observations with ts in [from, to).
  std::vector<Observation> observations(const SeriesId& id, Timestamp from, Timestamp to) const;
  // Stored buckets at a ladder level with start in [from, to).
  std::vector<Bucket> buckets(const SeriesId& id, Duration level, Timestamp from,
                              Timestamp to) const;

  // Auto-granularity range read. Throws Error(kInvalidArgument) for from >=
  // to or max_points < 1 and Error(kUnknownKey) for an unknown node,
  // interface or feature; a range without data yields empty sequences.
  QueryResult query(const SeriesQuery& q) const;

  // Merged instances for one interface on `axis`, reading base-level buckets
  // with enough history for each feature's strategy. `overrides` replaces
  // the schema strategy per feature.
  std::vector<Instance> instances(const std::string& node_id, const std::string& interface_id,
                                  const std::vector<std::string>& features, const Axis& axis,
                                  const std::map<std::string, MergeStrategy>& overrides = {}) const;

  // Merged instances whose interpolated position lies in the box (boundary
  // inclusive). Throws Error(kMissingGeoFeatures) when the schema lacks the
  // latitude/longitude features.
  std::vector<Instance> geo_select(const GeoQuery& q) const;

 private:
  struct State;
  explicit SeriesStore(std::unique_ptr<State> state);
  std::unique_ptr<State> state_;
};

}  // namespace mbbminer

#endif  // MBBMINER_STORE_HPP
