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

#include "mbbminer/store.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <sstream>

#include "mbbminer/csv.hpp"
#include "mbbminer/error.hpp"

namespace mbbminer {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestName = "MANIFEST";
constexpr const char* kManifestMagic = "mbbminer-store 1";
constexpr const char* kSchemaName = "schema.conf";

struct Partition {
  std::vector<Observation> raw;
  // One bucket sequence per ladder level.
  std::vector<std::vector<Bucket>> levels;
};

[[noreturn]] void io_fail(const std::string& msg) { throw Error(ErrorCode::kStorageIO, msg); }

// File-system safe token: escape_token plus '.', so ".." cannot escape.
std::string path_component(const std::string& s) {
  std::string out;
  for (char c : escape_token(s)) {
    if (c == '.') out += "%2E";
    else out += c;
  }
  return out;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    auto tab = line.find('\t', pos);
    if (tab == std::string::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
}

std::int64_t parse_i64(const std::string& s, const std::string& where) {
  auto ts = parse_timestamp(s);
  if (!ts) io_fail("bad integer '" + s + "' in " + where);
  return to_ns(*ts);
}

double parse_real(const std::string& s, const std::string& where) {
  auto v = parse_double(s);
  if (!v) io_fail("bad number '" + s + "' in " + where);
  return *v;
}

std::string value_text(const FeatureValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return format_double(*d);
  return escape_token(std::get<std::string>(v));
}

std::string categories_text(const std::map<std::string, std::uint64_t>& cats) {
  std::string out;
  for (const auto& [c, n] : cats) {
    if (!out.empty()) out += ';';
    out += escape_token(c) + "=" + std::to_string(n);
  }
  return out;
}

void write_raw(const fs::path& file, const std::vector<Observation>& raw, const FeatureSpec& spec) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) io_fail("cannot write " + file.string());
  out << "# mbbminer raw " << kind_name(spec.kind) << "\n";
  out << "ts\tvalue\n";
  for (const auto& o : raw) out << to_ns(o.ts) << '\t' << value_text(o.value) << '\n';
  if (!out) io_fail("write failed for " + file.string());
}

void write_level(const fs::path& file, const std::vector<Bucket>& buckets, const FeatureSpec& spec,
                 Duration level) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) io_fail("cannot write " + file.string());
  const bool numeric = spec.kind == FeatureKind::kNumeric;
  out << "# mbbminer level " << level.count() << " " << kind_name(spec.kind) << "\n";
  if (numeric) {
    out << "start\tcount\tvalue\tsum\tsum_err\tmin\tmax\n";
    for (const auto& b : buckets) {
      out << to_ns(b.start) << '\t' << b.count << '\t' << value_text(b.value) << '\t'
          << format_double(b.sum.hi) << '\t' << format_double(b.sum.lo) << '\t'
          << format_double(b.min) << '\t' << format_double(b.max) << '\n';
    }
  } else {
    out << "start\tcount\tvalue\tcategories\n";
    for (const auto& b : buckets) {
      out << to_ns(b.start) << '\t' << b.count << '\t' << value_text(b.value) << '\t'
          << categories_text(b.categories) << '\n';
    }
  }
  if (!out) io_fail("write failed for " + file.string());
}

std::vector<std::string> read_rows(const fs::path& file, std::size_t columns) {
  std::ifstream in(file);
  if (!in) io_fail("cannot read " + file.string());
  std::vector<std::string> lines;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# mbbminer", 0) != 0) {
    io_fail("missing header in " + file.string());
  }
  if (!std::getline(in, line) || split_tabs(line).size() != columns) {
    io_fail("bad column header in " + file.string());
  }
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

std::vector<Observation> read_raw(const fs::path& file, const FeatureSpec& spec) {
  std::vector<Observation> raw;
  const std::string where = file.string();
  for (const auto& line : read_rows(file, 2)) {
    auto f = split_tabs(line);
    if (f.size() != 2) io_fail("bad row in " + where);
    Observation o;
    o.ts = from_ns(parse_i64(f[0], where));
    if (spec.kind == FeatureKind::kNumeric) o.value = parse_real(f[1], where);
    else o.value = unescape_token(f[1]);
    raw.push_back(std::move(o));
  }
  return raw;
}

std::vector<Bucket> read_level(const fs::path& file, const FeatureSpec& spec) {
  const bool numeric = spec.kind == FeatureKind::kNumeric;
  const std::string where = file.string();
  std::vector<Bucket> out;
  for (const auto& line : read_rows(file, numeric ? 7 : 4)) {
    auto f = split_tabs(line);
    if (f.size() != (numeric ? 7u : 4u)) io_fail("bad row in " + where);
    Bucket b;
    b.start = from_ns(parse_i64(f[0], where));
    b.count = static_cast<std::uint64_t>(parse_i64(f[1], where));
    if (numeric) {
      b.value = parse_real(f[2], where);
      b.sum.hi = parse_real(f[3], where);
      b.sum.lo = parse_real(f[4], where);
      b.min = parse_real(f[5], where);
      b.max = parse_real(f[6], where);
    } else {
      b.value = unescape_token(f[2]);
      std::size_t pos = 0;
      const std::string& cats = f[3];
      while (pos < cats.size()) {
        auto semi = cats.find(';', pos);
        if (semi == std::string::npos) semi = cats.size();
        const std::string item = cats.substr(pos, semi - pos);
        const auto eq = item.rfind('=');
        if (eq == std::string::npos) io_fail("bad category count in " + where);
        b.categories[unescape_token(item.substr(0, eq))] =
            static_cast<std::uint64_t>(parse_i64(item.substr(eq + 1), where));
        pos = semi + 1;
      }
    }
    out.push_back(std::move(b));
  }
  return out;
}

template <typename T, typename Key>
std::pair<std::size_t, std::size_t> time_slice(const std::vector<T>& v, Timestamp from, Timestamp to,
                                               Key key) {
  auto lo = std::lower_bound(v.begin(), v.end(), from,
                             [&](const T& x, Timestamp t) { return key(x) < t; });
  auto hi = std::lower_bound(lo, v.end(), to, [&](const T& x, Timestamp t) { return key(x) < t; });
  return {static_cast<std::size_t>(lo - v.begin()), static_cast<std::size_t>(hi - v.begin())};
}

}  // namespace

struct SeriesStore::State {
  fs::path dir;
  Schema schema;
  GranularityLadder ladder;
  std::uint64_t generation = 0;
  std::map<SeriesId, Partition> partitions;
  // Current file per partition and level (granularity 0 = raw).
  std::map<SeriesKey, std::string> files;
  mutable std::shared_mutex mu;

  std::size_t level_index(Duration level) const {
    auto it = std::find(ladder.levels.begin(), ladder.levels.end(), level);
    if (it == ladder.levels.end()) {
      throw Error(ErrorCode::kInvalidArgument, format_duration(level) + " is not a ladder level");
    }
    return static_cast<std::size_t>(it - ladder.levels.begin());
  }

  void rebuild(const SeriesId& id, Partition& p) const {
    const FeatureSpec& spec = schema.at(id.feature);
    p.levels.assign(ladder.levels.size(), {});
    p.levels[0] = bucketize(p.raw, ladder.base(), spec);
    for (std::size_t i = 1; i < ladder.levels.size(); ++i) {
      p.levels[i] = resample(p.levels[i - 1], ladder.levels[i - 1], ladder.levels[i], spec);
    }
  }

  fs::path partition_dir(const SeriesId& id) const {
    return fs::path("data") / path_component(id.node_id) / path_component(id.interface_id) /
           path_component(id.feature);
  }

  std::string manifest_text() const;
  void persist(const std::set<SeriesId>& touched);
};

std::string SeriesStore::State::manifest_text() const {
  std::ostringstream out;
  out << kManifestMagic << "\n";
  out << "generation " << generation << "\n";
  out << "ladder";
  for (auto l : ladder.levels) out << ' ' << l.count();
  out << "\n";
  out << "schema " << kSchemaName << "\n";
  for (const auto& [id, p] : partitions) {
    auto line = [&](Duration g, std::size_t rows, Timestamp first, Timestamp last) {
      out << "partition " << escape_token(id.node_id) << ' ' << escape_token(id.interface_id) << ' '
          << escape_token(id.feature) << ' ' << (g.count() == 0 ? std::string("raw") : std::to_string(g.count()))
          << ' ' << files.at(SeriesKey{id, g}) << ' ' << to_ns(first) << ' ' << to_ns(last) << ' '
          << rows << "\n";
    };
    if (p.raw.empty()) continue;
    line(Duration{0}, p.raw.size(), p.raw.front().ts, p.raw.back().ts);
    for (std::size_t i = 0; i < ladder.levels.size(); ++i) {
      const auto& b = p.levels[i];
      line(ladder.levels[i], b.size(), b.front().start, b.back().start);
    }
  }
  return out.str();
}

void SeriesStore::State::persist(const std::set<SeriesId>& touched) {
  if (dir.empty()) return;
  const std::uint64_t next = generation + 1;
  std::vector<fs::path> stale;
  std::map<SeriesKey, std::string> new_files = files;
  for (const auto& id : touched) {
    const Partition& p = partitions.at(id);
    const FeatureSpec& spec = schema.at(id.feature);
    const fs::path rel = partition_dir(id);
    fs::create_directories(dir / rel);
    const std::string suffix = "." + std::to_string(next) + ".tsv";
    auto assign = [&](Duration g, const std::string& name) {
      SeriesKey key{id, g};
      if (auto it = files.find(key); it != files.end()) stale.push_back(dir / it->second);
      new_files[key] = (rel / (name + suffix)).generic_string();
      return dir / new_files[key];
    };
    write_raw(assign(Duration{0}, "raw"), p.raw, spec);
    for (std::size_t i = 0; i < ladder.levels.size(); ++i) {
      write_level(assign(ladder.levels[i], "L" + std::to_string(ladder.levels[i].count())),
                  p.levels[i], spec, ladder.levels[i]);
    }
  }
  const auto old_files = std::exchange(files, std::move(new_files));
  const auto old_generation = std::exchange(generation, next);
  try {
    const fs::path tmp = dir / (std::string(kManifestName) + ".tmp");
    {
      std::ofstream out(tmp, std::ios::trunc);
      if (!out) io_fail("cannot write " + tmp.string());
      out << manifest_text();
      out.flush();
      if (!out) io_fail("write failed for " + tmp.string());
    }
    fs::rename(tmp, dir / kManifestName);
  } catch (...) {
    files = old_files;
    generation = old_generation;
    throw;
  }
  std::error_code ec;
  for (const auto& f : stale) fs::remove(f, ec);
}

SeriesStore::SeriesStore(std::unique_ptr<State> state) : state_(std::move(state)) {}
SeriesStore::SeriesStore(SeriesStore&&) noexcept = default;
SeriesStore& SeriesStore::operator=(SeriesStore&&) noexcept = default;
SeriesStore::~SeriesStore() = default;

SeriesStore SeriesStore::in_memory(Schema schema, GranularityLadder ladder) {
  schema.validate();
  ladder.validate();
  auto s = std::make_unique<State>();
  s->schema = std::move(schema);
  s->ladder = std::move(ladder);
  return SeriesStore(std::move(s));
}

bool SeriesStore::exists(const fs::path& dir) { return fs::exists(dir / kManifestName); }

SeriesStore SeriesStore::create(const fs::path& dir, Schema schema, GranularityLadder ladder) {
  if (exists(dir)) io_fail("store already exists at " + dir.string());
  SeriesStore store = in_memory(std::move(schema), std::move(ladder));
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) io_fail("cannot create " + dir.string() + ": " + ec.message());
  store.state_->dir = dir;
  {
    std::ofstream out(dir / kSchemaName, std::ios::trunc);
    if (!out) io_fail("cannot write schema into " + dir.string());
    out << format_schema(store.state_->schema);
  }
  store.state_->generation = 0;
  store.state_->persist({});
  return store;
}

SeriesStore SeriesStore::open(const fs::path& dir) {
  std::ifstream in(dir / kManifestName);
  if (!in) io_fail("no store manifest at " + dir.string());
  std::string line;
  if (!std::getline(in, line) || line != kManifestMagic) io_fail("unrecognised manifest in " + dir.string());
  auto s = std::make_unique<State>();
  s->dir = dir;
  std::string schema_file = kSchemaName;
  std::vector<PartitionInfo> infos;
  while (std::getline(in, line)) {
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    const std::string where = "manifest";
    if (tok[0] == "generation" && tok.size() == 2) {
      s->generation = static_cast<std::uint64_t>(parse_i64(tok[1], where));
    } else if (tok[0] == "ladder") {
      for (std::size_t i = 1; i < tok.size(); ++i) s->ladder.levels.push_back(Duration{parse_i64(tok[i], where)});
    } else if (tok[0] == "schema" && tok.size() == 2) {
      schema_file = tok[1];
    } else if (tok[0] == "partition" && tok.size() == 9) {
      PartitionInfo p;
      p.key.id = {unescape_token(tok[1]), unescape_token(tok[2]), unescape_token(tok[3])};
      p.key.granularity = tok[4] == "raw" ? Duration{0} : Duration{parse_i64(tok[4], where)};
      p.file = tok[5];
      p.extent = {from_ns(parse_i64(tok[6], where)), from_ns(parse_i64(tok[7], where))};
      p.rows = static_cast<std::size_t>(parse_i64(tok[8], where));
      infos.push_back(std::move(p));
    } else {
      io_fail("bad manifest line: " + line);
    }
  }
  try {
    s->ladder.validate();
    s->schema = load_schema((dir / schema_file).string());
  } catch (const Error& e) {
    io_fail(std::string("corrupt store: ") + e.what());
  }
  for (const auto& info : infos) {
    const FeatureSpec* spec = s->schema.find(info.key.id.feature);
    if (!spec) io_fail("partition for unknown feature " + info.key.id.feature);
    Partition& p = s->partitions[info.key.id];
    if (p.levels.empty()) p.levels.resize(s->ladder.levels.size());
    const fs::path file = dir / info.file;
    std::size_t rows = 0;
    if (info.key.granularity.count() == 0) {
      p.raw = read_raw(file, *spec);
      rows = p.raw.size();
    } else {
      auto& level = p.levels[s->level_index(info.key.granularity)];
      level = read_level(file, *spec);
      rows = level.size();
    }
    if (rows != info.rows) io_fail("row count mismatch in " + info.file);
    s->files[info.key] = info.file;
  }
  return SeriesStore(std::move(s));
}

const Schema& SeriesStore::schema() const { return state_->schema; }
const GranularityLadder& SeriesStore::ladder() const { return state_->ladder; }
const fs::path& SeriesStore::path() const { return state_->dir; }

Manifest SeriesStore::manifest() const {
  std::shared_lock lock(state_->mu);
  Manifest m;
  m.schema = state_->schema;
  m.ladder = state_->ladder;
  m.generation = state_->generation;
  for (const auto& [id, p] : state_->partitions) {
    if (p.raw.empty()) continue;
    auto file = [&](Duration g) {
      auto it = state_->files.find(SeriesKey{id, g});
      return it == state_->files.end() ? std::string() : it->second;
    };
    m.partitions.push_back({SeriesKey{id, Duration{0}}, file(Duration{0}),
                            TimeExtent{p.raw.front().ts, p.raw.back().ts}, p.raw.size()});
    for (std::size_t i = 0; i < state_->ladder.levels.size(); ++i) {
      const auto& b = p.levels[i];
      const Duration g = state_->ladder.levels[i];
      m.partitions.push_back(
          {SeriesKey{id, g}, file(g), TimeExtent{b.front().start, b.back().start}, b.size()});
    }
  }
  return m;
}

void SeriesStore::append(std::span<const MeasurementRecord> records) {
  struct Pending {
    Timestamp ts;
    std::size_t seq;
    FeatureValue value;
  };
  std::map<SeriesId, std::vector<Pending>> incoming;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    for (const auto& [feature, v] : r.values) {
      if (is_null(v)) continue;
      incoming[SeriesId{r.node_id, r.interface_id, feature}].push_back({r.ts, i, v});
    }
  }
  std::unique_lock lock(state_->mu);
  std::set<SeriesId> touched;
  for (auto& [id, batch] : incoming) {
    // Stable by time, then input order so the later duplicate overwrites.
    std::sort(batch.begin(), batch.end(), [](const Pending& a, const Pending& b) {
      return a.ts != b.ts ? a.ts < b.ts : a.seq < b.seq;
    });
    Partition& p = state_->partitions[id];
    std::vector<Observation> merged;
    merged.reserve(p.raw.size() + batch.size());
    std::size_t i = 0, j = 0;
    while (i < p.raw.size() || j < batch.size()) {
      if (j == batch.size() || (i < p.raw.size() && p.raw[i].ts < batch[j].ts)) {
        merged.push_back(std::move(p.raw[i++]));
        continue;
      }
      const Timestamp ts = batch[j].ts;
      if (i < p.raw.size() && p.raw[i].ts == ts) ++i;
      while (j + 1 < batch.size() && batch[j + 1].ts == ts) ++j;
      merged.push_back({ts, std::move(batch[j].value)});
      ++j;
    }
    p.raw = std::move(merged);
    state_->rebuild(id, p);
    touched.insert(id);
  }
  state_->persist(touched);
}

std::vector<InterfaceInfo> SeriesStore::interfaces() const {
  std::shared_lock lock(state_->mu);
  std::vector<InterfaceInfo> out;
  for (const auto& [id, p] : state_->partitions) {
    if (p.raw.empty()) continue;
    if (out.empty() || out.back().node_id != id.node_id || out.back().interface_id != id.interface_id) {
      out.push_back(InterfaceInfo{id.node_id, id.interface_id, {}});
    }
    out.back().features[id.feature] = TimeExtent{p.raw.front().ts, p.raw.back().ts};
  }
  return out;
}

bool SeriesStore::has_interface(const std::string& node_id, const std::string& interface_id) const {
  std::shared_lock lock(state_->mu);
  auto it = state_->partitions.lower_bound(SeriesId{node_id, interface_id, ""});
  return it != state_->partitions.end() && it->first.node_id == node_id &&
         it->first.interface_id == interface_id;
}

std::optional<TimeExtent> SeriesStore::extent(const SeriesId& id) const {
  std::shared_lock lock(state_->mu);
  auto it = state_->partitions.find(id);
  if (it == state_->partitions.end() || it->second.raw.empty()) return std::nullopt;
  return TimeExtent{it->second.raw.front().ts, it->second.raw.back().ts};
}

std::vector<Observation> SeriesStore::observations(const SeriesId& id, Timestamp from,
                                                   Timestamp to) const {
  std::shared_lock lock(state_->mu);
  auto it = state_->partitions.find(id);
  if (it == state_->partitions.end()) return {};
  const auto& raw = it->second.raw;
  auto [lo, hi] = time_slice(raw, from, to, [](const Observation& o) { return o.ts; });
  return {raw.begin() + static_cast<std::ptrdiff_t>(lo), raw.begin() + static_cast<std::ptrdiff_t>(hi)};
}

std::vector<Bucket> SeriesStore::buckets(const SeriesId& id, Duration level, Timestamp from,
                                         Timestamp to) const {
  std::shared_lock lock(state_->mu);
  const std::size_t li = state_->level_index(level);
  auto it = state_->partitions.find(id);
  if (it == state_->partitions.end()) return {};
  const auto& b = it->second.levels[li];
  auto [lo, hi] = time_slice(b, from, to, [](const Bucket& x) { return x.start; });
  return {b.begin() + static_cast<std::ptrdiff_t>(lo), b.begin() + static_cast<std::ptrdiff_t>(hi)};
}

QueryResult SeriesStore::query(const SeriesQuery& q) const {
  if (q.from >= q.to) throw Error(ErrorCode::kInvalidArgument, "query range is empty (from >= to)");
  if (q.max_points < 1) throw Error(ErrorCode::kInvalidArgument, "max_points must be >= 1");
  for (const auto& f : q.features) state_->schema.at(f);
  {
    std::shared_lock lock(state_->mu);
    auto it = state_->partitions.lower_bound(SeriesId{q.node_id, "", ""});
    if (it == state_->partitions.end() || it->first.node_id != q.node_id) {
      throw Error(ErrorCode::kUnknownKey, "unknown node '" + q.node_id + "'");
    }
  }
  if (!has_interface(q.node_id, q.interface_id)) {
    throw Error(ErrorCode::kUnknownKey, "unknown interface '" + q.interface_id + "' on node '" +
                                            q.node_id + "'");
  }
  QueryResult result;
  result.granularity = choose_level(state_->ladder, q.to - q.from, q.max_points);
  for (const auto& f : q.features) {
    result.series[f] = buckets(SeriesId{q.node_id, q.interface_id, f}, result.granularity, q.from, q.to);
  }
  return result;
}

std::vector<Instance> SeriesStore::instances(const std::string& node_id,
                                             const std::string& interface_id,
                                             const std::vector<std::string>& features,
                                             const Axis& axis,
                                             const std::map<std::string, MergeStrategy>& overrides) const {
  std::vector<std::vector<Bucket>> data;
  std::vector<FeatureStream> streams;
  data.reserve(features.size());
  const Duration base = state_->ladder.base();
  for (const auto& f : features) {
    const FeatureSpec& spec = state_->schema.at(f);
    auto ov = overrides.find(f);
    const MergeStrategy strategy = ov != overrides.end() ? ov->second : spec.merge;
    Timestamp from = axis.t0;
    Timestamp to = axis.t1;
    std::visit(
        [&](const auto& s) {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Interpolate>) {
            from -= s.max_gap;
            to += s.max_gap;
          } else if constexpr (std::is_same_v<S, LastValue>) {
            from -= s.tolerance;
          } else if constexpr (std::is_same_v<S, WindowMean>) {
            from -= s.width;
          } else {
            from = Timestamp::min();
          }
        },
        strategy);
    // Bucket starts are floored, so widen by one base bucket on both ends.
    if (from != Timestamp::min()) from -= base;
    data.push_back(buckets(SeriesId{node_id, interface_id, f}, base, from, to + base));
    streams.push_back(FeatureStream{f, spec.kind, strategy, {}});
  }
  for (std::size_t i = 0; i < streams.size(); ++i) streams[i].buckets = data[i];
  return merge(streams, axis, node_id, interface_id);
}

std::vector<Instance> SeriesStore::geo_select(const GeoQuery& q) const {
  const Schema& schema = state_->schema;
  const FeatureSpec* lat = schema.find(schema.latitude_field);
  const FeatureSpec* lon = schema.find(schema.longitude_field);
  if (!lat || !lon || lat->kind != FeatureKind::kNumeric || lon->kind != FeatureKind::kNumeric) {
    throw Error(ErrorCode::kMissingGeoFeatures, "schema lacks numeric '" + schema.latitude_field +
                                                    "'/'" + schema.longitude_field + "' features");
  }
  if (q.box.lat_min > q.box.lat_max || q.box.lon_min > q.box.lon_max) {
    throw Error(ErrorCode::kInvalidArgument, "bounding box is empty");
  }
  if (q.from >= q.to) throw Error(ErrorCode::kInvalidArgument, "geo range is empty (from >= to)");
  if (q.step <= Duration::zero()) throw Error(ErrorCode::kInvalidArgument, "step must be positive");
  std::vector<std::string> features{lat->name, lon->name};
  for (const auto& f : q.features) {
    schema.at(f);
    if (std::find(features.begin(), features.end(), f) == features.end()) features.push_back(f);
  }
  std::vector<Instance> out;
  for (const auto& iface : interfaces()) {
    if (!q.node_id.empty() && iface.node_id != q.node_id) continue;
    if (!q.interface_id.empty() && iface.interface_id != q.interface_id) continue;
    if (!iface.features.count(lat->name) || !iface.features.count(lon->name)) continue;
    for (auto& inst : instances(iface.node_id, iface.interface_id, features, Axis{q.from, q.to, q.step})) {
      const auto* la = std::get_if<double>(&inst.values[lat->name]);
      const auto* lo = std::get_if<double>(&inst.values[lon->name]);
      if (la && lo && q.box.contains(*la, *lo)) out.push_back(std::move(inst));
    }
  }
  return out;
}

}  // namespace mbbminer
