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

#include "mbbminer/schema.hpp"

#include <fstream>
#include <map>
#include <type_traits>
#include <optional>
#include <sstream>

#include "mbbminer/error.hpp"

namespace mbbminer {

const FeatureSpec* Schema::find(std::string_view name) const {
  for (const auto& f : features) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

const FeatureSpec& Schema::at(std::string_view name) const {
  if (const auto* f = find(name)) return *f;
  throw Error(ErrorCode::kUnknownKey, "unknown feature '" + std::string(name) + "'");
}

std::vector<std::string> Schema::feature_names() const {
  std::vector<std::string> names;
  names.reserve(features.size());
  for (const auto& f : features) names.push_back(f.name);
  return names;
}

void check_strategy(const MergeStrategy& strategy, const FeatureSpec& spec) {
  const bool numeric = spec.kind == FeatureKind::kNumeric;
  auto fail = [&](std::string_view what) {
    throw Error(ErrorCode::kStrategyKindMismatch,
                std::string(what) + " is not applicable to " + std::string(kind_name(spec.kind)) +
                    " feature '" + spec.name + "'");
  };
  std::visit(
      [&](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Interpolate>) {
          if (!numeric) fail("interpolate");
          if (s.max_gap <= Duration::zero()) fail("non-positive max_gap");
        } else if constexpr (std::is_same_v<S, WindowMean>) {
          if (!numeric) fail("window_mean");
          if (s.width <= Duration::zero()) fail("non-positive width");
        } else if constexpr (std::is_same_v<S, LastValue>) {
          if (s.tolerance <= Duration::zero()) fail("non-positive tolerance");
        } else {
          if (numeric) fail("state_track");
          for (const auto& e : s.start_events) {
            if (s.stop_events.count(e)) fail("state_track with overlapping start/stop events");
          }
        }
      },
      strategy);
}

void Schema::validate() const {
  std::set<std::string> seen;
  for (const auto& f : features) {
    if (f.name.empty()) throw Error(ErrorCode::kInvalidArgument, "empty feature name");
    if (!seen.insert(f.name).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate feature '" + f.name + "'");
    }
    const bool numeric = f.kind == FeatureKind::kNumeric;
    if (numeric == (f.aggregation == Aggregation::kMode)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "aggregation '" + std::string(aggregation_name(f.aggregation)) +
                      "' does not fit " + std::string(kind_name(f.kind)) + " feature '" + f.name + "'");
    }
    check_strategy(f.merge, f);
  }
  for (const std::string* field : {&time_field, &node_field, &interface_field}) {
    if (field->empty()) throw Error(ErrorCode::kInvalidArgument, "empty key field name");
    if (seen.count(*field)) {
      throw Error(ErrorCode::kInvalidArgument, "key field '" + *field + "' collides with a feature");
    }
  }
}

std::string_view kind_name(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kNumeric: return "numeric";
    case FeatureKind::kCategorical: return "categorical";
    case FeatureKind::kEvent: return "event";
  }
  return "?";
}

std::string_view aggregation_name(Aggregation agg) {
  switch (agg) {
    case Aggregation::kMean: return "mean";
    case Aggregation::kMin: return "min";
    case Aggregation::kMax: return "max";
    case Aggregation::kMode: return "mode";
  }
  return "?";
}

std::string_view orientation_name(Orientation o) {
  switch (o) {
    case Orientation::kNone: return "none";
    case Orientation::kLowerIsBetter: return "lower_is_better";
    case Orientation::kHigherIsBetter: return "higher_is_better";
  }
  return "?";
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::set<std::string> split_set(std::string_view s) {
  std::set<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    auto comma = s.find(',', pos);
    if (comma == std::string_view::npos) comma = s.size();
    auto item = trim(s.substr(pos, comma - pos));
    if (!item.empty()) out.insert(item);
    pos = comma + 1;
  }
  return out;
}

std::string join_set(const std::set<std::string>& s) {
  std::string out;
  for (const auto& e : s) {
    if (!out.empty()) out += ',';
    out += e;
  }
  return out;
}

struct Section {
  std::string name;
  int line = 0;
  std::map<std::string, std::pair<std::string, int>> values;
};

[[noreturn]] void parse_fail(int line, const std::string& msg) {
  throw Error(ErrorCode::kParse, "schema line " + std::to_string(line) + ": " + msg);
}

Duration duration_value(const Section& sec, const std::string& key, Duration fallback) {
  auto it = sec.values.find(key);
  if (it == sec.values.end()) return fallback;
  auto d = parse_duration(it->second.first);
  if (!d) parse_fail(it->second.second, "bad duration '" + it->second.first + "'");
  return *d;
}

FeatureSpec build_feature(const Section& sec) {
  FeatureSpec f;
  f.name = sec.name;
  static const std::set<std::string> kKnown{"kind",      "unit",        "aggregation", "orientation",
                                            "merge",     "max_gap",     "tolerance",   "width",
                                            "start_events", "stop_events"};
  for (const auto& [key, v] : sec.values) {
    if (!kKnown.count(key)) parse_fail(v.second, "unknown key '" + key + "'");
  }
  auto get = [&](const std::string& key) -> std::optional<std::string> {
    auto it = sec.values.find(key);
    if (it == sec.values.end()) return std::nullopt;
    return it->second.first;
  };
  auto line_of = [&](const std::string& key) { return sec.values.at(key).second; };

  const auto kind = get("kind");
  if (!kind) parse_fail(sec.line, "feature '" + sec.name + "' has no kind");
  if (*kind == "numeric") f.kind = FeatureKind::kNumeric;
  else if (*kind == "categorical") f.kind = FeatureKind::kCategorical;
  else if (*kind == "event") f.kind = FeatureKind::kEvent;
  else parse_fail(line_of("kind"), "unknown kind '" + *kind + "'");

  f.unit = get("unit").value_or("");
  f.aggregation = f.kind == FeatureKind::kNumeric ? Aggregation::kMean : Aggregation::kMode;
  if (auto agg = get("aggregation")) {
    if (*agg == "mean") f.aggregation = Aggregation::kMean;
    else if (*agg == "min") f.aggregation = Aggregation::kMin;
    else if (*agg == "max") f.aggregation = Aggregation::kMax;
    else if (*agg == "mode") f.aggregation = Aggregation::kMode;
    else parse_fail(line_of("aggregation"), "unknown aggregation '" + *agg + "'");
  }
  if (auto o = get("orientation")) {
    if (*o == "none") f.orientation = Orientation::kNone;
    else if (*o == "lower_is_better") f.orientation = Orientation::kLowerIsBetter;
    else if (*o == "higher_is_better") f.orientation = Orientation::kHigherIsBetter;
    else parse_fail(line_of("orientation"), "unknown orientation '" + *o + "'");
  }
  const std::string merge = get("merge").value_or("last_value");
  if (merge == "interpolate") {
    f.merge = Interpolate{duration_value(sec, "max_gap", kDefaultInterpolateMaxGap)};
  } else if (merge == "last_value") {
    f.merge = LastValue{duration_value(sec, "tolerance", kDefaultLastValueTolerance)};
  } else if (merge == "window_mean") {
    f.merge = WindowMean{duration_value(sec, "width", kDefaultWindowMeanWidth)};
  } else if (merge == "state_track") {
    f.merge = StateTrack{split_set(get("start_events").value_or("")),
                         split_set(get("stop_events").value_or(""))};
  } else {
    parse_fail(line_of("merge"), "unknown merge strategy '" + merge + "'");
  }
  return f;
}

}  // namespace

Schema parse_schema(std::string_view text) {
  Schema schema;
  std::vector<Section> sections;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') parse_fail(line_no, "unterminated section header");
      const std::string inner = trim(std::string_view(line).substr(1, line.size() - 2));
      if (inner.rfind("feature ", 0) != 0) parse_fail(line_no, "expected [feature <name>]");
      Section sec;
      sec.name = trim(std::string_view(inner).substr(8));
      sec.line = line_no;
      if (sec.name.empty()) parse_fail(line_no, "empty feature name");
      sections.push_back(std::move(sec));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) parse_fail(line_no, "expected key = value");
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (sections.empty()) {
      if (key == "time_field") schema.time_field = value;
      else if (key == "node_field") schema.node_field = value;
      else if (key == "interface_field") schema.interface_field = value;
      else if (key == "latitude_field") schema.latitude_field = value;
      else if (key == "longitude_field") schema.longitude_field = value;
      else if (key == "operator_field") schema.operator_field = value;
      else parse_fail(line_no, "unknown top-level key '" + key + "'");
    } else {
      auto& sec = sections.back();
      if (!sec.values.emplace(key, std::make_pair(value, line_no)).second) {
        parse_fail(line_no, "duplicate key '" + key + "'");
      }
    }
  }
  for (const auto& sec : sections) schema.features.push_back(build_feature(sec));
  schema.validate();
  return schema;
}

Schema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kStorageIO, "cannot read schema '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_schema(ss.str());
}

std::string format_schema(const Schema& schema) {
  std::ostringstream out;
  out << "time_field = " << schema.time_field << "\n"
      << "node_field = " << schema.node_field << "\n"
      << "interface_field = " << schema.interface_field << "\n"
      << "latitude_field = " << schema.latitude_field << "\n"
      << "longitude_field = " << schema.longitude_field << "\n"
      << "operator_field = " << schema.operator_field << "\n";
  for (const auto& f : schema.features) {
    out << "\n[feature " << f.name << "]\n"
        << "kind = " << kind_name(f.kind) << "\n";
    if (!f.unit.empty()) out << "unit = " << f.unit << "\n";
    out << "aggregation = " << aggregation_name(f.aggregation) << "\n"
        << "orientation = " << orientation_name(f.orientation) << "\n";
    std::visit(
        [&](const auto& s) {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Interpolate>) {
            out << "merge = interpolate\nmax_gap = " << format_duration(s.max_gap) << "\n";
          } else if constexpr (std::is_same_v<S, LastValue>) {
            out << "merge = last_value\ntolerance = " << format_duration(s.tolerance) << "\n";
          } else if constexpr (std::is_same_v<S, WindowMean>) {
            out << "merge = window_mean\nwidth = " << format_duration(s.width) << "\n";
          } else {
            out << "merge = state_track\nstart_events = " << join_set(s.start_events)
                << "\nstop_events = " << join_set(s.stop_events) << "\n";
          }
        },
        f.merge);
  }
  return out.str();
}

Schema default_schema() {
  using std::chrono::seconds;
  auto numeric = [](std::string name, std::string unit, MergeStrategy merge,
                    Orientation o = Orientation::kNone) {
    return FeatureSpec{std::move(name), FeatureKind::kNumeric, std::move(unit), Aggregation::kMean,
                       std::move(merge), o};
  };
  auto categorical = [](std::string name, FeatureKind kind = FeatureKind::kCategorical) {
    return FeatureSpec{std::move(name), kind, "", Aggregation::kMode, LastValue{}, Orientation::kNone};
  };
  Schema s;
  s.features = {
      numeric("rtt", "ms", WindowMean{}, Orientation::kLowerIsBetter),
      numeric("rssi", "dBm", LastValue{}, Orientation::kHigherIsBetter),
      numeric("rsrq", "dB", LastValue{}, Orientation::kHigherIsBetter),
      numeric("rsrp", "dBm", LastValue{}, Orientation::kHigherIsBetter),
      categorical("device_mode"),
      categorical("cid"),
      numeric("frequency", "MHz", LastValue{}),
      categorical("event_type", FeatureKind::kEvent),
      categorical("operator"),
      numeric("latitude", "deg", Interpolate{}),
      numeric("longitude", "deg", Interpolate{}),
  };
  return s;
}

}  // namespace mbbminer
