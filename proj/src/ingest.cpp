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

#include "mbbminer/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "mbbminer/csv.hpp"
#include "mbbminer/error.hpp"
#include "mbbminer/store.hpp"

namespace mbbminer {
namespace {

using nlohmann::json;

std::string integral_text(double v) {
  if (std::floor(v) == v && std::fabs(v) < 9.0e15) {
    return std::to_string(static_cast<long long>(v));
  }
  return format_double(v);
}

// Maps a JSON value onto the feature's kind. Returns nullopt with `reason`
// filled on a type violation.
std::optional<FeatureValue> json_value(const json& v, const FeatureSpec& spec, std::string& reason) {
  if (v.is_null()) return FeatureValue{};
  if (spec.kind == FeatureKind::kNumeric) {
    if (!v.is_number()) {
      reason = "type mismatch: feature '" + spec.name + "' expects a number, got " + v.dump();
      return std::nullopt;
    }
    const double d = v.get<double>();
    if (!std::isfinite(d)) {
      reason = "non-finite value for feature '" + spec.name + "'";
      return std::nullopt;
    }
    return FeatureValue{d};
  }
  if (v.is_string()) return FeatureValue{v.get<std::string>()};
  if (v.is_number()) return FeatureValue{integral_text(v.get<double>())};
  if (v.is_boolean()) return FeatureValue{std::string(v.get<bool>() ? "true" : "false")};
  reason = "type mismatch: feature '" + spec.name + "' expects a category, got " + v.dump();
  return std::nullopt;
}

std::optional<FeatureValue> cell_value(const std::string& cell, const FeatureSpec& spec,
                                       std::string& reason) {
  if (cell == "null") return FeatureValue{};
  if (spec.kind != FeatureKind::kNumeric) return FeatureValue{cell};
  auto d = parse_double(cell);
  if (!d || !std::isfinite(*d)) {
    reason = "type mismatch: feature '" + spec.name + "' expects a number, got '" + cell + "'";
    return std::nullopt;
  }
  return FeatureValue{*d};
}

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

void parse_ndjson(std::istream& in, const Schema& schema, const ParseOptions& options,
                  ParseResult& out) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    ++out.lines;
    auto fail = [&](std::string reason) { out.errors.push_back({line_no, std::move(reason)}); };

    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
      fail("malformed JSON");
      continue;
    }
    MeasurementRecord rec;
    const auto ts = doc.find(schema.time_field);
    if (ts == doc.end()) {
      fail("missing '" + schema.time_field + "'");
      continue;
    }
    std::optional<Timestamp> parsed;
    if (ts->is_string()) parsed = parse_timestamp(ts->get<std::string>());
    else if (ts->is_number_integer()) parsed = from_ns(ts->get<std::int64_t>());
    if (!parsed) {
      fail("bad timestamp " + ts->dump());
      continue;
    }
    rec.ts = *parsed;
    const auto node = doc.find(schema.node_field);
    const auto iface = doc.find(schema.interface_field);
    if (node == doc.end() || !node->is_string() || node->get<std::string>().empty()) {
      fail("missing or empty '" + schema.node_field + "'");
      continue;
    }
    if (iface == doc.end() || !iface->is_string() || iface->get<std::string>().empty()) {
      fail("missing or empty '" + schema.interface_field + "'");
      continue;
    }
    rec.node_id = node->get<std::string>();
    rec.interface_id = iface->get<std::string>();

    const auto fields = doc.find("fields");
    if (fields != doc.end() && !fields->is_object()) {
      fail("'fields' is not an object");
      continue;
    }
    bool ok = true;
    for (const auto& [name, value] : doc.items()) {
      if (name == schema.time_field || name == schema.node_field || name == schema.interface_field ||
          name == "fields") {
        continue;
      }
      const std::string what = schema.find(name) ? "feature '" + name + "' outside 'fields'"
                                                 : "unknown field '" + name + "'";
      if (options.strict) {
        fail(what);
        ok = false;
        break;
      }
      out.warnings.push_back({line_no, what + " dropped"});
    }
    if (!ok) continue;
    if (fields != doc.end()) {
      for (const auto& [name, value] : fields->items()) {
        const FeatureSpec* spec = schema.find(name);
        if (!spec) {
          if (options.strict) {
            fail("unknown field '" + name + "'");
            ok = false;
            break;
          }
          out.warnings.push_back({line_no, "unknown field '" + name + "' dropped"});
          continue;
        }
        std::string reason;
        auto v = json_value(value, *spec, reason);
        if (!v) {
          fail(reason);
          ok = false;
          break;
        }
        rec.values.emplace(name, std::move(*v));
      }
    }
    if (ok) out.records.push_back(std::move(rec));
  }
}

void parse_csv(std::istream& in, const Schema& schema, const ParseOptions& options,
               ParseResult& out) {
  std::vector<std::string> header;
  int line_no = 0;
  if (!read_csv_row(in, header, line_no)) return;
  int ts_col = -1, node_col = -1, iface_col = -1;
  std::vector<const FeatureSpec*> specs(header.size(), nullptr);
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto& h = header[i];
    if (h == schema.time_field) ts_col = static_cast<int>(i);
    else if (h == schema.node_field) node_col = static_cast<int>(i);
    else if (h == schema.interface_field) iface_col = static_cast<int>(i);
    else if (const auto* spec = schema.find(h)) specs[i] = spec;
    else if (options.strict) out.errors.push_back({line_no, "unknown column '" + h + "'"});
    else out.warnings.push_back({line_no, "unknown column '" + h + "' dropped"});
  }
  if (ts_col < 0 || node_col < 0 || iface_col < 0) {
    out.errors.push_back({1, "header row lacks '" + schema.time_field + "', '" + schema.node_field +
                                 "' or '" + schema.interface_field + "'"});
    return;
  }
  const bool unknown_columns_fatal = options.strict && !out.errors.empty();

  std::vector<std::string> row;
  while (true) {
    const int first_line = line_no + 1;
    if (!read_csv_row(in, row, line_no)) break;
    if (row.size() == 1 && is_blank(row[0])) continue;
    ++out.lines;
    auto fail = [&](std::string reason) { out.errors.push_back({first_line, std::move(reason)}); };
    if (unknown_columns_fatal) {
      fail("unknown columns in header (strict mode)");
      continue;
    }
    if (row.size() != header.size()) {
      fail("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(row.size()));
      continue;
    }
    MeasurementRecord rec;
    auto ts = parse_timestamp(row[ts_col]);
    if (!ts) {
      fail("bad timestamp '" + row[ts_col] + "'");
      continue;
    }
    rec.ts = *ts;
    rec.node_id = row[node_col];
    rec.interface_id = row[iface_col];
    if (rec.node_id.empty() || rec.interface_id.empty()) {
      fail("empty node or interface");
      continue;
    }
    bool ok = true;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (!specs[i] || row[i].empty()) continue;
      std::string reason;
      auto v = cell_value(row[i], *specs[i], reason);
      if (!v) {
        fail(reason);
        ok = false;
        break;
      }
      rec.values.emplace(specs[i]->name, std::move(*v));
    }
    if (ok) out.records.push_back(std::move(rec));
  }
}

}  // namespace

ParseResult parse_records(std::istream& in, const Schema& schema, InputFormat format,
                          const ParseOptions& options) {
  ParseResult out;
  if (format == InputFormat::kNdjson) parse_ndjson(in, schema, options, out);
  else parse_csv(in, schema, options, out);
  return out;
}

std::string serialize_ndjson(std::span<const MeasurementRecord> records, const Schema& schema) {
  std::string out;
  for (const auto& r : records) {
    json fields = json::object();
    for (const auto& [name, v] : r.values) {
      if (const auto* d = std::get_if<double>(&v)) fields[name] = *d;
      else if (const auto* s = std::get_if<std::string>(&v)) fields[name] = *s;
      else fields[name] = nullptr;
    }
    json doc = json::object();
    doc[schema.time_field] = to_ns(r.ts);
    doc[schema.node_field] = r.node_id;
    doc[schema.interface_field] = r.interface_id;
    doc["fields"] = std::move(fields);
    out += doc.dump();
    out += '\n';
  }
  return out;
}

void validate_record(const MeasurementRecord& record, const Schema& schema) {
  if (record.node_id.empty() || record.interface_id.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "record with empty node or interface id");
  }
  for (const auto& [name, v] : record.values) {
    const FeatureSpec* spec = schema.find(name);
    if (!spec) throw Error(ErrorCode::kInvalidArgument, "feature '" + name + "' not in schema");
    if (is_null(v)) continue;
    if (spec->kind == FeatureKind::kNumeric) {
      const double* d = std::get_if<double>(&v);
      if (!d) throw Error(ErrorCode::kInvalidArgument, "feature '" + name + "' must be numeric");
      if (!std::isfinite(*d)) {
        throw Error(ErrorCode::kInvalidArgument, "feature '" + name + "' is not finite");
      }
    } else if (!is_categorical(v)) {
      throw Error(ErrorCode::kInvalidArgument, "feature '" + name + "' must be categorical");
    }
  }
}

LoadReport load(std::span<const MeasurementRecord> records, const Schema& record_schema,
                SeriesStore& store) {
  const Schema& schema = store.schema();
  for (const auto& f : record_schema.features) {
    const FeatureSpec* mine = schema.find(f.name);
    if (mine && (mine->kind != f.kind || mine->aggregation != f.aggregation)) {
      throw Error(ErrorCode::kSchemaMismatch,
                  "feature '" + f.name + "' differs between input schema and store schema");
    }
  }
  LoadReport report;
  std::vector<MeasurementRecord> accepted;
  accepted.reserve(records.size());
  for (const auto& r : records) {
    try {
      validate_record(r, schema);
    } catch (const Error& e) {
      ++report.rejected;
      report.rejections.emplace_back(e.what());
      continue;
    }
    accepted.push_back(r);
    if (!report.time_extent) {
      report.time_extent = TimeExtent{r.ts, r.ts};
    } else {
      report.time_extent->first = std::min(report.time_extent->first, r.ts);
      report.time_extent->last = std::max(report.time_extent->last, r.ts);
    }
  }
  report.accepted = accepted.size();
  if (!accepted.empty()) store.append(accepted);
  return report;
}

}  // namespace mbbminer
