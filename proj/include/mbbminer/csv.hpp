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

#ifndef MBBMINER_CSV_HPP
#define MBBMINER_CSV_HPP

#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mbbminer {

// Reads one RFC 4180 row; quoted fields may span lines. `line` is advanced by
// the number of physical lines consumed. Returns false at end of input.
bool read_csv_row(std::istream& in, std::vector<std::string>& row, int& line);

std::string csv_escape(std::string_view field);
std::string csv_join(const std::vector<std::string>& fields);

// Shortest text that parses back to the same double.
std::string format_double(double v);
std::optional<double> parse_double(std::string_view s);

// Percent-escapes '%', whitespace, separators and non-printables; used for
// tokens in the store's plain-text files.
std::string escape_token(std::string_view s);
std::string unescape_token(std::string_view s);

}  // namespace mbbminer

#endif  // MBBMINER_CSV_HPP
