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

#ifndef MBBMINER_SERVICE_HPP
#define MBBMINER_SERVICE_HPP

#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "mbbminer/store.hpp"
#include "mbbminer/time.hpp"

namespace mbbminer {

struct ApiRequest {
  std::string method;  // "GET", "POST"
  std::string path;    // "/api/series"
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

// Wire form: {"error": {"status": 422, "code": "invalid_argument", "message": "..."}}
struct ApiError {
  int status = 500;
  std::string code;
  std::string message;
};

// Maps any exception to its API error. Internal failures get an opaque id
// in the message; the detail goes to standard error.
ApiError to_api_error(const std::exception& e);

struct ServiceOptions {
  std::filesystem::path store_path;
  std::string host = "127.0.0.1";
  int port = 8080;
  // Allowed browser origin; empty disables CORS headers.
  std::string cors_origin;
  // Detect/explain budget; overrun answers 422 "timeout".
  Duration budget = std::chrono::seconds(30);
  int threads = 0;
};

class Service {
 public:
  // Opens the store read-only and reopens it when its manifest changes.
  explicit Service(ServiceOptions options);
  // Serves a fixed store.
  Service(std::shared_ptr<const SeriesStore> store, ServiceOptions options = {});
  ~Service();

  // Transport-independent dispatch; never throws.
  ApiResponse handle(const ApiRequest& req);

  // Blocks until stop() is called or binding fails (returns false).
  bool serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mbbminer

#endif  // MBBMINER_SERVICE_HPP
