#pragma once

#include <chrono>
#include <mutex>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "synco/reward/oracle.hpp"

namespace synco {

/// ForwardClient speaking the JSON protocol of the reward service:
///   POST /predict {"reactants": [...], "top_k": k} -> {"products": [...]}
///   GET  /health  -> 200
/// Requests are serialized on one connection.
class HttpForwardClient : public ForwardClient {
 public:
  explicit HttpForwardClient(std::string base_url, int timeout_ms = 30000)
      : base_url_(std::move(base_url)), client_(base_url_) {
    const auto t = std::chrono::milliseconds(timeout_ms);
    client_.set_connection_timeout(t);
    client_.set_read_timeout(t);
    client_.set_write_timeout(t);
  }

  std::vector<std::string> predict(const std::vector<std::string> &reactants, int top_k) override {
    nlohmann::json body{{"reactants", reactants}, {"top_k", top_k}};
    std::lock_guard lock(mutex_);
    auto res = client_.Post("/predict", body.dump(), "application/json");
    if (!res) {
      throw OracleError("forward model at " + base_url_ +
                        " unreachable: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw OracleError("forward model returned HTTP " + std::to_string(res->status));
    }
    try {
      auto j = nlohmann::json::parse(res->body);
      return j.at("products").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception &e) {
      throw OracleError(std::string("malformed forward-model response: ") + e.what());
    }
  }

  /// True iff GET /health answers 200.
  bool healthy() {
    std::lock_guard lock(mutex_);
    auto res = client_.Get("/health");
    return res && res->status == 200;
  }

  const std::string &base_url() const { return base_url_; }

 private:
  std::string base_url_;
  httplib::Client client_;
  std::mutex mutex_;
};

}  // namespace synco
