#include "sketchforge/service_client.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <thread>

#include "httplib.h"
#include "sketchforge/errors.hpp"

namespace sketchforge {

void ServiceConfig::validate() const {
  if (base_url.empty()) throw ConfigError("service base_url is empty");
  if (!(timeout > 0.0)) throw ConfigError("service timeout must be > 0");
  if (max_retries < 0) throw ConfigError("service max_retries must be >= 0");
  if (!(backoff >= 0.0)) throw ConfigError("service backoff must be >= 0");
}

ServiceClient::ServiceClient(ServiceConfig config) : config_(std::move(config)) {
  config_.validate();
  http_ = std::make_unique<httplib::Client>(config_.base_url);
  if (!http_->is_valid()) throw ConfigError(fmt::format("invalid service URL '{}'", config_.base_url));
  const auto sec = static_cast<time_t>(config_.timeout);
  const auto usec = static_cast<time_t>((config_.timeout - static_cast<double>(sec)) * 1e6);
  http_->set_connection_timeout(sec, usec);
  http_->set_read_timeout(sec, usec);
  http_->set_write_timeout(sec, usec);
}

ServiceClient::~ServiceClient() = default;

std::string ServiceClient::send(const std::string& method, const std::string& path, const std::string& body) {
  std::lock_guard lock(mutex_);
  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(std::chrono::duration<double>(config_.backoff * std::pow(2.0, attempt - 1)));
    httplib::Result res = method == "GET" ? http_->Get(path) : http_->Post(path, body, "application/octet-stream");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = fmt::format("HTTP {}", res->status);
      continue;
    }
    if (res->status != 200)
      throw ProtocolError(fmt::format("{} {} returned HTTP {}: {}", method, path, res->status, res->body.substr(0, 200)));
    return res->body;
  }
  throw TransportError(fmt::format("{} {}{} failed after {} attempt(s): {}", method, config_.base_url, path,
                                   config_.max_retries + 1, last_error));
}

wire::Message ServiceClient::post(const std::string& path, const wire::Message& request) {
  return wire::decode(send("POST", path, wire::encode(request)));
}

nlohmann::json ServiceClient::health() {
  const std::string body = send("GET", "/v1/health", {});
  try {
    return nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(fmt::format("health reply is not JSON: {}", e.what()));
  }
}

namespace {

void require_finite(const wire::Array& a) {
  for (float v : a.values)
    if (!std::isfinite(v)) throw ProtocolError(fmt::format("array '{}' contains non-finite values", a.name));
}

}  // namespace

GuidanceResponse remote_predict(ServiceClient& client, const GuidanceRequest& req) {
  if (!(req.lambda >= 0.0 && req.lambda <= 1.0)) throw InputError("guidance lambda must lie in [0,1]");
  wire::Message msg;
  msg.fields = {{"t", req.t}, {"prompt", req.prompt}, {"lambda", req.lambda}, {"seed", req.seed}};
  msg.arrays.push_back(wire::image_to_array("x_t", req.x_t));
  if (req.sketch) msg.arrays.push_back(wire::image_to_array("sketch", *req.sketch));

  const wire::Message reply = client.post("/v1/denoise", msg);
  const wire::Array& cond = reply.array("eps_cond");
  const wire::Array& uncond = reply.array("eps_uncond");
  const wire::Array& sent = msg.arrays.front();
  if (cond.dims != sent.dims || uncond.dims != sent.dims) throw ProtocolError("denoise reply shape differs from x_t");
  require_finite(cond);
  require_finite(uncond);
  return {wire::array_to_image(cond), wire::array_to_image(uncond)};
}

SketchLossResult remote_sketch_loss(ServiceClient& client, const Image& rgb, const SketchImage& sketch) {
  wire::Message msg;
  msg.arrays.push_back(wire::image_to_array("x", rgb));
  msg.arrays.push_back(wire::image_to_array("sketch", sketch.strokes));

  const wire::Message reply = client.post("/v1/sketch_loss", msg);
  if (!reply.fields.contains("loss") || !reply.fields["loss"].is_number()) throw ProtocolError("sketch_loss reply has no loss");
  const double loss = reply.fields["loss"].get<double>();
  if (!(loss >= -1.0 && loss <= 1.0)) throw ProtocolError(fmt::format("sketch loss {} outside [-1, 1]", loss));
  const wire::Array& grad = reply.array("grad");
  if (grad.dims != msg.arrays.front().dims) throw ProtocolError("sketch_loss gradient shape differs from x");
  require_finite(grad);
  return {loss, wire::array_to_image(grad)};
}

}  // namespace sketchforge
