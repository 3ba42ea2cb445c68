#pragma once

#include <memory>
#include <mutex>
#include <string>

#include "json.hpp"
#include "sketchforge/codec.hpp"
#include "sketchforge/guidance.hpp"
#include "sketchforge/sketch.hpp"

namespace httplib {
class Client;
}

namespace sketchforge {

struct ServiceConfig {
  std::string base_url = "http://127.0.0.1:8765";
  double timeout = 120.0;  // seconds
  int max_retries = 3;
  double backoff = 0.5;  // seconds, doubled per retry

  void validate() const;
};

// Blocking HTTP client for the guidance service. At most one request is in
// flight; calls from several threads are serialized in arrival order.
class ServiceClient {
 public:
  explicit ServiceClient(ServiceConfig config);
  ~ServiceClient();
  ServiceClient(const ServiceClient&) = delete;
  ServiceClient& operator=(const ServiceClient&) = delete;

  const ServiceConfig& config() const { return config_; }

  // POSTs a wire message and decodes the reply. Timeouts, connection failures
  // and 5xx are retried with backoff, then raise TransportError; 4xx and
  // malformed replies raise ProtocolError.
  wire::Message post(const std::string& path, const wire::Message& request);
  nlohmann::json health();

 private:
  std::string send(const std::string& method, const std::string& path, const std::string& body);

  ServiceConfig config_;
  std::unique_ptr<httplib::Client> http_;
  std::mutex mutex_;
};

// POST /v1/denoise. Returns both predictions; classifier-free guidance is
// combined client-side.
GuidanceResponse remote_predict(ServiceClient& client, const GuidanceRequest& request);

// POST /v1/sketch_loss. The service returns the loss and its gradient w.r.t. x.
SketchLossResult remote_sketch_loss(ServiceClient& client, const Image& rgb, const SketchImage& sketch);

class RemoteGuidanceProvider : public GuidanceProvider {
 public:
  explicit RemoteGuidanceProvider(ServiceClient& client) : client_(client) {}
  GuidanceResponse predict(const GuidanceRequest& request) override { return remote_predict(client_, request); }
  std::string identity() const override { return "remote:" + client_.config().base_url; }

 private:
  ServiceClient& client_;
};

class RemoteSketchLossProvider : public SketchLossProvider {
 public:
  explicit RemoteSketchLossProvider(ServiceClient& client) : client_(client) {}
  SketchLossResult evaluate(const Image& rgb, const SketchImage& sketch) override {
    return remote_sketch_loss(client_, rgb, sketch);
  }
  std::string identity() const override { return "remote:" + client_.config().base_url; }

 private:
  ServiceClient& client_;
};

}  // namespace sketchforge
