#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "nidsdl/models.hpp"
#include "nidsdl/persist.hpp"
#include "nidsdl/preprocess.hpp"

namespace nidsdl {

using FeatureMap = std::map<std::string, FeatureValue, std::less<>>;

struct ClassifyResponse {
  bool attack = false;
  double score = 0.0;
  std::string model;
  std::int64_t latency_us = 0;
};

// A model bound to the encoder it was trained with. Immutable after construction,
// so one instance can serve any number of threads.
class Classifier {
 public:
  // Throws DataError when the artifact was not trained against this encoder.
  Classifier(ModelArtifact artifact, Encoder encoder, double threshold);

  const Model& model() const noexcept { return model_; }
  const Encoder& encoder() const noexcept { return encoder_; }
  double threshold() const noexcept { return threshold_; }

  // Throws DataError naming a missing key or an unseen category.
  ClassifyResponse classify(const FeatureMap& features) const;

  // One request line in, one response line out (without the newline). Never throws
  // for malformed input; errors come back as {"error": "..."}.
  std::string handle_line(std::string_view line) const;

 private:
  Model model_;
  Encoder encoder_;
  double threshold_;
};

std::string response_json(const ClassifyResponse& r);

// Builds the wire-format request for one raw record, using the encoder's features.
std::string request_json(const RawRecord& record, const Encoder& encoder, const FeatureSchema& schema);

// Newline-delimited JSON over TCP, one thread per connection.
class Server {
 public:
  explicit Server(std::shared_ptr<const Classifier> classifier);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Port 0 picks a free port; see port().
  void start(const std::string& host, std::uint16_t port);
  std::uint16_t port() const noexcept { return port_; }
  void stop();

 private:
  void accept_loop();
  void serve_connection(int fd);

  std::shared_ptr<const Classifier> classifier_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::mutex conn_mutex_;
  std::vector<int> conn_fds_;
  std::vector<std::thread> workers_;
};

inline constexpr std::size_t kMaxRequestBytes = 64 * 1024;

}  // namespace nidsdl
