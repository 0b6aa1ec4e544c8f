#include "nidsdl/serve.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <nlohmann/json.hpp>

#include "nidsdl/error.hpp"

namespace nidsdl {

using json = nlohmann::json;

Classifier::Classifier(ModelArtifact artifact, Encoder encoder, double threshold)
    : model_(std::move(artifact.model)), encoder_(std::move(encoder)), threshold_(threshold) {
  if (artifact.encoder_digest != encoder_.digest()) {
    throw VerificationError("model was trained with encoder " + artifact.encoder_digest + " but the supplied encoder is " +
                    encoder_.digest());
  }
  if (model_.spec().input_dim != encoder_.output_dim()) {
    throw DataError("model input width does not match the encoder output width");
  }
  if (!(threshold_ >= 0.0 && threshold_ <= 1.0)) throw UsageError("threshold must lie in [0, 1]");
}

ClassifyResponse Classifier::classify(const FeatureMap& features) const {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<FeatureValue> values;
  values.reserve(encoder_.features().size());
  for (const auto& f : encoder_.features()) {
    auto it = features.find(f.name);
    if (it == features.end()) throw DataError("missing feature '" + f.name + "'");
    values.push_back(it->second);
  }
  const auto x = encoder_.encode_values(values);
  ClassifyResponse r;
  r.score = model_.predict(x);
  r.attack = is_attack(r.score, threshold_);
  r.model = std::string(arch_name(model_.spec().arch));
  r.latency_us = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - t0)
                     .count();
  return r;
}

std::string response_json(const ClassifyResponse& r) {
  json j = {{"verdict", r.attack ? "attack" : "normal"},
            {"score", r.score},
            {"model", r.model},
            {"latency_us", r.latency_us}};
  return j.dump();
}

namespace {

std::string error_json(const std::string& message) { return json{{"error", message}}.dump(); }

}  // namespace

std::string Classifier::handle_line(std::string_view line) const {
  json request;
  try {
    request = json::parse(line);
  } catch (const json::exception&) {
    return error_json("request is not valid JSON");
  }
  if (!request.is_object()) return error_json("request must be a JSON object");
  if (auto ping = request.find("ping"); ping != request.end() && *ping == true) {
    return json{{"pong", true}, {"model", arch_name(model_.spec().arch)}}.dump();
  }
  auto feats = request.find("features");
  if (feats == request.end()) return error_json("missing key 'features'");
  if (!feats->is_object()) return error_json("'features' must be an object");

  FeatureMap features;
  for (const auto& [key, value] : feats->items()) {
    if (value.is_string()) {
      features.emplace(key, value.get<std::string>());
    } else if (value.is_number()) {
      features.emplace(key, value.get<double>());
    } else {
      return error_json("feature '" + key + "' must be a string or a number");
    }
  }
  try {
    return response_json(classify(features));
  } catch (const Error& e) {
    return error_json(e.what());
  }
}

std::string request_json(const RawRecord& record, const Encoder& encoder, const FeatureSchema& schema) {
  json features = json::object();
  for (const auto& f : encoder.features()) {
    const auto idx = schema.require_index(f.name);
    if (idx >= record.values.size()) throw DataError("record has no value for feature '" + f.name + "'");
    const auto& raw = record.values[idx];
    if (f.kind == FeatureKind::categorical) {
      features[f.name] = raw;
    } else {
      auto v = parse_non_negative(raw);
      if (!v) throw DataError("feature '" + f.name + "' is not a finite non-negative number");
      features[f.name] = *v;
    }
  }
  return json{{"features", features}}.dump();
}

Server::Server(std::shared_ptr<const Classifier> classifier) : classifier_(std::move(classifier)) {}

Server::~Server() { stop(); }

void Server::start(const std::string& host, std::uint16_t port) {
  if (running_) throw UsageError("server already running");
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const auto service = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw UsageError("cannot resolve bind address '" + host + "': " + ::gai_strerror(rc));
  }
  listen_fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (listen_fd_ < 0) {
    ::freeaddrinfo(res);
    throw DataError(std::string("socket: ") + std::strerror(errno));
  }
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  const bool bound = ::bind(listen_fd_, res->ai_addr, res->ai_addrlen) == 0;
  ::freeaddrinfo(res);
  if (!bound || ::listen(listen_fd_, 64) != 0) {
    const std::string why = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw DataError("cannot listen on " + host + ":" + service + ": " + why);
  }
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
}

void Server::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  listen_fd_ = -1;
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(conn_mutex_);
    for (int fd : conn_fds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
}

void Server::accept_loop() {
  while (running_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      return;
    }
    std::lock_guard lock(conn_mutex_);
    if (!running_) {
      ::close(fd);
      return;
    }
    conn_fds_.push_back(fd);
    workers_.emplace_back([this, fd] { serve_connection(fd); });
  }
}

namespace {

bool send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const auto n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

}  // namespace

void Server::serve_connection(int fd) {
  std::string pending;
  bool discarding = false;  // inside an over-long line
  char buf[4096];
  bool open = true;
  while (open) {
    const auto n = ::recv(fd, buf, sizeof(buf), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    std::string_view chunk(buf, static_cast<std::size_t>(n));
    while (!chunk.empty()) {
      const auto nl = chunk.find('\n');
      const auto piece = chunk.substr(0, nl);
      if (!discarding) pending.append(piece);
      if (pending.size() > kMaxRequestBytes) {
        pending.clear();
        if (!discarding && !send_all(fd, error_json("request line exceeds " + std::to_string(kMaxRequestBytes) +
                                                    " bytes") + "\n")) {
          open = false;
          break;
        }
        discarding = true;
      }
      if (nl == std::string_view::npos) break;
      chunk.remove_prefix(nl + 1);
      if (discarding) {
        discarding = false;
        continue;
      }
      if (!pending.empty() && pending.back() == '\r') pending.pop_back();
      if (!pending.empty()) {
        if (!send_all(fd, classifier_->handle_line(pending) + "\n")) {
          open = false;
          break;
        }
      }
      pending.clear();
    }
  }
  std::lock_guard lock(conn_mutex_);
  std::erase(conn_fds_, fd);
  ::close(fd);
}

}  // namespace nidsdl
