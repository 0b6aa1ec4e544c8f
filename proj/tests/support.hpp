#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nidsdl/ingest.hpp"
#include "nidsdl/metrics.hpp"

namespace nidsdl::testkit {

// First two lines of the NSL-KDD training file.
inline constexpr const char* kNormalLine =
    "0,tcp,ftp_data,SF,491,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,2,2,0.00,0.00,0.00,0.00,1.00,0.00,0.00,"
    "150,25,0.17,0.03,0.17,0.00,0.00,0.00,0.05,0.00,normal,20";
inline constexpr const char* kNeptuneLine =
    "0,tcp,private,S0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,123,6,1.00,1.00,0.00,0.00,0.05,0.07,0.00,"
    "255,26,0.10,0.05,0.00,0.00,1.00,1.00,0.00,0.00,neptune,19";

// A fresh directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("nidsdl-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

// Random but well-formed record over the NSL-KDD schema.
inline RawRecord random_record(std::mt19937_64& rng, const FeatureSchema& schema) {
  static const std::vector<std::string> labels = {"normal", "neptune", "smurf", "satan", "back", "NORMAL"};
  RawRecord r;
  for (const auto& f : schema.features()) {
    if (f.kind == FeatureKind::categorical) {
      const auto& vocab = f.name == "protocol_type" ? nsl_kdd_protocols()
                          : f.name == "service"     ? nsl_kdd_services()
                                                    : nsl_kdd_flags();
      r.values.push_back(vocab[rng() % vocab.size()]);
    } else if (rng() % 2 == 0) {
      r.values.push_back(std::to_string(rng() % 100000));
    } else {
      const auto hundredths = rng() % 101;
      r.values.push_back(std::to_string(hundredths / 100) + "." + (hundredths % 100 < 10 ? "0" : "") +
                         std::to_string(hundredths % 100));
    }
  }
  r.label = labels[rng() % labels.size()];
  if (rng() % 4 != 0) r.difficulty = static_cast<int>(rng() % 22);
  return r;
}

// Distance in units in the last place between two finite doubles of the same sign.
inline std::uint64_t ulp_distance(double a, double b) {
  if (a == b) return 0;
  if (std::signbit(a) != std::signbit(b)) return UINT64_MAX;
  const auto ia = std::bit_cast<std::int64_t>(a);
  const auto ib = std::bit_cast<std::int64_t>(b);
  return static_cast<std::uint64_t>(ia > ib ? ia - ib : ib - ia);
}

// The four ratios evaluated literally in extended precision, then rounded once.
struct MetricOracle {
  double accuracy, precision, recall, f1;
};

inline MetricOracle metric_oracle(const ConfusionMatrix& m) {
  const long double tp = m.tp, tn = m.tn, fp = m.fp, fn = m.fn;
  const long double p = tp + fp == 0 ? 0.0L : tp / (tp + fp);
  const long double r = tp + fn == 0 ? 0.0L : tp / (tp + fn);
  const long double f = p + r == 0 ? 0.0L : 2 * p * r / (p + r);
  return {static_cast<double>((tp + tn) / (tp + tn + fp + fn)), static_cast<double>(p), static_cast<double>(r),
          static_cast<double>(f)};
}

// Probability that a random attack outscores a random normal, ties counting half.
inline double wilcoxon_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  long double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      pairs += 1;
      if (scores[i] > scores[j]) wins += 1;
      else if (scores[i] == scores[j]) wins += 0.5L;
    }
  }
  return static_cast<double>(wins / pairs);
}

// Small scoring instance with both classes present and deliberate ties.
struct RocInstance {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
};

inline RocInstance random_roc_instance(std::mt19937_64& rng) {
  RocInstance inst;
  const std::size_t n = 2 + rng() % 49;
  const std::uint64_t levels = 1 + rng() % 20;
  for (std::size_t i = 0; i < n; ++i) {
    inst.scores.push_back(static_cast<double>(rng() % (levels + 1)) / static_cast<double>(levels));
    inst.labels.push_back(static_cast<std::uint8_t>(rng() % 2));
  }
  inst.labels[0] = 1;
  inst.labels[1] = 0;
  std::shuffle(inst.labels.begin(), inst.labels.end(), rng);
  return inst;
}

// Blocking newline-delimited client for the inference service.
class LineClient {
 public:
  explicit LineClient(std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    if (fd_ < 0 || ::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      throw std::runtime_error("cannot connect to 127.0.0.1:" + std::to_string(port));
    }
  }
  ~LineClient() {
    if (fd_ >= 0) ::close(fd_);
  }
  LineClient(const LineClient&) = delete;
  LineClient& operator=(const LineClient&) = delete;

  void send(std::string_view data) {
    while (!data.empty()) {
      const auto n = ::send(fd_, data.data(), data.size(), MSG_NOSIGNAL);
      if (n <= 0) throw std::runtime_error("send failed");
      data.remove_prefix(static_cast<std::size_t>(n));
    }
  }

  // Next response line without the newline; empty once the server closes.
  std::string read_line() {
    for (;;) {
      if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      char chunk[4096];
      const auto n = ::recv(fd_, chunk, sizeof(chunk), 0);
      if (n <= 0) return {};
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  std::string request(std::string_view line) {
    send(std::string(line) + "\n");
    return read_line();
  }

 private:
  int fd_ = -1;
  std::string buffer_;
};

}  // namespace nidsdl::testkit
