#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nidsdl/metrics.hpp"
#include "nidsdl/models.hpp"
#include "nidsdl/nn/gradcheck.hpp"
#include "nidsdl/preprocess.hpp"

namespace nidsdl {

enum class FeatureSet { default_set, top_k };

struct RunConfig {
  std::string dataset;
  std::string out_dir = "run";
  FeatureSet features = FeatureSet::default_set;
  std::size_t top_k = 12;
  double ratio = 0.85;
  std::uint64_t seed = 42;
  bool fit_on_all = false;  // fit the encoder on every row instead of the training partition
  std::size_t max_rows = 0;  // 0 keeps every parsed row
  std::size_t jobs = 1;      // concurrent trainings for "all"
  TrainConfig train;
  // `arch.key=value` overrides, applied on top of `train` in order.
  std::map<Arch, std::vector<std::pair<std::string, std::string>>> per_arch;

  TrainConfig train_config(Arch arch) const;

  // Smoke profile: 10 epochs, first 20,000 rows.
  void apply_smoke();

  // `key=value` with the same names as the config file; `arch.key` targets one architecture.
  void set(std::string_view key, std::string_view value);

  void validate() const;
};

// Flat `key = value` lines; blank lines and `#` comments are ignored.
void load_config_file(RunConfig& config, const std::string& path);

// File names inside out_dir.
namespace files {
inline constexpr const char* encoder = "encoder.nidsenc";
inline constexpr const char* train = "train.nidsdata";
inline constexpr const char* test = "test.nidsdata";
inline constexpr const char* train_raw = "train.csv";
inline constexpr const char* test_raw = "test.csv";
inline constexpr const char* summary = "prepare.json";
inline constexpr const char* metrics = "metrics.csv";
inline constexpr const char* confusion = "confusion.csv";
inline constexpr const char* auc = "auc.csv";
inline constexpr const char* report = "report.json";
inline constexpr const char* ranking = "ranking.csv";
inline constexpr const char* selection = "selection.json";
}  // namespace files

std::string model_file(Arch arch);    // <arch>.nidsmodel
std::string history_file(Arch arch);  // <arch>_history.csv
std::string roc_file(Arch arch);      // roc_<arch>.csv

struct PrepareSummary {
  std::size_t rows = 0;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  std::size_t train_attacks = 0;
  std::size_t test_attacks = 0;
  std::vector<std::string> features;
  std::size_t output_dim = 0;
  std::string encoder_digest;
};

std::vector<RawRecord> load_capped(const std::string& path, const FeatureSchema& schema, std::size_t max_rows);

PrepareSummary cmd_prepare(const RunConfig& config, std::ostream& log);

// `which` is an architecture name or "all".
std::vector<Arch> parse_arch_list(std::string_view which);

void cmd_train(const RunConfig& config, std::string_view which, std::ostream& log);

std::vector<EvalReport> cmd_evaluate(const RunConfig& config, std::string_view which, std::ostream& log);

struct RankResult {
  SelectionReport report;
  std::vector<std::string> selected;
  std::size_t overlap = 0;  // selected names also in default_features()
};

RankResult cmd_rank_features(const RunConfig& config, std::size_t k, std::ostream& log);

struct GradCheckSummary {
  std::vector<nn::GradCheckReport> failures;
  std::size_t checks = 0;
  bool passed() const { return failures.empty(); }
};

// Every seed in [0, seeds) for each requested layer kind (all kinds when empty).
GradCheckSummary cmd_gradcheck(double tolerance, const std::vector<std::string>& layers, std::size_t seeds,
                               std::ostream& log);

std::string history_csv(const std::vector<EpochRecord>& history);

}  // namespace nidsdl
