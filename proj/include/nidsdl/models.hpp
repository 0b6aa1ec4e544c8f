#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nidsdl/nn/layers.hpp"
#include "nidsdl/preprocess.hpp"

namespace nidsdl {

enum class Arch { dnn, cnn, rnn, lstm, gru };

std::string_view arch_name(Arch arch);
// Case-insensitive; throws UsageError for anything else.
Arch parse_arch(std::string_view name);
const std::vector<Arch>& all_archs();

// Smallest input width each architecture accepts.
std::size_t min_input_dim(Arch arch);

struct ModelSpec {
  Arch arch = Arch::dnn;
  std::size_t input_dim = 0;
  std::vector<std::string> layer_plan;
  std::size_t parameter_count = 0;
};

struct TrainConfig {
  std::size_t epochs = 100;
  double lr = 0.01;
  std::size_t batch_size = 1024;
  double validation_fraction = 0.2;
  std::uint64_t seed = 42;
  double threshold = 0.5;

  // Throws UsageError when a field is out of range.
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;      // NaN when there is no validation slice
  double val_accuracy = 0.0;  // NaN when there is no validation slice
};

// A classifier: architecture, parameters, and the history of how they were fitted.
class Model {
 public:
  Model(ModelSpec spec, nn::Network network);

  const ModelSpec& spec() const noexcept { return spec_; }
  const nn::Network& network() const noexcept { return network_; }
  nn::Network& network() noexcept { return network_; }

  std::vector<EpochRecord> history;
  TrainConfig config;  // the configuration it was trained with

  // Sigmoid score in [0, 1]. Pure; safe to call concurrently on a const Model.
  double predict(std::span<const double> x) const;

  // Scores for every row of a row-major matrix with input_dim columns.
  std::vector<double> predict_rows(std::span<const double> matrix, std::size_t batch = 1024) const;
  std::vector<double> predict(const EncodedDataset& data) const;

 private:
  ModelSpec spec_;
  nn::Network network_;
};

inline bool is_attack(double score, double threshold) { return score >= threshold; }

// Fixed architecture for `arch` with seeded Glorot initialisation.
Model build(Arch arch, std::size_t input_dim, std::uint64_t seed);

using EpochCallback = std::function<void(Arch, const EpochRecord&)>;

// Minibatch Adam on sigmoid + binary cross-entropy. The training rows are
// shuffled once by `config.seed`; the trailing validation_fraction of that
// order is held out, the rest is reshuffled every epoch.
Model train(Model model, const EncodedDataset& data, const TrainConfig& config,
            const EpochCallback& on_epoch = {});

}  // namespace nidsdl
