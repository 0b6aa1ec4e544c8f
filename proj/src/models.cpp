#include "nidsdl/models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

#include "nidsdl/error.hpp"
#include "nidsdl/nn/adam.hpp"
#include "nidsdl/random.hpp"

namespace nidsdl {

using nn::Activation;
using nn::Tensor;

std::string_view arch_name(Arch arch) {
  switch (arch) {
    case Arch::dnn:
      return "dnn";
    case Arch::cnn:
      return "cnn";
    case Arch::rnn:
      return "rnn";
    case Arch::lstm:
      return "lstm";
    case Arch::gru:
      return "gru";
  }
  return "dnn";
}

Arch parse_arch(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (auto a : all_archs()) {
    if (arch_name(a) == lower) return a;
  }
  throw UsageError("unknown architecture '" + std::string(name) + "' (expected dnn, cnn, rnn, lstm or gru)");
}

const std::vector<Arch>& all_archs() {
  static const std::vector<Arch> archs = {Arch::dnn, Arch::cnn, Arch::rnn, Arch::lstm, Arch::gru};
  return archs;
}

namespace {

constexpr std::size_t kRecurrentUnits = 64;

// valid conv(3) -> pool(2) -> valid conv(3) -> pool(2) must leave at least one step.
std::size_t cnn_steps_after_features(std::size_t d) {
  std::size_t t = d - 2;
  t = (t - 2) / 2 + 1;
  t -= 2;
  return (t - 2) / 2 + 1;
}

}  // namespace

std::size_t min_input_dim(Arch arch) { return arch == Arch::cnn ? 10 : 1; }

Model::Model(ModelSpec spec, nn::Network network) : spec_(std::move(spec)), network_(std::move(network)) {
  spec_.layer_plan = network_.plan();
  spec_.parameter_count = network_.parameter_count();
}

double Model::predict(std::span<const double> x) const {
  if (x.size() != spec_.input_dim) {
    throw DataError("input has " + std::to_string(x.size()) + " values, model expects " +
                    std::to_string(spec_.input_dim));
  }
  Tensor in({1, x.size()}, std::vector<double>(x.begin(), x.end()));
  return network_.forward(in)[0];
}

std::vector<double> Model::predict_rows(std::span<const double> matrix, std::size_t batch) const {
  const std::size_t d = spec_.input_dim;
  if (matrix.size() % d != 0) throw DataError("matrix width does not match the model input");
  const std::size_t rows = matrix.size() / d;
  std::vector<double> scores;
  scores.reserve(rows);
  for (std::size_t start = 0; start < rows; start += batch) {
    const std::size_t n = std::min(batch, rows - start);
    Tensor in({n, d}, std::vector<double>(matrix.begin() + static_cast<std::ptrdiff_t>(start * d),
                                          matrix.begin() + static_cast<std::ptrdiff_t>((start + n) * d)));
    auto out = network_.forward(in);
    scores.insert(scores.end(), out.data().begin(), out.data().end());
  }
  return scores;
}

std::vector<double> Model::predict(const EncodedDataset& data) const {
  if (data.cols != spec_.input_dim) {
    throw DataError("dataset has " + std::to_string(data.cols) + " columns, model expects " +
                    std::to_string(spec_.input_dim));
  }
  return predict_rows(data.matrix);
}

Model build(Arch arch, std::size_t input_dim, std::uint64_t seed) {
  if (input_dim == 0) throw UsageError("input_dim must be at least 1");
  if (input_dim < min_input_dim(arch)) {
    throw UsageError(std::string(arch_name(arch)) + " needs input_dim >= " +
                     std::to_string(min_input_dim(arch)));
  }
  nn::Network net;
  switch (arch) {
    case Arch::dnn:
      net.add(std::make_unique<nn::DenseLayer>(input_dim, 128, Activation::relu));
      net.add(std::make_unique<nn::DenseLayer>(128, 64, Activation::relu));
      net.add(std::make_unique<nn::DenseLayer>(64, 32, Activation::relu));
      net.add(std::make_unique<nn::DenseLayer>(32, 16, Activation::relu));
      net.add(std::make_unique<nn::DenseLayer>(16, 1, Activation::sigmoid));
      break;
    case Arch::cnn: {
      nn::Conv1dConfig conv{1, nn::Padding::valid, Activation::relu};
      net.add(std::make_unique<nn::SequenceReshape>(input_dim, 1));
      net.add(std::make_unique<nn::Conv1dLayer>(1, 32, 3, conv));
      net.add(std::make_unique<nn::MaxPoolLayer>(2, 2));
      net.add(std::make_unique<nn::Conv1dLayer>(32, 64, 3, conv));
      net.add(std::make_unique<nn::MaxPoolLayer>(2, 2));
      net.add(std::make_unique<nn::Flatten>());
      net.add(std::make_unique<nn::DenseLayer>(cnn_steps_after_features(input_dim) * 64, 64,
                                               Activation::relu));
      net.add(std::make_unique<nn::DenseLayer>(64, 1, Activation::sigmoid));
      break;
    }
    case Arch::rnn:
    case Arch::lstm:
    case Arch::gru: {
      const auto cell = arch == Arch::rnn    ? nn::CellKind::rnn
                        : arch == Arch::lstm ? nn::CellKind::lstm
                                             : nn::CellKind::gru;
      net.add(std::make_unique<nn::SequenceReshape>(input_dim, 1));
      net.add(std::make_unique<nn::RecurrentLayer>(cell, 1, kRecurrentUnits));
      net.add(std::make_unique<nn::DenseLayer>(kRecurrentUnits, 1, Activation::sigmoid));
      break;
    }
  }
  net.initialize(seed);
  return Model(ModelSpec{arch, input_dim, {}, 0}, std::move(net));
}

void TrainConfig::validate() const {
  if (epochs < 1) throw UsageError("epochs must be at least 1");
  if (!(lr > 0.0)) throw UsageError("learning rate must be positive");
  if (batch_size < 1) throw UsageError("batch size must be at least 1");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw UsageError("validation fraction must lie in [0, 1)");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) throw UsageError("threshold must lie in (0, 1)");
}

namespace {

struct Batch {
  Tensor x;
  Tensor y;
};

Batch gather(const EncodedDataset& data, std::span<const std::size_t> rows) {
  Batch b{Tensor({rows.size(), data.cols}), Tensor({rows.size(), 1})};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = data.row(rows[i]);
    std::copy(src.begin(), src.end(), b.x.ptr() + i * data.cols);
    b.y[i] = data.labels[rows[i]];
  }
  return b;
}

double clamped_bce(double p, double y) {
  const double q = std::clamp(p, nn::kBceEpsilon, 1.0 - nn::kBceEpsilon);
  return -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
}

}  // namespace

Model train(Model model, const EncodedDataset& data, const TrainConfig& config,
            const EpochCallback& on_epoch) {
  config.validate();
  const auto& spec = model.spec();
  if (data.rows() == 0) throw DataError("training set is empty");
  if (data.cols != spec.input_dim) {
    throw DataError("training data has " + std::to_string(data.cols) + " columns, model expects " +
                    std::to_string(spec.input_dim));
  }
  const std::size_t pos = data.positives();
  if (pos == 0 || pos == data.rows()) throw DataError("training data must contain both classes");

  Rng rng(config.seed);
  std::vector<std::size_t> order(data.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order.begin(), order.end());
  const auto n_val = static_cast<std::size_t>(
      std::floor(config.validation_fraction * static_cast<double>(data.rows())));
  if (n_val >= data.rows()) throw DataError("validation slice leaves no training rows");
  std::vector<std::size_t> fit_rows(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));
  const std::vector<std::size_t> val_rows(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
  const EncodedDataset val = take_rows(data, val_rows);

  auto& net = model.network();
  const auto params = net.parameters();
  std::vector<const Tensor*> const_params(params.begin(), params.end());
  auto adam = nn::AdamState::for_params(std::span<const Tensor* const>(const_params), config.lr);
  auto grads = net.zero_gradients();
  std::vector<nn::LayerCache> caches;

  model.history.clear();
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(fit_rows.begin(), fit_rows.end());
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < fit_rows.size(); start += config.batch_size) {
      const std::size_t n = std::min(config.batch_size, fit_rows.size() - start);
      auto batch = gather(data, std::span(fit_rows).subspan(start, n));
      auto p = net.forward(batch.x, &caches);

      Tensor dz(p.shape());
      double batch_loss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        batch_loss += clamped_bce(p[i], batch.y[i]);
        dz[i] = (p[i] - batch.y[i]) / static_cast<double>(n);
      }
      if (!std::isfinite(batch_loss)) {
        throw DataError("non-finite training loss in epoch " + std::to_string(epoch) + " (" +
                        std::string(arch_name(spec.arch)) + ")");
      }
      loss_sum += batch_loss;
      net.backward(dz, caches, grads, /*from_preactivation=*/true);

      std::vector<const Tensor*> grad_ptrs;
      for (const auto& layer : grads) {
        for (const auto& g : layer) grad_ptrs.push_back(&g);
      }
      nn::adam_step(std::span<Tensor* const>(params), std::span<const Tensor* const>(grad_ptrs), adam);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(fit_rows.size());
    if (val.rows() > 0) {
      auto scores = model.predict(val);
      double vloss = 0.0;
      std::size_t correct = 0;
      for (std::size_t i = 0; i < scores.size(); ++i) {
        vloss += clamped_bce(scores[i], val.labels[i]);
        correct += (is_attack(scores[i], config.threshold) ? 1u : 0u) == val.labels[i];
      }
      rec.val_loss = vloss / static_cast<double>(scores.size());
      rec.val_accuracy = static_cast<double>(correct) / static_cast<double>(scores.size());
    } else {
      rec.val_loss = std::numeric_limits<double>::quiet_NaN();
      rec.val_accuracy = std::numeric_limits<double>::quiet_NaN();
    }
    model.history.push_back(rec);
    if (on_epoch) on_epoch(spec.arch, rec);
  }

  for (const auto* p : net.parameters()) {
    if (!p->all_finite()) throw DataError("training produced non-finite parameters");
  }
  model.config = config;
  return model;
}

}  // namespace nidsdl
