#pragma once

#include <any>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nidsdl/nn/ops.hpp"
#include "nidsdl/nn/tensor.hpp"
#include "nidsdl/random.hpp"

namespace nidsdl::nn {

// Per-call scratch a layer keeps between forward and backward.
using LayerCache = std::any;

// Layers own their parameters but never mutate them in forward/backward, so a
// const Network may be shared between threads for inference.
class Layer {
 public:
  virtual ~Layer() = default;

  // e.g. "dense(in=16,out=1,act=sigmoid)"; stable, used to validate artifacts.
  virtual std::string describe() const = 0;

  // Forward over a batch; fills `cache` for backward when non-null.
  virtual Tensor forward(const Tensor& x, LayerCache* cache) const = 0;

  // Gradient w.r.t. the layer input; parameter gradients overwrite `grads`.
  virtual Tensor backward(const Tensor& dy, const LayerCache& cache, std::span<Tensor> grads) const = 0;

  // Glorot-uniform weights, zero biases.
  virtual void initialize(Rng& rng) = 0;

  std::span<Tensor> params() { return params_; }
  std::span<const Tensor> params() const { return params_; }
  const std::vector<std::string>& param_names() const { return names_; }

 protected:
  Tensor& add_param(std::string name, Shape shape);

 private:
  std::vector<Tensor> params_;
  std::vector<std::string> names_;
};

class DenseLayer : public Layer {
 public:
  DenseLayer(std::size_t in, std::size_t out, Activation act);
  std::string describe() const override;
  Tensor forward(const Tensor& x, LayerCache* cache) const override;
  Tensor backward(const Tensor& dy, const LayerCache& cache, std::span<Tensor> grads) const override;
  // Backward where `dz` is already the gradient of the pre-activation.
  Tensor backward_preactivation(const Tensor& dz, const LayerCache& cache, std::span<Tensor> grads) const;
  void initialize(Rng& rng) override;

  Activation activation() const { return act_; }

 private:
  std::size_t in_, out_;
  Activation act_;
};

// [B, T*C] -> [B, T, C]
class SequenceReshape : public Layer {
 public:
  SequenceReshape(std::size_t steps, std::size_t channels) : steps_(steps), channels_(channels) {}
  std::string describe() const override;
  Tensor forward(const Tensor& x, LayerCache* cache) const override;
  Tensor backward(const Tensor& dy, const LayerCache& cache, std::span<Tensor> grads) const override;
  void initialize(Rng&) override {}

 private:
  std::size_t steps_, channels_;
};

// [B, T, C] -> [B, T*C]
class Flatten : public Layer {
 public:
  std::string describe() const override { return "flatten"; }
  Tensor forward(const Tensor& x, LayerCache* cache) const override;
  Tensor backward(const Tensor& dy, const LayerCache& cache, std::span<Tensor> grads) const override;
  void initialize(Rng&) override {}
};

class Conv1dLayer : public Layer {
 public:
  Conv1dLayer(std::size_t channels, std::size_t filters, std::size_t width, Conv1dConfig config);
  std::string describe() const override;
  Tensor forward(const Tensor& x, LayerCache* cache) const override;
  Tensor backward(const Tensor& dy, const LayerCache& cache, std::span<Tensor> grads) const override;
  void initialize(Rng& rng) override;

 private:
  std::size_t channels_, filters_, width_;
  Conv1dConfig config_;
};

class MaxPoolLayer : public Layer {
 public:
  MaxPoolLayer(std::size_t window, std::size_t stride) : window_(window), stride_(stride) {}
  std::string describe() const override;
  Tensor forward(const Tensor& x, LayerCache* cache) const override;
  Tensor backward(const Tensor& dy, const LayerCache& cache, std::span<Tensor> grads) const override;
  void initialize(Rng&) override {}

 private:
  std::size_t window_, stride_;
};

enum class CellKind { rnn, lstm, gru };

// Runs a cell over [B, T, C] from a zero state and returns the final hidden state [B, H].
class RecurrentLayer : public Layer {
 public:
  RecurrentLayer(CellKind cell, std::size_t input, std::size_t hidden);
  std::string describe() const override;
  Tensor forward(const Tensor& x, LayerCache* cache) const override;
  Tensor backward(const Tensor& dy, const LayerCache& cache, std::span<Tensor> grads) const override;
  void initialize(Rng& rng) override;

 private:
  std::size_t gates() const;

  CellKind cell_;
  std::size_t input_, hidden_;
};

// Per-layer parameter gradients, shaped like Network::params().
using Gradients = std::vector<std::vector<Tensor>>;

class Network {
 public:
  Network() = default;
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  void add(std::unique_ptr<Layer> layer);

  const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }
  std::vector<std::string> plan() const;

  Tensor forward(const Tensor& x, std::vector<LayerCache>* caches = nullptr) const;

  // When `from_preactivation` is set, `dy` is the gradient of the final dense
  // layer's pre-activation (the fused sigmoid + cross-entropy path).
  Tensor backward(const Tensor& dy, const std::vector<LayerCache>& caches, Gradients& grads,
                  bool from_preactivation = false) const;

  Gradients zero_gradients() const;

  // Flattened views in layer order.
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  std::vector<std::string> parameter_names() const;
  std::size_t parameter_count() const;

  void initialize(std::uint64_t seed);

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace nidsdl::nn
