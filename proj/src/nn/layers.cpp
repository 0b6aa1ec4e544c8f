#include "nidsdl/nn/layers.hpp"

#include <cmath>
#include <string>

#include "nidsdl/error.hpp"

namespace nidsdl::nn {

namespace {

void glorot(Tensor& t, Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.data()) v = rng.uniform(-limit, limit);
}

template <typename T>
const T& cache_as(const LayerCache& cache) {
  const T* p = std::any_cast<T>(&cache);
  if (!p) throw std::logic_error("layer backward called without a matching forward cache");
  return *p;
}

std::string cell_name(CellKind cell) {
  switch (cell) {
    case CellKind::rnn:
      return "rnn";
    case CellKind::lstm:
      return "lstm";
    case CellKind::gru:
      return "gru";
  }
  return "rnn";
}

}  // namespace

Tensor& Layer::add_param(std::string name, Shape shape) {
  params_.emplace_back(std::move(shape));
  names_.push_back(std::move(name));
  return params_.back();
}

// ---- dense -----------------------------------------------------------------

DenseLayer::DenseLayer(std::size_t in, std::size_t out, Activation act) : in_(in), out_(out), act_(act) {
  add_param("W", {in, out});
  add_param("b", {out});
}

std::string DenseLayer::describe() const {
  return "dense(in=" + std::to_string(in_) + ",out=" + std::to_string(out_) +
         ",act=" + std::string(to_string(act_)) + ")";
}

Tensor DenseLayer::forward(const Tensor& x, LayerCache* cache) const {
  const auto p = params();
  if (!cache) return dense_apply(x, p[0], p[1], act_);
  DenseContext ctx;
  auto y = dense_apply(x, p[0], p[1], act_, &ctx);
  *cache = std::move(ctx);
  return y;
}

Tensor DenseLayer::backward(const Tensor& dy, const LayerCache& cache, std::span<Tensor> grads) const {
  auto g = dense_backward(cache_as<DenseContext>(cache), params()[0], dy);
  grads[0] = std::move(g.dw);
  grads[1] = std::move(g.db);
  return std::move(g.dx);
}

Tensor DenseLayer::backward_preactivation(const Tensor& dz, const LayerCache& cache,
                                          std::span<Tensor> grads) const {
  auto g = dense_backward_preactivation(cache_as<DenseContext>(cache), params()[0], dz);
  grads[0] = std::move(g.dw);
  grads[1] = std::move(g.db);
  return std::move(g.dx);
}

void DenseLayer::initialize(Rng& rng) {
  auto p = params();
  glorot(p[0], rng, in_, out_);
  p[1].fill(0.0);
}

// ---- reshape / flatten -----------------------------------------------------

std::string SequenceReshape::describe() const {
  return "sequence(steps=" + std::to_string(steps_) + ",channels=" + std::to_string(channels_) + ")";
}

Tensor SequenceReshape::forward(const Tensor& x, LayerCache*) const {
  if (x.rank() != 2 || x.dim(1) != steps_ * channels_) {
    throw ShapeError("sequence reshape: input " + shape_string(x.shape()) + " does not hold " +
                     std::to_string(steps_) + "x" + std::to_string(channels_) + " per row");
  }
  return x.reshaped({x.dim(0), steps_, channels_});
}

Tensor SequenceReshape::backward(const Tensor& dy, const LayerCache&, std::span<Tensor>) const {
  return dy.reshaped({dy.dim(0), steps_ * channels_});
}

Tensor Flatten::forward(const Tensor& x, LayerCache* cache) const {
  if (x.rank() < 2) throw ShapeError("flatten: input needs a batch axis");
  if (cache) *cache = x.shape();
  return x.reshaped({x.dim(0), x.size() / x.dim(0)});
}

Tensor Flatten::backward(const Tensor& dy, const LayerCache& cache, std::span<Tensor>) const {
  return dy.reshaped(cache_as<Shape>(cache));
}

// ---- conv / pool -----------------------------------------------------------

Conv1dLayer::Conv1dLayer(std::size_t channels, std::size_t filters, std::size_t width,
                         Conv1dConfig config)
    : channels_(channels), filters_(filters), width_(width), config_(config) {
  add_param("kernels", {filters, width, channels});
  add_param("bias", {filters});
}

std::string Conv1dLayer::describe() const {
  return "conv1d(channels=" + std::to_string(channels_) + ",filters=" + std::to_string(filters_) +
         ",width=" + std::to_string(width_) + ",stride=" + std::to_string(config_.stride) +
         ",padding=" + (config_.padding == Padding::same ? "same" : "valid") +
         ",act=" + std::string(to_string(config_.act)) + ")";
}

Tensor Conv1dLayer::forward(const Tensor& x, LayerCache* cache) const {
  const auto p = params();
  if (!cache) return conv1d_apply(x, p[0], p[1], config_);
  Conv1dContext ctx;
  auto y = conv1d_apply(x, p[0], p[1], config_, &ctx);
  *cache = std::move(ctx);
  return y;
}

Tensor Conv1dLayer::backward(const Tensor& dy, const LayerCache& cache, std::span<Tensor> grads) const {
  auto g = conv1d_backward(cache_as<Conv1dContext>(cache), params()[0], dy);
  grads[0] = std::move(g.dkernels);
  grads[1] = std::move(g.dbias);
  return std::move(g.dx);
}

void Conv1dLayer::initialize(Rng& rng) {
  auto p = params();
  glorot(p[0], rng, width_ * channels_, width_ * filters_);
  p[1].fill(0.0);
}

std::string MaxPoolLayer::describe() const {
  return "maxpool1d(window=" + std::to_string(window_) + ",stride=" + std::to_string(stride_) + ")";
}

Tensor MaxPoolLayer::forward(const Tensor& x, LayerCache* cache) const {
  if (!cache) return maxpool1d(x, window_, stride_);
  MaxPoolContext ctx;
  auto y = maxpool1d(x, window_, stride_, &ctx);
  *cache = std::move(ctx);
  return y;
}

Tensor MaxPoolLayer::backward(const Tensor& dy, const LayerCache& cache, std::span<Tensor>) const {
  return maxpool1d_backward(cache_as<MaxPoolContext>(cache), dy);
}

// ---- recurrent -------------------------------------------------------------

namespace {

struct RnnSeqCache {
  std::vector<RnnContext> steps;
};
struct LstmSeqCache {
  std::vector<LstmContext> steps;
};
struct GruSeqCache {
  std::vector<GruContext> steps;
};

Tensor time_slice(const Tensor& x, std::size_t t) {
  const std::size_t batch = x.dim(0), steps = x.dim(1), c = x.dim(2);
  Tensor out({batch, c});
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy_n(x.ptr() + (b * steps + t) * c, c, out.ptr() + b * c);
  }
  return out;
}

void put_time_slice(Tensor& dx, const Tensor& slice, std::size_t t) {
  const std::size_t batch = dx.dim(0), steps = dx.dim(1), c = dx.dim(2);
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy_n(slice.ptr() + b * c, c, dx.ptr() + (b * steps + t) * c);
  }
}

void accumulate(Tensor& into, const Tensor& g) {
  auto a = into.data();
  auto b = g.data();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

}  // namespace

RecurrentLayer::RecurrentLayer(CellKind cell, std::size_t input, std::size_t hidden)
    : cell_(cell), input_(input), hidden_(hidden) {
  add_param("Wx", {input, gates() * hidden});
  add_param(cell == CellKind::gru ? "Uh" : "Wh", {hidden, gates() * hidden});
  add_param("b", {gates() * hidden});
}

std::size_t RecurrentLayer::gates() const {
  switch (cell_) {
    case CellKind::rnn:
      return 1;
    case CellKind::lstm:
      return 4;
    case CellKind::gru:
      return 3;
  }
  return 1;
}

std::string RecurrentLayer::describe() const {
  return cell_name(cell_) + "(input=" + std::to_string(input_) + ",hidden=" + std::to_string(hidden_) + ")";
}

Tensor RecurrentLayer::forward(const Tensor& x, LayerCache* cache) const {
  if (x.rank() != 3 || x.dim(2) != input_) {
    throw ShapeError(describe() + ": expected [B,T," + std::to_string(input_) + "], got " +
                     shape_string(x.shape()));
  }
  const std::size_t batch = x.dim(0), steps = x.dim(1);
  const auto p = params();
  Tensor h({batch, hidden_});
  switch (cell_) {
    case CellKind::rnn: {
      RnnParams rp{p[0], p[1], p[2]};
      RnnSeqCache seq;
      if (cache) seq.steps.resize(steps);
      for (std::size_t t = 0; t < steps; ++t) {
        h = rnn_step(time_slice(x, t), h, rp, cache ? &seq.steps[t] : nullptr);
      }
      if (cache) *cache = std::move(seq);
      break;
    }
    case CellKind::lstm: {
      LstmParams lp{p[0], p[1], p[2]};
      LstmSeqCache seq;
      if (cache) seq.steps.resize(steps);
      LstmState state{h, Tensor({batch, hidden_})};
      for (std::size_t t = 0; t < steps; ++t) {
        state = lstm_step(time_slice(x, t), state, lp, cache ? &seq.steps[t] : nullptr);
      }
      h = std::move(state.h);
      if (cache) *cache = std::move(seq);
      break;
    }
    case CellKind::gru: {
      GruParams gp{p[0], p[1], p[2]};
      GruSeqCache seq;
      if (cache) seq.steps.resize(steps);
      for (std::size_t t = 0; t < steps; ++t) {
        h = gru_step(time_slice(x, t), h, gp, cache ? &seq.steps[t] : nullptr);
      }
      if (cache) *cache = std::move(seq);
      break;
    }
  }
  return h;
}

Tensor RecurrentLayer::backward(const Tensor& dy, const LayerCache& cache, std::span<Tensor> grads) const {
  const auto p = params();
  for (std::size_t k = 0; k < 3; ++k) grads[k] = Tensor(p[k].shape());
  Tensor dh = dy;
  switch (cell_) {
    case CellKind::rnn: {
      const auto& seq = cache_as<RnnSeqCache>(cache);
      const std::size_t steps = seq.steps.size();
      Tensor dx({dy.dim(0), steps, input_});
      RnnParams rp{p[0], p[1], p[2]};
      for (std::size_t t = steps; t-- > 0;) {
        auto g = rnn_step_backward(seq.steps[t], rp, dh);
        accumulate(grads[0], g.dwx);
        accumulate(grads[1], g.dwh);
        accumulate(grads[2], g.db);
        put_time_slice(dx, g.dx, t);
        dh = std::move(g.dh);
      }
      return dx;
    }
    case CellKind::lstm: {
      const auto& seq = cache_as<LstmSeqCache>(cache);
      const std::size_t steps = seq.steps.size();
      Tensor dx({dy.dim(0), steps, input_});
      Tensor dc(dy.shape());
      LstmParams lp{p[0], p[1], p[2]};
      for (std::size_t t = steps; t-- > 0;) {
        auto g = lstm_step_backward(seq.steps[t], lp, dh, dc);
        accumulate(grads[0], g.dwx);
        accumulate(grads[1], g.dwh);
        accumulate(grads[2], g.db);
        put_time_slice(dx, g.dx, t);
        dh = std::move(g.dh);
        dc = std::move(g.dc);
      }
      return dx;
    }
    case CellKind::gru: {
      const auto& seq = cache_as<GruSeqCache>(cache);
      const std::size_t steps = seq.steps.size();
      Tensor dx({dy.dim(0), steps, input_});
      GruParams gp{p[0], p[1], p[2]};
      for (std::size_t t = steps; t-- > 0;) {
        auto g = gru_step_backward(seq.steps[t], gp, dh);
        accumulate(grads[0], g.dwx);
        accumulate(grads[1], g.duh);
        accumulate(grads[2], g.db);
        put_time_slice(dx, g.dx, t);
        dh = std::move(g.dh);
      }
      return dx;
    }
  }
  return dh;
}

void RecurrentLayer::initialize(Rng& rng) {
  auto p = params();
  glorot(p[0], rng, input_, gates() * hidden_);
  glorot(p[1], rng, hidden_, gates() * hidden_);
  p[2].fill(0.0);
}

// ---- network ---------------------------------------------------------------

void Network::add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

std::vector<std::string> Network::plan() const {
  std::vector<std::string> out;
  for (const auto& l : layers_) out.push_back(l->describe());
  return out;
}

Tensor Network::forward(const Tensor& x, std::vector<LayerCache>* caches) const {
  if (caches) {
    caches->clear();
    caches->resize(layers_.size());
  }
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i]->forward(h, caches ? &(*caches)[i] : nullptr);
  }
  return h;
}

Tensor Network::backward(const Tensor& dy, const std::vector<LayerCache>& caches, Gradients& grads,
                         bool from_preactivation) const {
  if (caches.size() != layers_.size() || grads.size() != layers_.size()) {
    throw std::logic_error("network backward: cache or gradient count mismatch");
  }
  Tensor d = dy;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    std::span<Tensor> g(grads[i]);
    if (from_preactivation && i + 1 == layers_.size()) {
      const auto* dense = dynamic_cast<const DenseLayer*>(layers_[i].get());
      if (!dense) throw std::logic_error("fused loss path needs a dense output layer");
      d = dense->backward_preactivation(d, caches[i], g);
    } else {
      d = layers_[i]->backward(d, caches[i], g);
    }
  }
  return d;
}

Gradients Network::zero_gradients() const {
  Gradients g;
  for (const auto& l : layers_) {
    auto& row = g.emplace_back();
    for (const auto& p : l->params()) row.emplace_back(p.shape());
  }
  return g;
}

std::vector<Tensor*> Network::parameters() {
  std::vector<Tensor*> out;
  for (auto& l : layers_) {
    for (auto& p : l->params()) out.push_back(&p);
  }
  return out;
}

std::vector<const Tensor*> Network::parameters() const {
  std::vector<const Tensor*> out;
  for (const auto& l : layers_) {
    for (const auto& p : l->params()) out.push_back(&p);
  }
  return out;
}

std::vector<std::string> Network::parameter_names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (const auto& n : layers_[i]->param_names()) out.push_back("layer" + std::to_string(i) + "." + n);
  }
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->size();
  return n;
}

void Network::initialize(std::uint64_t seed) {
  Rng rng(seed);
  for (auto& l : layers_) l->initialize(rng);
}

}  // namespace nidsdl::nn
