#include "nidsdl/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>

#include "nidsdl/nn/ops.hpp"
#include "nidsdl/random.hpp"

namespace nidsdl::nn {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const GradCheckTarget& target, const GradCheckOptions& options) {
  GradCheckReport report;
  const auto analytic = target.analytic();
  if (analytic.size() != target.wrt.size()) {
    throw std::invalid_argument("grad_check: analytic gradient count differs from targets");
  }
  Rng rng(options.seed);
  for (std::size_t k = 0; k < target.wrt.size(); ++k) {
    Tensor& t = *target.wrt[k];
    if (analytic[k].size() != t.size()) {
      throw std::invalid_argument("grad_check: analytic gradient shape differs for " + target.names[k]);
    }
    std::vector<std::size_t> coords(t.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_tensor && coords.size() > options.max_coords_per_tensor) {
      rng.shuffle(coords.begin(), coords.end());
      coords.resize(options.max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    for (auto i : coords) {
      const double saved = t[i];
      t[i] = saved + options.step;
      const double up = target.loss();
      t[i] = saved - options.step;
      const double down = target.loss();
      t[i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double err = relative_error(analytic[k][i], numeric);
      ++report.coords_checked;
      if (err > report.max_rel_error || report.coords_checked == 1) {
        report.max_rel_error = err;
        report.worst_tensor = target.names[k];
        report.worst_index = i;
        report.worst_analytic = analytic[k][i];
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_rel_error <= options.tolerance;
  return report;
}

const std::vector<std::string>& gradcheck_layer_kinds() {
  static const std::vector<std::string> kinds = {"dense", "conv1d", "maxpool", "rnn",
                                                 "lstm",  "gru",    "bce"};
  return kinds;
}

namespace {

// Owns the tensors a fragment perturbs so the target's pointers stay valid.
struct Fragment {
  std::vector<std::unique_ptr<Tensor>> tensors;
  std::vector<std::string> names;

  Tensor& add(std::string name, Tensor t) {
    tensors.push_back(std::make_unique<Tensor>(std::move(t)));
    names.push_back(std::move(name));
    return *tensors.back();
  }

  std::vector<Tensor*> pointers() const {
    std::vector<Tensor*> out;
    for (const auto& t : tensors) out.push_back(t.get());
    return out;
  }
};

Tensor random_tensor(Rng& rng, Shape shape, double scale) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(-scale, scale);
  return t;
}

std::size_t draw(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.index(hi - lo + 1));
}

double project(const Tensor& y, const Tensor& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
  return s;
}

GradCheckReport run(const std::shared_ptr<Fragment>& frag, std::function<double()> loss,
                    std::function<std::vector<Tensor>()> analytic, const GradCheckOptions& options,
                    std::string label) {
  GradCheckTarget target{frag->names, frag->pointers(), std::move(loss), std::move(analytic)};
  auto report = grad_check(target, options);
  report.fragment = std::move(label);
  return report;
}

}  // namespace

GradCheckReport check_layer(std::string_view kind, std::uint64_t seed, const GradCheckOptions& options) {
  Rng rng(seed * 0x9e3779b97f4a7c15ULL + 17);
  auto frag = std::make_shared<Fragment>();

  if (kind == "dense") {
    const std::size_t b = draw(rng, 1, 8), in = draw(rng, 1, 8), out = draw(rng, 1, 8);
    const auto act = static_cast<Activation>(seed % 4);
    auto& x = frag->add("x", random_tensor(rng, {b, in}, 1.0));
    auto& w = frag->add("W", random_tensor(rng, {in, out}, 0.7));
    auto& bias = frag->add("b", random_tensor(rng, {out}, 0.3));
    auto r = std::make_shared<Tensor>(random_tensor(rng, {b, out}, 1.0));
    return run(
        frag, [&x, &w, &bias, r, act] { return project(dense_apply(x, w, bias, act), *r); },
        [&x, &w, &bias, r, act] {
          DenseContext ctx;
          dense_apply(x, w, bias, act, &ctx);
          auto g = dense_backward(ctx, w, *r);
          return std::vector<Tensor>{g.dx, g.dw, g.db};
        },
        options, "dense/" + std::string(to_string(act)));
  }

  if (kind == "conv1d") {
    const std::size_t b = draw(rng, 1, 4), t = draw(rng, 3, 8), c = draw(rng, 1, 4);
    const std::size_t k = draw(rng, 1, 4), width = draw(rng, 1, std::min<std::size_t>(3, t));
    Conv1dConfig cfg;
    cfg.stride = draw(rng, 1, 2);
    cfg.padding = rng.bernoulli(0.5) ? Padding::same : Padding::valid;
    cfg.act = seed % 3 == 0 ? Activation::none : (seed % 3 == 1 ? Activation::relu : Activation::tanh);
    auto& x = frag->add("x", random_tensor(rng, {b, t, c}, 1.0));
    auto& w = frag->add("kernels", random_tensor(rng, {k, width, c}, 0.7));
    auto& bias = frag->add("bias", random_tensor(rng, {k}, 0.3));
    const std::size_t t_out = conv1d_output_length(t, width, cfg.stride, cfg.padding);
    auto r = std::make_shared<Tensor>(random_tensor(rng, {b, t_out, k}, 1.0));
    return run(
        frag, [&x, &w, &bias, r, cfg] { return project(conv1d_apply(x, w, bias, cfg), *r); },
        [&x, &w, &bias, r, cfg] {
          Conv1dContext ctx;
          conv1d_apply(x, w, bias, cfg, &ctx);
          auto g = conv1d_backward(ctx, w, *r);
          return std::vector<Tensor>{g.dx, g.dkernels, g.dbias};
        },
        options, "conv1d");
  }

  if (kind == "maxpool") {
    const std::size_t b = draw(rng, 1, 4), t = draw(rng, 2, 8), c = draw(rng, 1, 4);
    const std::size_t window = draw(rng, 1, t), stride = draw(rng, 1, 3);
    // Distinct, well-separated values keep every finite-difference probe away from ties.
    Tensor xv({b, t, c});
    std::vector<double> levels(xv.size());
    std::iota(levels.begin(), levels.end(), 0.0);
    rng.shuffle(levels.begin(), levels.end());
    for (std::size_t i = 0; i < xv.size(); ++i) xv[i] = 0.1 * levels[i] - 1.0;
    auto& x = frag->add("x", std::move(xv));
    const std::size_t t_out = (t - window) / stride + 1;
    auto r = std::make_shared<Tensor>(random_tensor(rng, {b, t_out, c}, 1.0));
    return run(
        frag, [&x, r, window, stride] { return project(maxpool1d(x, window, stride), *r); },
        [&x, r, window, stride] {
          MaxPoolContext ctx;
          maxpool1d(x, window, stride, &ctx);
          return std::vector<Tensor>{maxpool1d_backward(ctx, *r)};
        },
        options, "maxpool");
  }

  if (kind == "rnn" || kind == "gru") {
    const std::size_t b = draw(rng, 1, 8), in = draw(rng, 1, 8), h = draw(rng, 1, 8);
    const std::size_t gates = kind == "rnn" ? 1 : 3;
    auto& x = frag->add("x", random_tensor(rng, {b, in}, 1.0));
    auto& h0 = frag->add("h", random_tensor(rng, {b, h}, 0.9));
    auto& wx = frag->add("Wx", random_tensor(rng, {in, gates * h}, 0.6));
    auto& wh = frag->add(kind == "rnn" ? "Wh" : "Uh", random_tensor(rng, {h, gates * h}, 0.6));
    auto& bias = frag->add("b", random_tensor(rng, {gates * h}, 0.3));
    auto r = std::make_shared<Tensor>(random_tensor(rng, {b, h}, 1.0));
    if (kind == "rnn") {
      return run(
          frag, [&, r] { return project(rnn_step(x, h0, RnnParams{wx, wh, bias}), *r); },
          [&, r] {
            RnnParams p{wx, wh, bias};
            RnnContext ctx;
            rnn_step(x, h0, p, &ctx);
            auto g = rnn_step_backward(ctx, p, *r);
            return std::vector<Tensor>{g.dx, g.dh, g.dwx, g.dwh, g.db};
          },
          options, "rnn");
    }
    return run(
        frag, [&, r] { return project(gru_step(x, h0, GruParams{wx, wh, bias}), *r); },
        [&, r] {
          GruParams p{wx, wh, bias};
          GruContext ctx;
          gru_step(x, h0, p, &ctx);
          auto g = gru_step_backward(ctx, p, *r);
          return std::vector<Tensor>{g.dx, g.dh, g.dwx, g.duh, g.db};
        },
        options, "gru");
  }

  if (kind == "lstm") {
    const std::size_t b = draw(rng, 1, 8), in = draw(rng, 1, 8), h = draw(rng, 1, 8);
    auto& x = frag->add("x", random_tensor(rng, {b, in}, 1.0));
    auto& h0 = frag->add("h", random_tensor(rng, {b, h}, 0.9));
    auto& c0 = frag->add("c", random_tensor(rng, {b, h}, 1.0));
    auto& wx = frag->add("Wx", random_tensor(rng, {in, 4 * h}, 0.6));
    auto& wh = frag->add("Wh", random_tensor(rng, {h, 4 * h}, 0.6));
    auto& bias = frag->add("b", random_tensor(rng, {4 * h}, 0.3));
    auto rh = std::make_shared<Tensor>(random_tensor(rng, {b, h}, 1.0));
    auto rc = std::make_shared<Tensor>(random_tensor(rng, {b, h}, 1.0));
    return run(
        frag,
        [&, rh, rc] {
          auto s = lstm_step(x, LstmState{h0, c0}, LstmParams{wx, wh, bias});
          return project(s.h, *rh) + project(s.c, *rc);
        },
        [&, rh, rc] {
          LstmParams p{wx, wh, bias};
          LstmContext ctx;
          lstm_step(x, LstmState{h0, c0}, p, &ctx);
          auto g = lstm_step_backward(ctx, p, *rh, *rc);
          return std::vector<Tensor>{g.dx, g.dh, g.dc, g.dwx, g.dwh, g.db};
        },
        options, "lstm");
  }

  if (kind == "bce") {
    const std::size_t b = draw(rng, 1, 8), in = draw(rng, 1, 8);
    auto& x = frag->add("x", random_tensor(rng, {b, in}, 1.0));
    auto& w = frag->add("W", random_tensor(rng, {in, 1}, 0.7));
    auto& bias = frag->add("b", random_tensor(rng, {1}, 0.3));
    auto y = std::make_shared<Tensor>(Shape{b, 1});
    for (auto& v : y->data()) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    return run(
        frag,
        [&, y] { return sigmoid_bce(dense_apply(x, w, bias, Activation::none), *y).loss; },
        [&, y] {
          DenseContext ctx;
          auto logits = dense_apply(x, w, bias, Activation::none, &ctx);
          auto loss = sigmoid_bce(logits, *y);
          auto g = dense_backward_preactivation(ctx, w, loss.grad);
          return std::vector<Tensor>{g.dx, g.dw, g.db};
        },
        options, "bce");
  }

  throw std::invalid_argument("unknown layer kind '" + std::string(kind) + "'");
}

}  // namespace nidsdl::nn
