#include "nidsdl/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "nidsdl/error.hpp"

namespace nidsdl::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using ConstRowVec = Eigen::Map<const Eigen::RowVectorXd>;
using RowVecMap = Eigen::Map<Eigen::RowVectorXd>;

MatMap as_mat(Tensor& t, std::size_t rows, std::size_t cols) {
  return MatMap(t.ptr(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

ConstMatMap as_mat(const Tensor& t, std::size_t rows, std::size_t cols) {
  return ConstMatMap(t.ptr(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

ConstMatMap as_mat(const Tensor& t) { return as_mat(t, t.dim(0), t.dim(1)); }
MatMap as_mat(Tensor& t) { return as_mat(t, t.dim(0), t.dim(1)); }

ConstRowVec as_row(const Tensor& t) {
  return ConstRowVec(t.ptr(), static_cast<Eigen::Index>(t.size()));
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(t.shape()));
  }
}

void activate(std::span<double> v, Activation act) {
  switch (act) {
    case Activation::none:
      break;
    case Activation::relu:
      for (auto& x : v) x = x > 0.0 ? x : 0.0;
      break;
    case Activation::sigmoid:
      for (auto& x : v) x = sigmoid(x);
      break;
    case Activation::tanh:
      for (auto& x : v) x = fast_tanh(x);
      break;
  }
}

// dz = dy * act'(z), written from the post-activation output y.
Tensor activation_backward(const Tensor& y, const Tensor& dy, Activation act) {
  if (dy.shape() != y.shape()) {
    throw ShapeError("upstream gradient " + shape_string(dy.shape()) + " does not match output " +
                     shape_string(y.shape()));
  }
  Tensor dz = dy;
  auto z = dz.data();
  auto out = y.data();
  switch (act) {
    case Activation::none:
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = out[i] > 0.0 ? z[i] : 0.0;
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < z.size(); ++i) z[i] *= out[i] * (1.0 - out[i]);
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < z.size(); ++i) z[i] *= 1.0 - out[i] * out[i];
      break;
  }
  return dz;
}

Tensor column_sums(const Tensor& m) {
  Tensor s({m.dim(1)});
  RowVecMap(s.ptr(), static_cast<Eigen::Index>(s.size())) = as_mat(m).colwise().sum();
  return s;
}

}  // namespace

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::none:
      return "none";
    case Activation::relu:
      return "relu";
    case Activation::sigmoid:
      return "sigmoid";
    case Activation::tanh:
      return "tanh";
  }
  return "none";
}

Activation activation_from_string(std::string_view name) {
  if (name == "none") return Activation::none;
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

double sigmoid(double x) {
  // Branch-free form of the two-sided stable sigmoid; the sign test becomes a select.
  const double e = std::exp(-std::fabs(x));
  const double s = 1.0 / (1.0 + e);
  return x >= 0.0 ? s : e * s;
}

double fast_tanh(double x) {
  const double a = std::fabs(x);
  if (a < 0.125) return std::tanh(x);  // 1 - t would cancel below this
  const double t = std::exp(-2.0 * a);
  return std::copysign((1.0 - t) / (1.0 + t), x);
}

// ---- dense -----------------------------------------------------------------

Tensor dense_apply(const Tensor& x, const Tensor& w, const Tensor& b, Activation act,
                   DenseContext* ctx) {
  require_rank(x, 2, "dense input");
  require_rank(w, 2, "dense weights");
  if (x.dim(1) != w.dim(0)) {
    throw ShapeError("dense: input " + shape_string(x.shape()) + " incompatible with weights " +
                     shape_string(w.shape()));
  }
  require_shape(b, {w.dim(1)}, "dense bias");
  Tensor y({x.dim(0), w.dim(1)});
  auto ym = as_mat(y);
  ym.noalias() = as_mat(x) * as_mat(w);
  ym.rowwise() += as_row(b);
  activate(y.data(), act);
  if (ctx) {
    ctx->x = x;
    ctx->y = y;
    ctx->act = act;
  }
  return y;
}

DenseGrads dense_backward_preactivation(const DenseContext& ctx, const Tensor& w, const Tensor& dz) {
  require_shape(dz, ctx.y.shape(), "dense upstream gradient");
  DenseGrads g;
  g.dw = Tensor(w.shape());
  as_mat(g.dw).noalias() = as_mat(ctx.x).transpose() * as_mat(dz);
  g.db = column_sums(dz);
  g.dx = Tensor(ctx.x.shape());
  as_mat(g.dx).noalias() = as_mat(dz) * as_mat(w).transpose();
  return g;
}

DenseGrads dense_backward(const DenseContext& ctx, const Tensor& w, const Tensor& dy) {
  return dense_backward_preactivation(ctx, w, activation_backward(ctx.y, dy, ctx.act));
}

// ---- conv1d ----------------------------------------------------------------

namespace {

std::size_t same_total_padding(std::size_t t, std::size_t width, std::size_t stride) {
  const std::size_t t_out = (t + stride - 1) / stride;
  const std::size_t needed = (t_out - 1) * stride + width;
  return needed > t ? needed - t : 0;
}

}  // namespace

std::size_t conv1d_output_length(std::size_t t, std::size_t width, std::size_t stride,
                                 Padding padding) {
  if (stride == 0 || width == 0) throw ShapeError("conv1d: stride and width must be positive");
  if (padding == Padding::same) {
    const std::size_t padded = t + same_total_padding(t, width, stride);
    if (width > padded) throw ShapeError("conv1d: kernel wider than padded input");
    return (t + stride - 1) / stride;
  }
  if (width > t) {
    throw ShapeError("conv1d: kernel width " + std::to_string(width) + " exceeds input length " +
                     std::to_string(t));
  }
  return (t - width) / stride + 1;
}

Tensor conv1d_apply(const Tensor& x, const Tensor& kernels, const Tensor& bias,
                    const Conv1dConfig& config, Conv1dContext* ctx) {
  require_rank(x, 3, "conv1d input");
  require_rank(kernels, 3, "conv1d kernels");
  const std::size_t batch = x.dim(0), t = x.dim(1), c = x.dim(2);
  const std::size_t k = kernels.dim(0), width = kernels.dim(1);
  if (kernels.dim(2) != c) {
    throw ShapeError("conv1d: kernels " + shape_string(kernels.shape()) +
                     " do not match input channels " + shape_string(x.shape()));
  }
  require_shape(bias, {k}, "conv1d bias");
  const std::size_t t_out = conv1d_output_length(t, width, config.stride, config.padding);
  const std::size_t pad_left =
      config.padding == Padding::same ? same_total_padding(t, width, config.stride) / 2 : 0;

  // im2col: one row per (b, t'), columns (w, c).
  const std::size_t patch = width * c;
  Tensor patches({batch * t_out, patch});
  double* pp = patches.ptr();
  const double* xp = x.ptr();
  for (std::size_t bi = 0; bi < batch; ++bi) {
    for (std::size_t to = 0; to < t_out; ++to) {
      double* row = pp + (bi * t_out + to) * patch;
      for (std::size_t wi = 0; wi < width; ++wi) {
        const auto src = static_cast<std::ptrdiff_t>(to * config.stride + wi) -
                         static_cast<std::ptrdiff_t>(pad_left);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(t)) continue;
        std::copy_n(xp + (bi * t + static_cast<std::size_t>(src)) * c, c, row + wi * c);
      }
    }
  }

  Tensor y({batch, t_out, k});
  auto ym = as_mat(y, batch * t_out, k);
  ym.noalias() = as_mat(patches) * as_mat(kernels, k, patch).transpose();
  ym.rowwise() += as_row(bias);
  activate(y.data(), config.act);
  if (ctx) {
    ctx->x_shape = x.shape();
    ctx->patches = std::move(patches);
    ctx->y = y;
    ctx->pad_left = pad_left;
    ctx->config = config;
  }
  return y;
}

Conv1dGrads conv1d_backward(const Conv1dContext& ctx, const Tensor& kernels, const Tensor& dy) {
  const std::size_t batch = ctx.x_shape[0], t = ctx.x_shape[1], c = ctx.x_shape[2];
  const std::size_t k = kernels.dim(0), width = kernels.dim(1);
  const std::size_t t_out = ctx.y.dim(1), patch = width * c;
  Tensor dz = activation_backward(ctx.y, dy, ctx.config.act);
  auto dzm = as_mat(dz, batch * t_out, k);

  Conv1dGrads g;
  g.dkernels = Tensor(kernels.shape());
  as_mat(g.dkernels, k, patch).noalias() = dzm.transpose() * as_mat(ctx.patches);
  g.dbias = Tensor({k});
  RowVecMap(g.dbias.ptr(), static_cast<Eigen::Index>(k)) = dzm.colwise().sum();

  Tensor dpatches({batch * t_out, patch});
  as_mat(dpatches).noalias() = dzm * as_mat(kernels, k, patch);
  g.dx = Tensor(ctx.x_shape);
  double* dxp = g.dx.ptr();
  const double* dpp = dpatches.ptr();
  for (std::size_t bi = 0; bi < batch; ++bi) {
    for (std::size_t to = 0; to < t_out; ++to) {
      const double* row = dpp + (bi * t_out + to) * patch;
      for (std::size_t wi = 0; wi < width; ++wi) {
        const auto src = static_cast<std::ptrdiff_t>(to * ctx.config.stride + wi) -
                         static_cast<std::ptrdiff_t>(ctx.pad_left);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(t)) continue;
        double* dst = dxp + (bi * t + static_cast<std::size_t>(src)) * c;
        for (std::size_t ci = 0; ci < c; ++ci) dst[ci] += row[wi * c + ci];
      }
    }
  }
  return g;
}

// ---- maxpool1d -------------------------------------------------------------

Tensor maxpool1d(const Tensor& x, std::size_t window, std::size_t stride, MaxPoolContext* ctx) {
  require_rank(x, 3, "maxpool1d input");
  if (window == 0 || stride == 0) throw ShapeError("maxpool1d: window and stride must be positive");
  const std::size_t batch = x.dim(0), t = x.dim(1), c = x.dim(2);
  if (window > t) {
    throw ShapeError("maxpool1d: window " + std::to_string(window) + " exceeds input length " +
                     std::to_string(t));
  }
  const std::size_t t_out = (t - window) / stride + 1;
  Tensor y({batch, t_out, c});
  std::vector<std::size_t> argmax(y.size());
  for (std::size_t bi = 0; bi < batch; ++bi) {
    for (std::size_t to = 0; to < t_out; ++to) {
      for (std::size_t ci = 0; ci < c; ++ci) {
        std::size_t best = (bi * t + to * stride) * c + ci;
        for (std::size_t wi = 1; wi < window; ++wi) {
          const std::size_t idx = (bi * t + to * stride + wi) * c + ci;
          if (x[idx] > x[best]) best = idx;
        }
        const std::size_t out = (bi * t_out + to) * c + ci;
        y[out] = x[best];
        argmax[out] = best;
      }
    }
  }
  if (ctx) {
    ctx->x_shape = x.shape();
    ctx->argmax = std::move(argmax);
  }
  return y;
}

Tensor maxpool1d_backward(const MaxPoolContext& ctx, const Tensor& dy) {
  if (dy.size() != ctx.argmax.size()) throw ShapeError("maxpool1d: upstream gradient size mismatch");
  Tensor dx(ctx.x_shape);
  for (std::size_t i = 0; i < dy.size(); ++i) dx[ctx.argmax[i]] += dy[i];
  return dx;
}

// ---- recurrent cells -------------------------------------------------------

namespace {

void check_cell(const Tensor& x, const Tensor& h, const Tensor& wx, const Tensor& wh,
                const Tensor& b, std::size_t gates, const char* cell) {
  require_rank(x, 2, cell);
  require_rank(h, 2, cell);
  if (x.dim(0) != h.dim(0)) throw ShapeError(std::string(cell) + ": batch sizes differ");
  const std::size_t in = x.dim(1), hid = h.dim(1);
  require_shape(wx, {in, gates * hid}, cell);
  require_shape(wh, {hid, gates * hid}, cell);
  require_shape(b, {gates * hid}, cell);
}

}  // namespace

Tensor rnn_step(const Tensor& x, const Tensor& h, const RnnParams& p, RnnContext* ctx) {
  check_cell(x, h, p.wx, p.wh, p.b, 1, "rnn_step");
  Tensor out({x.dim(0), h.dim(1)});
  auto om = as_mat(out);
  om.noalias() = as_mat(x) * as_mat(p.wx);
  om.noalias() += as_mat(h) * as_mat(p.wh);
  om.rowwise() += as_row(p.b);
  activate(out.data(), Activation::tanh);
  if (ctx) {
    ctx->x = x;
    ctx->h = h;
    ctx->h_next = out;
  }
  return out;
}

RnnGrads rnn_step_backward(const RnnContext& ctx, const RnnParams& p, const Tensor& dh_next) {
  Tensor dz = activation_backward(ctx.h_next, dh_next, Activation::tanh);
  RnnGrads g;
  g.dwx = Tensor(p.wx.shape());
  as_mat(g.dwx).noalias() = as_mat(ctx.x).transpose() * as_mat(dz);
  g.dwh = Tensor(p.wh.shape());
  as_mat(g.dwh).noalias() = as_mat(ctx.h).transpose() * as_mat(dz);
  g.db = column_sums(dz);
  g.dx = Tensor(ctx.x.shape());
  as_mat(g.dx).noalias() = as_mat(dz) * as_mat(p.wx).transpose();
  g.dh = Tensor(ctx.h.shape());
  as_mat(g.dh).noalias() = as_mat(dz) * as_mat(p.wh).transpose();
  return g;
}

LstmState lstm_step(const Tensor& x, const LstmState& state, const LstmParams& p,
                    LstmContext* ctx) {
  check_cell(x, state.h, p.wx, p.wh, p.b, 4, "lstm_step");
  require_shape(state.c, state.h.shape(), "lstm_step cell state");
  const std::size_t batch = x.dim(0), hid = state.h.dim(1);
  Tensor gates({batch, 4 * hid});
  auto gm = as_mat(gates);
  gm.noalias() = as_mat(x) * as_mat(p.wx);
  gm.noalias() += as_mat(state.h) * as_mat(p.wh);
  gm.rowwise() += as_row(p.b);

  LstmState next{Tensor({batch, hid}), Tensor({batch, hid})};
  Tensor tanh_c({batch, hid});
  for (std::size_t bi = 0; bi < batch; ++bi) {
    double* g = gates.ptr() + bi * 4 * hid;
    for (std::size_t j = 0; j < hid; ++j) {
      const double i = sigmoid(g[j]);
      const double f = sigmoid(g[hid + j]);
      const double cand = fast_tanh(g[2 * hid + j]);
      const double o = sigmoid(g[3 * hid + j]);
      g[j] = i;
      g[hid + j] = f;
      g[2 * hid + j] = cand;
      g[3 * hid + j] = o;
      const std::size_t k = bi * hid + j;
      const double c_new = f * state.c[k] + i * cand;
      next.c[k] = c_new;
      tanh_c[k] = fast_tanh(c_new);
      next.h[k] = o * tanh_c[k];
    }
  }
  if (ctx) {
    ctx->x = x;
    ctx->h = state.h;
    ctx->c = state.c;
    ctx->gates = std::move(gates);
    ctx->c_next = next.c;
    ctx->tanh_c = std::move(tanh_c);
  }
  return next;
}

LstmGrads lstm_step_backward(const LstmContext& ctx, const LstmParams& p, const Tensor& dh_next,
                             const Tensor& dc_next) {
  require_shape(dh_next, ctx.h.shape(), "lstm_step_backward dh");
  require_shape(dc_next, ctx.c.shape(), "lstm_step_backward dc");
  const std::size_t batch = ctx.h.dim(0), hid = ctx.h.dim(1);
  Tensor dgates({batch, 4 * hid});
  LstmGrads g;
  g.dc = Tensor(ctx.c.shape());
  for (std::size_t bi = 0; bi < batch; ++bi) {
    const double* gt = ctx.gates.ptr() + bi * 4 * hid;
    double* dg = dgates.ptr() + bi * 4 * hid;
    for (std::size_t j = 0; j < hid; ++j) {
      const std::size_t k = bi * hid + j;
      const double i = gt[j], f = gt[hid + j], cand = gt[2 * hid + j], o = gt[3 * hid + j];
      const double tc = ctx.tanh_c[k];
      const double dh = dh_next[k];
      const double dc = dc_next[k] + dh * o * (1.0 - tc * tc);
      dg[j] = dc * cand * i * (1.0 - i);
      dg[hid + j] = dc * ctx.c[k] * f * (1.0 - f);
      dg[2 * hid + j] = dc * i * (1.0 - cand * cand);
      dg[3 * hid + j] = dh * tc * o * (1.0 - o);
      g.dc[k] = dc * f;
    }
  }
  g.dwx = Tensor(p.wx.shape());
  as_mat(g.dwx).noalias() = as_mat(ctx.x).transpose() * as_mat(dgates);
  g.dwh = Tensor(p.wh.shape());
  as_mat(g.dwh).noalias() = as_mat(ctx.h).transpose() * as_mat(dgates);
  g.db = column_sums(dgates);
  g.dx = Tensor(ctx.x.shape());
  as_mat(g.dx).noalias() = as_mat(dgates) * as_mat(p.wx).transpose();
  g.dh = Tensor(ctx.h.shape());
  as_mat(g.dh).noalias() = as_mat(dgates) * as_mat(p.wh).transpose();
  return g;
}

Tensor gru_step(const Tensor& x, const Tensor& h, const GruParams& p, GruContext* ctx) {
  check_cell(x, h, p.wx, p.uh, p.b, 3, "gru_step");
  const std::size_t batch = x.dim(0), hid = h.dim(1);
  Tensor xs({batch, 3 * hid});
  auto xm = as_mat(xs);
  xm.noalias() = as_mat(x) * as_mat(p.wx);
  xm.rowwise() += as_row(p.b);
  Tensor hs({batch, 3 * hid});
  as_mat(hs).noalias() = as_mat(h) * as_mat(p.uh);

  Tensor out({batch, hid});
  Tensor hu_n({batch, hid});
  for (std::size_t bi = 0; bi < batch; ++bi) {
    double* g = xs.ptr() + bi * 3 * hid;
    const double* u = hs.ptr() + bi * 3 * hid;
    for (std::size_t j = 0; j < hid; ++j) {
      const std::size_t k = bi * hid + j;
      const double z = sigmoid(g[j] + u[j]);
      const double r = sigmoid(g[hid + j] + u[hid + j]);
      const double n = fast_tanh(g[2 * hid + j] + r * u[2 * hid + j]);
      g[j] = z;
      g[hid + j] = r;
      g[2 * hid + j] = n;
      hu_n[k] = u[2 * hid + j];
      out[k] = (1.0 - z) * h[k] + z * n;
    }
  }
  if (ctx) {
    ctx->x = x;
    ctx->h = h;
    ctx->gates = std::move(xs);
    ctx->hu_n = std::move(hu_n);
  }
  return out;
}

GruGrads gru_step_backward(const GruContext& ctx, const GruParams& p, const Tensor& dh_next) {
  require_shape(dh_next, ctx.h.shape(), "gru_step_backward dh");
  const std::size_t batch = ctx.h.dim(0), hid = ctx.h.dim(1);
  Tensor dxs({batch, 3 * hid});  // gradient w.r.t. x-side pre-activations
  Tensor dhs({batch, 3 * hid});  // gradient w.r.t. h . Uh
  GruGrads g;
  g.dh = Tensor(ctx.h.shape());
  for (std::size_t bi = 0; bi < batch; ++bi) {
    const double* gt = ctx.gates.ptr() + bi * 3 * hid;
    double* dx_row = dxs.ptr() + bi * 3 * hid;
    double* dh_row = dhs.ptr() + bi * 3 * hid;
    for (std::size_t j = 0; j < hid; ++j) {
      const std::size_t k = bi * hid + j;
      const double z = gt[j], r = gt[hid + j], n = gt[2 * hid + j];
      const double d = dh_next[k];
      const double dn_pre = d * z * (1.0 - n * n);
      const double dz_pre = d * (n - ctx.h[k]) * z * (1.0 - z);
      const double dr_pre = dn_pre * ctx.hu_n[k] * r * (1.0 - r);
      dx_row[j] = dz_pre;
      dx_row[hid + j] = dr_pre;
      dx_row[2 * hid + j] = dn_pre;
      dh_row[j] = dz_pre;
      dh_row[hid + j] = dr_pre;
      dh_row[2 * hid + j] = dn_pre * r;
      g.dh[k] = d * (1.0 - z);
    }
  }
  g.dwx = Tensor(p.wx.shape());
  as_mat(g.dwx).noalias() = as_mat(ctx.x).transpose() * as_mat(dxs);
  g.duh = Tensor(p.uh.shape());
  as_mat(g.duh).noalias() = as_mat(ctx.h).transpose() * as_mat(dhs);
  g.db = column_sums(dxs);
  g.dx = Tensor(ctx.x.shape());
  as_mat(g.dx).noalias() = as_mat(dxs) * as_mat(p.wx).transpose();
  as_mat(g.dh).noalias() += as_mat(dhs) * as_mat(p.uh).transpose();
  return g;
}

// ---- loss ------------------------------------------------------------------

namespace {

void check_targets(const Tensor& p, const Tensor& y) {
  if (p.size() != y.size() || p.size() == 0) {
    throw ShapeError("loss: predictions and targets must be non-empty and equal in size");
  }
}

}  // namespace

LossResult bce_loss(const Tensor& p, const Tensor& y) {
  check_targets(p, y);
  const double n = static_cast<double>(p.size());
  LossResult r;
  r.grad = Tensor(p.shape());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0 && p[i] <= 1.0)) {
      throw std::invalid_argument("bce_loss: probability outside [0, 1]");
    }
    const double q = std::clamp(p[i], kBceEpsilon, 1.0 - kBceEpsilon);
    r.loss -= y[i] * std::log(q) + (1.0 - y[i]) * std::log(1.0 - q);
    r.grad[i] = (q - y[i]) / (q * (1.0 - q)) / n;
  }
  r.loss /= n;
  return r;
}

LossResult sigmoid_bce(const Tensor& logits, const Tensor& y) {
  check_targets(logits, y);
  const double n = static_cast<double>(logits.size());
  LossResult r;
  r.grad = Tensor(logits.shape());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double p = sigmoid(logits[i]);
    const double q = std::clamp(p, kBceEpsilon, 1.0 - kBceEpsilon);
    r.loss -= y[i] * std::log(q) + (1.0 - y[i]) * std::log(1.0 - q);
    r.grad[i] = (p - y[i]) / n;
  }
  r.loss /= n;
  return r;
}

}  // namespace nidsdl::nn
