#pragma once

// Forward/backward kernels for every layer kind the classifiers use.
// Each *_apply/*_step takes an optional context pointer; when non-null it is
// filled with whatever the matching *_backward needs. Forward passes are pure.

#include <cstddef>
#include <string_view>
#include <vector>

#include "nidsdl/nn/tensor.hpp"

namespace nidsdl::nn {

enum class Activation { none, relu, sigmoid, tanh };

std::string_view to_string(Activation act);
Activation activation_from_string(std::string_view name);

double sigmoid(double x);
// tanh through exp away from zero: within ~4 ulp of std::tanh and several times faster.
double fast_tanh(double x);

// ---- dense -----------------------------------------------------------------

struct DenseContext {
  Tensor x;
  Tensor y;  // post-activation
  Activation act = Activation::none;
};

struct DenseGrads {
  Tensor dx, dw, db;
};

// y = act(x . W + b) with x [B,in], W [in,out], b [out].
Tensor dense_apply(const Tensor& x, const Tensor& w, const Tensor& b, Activation act,
                   DenseContext* ctx = nullptr);
DenseGrads dense_backward(const DenseContext& ctx, const Tensor& w, const Tensor& dy);
// Same, but `dz` is already the gradient with respect to the pre-activation.
DenseGrads dense_backward_preactivation(const DenseContext& ctx, const Tensor& w, const Tensor& dz);

// ---- conv1d ----------------------------------------------------------------

enum class Padding { valid, same };

struct Conv1dConfig {
  std::size_t stride = 1;
  Padding padding = Padding::valid;
  Activation act = Activation::none;
};

// Output length for input length `t`; throws ShapeError when the kernel does not fit.
std::size_t conv1d_output_length(std::size_t t, std::size_t width, std::size_t stride,
                                 Padding padding);

struct Conv1dContext {
  Shape x_shape;
  Tensor patches;  // [B*T', width*C]
  Tensor y;        // [B, T', K], post-activation
  std::size_t pad_left = 0;
  Conv1dConfig config;
};

struct Conv1dGrads {
  Tensor dx, dkernels, dbias;
};

// Cross-correlation of x [B,T,C] with kernels [K,width,C] plus bias [K] -> [B,T',K].
Tensor conv1d_apply(const Tensor& x, const Tensor& kernels, const Tensor& bias,
                    const Conv1dConfig& config, Conv1dContext* ctx = nullptr);
Conv1dGrads conv1d_backward(const Conv1dContext& ctx, const Tensor& kernels, const Tensor& dy);

// ---- maxpool1d -------------------------------------------------------------

struct MaxPoolContext {
  Shape x_shape;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

// Per-window max over time; ties pick the earliest position.
Tensor maxpool1d(const Tensor& x, std::size_t window, std::size_t stride,
                 MaxPoolContext* ctx = nullptr);
Tensor maxpool1d_backward(const MaxPoolContext& ctx, const Tensor& dy);

// ---- recurrent cells -------------------------------------------------------

// h' = tanh(x . Wx + h . Wh + b); Wx [in,H], Wh [H,H], b [H].
struct RnnParams {
  Tensor wx, wh, b;
};

struct RnnContext {
  Tensor x, h, h_next;
};

struct RnnGrads {
  Tensor dx, dh, dwx, dwh, db;
};

Tensor rnn_step(const Tensor& x, const Tensor& h, const RnnParams& p, RnnContext* ctx = nullptr);
RnnGrads rnn_step_backward(const RnnContext& ctx, const RnnParams& p, const Tensor& dh_next);

// Gate blocks of width H are laid out i, f, g, o in Wx [in,4H], Wh [H,4H], b [4H]:
//   i = sig(.), f = sig(.), g = tanh(.), o = sig(.)
//   c' = f*c + i*g,  h' = o*tanh(c')
struct LstmParams {
  Tensor wx, wh, b;
};

struct LstmState {
  Tensor h, c;
};

struct LstmContext {
  Tensor x, h, c;
  Tensor gates;  // [B,4H] post-activation
  Tensor c_next, tanh_c;
};

struct LstmGrads {
  Tensor dx, dh, dc, dwx, dwh, db;
};

LstmState lstm_step(const Tensor& x, const LstmState& state, const LstmParams& p,
                    LstmContext* ctx = nullptr);
LstmGrads lstm_step_backward(const LstmContext& ctx, const LstmParams& p, const Tensor& dh_next,
                             const Tensor& dc_next);

// Gate blocks laid out z, r, n in Wx [in,3H], Uh [H,3H], b [3H]; the bias sits
// on the input side and the reset gate scales the recurrent candidate term:
//   z = sig(x.Wz + h.Uz + bz),  r = sig(x.Wr + h.Ur + br)
//   n = tanh(x.Wn + r*(h.Un) + bn),  h' = (1-z)*h + z*n
struct GruParams {
  Tensor wx, uh, b;
};

struct GruContext {
  Tensor x, h;
  Tensor gates;  // [B,3H] post-activation z, r, n
  Tensor hu_n;   // [B,H] h . Un
};

struct GruGrads {
  Tensor dx, dh, dwx, duh, db;
};

Tensor gru_step(const Tensor& x, const Tensor& h, const GruParams& p, GruContext* ctx = nullptr);
GruGrads gru_step_backward(const GruContext& ctx, const GruParams& p, const Tensor& dh_next);

// ---- loss ------------------------------------------------------------------

inline constexpr double kBceEpsilon = 1e-12;

struct LossResult {
  double loss = 0.0;
  Tensor grad;
};

// Mean binary cross-entropy over p clamped to [eps, 1-eps]; gradient w.r.t. p.
// Throws std::invalid_argument for p outside [0, 1].
LossResult bce_loss(const Tensor& p, const Tensor& y);

// Sigmoid followed by bce_loss; the gradient is taken w.r.t. the logits,
// which stays informative when the sigmoid saturates.
LossResult sigmoid_bce(const Tensor& logits, const Tensor& y);

}  // namespace nidsdl::nn
