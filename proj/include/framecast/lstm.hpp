#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "framecast/tensor.hpp"

namespace fc {

/// Parameters of one peephole LSTM layer. The cell-to-gate weights are
/// diagonal, so they are stored as hidden-length vectors and applied
/// elementwise.
struct LstmParams {
    Tensor2 w_xi, w_xf, w_xc, w_xo; // hidden x input
    Tensor2 w_hi, w_hf, w_hc, w_ho; // hidden x hidden
    Tensor2 w_ci, w_cf, w_co;       // hidden x 1, peepholes
    Tensor2 b_i, b_f, b_c, b_o;     // hidden x 1

    LstmParams() = default;
    LstmParams(std::size_t input_dim, std::size_t hidden_dim);

    std::size_t input_dim() const { return w_xi.cols; }
    std::size_t hidden_dim() const { return w_xi.rows; }

    /// Uniform(-scale, scale) weights, zero biases except b_f = forget_bias.
    void init(Rng& rng, double scale, double forget_bias);

    void for_each_param(const std::function<void(const std::string&, Tensor2&)>& fn);
    void for_each_param(const std::function<void(const std::string&, const Tensor2&)>& fn) const;
};

/// Gradients have the same layout as the parameters.
using LstmGrads = LstmParams;

struct LstmState {
    Tensor2 c; // hidden x 1
    Tensor2 h; // hidden x 1

    LstmState() = default;
    explicit LstmState(std::size_t hidden) : c(hidden, 1), h(hidden, 1) {}
};

/// Everything the backward pass needs from one forward step.
struct StepTape {
    Tensor2 x;      // input at t
    Tensor2 h_prev; // h_{t-1}
    Tensor2 c_prev; // c_{t-1}
    Tensor2 i, f, g, o;
    Tensor2 c;      // c_t
    Tensor2 tanh_c; // tanh(c_t)
};

/// One forward step:
///   i = sig(Wxi x + Whi h' + wci.c' + bi)
///   f = sig(Wxf x + Whf h' + wcf.c' + bf)
///   c = f.c' + i.tanh(Wxc x + Whc h' + bc)
///   o = sig(Wxo x + Who h' + wco.c + bo)   -- o reads the updated cell
///   h = o.tanh(c)
std::pair<LstmState, StepTape> lstm_step(const LstmParams& p, const Tensor2& x,
                                         const LstmState& prev);

/// Left fold of lstm_step over the sequence. Rejects empty input.
std::pair<std::vector<LstmState>, std::vector<StepTape>>
lstm_forward(const LstmParams& p, const std::vector<Tensor2>& xs, const LstmState& init);

/// Reverse-mode step. dh is the full dL/dh_t; dc_in collects dL/dc_t coming
/// from step t+1 (forget carry and its gate peepholes) plus any direct
/// upstream cell gradient. Accumulates into grads, returns dx, dh_{t-1},
/// dc_{t-1}.
struct StepBackResult {
    Tensor2 dx;
    Tensor2 dh_prev;
    Tensor2 dc_prev;
};
StepBackResult lstm_step_backward(const LstmParams& p, const StepTape& tape, const Tensor2& dh,
                                  const Tensor2& dc_in, LstmGrads& grads);

struct LstmBackResult {
    LstmGrads grads;
    std::vector<Tensor2> dx; // per step, forward order
    Tensor2 dh_init;         // dL/dh_0 (the state the sequence started from)
    Tensor2 dc_init;         // dL/dc_0
};

/// Backprop through a full unroll. dh has one entry per step (dL/dh_t from
/// outside the layer); dc_final is dL/dc_T.
LstmBackResult lstm_backward(const LstmParams& p, const std::vector<StepTape>& tapes,
                             const std::vector<Tensor2>& dh, const Tensor2& dc_final);

} // namespace fc
