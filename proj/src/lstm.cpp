#include "framecast/lstm.hpp"

#include <cmath>

namespace fc {

LstmParams::LstmParams(std::size_t input_dim, std::size_t hidden_dim)
    : w_xi(hidden_dim, input_dim), w_xf(hidden_dim, input_dim), w_xc(hidden_dim, input_dim),
      w_xo(hidden_dim, input_dim), w_hi(hidden_dim, hidden_dim), w_hf(hidden_dim, hidden_dim),
      w_hc(hidden_dim, hidden_dim), w_ho(hidden_dim, hidden_dim), w_ci(hidden_dim, 1),
      w_cf(hidden_dim, 1), w_co(hidden_dim, 1), b_i(hidden_dim, 1), b_f(hidden_dim, 1),
      b_c(hidden_dim, 1), b_o(hidden_dim, 1) {}

void LstmParams::init(Rng& rng, double scale, double forget_bias) {
    for (Tensor2* w : {&w_xi, &w_xf, &w_xc, &w_xo, &w_hi, &w_hf, &w_hc, &w_ho, &w_ci, &w_cf, &w_co})
        *w = rand_uniform(rng, w->rows, w->cols, -scale, scale);
    b_i.fill(0.0);
    b_f.fill(forget_bias);
    b_c.fill(0.0);
    b_o.fill(0.0);
}

void LstmParams::for_each_param(const std::function<void(const std::string&, Tensor2&)>& fn) {
    fn("w_xi", w_xi); fn("w_xf", w_xf); fn("w_xc", w_xc); fn("w_xo", w_xo);
    fn("w_hi", w_hi); fn("w_hf", w_hf); fn("w_hc", w_hc); fn("w_ho", w_ho);
    fn("w_ci", w_ci); fn("w_cf", w_cf); fn("w_co", w_co);
    fn("b_i", b_i); fn("b_f", b_f); fn("b_c", b_c); fn("b_o", b_o);
}

void LstmParams::for_each_param(
    const std::function<void(const std::string&, const Tensor2&)>& fn) const {
    const_cast<LstmParams*>(this)->for_each_param(
        [&fn](const std::string& name, Tensor2& t) { fn(name, t); });
}

namespace {

void check_step_shapes(const LstmParams& p, const Tensor2& x, const LstmState& prev) {
    if (x.cols != 1 || x.rows != p.input_dim())
        throw shape_error("lstm_step: input is " + std::to_string(x.rows) + "x" +
                          std::to_string(x.cols) + ", expected " + std::to_string(p.input_dim()) +
                          "x1");
    if (prev.h.rows != p.hidden_dim() || prev.c.rows != p.hidden_dim())
        throw shape_error("lstm_step: state dim " + std::to_string(prev.h.rows) + ", expected " +
                          std::to_string(p.hidden_dim()));
}

} // namespace

std::pair<LstmState, StepTape> lstm_step(const LstmParams& p, const Tensor2& x,
                                         const LstmState& prev) {
    check_step_shapes(p, x, prev);
    const std::size_t hidden = p.hidden_dim();

    Tensor2 ai = matmul(p.w_xi, x);
    Tensor2 af = matmul(p.w_xf, x);
    Tensor2 ag = matmul(p.w_xc, x);
    Tensor2 ao = matmul(p.w_xo, x);
    add_in_place(ai, matmul(p.w_hi, prev.h));
    add_in_place(af, matmul(p.w_hf, prev.h));
    add_in_place(ag, matmul(p.w_hc, prev.h));
    add_in_place(ao, matmul(p.w_ho, prev.h));

    StepTape tape;
    tape.x = x;
    tape.h_prev = prev.h;
    tape.c_prev = prev.c;

    Tensor2 i(hidden, 1), f(hidden, 1), g(hidden, 1), c(hidden, 1);
    for (std::size_t k = 0; k < hidden; ++k) {
        i[k] = sigmoid_scalar(ai[k] + p.w_ci[k] * prev.c[k] + p.b_i[k]);
        f[k] = sigmoid_scalar(af[k] + p.w_cf[k] * prev.c[k] + p.b_f[k]);
        g[k] = std::tanh(ag[k] + p.b_c[k]);
        c[k] = f[k] * prev.c[k] + i[k] * g[k];
    }
    Tensor2 o(hidden, 1), tanh_c(hidden, 1), h(hidden, 1);
    for (std::size_t k = 0; k < hidden; ++k) {
        o[k] = sigmoid_scalar(ao[k] + p.w_co[k] * c[k] + p.b_o[k]);
        tanh_c[k] = std::tanh(c[k]);
        h[k] = o[k] * tanh_c[k];
    }

    tape.i = i;
    tape.f = f;
    tape.g = g;
    tape.o = o;
    tape.c = c;
    tape.tanh_c = tanh_c;

    LstmState next;
    next.c = c;
    next.h = h;
    return {std::move(next), std::move(tape)};
}

std::pair<std::vector<LstmState>, std::vector<StepTape>>
lstm_forward(const LstmParams& p, const std::vector<Tensor2>& xs, const LstmState& init) {
    if (xs.empty()) throw shape_error("lstm_forward: empty input sequence");
    std::vector<LstmState> states;
    std::vector<StepTape> tapes;
    states.reserve(xs.size());
    tapes.reserve(xs.size());
    const LstmState* prev = &init;
    for (const Tensor2& x : xs) {
        auto [state, tape] = lstm_step(p, x, *prev);
        states.push_back(std::move(state));
        tapes.push_back(std::move(tape));
        prev = &states.back();
    }
    return {std::move(states), std::move(tapes)};
}

StepBackResult lstm_step_backward(const LstmParams& p, const StepTape& tape, const Tensor2& dh,
                                  const Tensor2& dc_in, LstmGrads& grads) {
    const std::size_t hidden = p.hidden_dim();
    if (dh.rows != hidden || dc_in.rows != hidden)
        throw shape_error("lstm_step_backward: gradient dim " + std::to_string(dh.rows) + "/" +
                          std::to_string(dc_in.rows) + ", expected " + std::to_string(hidden));

    // Gate pre-activation gradients. o reads c_t, so da_o lands in dc before
    // the cell gradient is consumed.
    Tensor2 da_i(hidden, 1), da_f(hidden, 1), da_g(hidden, 1), da_o(hidden, 1), dc(hidden, 1);
    for (std::size_t k = 0; k < hidden; ++k) {
        const double o = tape.o[k];
        da_o[k] = dh[k] * tape.tanh_c[k] * o * (1.0 - o);
        dc[k] = dc_in[k] + dh[k] * o * (1.0 - tape.tanh_c[k] * tape.tanh_c[k]) +
                da_o[k] * p.w_co[k];
    }
    for (std::size_t k = 0; k < hidden; ++k) {
        const double i = tape.i[k], f = tape.f[k], g = tape.g[k];
        da_i[k] = dc[k] * g * i * (1.0 - i);
        da_f[k] = dc[k] * tape.c_prev[k] * f * (1.0 - f);
        da_g[k] = dc[k] * i * (1.0 - g * g);
    }

    add_outer(grads.w_xi, da_i, tape.x);
    add_outer(grads.w_xf, da_f, tape.x);
    add_outer(grads.w_xc, da_g, tape.x);
    add_outer(grads.w_xo, da_o, tape.x);
    add_outer(grads.w_hi, da_i, tape.h_prev);
    add_outer(grads.w_hf, da_f, tape.h_prev);
    add_outer(grads.w_hc, da_g, tape.h_prev);
    add_outer(grads.w_ho, da_o, tape.h_prev);
    for (std::size_t k = 0; k < hidden; ++k) {
        grads.w_ci[k] += da_i[k] * tape.c_prev[k];
        grads.w_cf[k] += da_f[k] * tape.c_prev[k];
        grads.w_co[k] += da_o[k] * tape.c[k];
        grads.b_i[k] += da_i[k];
        grads.b_f[k] += da_f[k];
        grads.b_c[k] += da_g[k];
        grads.b_o[k] += da_o[k];
    }

    StepBackResult out;
    out.dx = matmul_tn(p.w_xi, da_i);
    add_in_place(out.dx, matmul_tn(p.w_xf, da_f));
    add_in_place(out.dx, matmul_tn(p.w_xc, da_g));
    add_in_place(out.dx, matmul_tn(p.w_xo, da_o));

    out.dh_prev = matmul_tn(p.w_hi, da_i);
    add_in_place(out.dh_prev, matmul_tn(p.w_hf, da_f));
    add_in_place(out.dh_prev, matmul_tn(p.w_hc, da_g));
    add_in_place(out.dh_prev, matmul_tn(p.w_ho, da_o));

    out.dc_prev = Tensor2(hidden, 1);
    for (std::size_t k = 0; k < hidden; ++k)
        out.dc_prev[k] = dc[k] * tape.f[k] + da_i[k] * p.w_ci[k] + da_f[k] * p.w_cf[k];
    return out;
}

LstmBackResult lstm_backward(const LstmParams& p, const std::vector<StepTape>& tapes,
                             const std::vector<Tensor2>& dh, const Tensor2& dc_final) {
    if (tapes.empty()) throw shape_error("lstm_backward: empty tape sequence");
    if (dh.size() != tapes.size())
        throw shape_error("lstm_backward: " + std::to_string(dh.size()) + " dh entries for " +
                          std::to_string(tapes.size()) + " steps");

    LstmBackResult out;
    out.grads = LstmParams(p.input_dim(), p.hidden_dim());
    out.dx.resize(tapes.size());

    Tensor2 dh_rec(p.hidden_dim(), 1);
    Tensor2 dc_carry = dc_final;
    for (std::size_t t = tapes.size(); t-- > 0;) {
        Tensor2 dh_total = add(dh[t], dh_rec);
        StepBackResult step = lstm_step_backward(p, tapes[t], dh_total, dc_carry, out.grads);
        out.dx[t] = std::move(step.dx);
        dh_rec = std::move(step.dh_prev);
        dc_carry = std::move(step.dc_prev);
    }
    out.dh_init = std::move(dh_rec);
    out.dc_init = std::move(dc_carry);
    return out;
}

} // namespace fc
