#include "framecast/model.hpp"

#include <cmath>
#include <fstream>

#include "framecast/binio.hpp"
#include "framecast/errors.hpp"

namespace fc {

void ModelConfig::validate() const {
    if (frame_rows == 0 || frame_cols == 0 || feature_dim == 0 || hidden_dim == 0 ||
        action_dim == 0 || state_dim == 0)
        throw config_error("model config: all dimensions must be >= 1");
    if (t_in == 0 || t_out == 0) throw config_error("model config: t_in and t_out must be >= 1");
}

ModelParams ModelParams::init(const ModelConfig& cfg, Rng& rng, double scale, double forget_bias) {
    cfg.validate();
    ModelParams p;
    p.config = cfg;
    const std::size_t px = cfg.pixel_count();
    p.enc_dense.w = rand_uniform(rng, cfg.feature_dim, px, -scale, scale);
    p.enc_dense.b = Tensor2(cfg.feature_dim, 1);
    p.dec_dense.w = rand_uniform(rng, px, cfg.feature_dim, -scale, scale);
    p.dec_dense.b = Tensor2(px, 1);
    p.head.w = rand_uniform(rng, cfg.feature_dim, cfg.hidden_dim, -scale, scale);
    p.head.b = Tensor2(cfg.feature_dim, 1);
    p.encoder = LstmParams(cfg.feature_dim, cfg.hidden_dim);
    p.encoder.init(rng, scale, forget_bias);
    p.recon_decoder = LstmParams(cfg.feature_dim, cfg.hidden_dim);
    p.recon_decoder.init(rng, scale, forget_bias);
    p.pred_decoder = LstmParams(cfg.pred_input_dim(), cfg.hidden_dim);
    p.pred_decoder.init(rng, scale, forget_bias);
    return p;
}

ModelParams ModelParams::zeros(const ModelConfig& cfg) {
    cfg.validate();
    ModelParams p;
    p.config = cfg;
    const std::size_t px = cfg.pixel_count();
    p.enc_dense.w = Tensor2(cfg.feature_dim, px);
    p.enc_dense.b = Tensor2(cfg.feature_dim, 1);
    p.dec_dense.w = Tensor2(px, cfg.feature_dim);
    p.dec_dense.b = Tensor2(px, 1);
    p.head.w = Tensor2(cfg.feature_dim, cfg.hidden_dim);
    p.head.b = Tensor2(cfg.feature_dim, 1);
    p.encoder = LstmParams(cfg.feature_dim, cfg.hidden_dim);
    p.recon_decoder = LstmParams(cfg.feature_dim, cfg.hidden_dim);
    p.pred_decoder = LstmParams(cfg.pred_input_dim(), cfg.hidden_dim);
    return p;
}

void ModelParams::for_each_param(const std::function<void(const std::string&, Tensor2&)>& fn) {
    fn("enc_dense.w", enc_dense.w);
    fn("enc_dense.b", enc_dense.b);
    fn("dec_dense.w", dec_dense.w);
    fn("dec_dense.b", dec_dense.b);
    fn("head.w", head.w);
    fn("head.b", head.b);
    encoder.for_each_param([&fn](const std::string& n, Tensor2& t) { fn("encoder." + n, t); });
    recon_decoder.for_each_param(
        [&fn](const std::string& n, Tensor2& t) { fn("recon_decoder." + n, t); });
    pred_decoder.for_each_param(
        [&fn](const std::string& n, Tensor2& t) { fn("pred_decoder." + n, t); });
}

void ModelParams::for_each_param(
    const std::function<void(const std::string&, const Tensor2&)>& fn) const {
    const_cast<ModelParams*>(this)->for_each_param(
        [&fn](const std::string& name, Tensor2& t) { fn(name, t); });
}

bool ModelParams::is_dense_param(const std::string& name) {
    return name.rfind("enc_dense.", 0) == 0 || name.rfind("dec_dense.", 0) == 0;
}

std::size_t ModelParams::param_count() const {
    std::size_t n = 0;
    for_each_param([&n](const std::string&, const Tensor2& t) { n += t.size(); });
    return n;
}

void ModelParams::validate_shapes() const {
    config.validate();
    const std::size_t px = config.pixel_count();
    auto want = [](const Tensor2& t, std::size_t r, std::size_t c, const char* name) {
        if (t.rows != r || t.cols != c)
            throw shape_error(std::string(name) + " is " + std::to_string(t.rows) + "x" +
                              std::to_string(t.cols) + ", expected " + std::to_string(r) + "x" +
                              std::to_string(c));
    };
    want(enc_dense.w, config.feature_dim, px, "enc_dense.w");
    want(enc_dense.b, config.feature_dim, 1, "enc_dense.b");
    want(dec_dense.w, px, config.feature_dim, "dec_dense.w");
    want(dec_dense.b, px, 1, "dec_dense.b");
    want(head.w, config.feature_dim, config.hidden_dim, "head.w");
    want(head.b, config.feature_dim, 1, "head.b");
    auto want_lstm = [&](const LstmParams& l, std::size_t in, const char* name) {
        if (l.input_dim() != in || l.hidden_dim() != config.hidden_dim)
            throw shape_error(std::string(name) + " is " + std::to_string(l.hidden_dim()) + "h/" +
                              std::to_string(l.input_dim()) + "in, expected " +
                              std::to_string(config.hidden_dim) + "h/" + std::to_string(in) + "in");
    };
    want_lstm(encoder, config.feature_dim, "encoder");
    want_lstm(recon_decoder, config.feature_dim, "recon_decoder");
    want_lstm(pred_decoder, config.pred_input_dim(), "pred_decoder");
}

namespace {

Tensor2 dense_tanh(const Dense& d, const Tensor2& x) {
    Tensor2 z = matmul(d.w, x);
    add_in_place(z, d.b);
    return fc::tanh(z);
}

Tensor2 dense_linear(const Dense& d, const Tensor2& x) {
    Tensor2 z = matmul(d.w, x);
    add_in_place(z, d.b);
    return z;
}

Tensor2 dense_sigmoid(const Dense& d, const Tensor2& x) {
    Tensor2 z = matmul(d.w, x);
    add_in_place(z, d.b);
    return fc::sigmoid(z);
}

Tensor2 head_rows(const Tensor2& v, std::size_t n) {
    Tensor2 out(n, 1);
    for (std::size_t i = 0; i < n; ++i) out[i] = v[i];
    return out;
}

void check_frames(const ModelConfig& cfg, const std::vector<Tensor2>& frames) {
    for (const Tensor2& f : frames)
        if (f.rows != cfg.pixel_count() || f.cols != 1)
            throw shape_error("frame vector is " + std::to_string(f.rows) + "x" +
                              std::to_string(f.cols) + ", expected " +
                              std::to_string(cfg.pixel_count()) + "x1");
}

// strict: an unconditioned model rejects any supplied conditioning (the
// decode_prediction contract). forward_loss passes strict=false because data
// episodes always carry their traces; an unconditioned model just ignores
// them.
void check_conditioning(const ModelConfig& cfg, const Conditioning* cond, bool strict = true) {
    if (!cfg.conditioned) {
        if (strict && cond && (!cond->actions.empty() || !cond->states.empty()))
            throw shape_error("conditioning supplied to an unconditioned model");
        return;
    }
    if (!cond || cond->actions.size() != cfg.t_out || cond->states.size() != cfg.t_out)
        throw shape_error("conditioned model needs " + std::to_string(cfg.t_out) +
                          " action/state vectors");
    for (const Tensor2& a : cond->actions)
        if (a.rows != cfg.action_dim || a.cols != 1)
            throw shape_error("action vector dim " + std::to_string(a.rows) + ", expected " +
                              std::to_string(cfg.action_dim));
    for (const Tensor2& s : cond->states)
        if (s.rows != cfg.state_dim || s.cols != 1)
            throw shape_error("state vector dim " + std::to_string(s.rows) + ", expected " +
                              std::to_string(cfg.state_dim));
}

// Shared decoder loop. first_feat==nullptr means a zero first input
// (reconstruction branch). teacher_feats, when given, replaces the fed-back
// feature for steps 1..T-1.
BranchTrace run_decoder(const ModelParams& p, const LstmParams& dec, const LstmState& ctx,
                        const Tensor2* first_feat, const Conditioning* cond, std::size_t steps,
                        const std::vector<Tensor2>* teacher_feats) {
    const ModelConfig& cfg = p.config;
    BranchTrace tr;
    tr.tapes.reserve(steps);
    tr.hs.reserve(steps);
    tr.feats.reserve(steps);
    tr.outputs.reserve(steps);

    LstmState state = ctx;
    Tensor2 feat_in = first_feat ? *first_feat : Tensor2(cfg.feature_dim, 1);
    for (std::size_t s = 0; s < steps; ++s) {
        Tensor2 x = cond ? concat_rows(feat_in, concat_rows(cond->actions[s], cond->states[s]))
                         : feat_in;
        auto [next, tape] = lstm_step(dec, x, state);
        state = next;
        Tensor2 f = dense_linear(p.head, state.h);
        tr.outputs.push_back(dense_sigmoid(p.dec_dense, f));
        tr.hs.push_back(state.h);
        tr.tapes.push_back(std::move(tape));
        if (s + 1 < steps) feat_in = teacher_feats ? (*teacher_feats)[s] : f;
        tr.feats.push_back(std::move(f));
    }
    return tr;
}

double branch_mse(const BranchTrace& tr) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t s = 0; s < tr.outputs.size(); ++s) {
        const Tensor2& y = tr.outputs[s];
        const Tensor2& t = tr.targets[s];
        for (std::size_t k = 0; k < y.size(); ++k) {
            const double d = y[k] - t[k];
            sum += d * d;
        }
        n += y.size();
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

} // namespace

std::vector<Tensor2> embed_frames(const ModelParams& p, const std::vector<Tensor2>& frames) {
    check_frames(p.config, frames);
    std::vector<Tensor2> out;
    out.reserve(frames.size());
    for (const Tensor2& f : frames) out.push_back(dense_tanh(p.enc_dense, f));
    return out;
}

LstmState encode(const ModelParams& p, const std::vector<Tensor2>& features) {
    if (features.size() != p.config.t_in)
        throw shape_error("encode: got " + std::to_string(features.size()) +
                          " feature vectors, expected t_in=" + std::to_string(p.config.t_in));
    auto [states, tapes] = lstm_forward(p.encoder, features, LstmState(p.config.hidden_dim));
    return states.back();
}

std::vector<Tensor2> decode_reconstruction(const ModelParams& p, const LstmState& ctx) {
    BranchTrace tr = run_decoder(p, p.recon_decoder, ctx, nullptr, nullptr, p.config.t_in, nullptr);
    std::vector<Tensor2> frames;
    frames.reserve(tr.outputs.size());
    for (Tensor2& y : tr.outputs) {
        Tensor2 m(p.config.frame_rows, p.config.frame_cols);
        m.data = std::move(y.data);
        frames.push_back(std::move(m));
    }
    return frames;
}

std::vector<Tensor2> decode_prediction(const ModelParams& p, const LstmState& ctx,
                                       const Tensor2& last_feature, const Conditioning* cond) {
    check_conditioning(p.config, cond);
    BranchTrace tr = run_decoder(p, p.pred_decoder, ctx, &last_feature,
                                 p.config.conditioned ? cond : nullptr, p.config.t_out, nullptr);
    std::vector<Tensor2> frames;
    frames.reserve(tr.outputs.size());
    for (Tensor2& y : tr.outputs) {
        Tensor2 m(p.config.frame_rows, p.config.frame_cols);
        m.data = std::move(y.data);
        frames.push_back(std::move(m));
    }
    return frames;
}

ForwardCache forward_loss(const ModelParams& p, const PreparedEpisode& ep) {
    const ModelConfig& cfg = p.config;
    if (ep.inputs.size() != cfg.t_in)
        throw shape_error("episode has " + std::to_string(ep.inputs.size()) +
                          " input frames, expected " + std::to_string(cfg.t_in));
    if (ep.targets.size() != cfg.t_out)
        throw shape_error("episode has " + std::to_string(ep.targets.size()) +
                          " target frames, expected " + std::to_string(cfg.t_out));
    check_frames(cfg, ep.inputs);
    check_frames(cfg, ep.targets);
    check_conditioning(cfg, &ep.cond, /*strict=*/false);

    ForwardCache cache;
    auto record_embed = [&](const Tensor2& x) -> std::size_t {
        cache.embed_x.push_back(x);
        cache.embed_e.push_back(dense_tanh(p.enc_dense, x));
        return cache.embed_e.size() - 1;
    };

    std::vector<Tensor2> feats;
    feats.reserve(cfg.t_in);
    for (const Tensor2& x : ep.inputs) feats.push_back(cache.embed_e[record_embed(x)]);

    auto [enc_states, enc_tapes] = lstm_forward(p.encoder, feats, LstmState(cfg.hidden_dim));
    cache.enc_tapes = std::move(enc_tapes);
    cache.ctx = enc_states.back();

    // reconstruction branch
    std::vector<Tensor2> recon_targets;
    recon_targets.reserve(cfg.t_in);
    for (std::size_t s = 0; s < cfg.t_in; ++s)
        recon_targets.push_back(cfg.recon_reversed ? ep.inputs[cfg.t_in - 1 - s] : ep.inputs[s]);

    std::vector<Tensor2> recon_teacher;
    std::vector<std::size_t> recon_teacher_idx(cfg.t_in, 0);
    if (cfg.teacher_forcing) {
        for (std::size_t s = 0; s + 1 < cfg.t_in; ++s) {
            const std::size_t idx = record_embed(recon_targets[s]);
            recon_teacher_idx[s + 1] = idx;
            recon_teacher.push_back(cache.embed_e[idx]);
        }
    }
    cache.recon = run_decoder(p, p.recon_decoder, cache.ctx, nullptr, nullptr, cfg.t_in,
                              cfg.teacher_forcing ? &recon_teacher : nullptr);
    cache.recon.targets = std::move(recon_targets);
    cache.recon.teacher_embed = std::move(recon_teacher_idx);

    // prediction branch
    std::vector<Tensor2> pred_teacher;
    std::vector<std::size_t> pred_teacher_idx(cfg.t_out, 0);
    if (cfg.teacher_forcing) {
        for (std::size_t s = 0; s + 1 < cfg.t_out; ++s) {
            const std::size_t idx = record_embed(ep.targets[s]);
            pred_teacher_idx[s + 1] = idx;
            pred_teacher.push_back(cache.embed_e[idx]);
        }
    }
    cache.pred = run_decoder(p, p.pred_decoder, cache.ctx, &cache.embed_e[cfg.t_in - 1],
                             cfg.conditioned ? &ep.cond : nullptr, cfg.t_out,
                             cfg.teacher_forcing ? &pred_teacher : nullptr);
    cache.pred.targets = ep.targets;
    cache.pred.teacher_embed = std::move(pred_teacher_idx);

    cache.recon_mse = branch_mse(cache.recon);
    cache.pred_mse = branch_mse(cache.pred);
    cache.loss = cache.recon_mse + cache.pred_mse;
    return cache;
}

namespace {

struct DenseGradRefs {
    Tensor2& w;
    Tensor2& b;
};

// Backward through one decoder branch. Returns dL/d(initial state); feeds
// d(first input feature) into *d_first_feat when the first input was an
// embedding.
std::pair<Tensor2, Tensor2> branch_backward(const ModelParams& p, const LstmParams& dec,
                                            const BranchTrace& tr, bool conditioned,
                                            bool teacher_forcing, bool freeze_dense,
                                            LstmGrads& dec_grads, DenseGradRefs head_g,
                                            DenseGradRefs dec_dense_g,
                                            std::vector<Tensor2>& d_embed_e,
                                            Tensor2* d_first_feat) {
    const ModelConfig& cfg = p.config;
    const std::size_t steps = tr.tapes.size();
    const double grad_scale =
        2.0 / (static_cast<double>(steps) * static_cast<double>(cfg.pixel_count()));

    Tensor2 dh_rec(cfg.hidden_dim, 1);
    Tensor2 dc_carry(cfg.hidden_dim, 1);
    Tensor2 dfeat_carry; // closed-loop gradient from step s+1's input
    for (std::size_t s = steps; s-- > 0;) {
        // pixel loss path
        const Tensor2& y = tr.outputs[s];
        Tensor2 dz(y.rows, 1);
        for (std::size_t k = 0; k < y.size(); ++k) {
            const double dy = grad_scale * (y[k] - tr.targets[s][k]);
            dz[k] = dy * y[k] * (1.0 - y[k]);
        }
        if (!freeze_dense) {
            add_outer(dec_dense_g.w, dz, tr.feats[s]);
            add_in_place(dec_dense_g.b, dz);
        }
        Tensor2 df = matmul_tn(p.dec_dense.w, dz);
        if (s + 1 < steps && !teacher_forcing) add_in_place(df, dfeat_carry);

        add_outer(head_g.w, df, tr.hs[s]);
        add_in_place(head_g.b, df);
        Tensor2 dh = matmul_tn(p.head.w, df);
        add_in_place(dh, dh_rec);

        StepBackResult step = lstm_step_backward(dec, tr.tapes[s], dh, dc_carry, dec_grads);
        dh_rec = std::move(step.dh_prev);
        dc_carry = std::move(step.dc_prev);

        Tensor2 dfeat = conditioned ? head_rows(step.dx, cfg.feature_dim) : std::move(step.dx);
        if (s == 0) {
            if (d_first_feat) add_in_place(*d_first_feat, dfeat);
        } else if (teacher_forcing) {
            add_in_place(d_embed_e[tr.teacher_embed[s]], dfeat);
        } else {
            dfeat_carry = std::move(dfeat);
        }
    }
    return {std::move(dh_rec), std::move(dc_carry)};
}

} // namespace

ModelGrads backward(const ModelParams& p, const ForwardCache& cache, bool freeze_dense) {
    const ModelConfig& cfg = p.config;
    ModelGrads g = ModelParams::zeros(cfg);

    std::vector<Tensor2> d_embed_e(cache.embed_e.size(), Tensor2(cfg.feature_dim, 1));

    DenseGradRefs head_g{g.head.w, g.head.b};
    DenseGradRefs dec_dense_g{g.dec_dense.w, g.dec_dense.b};

    auto [dh_pred, dc_pred] = branch_backward(
        p, p.pred_decoder, cache.pred, cfg.conditioned, cfg.teacher_forcing, freeze_dense,
        g.pred_decoder, head_g, dec_dense_g, d_embed_e, &d_embed_e[cfg.t_in - 1]);
    auto [dh_recon, dc_recon] =
        branch_backward(p, p.recon_decoder, cache.recon, false, cfg.teacher_forcing, freeze_dense,
                        g.recon_decoder, head_g, dec_dense_g, d_embed_e, nullptr);

    // both decoders start from the encoder's final state
    std::vector<Tensor2> enc_dh(cfg.t_in, Tensor2(cfg.hidden_dim, 1));
    enc_dh.back() = add(dh_pred, dh_recon);
    Tensor2 enc_dc = add(dc_pred, dc_recon);
    LstmBackResult enc_back = lstm_backward(p.encoder, cache.enc_tapes, enc_dh, enc_dc);
    g.encoder = std::move(enc_back.grads);
    for (std::size_t k = 0; k < cfg.t_in; ++k) add_in_place(d_embed_e[k], enc_back.dx[k]);

    // embedding layer
    if (!freeze_dense) {
        for (std::size_t r = 0; r < cache.embed_e.size(); ++r) {
            const Tensor2& e = cache.embed_e[r];
            Tensor2 dz(e.rows, 1);
            for (std::size_t k = 0; k < e.size(); ++k)
                dz[k] = d_embed_e[r][k] * (1.0 - e[k] * e[k]);
            add_outer(g.enc_dense.w, dz, cache.embed_x[r]);
            add_in_place(g.enc_dense.b, dz);
        }
    }
    return g;
}

void save_checkpoint(const std::string& path, const ModelParams& params) {
    params.validate_shapes();
    atomic_write_file(path, [&params](std::ostream& os) {
        write_bytes(os, "FCM1", 4);
        const ModelConfig& c = params.config;
        for (std::size_t v : {c.frame_rows, c.frame_cols, c.feature_dim, c.hidden_dim, c.t_in,
                              c.t_out, c.action_dim, c.state_dim})
            write_u32le(os, static_cast<std::uint32_t>(v));
        write_u32le(os, c.conditioned ? 1 : 0);
        write_u32le(os, c.recon_reversed ? 1 : 0);
        write_u32le(os, c.teacher_forcing ? 1 : 0);
        params.for_each_param(
            [&os](const std::string&, const Tensor2& t) { write_tensor(os, t); });
    });
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open checkpoint: " + path);
    char magic[4];
    read_bytes(is, magic, 4);
    if (std::string(magic, 4) != "FCM1")
        throw format_error("bad checkpoint magic in " + path);
    ModelConfig c;
    c.frame_rows = read_u32le(is);
    c.frame_cols = read_u32le(is);
    c.feature_dim = read_u32le(is);
    c.hidden_dim = read_u32le(is);
    c.t_in = read_u32le(is);
    c.t_out = read_u32le(is);
    c.action_dim = read_u32le(is);
    c.state_dim = read_u32le(is);
    c.conditioned = read_u32le(is) != 0;
    c.recon_reversed = read_u32le(is) != 0;
    c.teacher_forcing = read_u32le(is) != 0;

    ModelParams p = ModelParams::zeros(c);
    p.for_each_param([&is](const std::string& name, Tensor2& t) {
        Tensor2 loaded = read_tensor(is);
        if (!loaded.same_shape(t))
            throw shape_error("checkpoint tensor " + name + " is " + std::to_string(loaded.rows) +
                              "x" + std::to_string(loaded.cols) + ", expected " +
                              std::to_string(t.rows) + "x" + std::to_string(t.cols));
        t = std::move(loaded);
    });
    char extra;
    if (is.read(&extra, 1) && is.gcount() == 1)
        throw format_error("trailing bytes in checkpoint " + path);
    return p;
}

} // namespace fc
