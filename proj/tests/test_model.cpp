#include <cmath>
#include <cstdio>
#include <unistd.h>

#include "doctest.h"
#include "framecast/model.hpp"
#include "scalar_ref.hpp"

using namespace fc;

namespace {

ModelConfig tiny_config(bool conditioned) {
    ModelConfig c;
    c.frame_rows = 4;
    c.frame_cols = 4;
    c.feature_dim = 6;
    c.hidden_dim = 5;
    c.t_in = 2;
    c.t_out = 2;
    c.action_dim = 2;
    c.state_dim = 4;
    c.conditioned = conditioned;
    return c;
}

PreparedEpisode random_episode(const ModelConfig& c, std::uint64_t seed) {
    Rng rng(seed);
    PreparedEpisode ep;
    for (std::size_t t = 0; t < c.t_in; ++t)
        ep.inputs.push_back(rand_uniform(rng, c.pixel_count(), 1, 0.0, 1.0));
    for (std::size_t t = 0; t < c.t_out; ++t)
        ep.targets.push_back(rand_uniform(rng, c.pixel_count(), 1, 0.0, 1.0));
    for (std::size_t t = 0; t < c.t_out; ++t) {
        ep.cond.actions.push_back(rand_uniform(rng, c.action_dim, 1, -1.0, 1.0));
        ep.cond.states.push_back(rand_uniform(rng, c.state_dim, 1, -1.0, 1.0));
    }
    return ep;
}

scalar_ref::mat to_mat(const Tensor2& t) {
    scalar_ref::mat m(t.rows, scalar_ref::vec(t.cols));
    for (std::size_t i = 0; i < t.rows; ++i)
        for (std::size_t j = 0; j < t.cols; ++j) m[i][j] = t(i, j);
    return m;
}

scalar_ref::vec to_vec(const Tensor2& t) {
    scalar_ref::vec v(t.rows);
    for (std::size_t i = 0; i < t.rows; ++i) v[i] = t[i];
    return v;
}

scalar_ref::LstmWeights to_scalar_lstm(const LstmParams& p) {
    scalar_ref::LstmWeights w;
    w.w_xi = to_mat(p.w_xi); w.w_xf = to_mat(p.w_xf);
    w.w_xc = to_mat(p.w_xc); w.w_xo = to_mat(p.w_xo);
    w.w_hi = to_mat(p.w_hi); w.w_hf = to_mat(p.w_hf);
    w.w_hc = to_mat(p.w_hc); w.w_ho = to_mat(p.w_ho);
    w.w_ci = to_vec(p.w_ci); w.w_cf = to_vec(p.w_cf); w.w_co = to_vec(p.w_co);
    w.b_i = to_vec(p.b_i); w.b_f = to_vec(p.b_f); w.b_c = to_vec(p.b_c); w.b_o = to_vec(p.b_o);
    return w;
}

// Whole-architecture forward written independently with plain loops.
double scalar_model_loss(const ModelParams& p, const PreparedEpisode& ep) {
    const ModelConfig& c = p.config;
    const auto enc_w = to_mat(p.enc_dense.w);
    const auto enc_b = to_vec(p.enc_dense.b);
    const auto dec_w = to_mat(p.dec_dense.w);
    const auto dec_b = to_vec(p.dec_dense.b);
    const auto head_w = to_mat(p.head.w);
    const auto head_b = to_vec(p.head.b);
    const auto enc_lstm = to_scalar_lstm(p.encoder);
    const auto rec_lstm = to_scalar_lstm(p.recon_decoder);
    const auto prd_lstm = to_scalar_lstm(p.pred_decoder);

    std::vector<scalar_ref::vec> embeds;
    for (const Tensor2& x : ep.inputs)
        embeds.push_back(scalar_ref::dense(enc_w, enc_b, to_vec(x), 1));

    scalar_ref::vec cs(c.hidden_dim, 0.0), hs(c.hidden_dim, 0.0);
    for (const auto& e : embeds) {
        auto out = scalar_ref::lstm_step(enc_lstm, e, cs, hs);
        cs = out.c;
        hs = out.h;
    }

    auto run_branch = [&](const scalar_ref::LstmWeights& w, scalar_ref::vec feat_in,
                          bool with_cond, std::size_t steps) {
        std::vector<scalar_ref::vec> outs;
        scalar_ref::vec bc = cs, bh = hs;
        for (std::size_t s = 0; s < steps; ++s) {
            scalar_ref::vec x = feat_in;
            if (with_cond) {
                for (double a : to_vec(ep.cond.actions[s])) x.push_back(a);
                for (double st : to_vec(ep.cond.states[s])) x.push_back(st);
            }
            auto out = scalar_ref::lstm_step(w, x, bc, bh);
            bc = out.c;
            bh = out.h;
            scalar_ref::vec f = scalar_ref::dense(head_w, head_b, bh, 0);
            outs.push_back(scalar_ref::dense(dec_w, dec_b, f, 2));
            feat_in = f;
        }
        return outs;
    };

    const auto recon = run_branch(rec_lstm, scalar_ref::vec(c.feature_dim, 0.0), false, c.t_in);
    const auto pred = run_branch(prd_lstm, embeds.back(), c.conditioned, c.t_out);

    std::vector<scalar_ref::vec> recon_targets;
    for (std::size_t s = 0; s < c.t_in; ++s)
        recon_targets.push_back(to_vec(ep.inputs[c.recon_reversed ? c.t_in - 1 - s : s]));
    std::vector<scalar_ref::vec> pred_targets;
    for (const Tensor2& t : ep.targets) pred_targets.push_back(to_vec(t));

    return scalar_ref::mse(recon, recon_targets) + scalar_ref::mse(pred, pred_targets);
}

} // namespace

TEST_CASE("embed_frames: zero weights give zero features, default width is 128") {
    ModelConfig dflt;
    CHECK(dflt.feature_dim == 128);

    ModelConfig c = tiny_config(false);
    ModelParams p = ModelParams::zeros(c);
    std::vector<Tensor2> frames{Tensor2(16, 1)};
    frames[0].fill(0.7);
    auto feats = embed_frames(p, frames);
    REQUIRE(feats.size() == 1);
    CHECK(feats[0].rows == c.feature_dim);
    for (double v : feats[0].data) CHECK(v == 0.0);
}

TEST_CASE("embed_frames matches a scalar loop oracle on a seeded 4x4 frame") {
    ModelConfig c = tiny_config(false);
    Rng rng(40);
    ModelParams p = ModelParams::init(c, rng, 0.3);
    Rng frng(41);
    Tensor2 frame = rand_uniform(frng, 16, 1, 0.0, 1.0);
    auto feats = embed_frames(p, {frame});
    scalar_ref::vec ref =
        scalar_ref::dense(to_mat(p.enc_dense.w), to_vec(p.enc_dense.b), to_vec(frame), 1);
    for (std::size_t k = 0; k < ref.size(); ++k) CHECK(std::abs(feats[0][k] - ref[k]) < 1e-12);
}

TEST_CASE("embed_frames rejects wrong frame shapes") {
    ModelParams p = ModelParams::zeros(tiny_config(false));
    CHECK_THROWS_AS(embed_frames(p, {Tensor2(9, 1)}), shape_error);
}

TEST_CASE("encode consumes exactly t_in vectors and folds the encoder lstm") {
    ModelConfig c = tiny_config(false);
    Rng rng(50);
    ModelParams p = ModelParams::init(c, rng, 0.3);
    Rng vrng(51);
    std::vector<Tensor2> feats;
    for (std::size_t t = 0; t < c.t_in; ++t)
        feats.push_back(rand_uniform(vrng, c.feature_dim, 1, -1.0, 1.0));

    LstmState ctx = encode(p, feats);
    auto [states, tapes] = lstm_forward(p.encoder, feats, LstmState(c.hidden_dim));
    for (std::size_t k = 0; k < c.hidden_dim; ++k) {
        CHECK(ctx.h[k] == states.back().h[k]);
        CHECK(ctx.c[k] == states.back().c[k]);
    }

    feats.push_back(feats.front());
    CHECK_THROWS_AS(encode(p, feats), shape_error);

    ModelParams zero = ModelParams::zeros(c);
    std::vector<Tensor2> zfeats(c.t_in, Tensor2(c.feature_dim, 1));
    LstmState zctx = encode(zero, zfeats);
    for (std::size_t k = 0; k < c.hidden_dim; ++k) {
        CHECK(zctx.h[k] == 0.0);
        CHECK(zctx.c[k] == 0.0);
    }
}

TEST_CASE("decoders emit the contracted number of frames with pixels in (0,1)") {
    ModelConfig c = tiny_config(true);
    Rng rng(60);
    ModelParams p = ModelParams::init(c, rng, 0.3);
    PreparedEpisode ep = random_episode(c, 61);

    auto feats = embed_frames(p, ep.inputs);
    LstmState ctx = encode(p, feats);

    auto recon = decode_reconstruction(p, ctx);
    REQUIRE(recon.size() == c.t_in);
    for (const Tensor2& f : recon) {
        CHECK(f.rows == c.frame_rows);
        CHECK(f.cols == c.frame_cols);
        for (double v : f.data) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
    }

    auto pred = decode_prediction(p, ctx, feats.back(), &ep.cond);
    REQUIRE(pred.size() == c.t_out);
    for (const Tensor2& f : pred)
        for (double v : f.data) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
}

TEST_CASE("zero parameters give all-0.5 pixels") {
    ModelConfig c = tiny_config(false);
    ModelParams p = ModelParams::zeros(c);
    auto recon = decode_reconstruction(p, LstmState(c.hidden_dim));
    for (const Tensor2& f : recon)
        for (double v : f.data) CHECK(v == 0.5);
}

TEST_CASE("conditioning contract: presence must match the config") {
    ModelConfig uncond = tiny_config(false);
    Rng rng(70);
    ModelParams pu = ModelParams::init(uncond, rng, 0.3);
    PreparedEpisode ep = random_episode(uncond, 71);
    auto feats = embed_frames(pu, ep.inputs);
    LstmState ctx = encode(pu, feats);
    CHECK_THROWS_AS(decode_prediction(pu, ctx, feats.back(), &ep.cond), shape_error);
    CHECK_NOTHROW(decode_prediction(pu, ctx, feats.back(), nullptr));

    ModelConfig cond = tiny_config(true);
    Rng rng2(72);
    ModelParams pc = ModelParams::init(cond, rng2, 0.3);
    auto cfeats = embed_frames(pc, ep.inputs);
    LstmState cctx = encode(pc, cfeats);
    CHECK_THROWS_AS(decode_prediction(pc, cctx, cfeats.back(), nullptr), shape_error);
    Conditioning short_cond = ep.cond;
    short_cond.actions.pop_back();
    CHECK_THROWS_AS(decode_prediction(pc, cctx, cfeats.back(), &short_cond), shape_error);
}

TEST_CASE("changing the first action changes the first predicted frame") {
    ModelConfig c = tiny_config(true);
    Rng rng(80);
    ModelParams p = ModelParams::init(c, rng, 0.3);
    PreparedEpisode ep = random_episode(c, 81);
    auto feats = embed_frames(p, ep.inputs);
    LstmState ctx = encode(p, feats);

    auto base = decode_prediction(p, ctx, feats.back(), &ep.cond);
    Conditioning changed = ep.cond;
    changed.actions[0][0] += 0.5;
    auto moved = decode_prediction(p, ctx, feats.back(), &changed);
    double delta = 0.0;
    for (std::size_t k = 0; k < base[0].size(); ++k)
        delta += std::abs(base[0].data[k] - moved[0].data[k]);
    CHECK(delta > 0.0);
}

TEST_CASE("forward_loss constant case: all-0.5 outputs vs all-1 targets give 0.25 per branch") {
    ModelConfig c = tiny_config(false);
    ModelParams p = ModelParams::zeros(c);
    PreparedEpisode ep;
    for (std::size_t t = 0; t < c.t_in; ++t) {
        Tensor2 f(16, 1);
        f.fill(1.0);
        ep.inputs.push_back(f);
    }
    for (std::size_t t = 0; t < c.t_out; ++t) {
        Tensor2 f(16, 1);
        f.fill(1.0);
        ep.targets.push_back(f);
    }
    ForwardCache cache = forward_loss(p, ep);
    CHECK(cache.recon_mse == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(cache.pred_mse == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(cache.loss == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("forward_loss rejects malformed episodes") {
    ModelConfig c = tiny_config(false);
    ModelParams p = ModelParams::zeros(c);
    PreparedEpisode ep = random_episode(c, 92);
    ep.inputs.pop_back();
    CHECK_THROWS_AS(forward_loss(p, ep), shape_error);
}

TEST_CASE("forward_loss matches the scalar whole-model oracle to 1e-12") {
    for (bool conditioned : {false, true}) {
        for (bool reversed : {true, false}) {
            ModelConfig c = tiny_config(conditioned);
            c.recon_reversed = reversed;
            Rng rng(100 + conditioned * 10 + reversed);
            ModelParams p = ModelParams::init(c, rng, 0.3);
            PreparedEpisode ep = random_episode(c, 200 + conditioned * 10 + reversed);
            ForwardCache cache = forward_loss(p, ep);
            const double ref = scalar_model_loss(p, ep);
            CHECK(std::abs(cache.loss - ref) < 1e-12);
        }
    }
}

TEST_CASE("recon order flag changes the loss on asymmetric inputs") {
    ModelConfig c = tiny_config(false);
    Rng rng(110);
    ModelParams p = ModelParams::init(c, rng, 0.3);
    PreparedEpisode ep = random_episode(c, 111);
    const double loss_reversed = forward_loss(p, ep).loss;
    ModelParams p2 = p;
    p2.config.recon_reversed = false;
    const double loss_forward = forward_loss(p2, ep).loss;
    CHECK(loss_forward != loss_reversed);
    CHECK(std::abs(loss_forward - scalar_model_loss(p2, ep)) < 1e-12);
}

TEST_CASE("zero loss gives exactly zero gradients") {
    ModelConfig c = tiny_config(false);
    ModelParams p = ModelParams::zeros(c);
    PreparedEpisode ep;
    for (std::size_t t = 0; t < c.t_in; ++t) {
        Tensor2 f(16, 1);
        f.fill(0.5);
        ep.inputs.push_back(f);
    }
    for (std::size_t t = 0; t < c.t_out; ++t) {
        Tensor2 f(16, 1);
        f.fill(0.5);
        ep.targets.push_back(f);
    }
    ForwardCache cache = forward_loss(p, ep);
    CHECK(cache.loss == 0.0);
    ModelGrads g = backward(p, cache, false);
    g.for_each_param([](const std::string&, const Tensor2& t) {
        for (double v : t.data) CHECK(v == 0.0);
    });
}

namespace {

double fd_max_rel_err(ModelParams& p, const PreparedEpisode& ep, const ModelGrads& analytic) {
    const double eps = 1e-5;
    double max_err = 0.0;
    std::vector<Tensor2*> ps;
    p.for_each_param([&ps](const std::string&, Tensor2& t) { ps.push_back(&t); });
    std::vector<const Tensor2*> gs;
    analytic.for_each_param([&gs](const std::string&, const Tensor2& t) { gs.push_back(&t); });
    for (std::size_t i = 0; i < ps.size(); ++i) {
        Tensor2& t = *ps[i];
        for (std::size_t k = 0; k < t.size(); ++k) {
            const double saved = t.data[k];
            t.data[k] = saved + eps;
            const double lp = forward_loss(p, ep).loss;
            t.data[k] = saved - eps;
            const double lm = forward_loss(p, ep).loss;
            t.data[k] = saved;
            const double numeric = (lp - lm) / (2.0 * eps);
            const double a = gs[i]->data[k];
            max_err = std::max(max_err, std::abs(numeric - a) /
                                             std::max(std::abs(numeric) + std::abs(a), 1e-6));
        }
    }
    return max_err;
}

} // namespace

TEST_CASE("full-model gradients match finite differences on the tiny config") {
    for (bool conditioned : {true, false}) {
        ModelConfig c = tiny_config(conditioned);
        Rng rng(120 + conditioned);
        ModelParams p = ModelParams::init(c, rng, 0.3);
        PreparedEpisode ep = random_episode(c, 121 + conditioned);
        ForwardCache cache = forward_loss(p, ep);
        ModelGrads analytic = backward(p, cache, false);
        CHECK(fd_max_rel_err(p, ep, analytic) < 1e-4);
    }
}

TEST_CASE("teacher forcing still matches finite differences") {
    ModelConfig c = tiny_config(true);
    c.teacher_forcing = true;
    Rng rng(130);
    ModelParams p = ModelParams::init(c, rng, 0.3);
    PreparedEpisode ep = random_episode(c, 131);
    ForwardCache cache = forward_loss(p, ep);
    ModelGrads analytic = backward(p, cache, false);
    CHECK(fd_max_rel_err(p, ep, analytic) < 1e-4);
}

TEST_CASE("freezing dense layers zeroes their grads and leaves lstm grads untouched") {
    ModelConfig c = tiny_config(true);
    Rng rng(140);
    ModelParams p = ModelParams::init(c, rng, 0.3);
    PreparedEpisode ep = random_episode(c, 141);

    ForwardCache cache = forward_loss(p, ep);
    ModelGrads unfrozen = backward(p, cache, false);
    ModelGrads frozen = backward(p, cache, true);

    std::vector<std::pair<std::string, const Tensor2*>> gu, gf;
    unfrozen.for_each_param(
        [&gu](const std::string& n, const Tensor2& t) { gu.emplace_back(n, &t); });
    frozen.for_each_param(
        [&gf](const std::string& n, const Tensor2& t) { gf.emplace_back(n, &t); });
    bool some_dense_nonzero = false;
    for (std::size_t i = 0; i < gu.size(); ++i) {
        if (ModelParams::is_dense_param(gu[i].first)) {
            for (double v : gf[i].second->data) CHECK(v == 0.0);
            for (double v : gu[i].second->data) some_dense_nonzero |= v != 0.0;
        } else {
            for (std::size_t k = 0; k < gu[i].second->size(); ++k)
                CHECK(gu[i].second->data[k] == gf[i].second->data[k]);
        }
    }
    CHECK(some_dense_nonzero);
}

TEST_CASE("pred decoder input width follows the conditioned flag") {
    ModelConfig c = tiny_config(true);
    Rng rng(150);
    ModelParams p = ModelParams::init(c, rng);
    CHECK(p.pred_decoder.input_dim() == c.feature_dim + c.action_dim + c.state_dim);
    ModelConfig u = tiny_config(false);
    ModelParams pu = ModelParams::init(u, rng);
    CHECK(pu.pred_decoder.input_dim() == u.feature_dim);
    CHECK_NOTHROW(p.validate_shapes());
    p.pred_decoder = LstmParams(c.feature_dim, c.hidden_dim); // wrong width
    CHECK_THROWS_AS(p.validate_shapes(), shape_error);
}

TEST_CASE("checkpoint round-trip is bit-exact and byte-identical") {
    ModelConfig c = tiny_config(true);
    c.teacher_forcing = true;
    Rng rng(160);
    ModelParams p = ModelParams::init(c, rng, 0.3);

    const std::string path = "test_model_ckpt.fcm";
    save_checkpoint(path, p);
    ModelParams loaded = load_checkpoint(path);
    CHECK(loaded.config == p.config);

    std::vector<const Tensor2*> a, b;
    p.for_each_param([&a](const std::string&, const Tensor2& t) { a.push_back(&t); });
    loaded.for_each_param([&b](const std::string&, const Tensor2& t) { b.push_back(&t); });
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t k = 0; k < a[i]->size(); ++k) CHECK(a[i]->data[k] == b[i]->data[k]);

    const std::string path2 = "test_model_ckpt2.fcm";
    save_checkpoint(path2, loaded);
    FILE* f1 = std::fopen(path.c_str(), "rb");
    FILE* f2 = std::fopen(path2.c_str(), "rb");
    REQUIRE(f1);
    REQUIRE(f2);
    int ch1, ch2;
    do {
        ch1 = std::fgetc(f1);
        ch2 = std::fgetc(f2);
        CHECK(ch1 == ch2);
    } while (ch1 != EOF && ch2 != EOF);
    std::fclose(f1);
    std::fclose(f2);
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("corrupt checkpoints are rejected") {
    ModelConfig c = tiny_config(false);
    Rng rng(170);
    ModelParams p = ModelParams::init(c, rng);
    const std::string path = "test_model_bad.fcm";
    save_checkpoint(path, p);

    SUBCASE("bad magic") {
        FILE* f = std::fopen(path.c_str(), "r+b");
        REQUIRE(f);
        std::fputc('X', f);
        std::fclose(f);
        CHECK_THROWS_AS(load_checkpoint(path), format_error);
    }
    SUBCASE("truncation") {
        FILE* f = std::fopen(path.c_str(), "rb");
        REQUIRE(f);
        std::fseek(f, 0, SEEK_END);
        const long size = std::ftell(f);
        std::fclose(f);
        REQUIRE(truncate(path.c_str(), size / 2) == 0);
        CHECK_THROWS_AS(load_checkpoint(path), format_error);
    }
    std::remove(path.c_str());
}
