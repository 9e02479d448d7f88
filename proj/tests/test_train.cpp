#include <cmath>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "framecast/preprocess.hpp"
#include "framecast/sim.hpp"
#include "framecast/train.hpp"

using namespace fc;

namespace {

ModelConfig tiny_config(bool conditioned = false) {
    ModelConfig c;
    c.frame_rows = 4;
    c.frame_cols = 4;
    c.feature_dim = 6;
    c.hidden_dim = 5;
    c.t_in = 2;
    c.t_out = 2;
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

std::vector<const Tensor2*> flat(const ModelParams& p) {
    std::vector<const Tensor2*> out;
    p.for_each_param([&out](const std::string&, const Tensor2& t) { out.push_back(&t); });
    return out;
}

bool bit_identical(const ModelParams& a, const ModelParams& b) {
    auto fa = flat(a), fb = flat(b);
    for (std::size_t i = 0; i < fa.size(); ++i)
        for (std::size_t k = 0; k < fa[i]->size(); ++k)
            if (fa[i]->data[k] != fb[i]->data[k]) return false;
    return true;
}

} // namespace

TEST_CASE("learning_rate zero is a strict parameter no-op") {
    ModelConfig c = tiny_config();
    Rng rng(1);
    ModelParams p = ModelParams::init(c, rng, 0.2);
    ModelParams before = p;
    std::vector<PreparedEpisode> data{random_episode(c, 2)};
    OptimConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.epochs = 1;
    cfg.batch_size = 1;
    cfg.freeze_dense = false;
    train(p, data, cfg);
    CHECK(bit_identical(p, before));
}

TEST_CASE("clipping caps the global gradient norm") {
    ModelConfig c = tiny_config();
    ModelGrads g = ModelParams::zeros(c);
    Rng rng(7);
    g.for_each_param([&rng](const std::string&, Tensor2& t) {
        t = rand_uniform(rng, t.rows, t.cols, -3.0, 3.0);
    });
    Optimizer::clip_global_norm(g, 5.0);
    double sq = 0.0;
    g.for_each_param([&sq](const std::string&, const Tensor2& t) {
        for (double v : t.data) sq += v * v;
    });
    CHECK(std::sqrt(sq) <= 5.0 + 1e-12);

    // norms under the threshold are untouched
    ModelGrads small = ModelParams::zeros(c);
    small.head.b[0] = 0.5;
    Optimizer::clip_global_norm(small, 5.0);
    CHECK(small.head.b[0] == 0.5);
}

TEST_CASE("adam and sgd keep parameters finite for 1000 steps") {
    for (OptimAlgo algo : {OptimAlgo::adam, OptimAlgo::sgd}) {
        ModelConfig c = tiny_config();
        Rng rng(11);
        ModelParams p = ModelParams::init(c, rng, 0.2);
        OptimConfig cfg;
        cfg.algorithm = algo;
        cfg.learning_rate = algo == OptimAlgo::adam ? 1e-3 : 1e-2;
        Optimizer opt(cfg);
        Rng grng(12);
        ModelGrads g = ModelParams::zeros(c);
        for (int step = 0; step < 1000; ++step) {
            g.for_each_param([&grng](const std::string&, Tensor2& t) {
                t = rand_uniform(grng, t.rows, t.cols, -1.0, 1.0);
            });
            opt.step(p, g);
        }
        bool finite = true;
        p.for_each_param([&finite](const std::string&, const Tensor2& t) {
            finite &= t.is_finite();
        });
        CHECK(finite);
    }
}

TEST_CASE("pretrain drives a constant-image autoencoder below 1e-4") {
    Rng rng(21);
    Tensor2 img = rand_uniform(rng, 16, 1, 0.2, 0.8);
    std::vector<Tensor2> frames(8, img);
    OptimConfig cfg;
    cfg.epochs = 200;
    cfg.batch_size = 8;
    cfg.learning_rate = 3e-3;
    cfg.seed = 5;
    PretrainResult out = pretrain_dense(frames, 6, cfg);
    CHECK(out.epoch_loss.back() < 1e-4);
    CHECK(out.epoch_loss.size() == 200);
}

TEST_CASE("pretrain is reproducible under a seed") {
    Rng rng(22);
    std::vector<Tensor2> frames;
    for (int i = 0; i < 6; ++i) frames.push_back(rand_uniform(rng, 16, 1, 0.0, 1.0));
    OptimConfig cfg;
    cfg.epochs = 20;
    cfg.batch_size = 4;
    cfg.seed = 9;
    PretrainResult a = pretrain_dense(frames, 5, cfg);
    PretrainResult b = pretrain_dense(frames, 5, cfg);
    CHECK(a.epoch_loss == b.epoch_loss);
    for (std::size_t k = 0; k < a.enc.w.size(); ++k) CHECK(a.enc.w[k] == b.enc.w[k]);
    CHECK_THROWS_AS(pretrain_dense({}, 5, cfg), config_error);
}

TEST_CASE("training loss decreases and runs are bit-identical under a seed") {
    ModelConfig c = tiny_config();
    std::vector<PreparedEpisode> data;
    for (int i = 0; i < 8; ++i) data.push_back(random_episode(c, 100 + i));

    OptimConfig cfg;
    cfg.epochs = 30;
    cfg.batch_size = 4;
    cfg.learning_rate = 3e-3;
    cfg.freeze_dense = false;
    cfg.seed = 31;

    Rng r1(41);
    ModelParams p1 = ModelParams::init(c, r1, 0.2);
    Rng r2(41);
    ModelParams p2 = ModelParams::init(c, r2, 0.2);

    TrainReport rep1 = train(p1, data, cfg);
    TrainReport rep2 = train(p2, data, cfg);
    CHECK(rep1.epochs.front().train_loss > rep1.epochs.back().train_loss);
    CHECK(bit_identical(p1, p2));
    for (std::size_t e = 0; e < rep1.epochs.size(); ++e) {
        CHECK(rep1.epochs[e].train_loss == rep2.epochs[e].train_loss);
        CHECK(rep1.epochs[e].val_pred == rep2.epochs[e].val_pred);
    }
    CHECK(rep1.horizon_mse.size() == c.t_out);
}

TEST_CASE("worker count does not change the result") {
    ModelConfig c = tiny_config();
    std::vector<PreparedEpisode> data;
    for (int i = 0; i < 8; ++i) data.push_back(random_episode(c, 300 + i));

    OptimConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.learning_rate = 1e-3;
    cfg.freeze_dense = false;
    cfg.seed = 7;

    Rng r1(43);
    ModelParams p1 = ModelParams::init(c, r1, 0.2);
    ModelParams p2 = p1;
    cfg.workers = 1;
    train(p1, data, cfg);
    cfg.workers = 2;
    train(p2, data, cfg);
    CHECK(bit_identical(p1, p2));
}

TEST_CASE("non-finite loss aborts naming the first offending batch") {
    ModelConfig c = tiny_config();
    Rng rng(51);
    ModelParams p = ModelParams::init(c, rng, 0.2);
    std::vector<PreparedEpisode> data{random_episode(c, 52)};
    data[0].targets[0][3] = std::nan("");
    OptimConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 1;
    try {
        train(p, data, cfg);
        FAIL("expected abort");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("epoch 0") != std::string::npos);
        CHECK(msg.find("batch 0") != std::string::npos);
    }
}

TEST_CASE("grad_check passes on a tiny config and names corrupted entries") {
    ModelConfig c = tiny_config(true);
    Rng rng(61);
    ModelParams p = ModelParams::init(c, rng, 0.3);
    PreparedEpisode ep = random_episode(c, 62);

    GradCheckReport ok = grad_check(p, ep, 1e-5, 1e-4, false);
    CHECK(ok.pass);
    CHECK(ok.checked == p.param_count());

    // freezing skips the dense blocks
    GradCheckReport frozen = grad_check(p, ep, 1e-5, 1e-4, true);
    CHECK(frozen.pass);
    CHECK(frozen.checked < ok.checked);

    // fault injection: double one sizeable gradient entry
    ForwardCache cache = forward_loss(p, ep);
    ModelGrads g = backward(p, cache, false);
    std::size_t pick_k = 0;
    double best = 0.0;
    for (std::size_t k = 0; k < g.head.w.size(); ++k)
        if (std::abs(g.head.w[k]) > best) {
            best = std::abs(g.head.w[k]);
            pick_k = k;
        }
    REQUIRE(best > 1e-6);
    g.head.w[pick_k] *= 2.0;
    GradCheckReport bad = grad_check_against(p, ep, 1e-5, 1e-4, false, g);
    CHECK(!bad.pass);
    CHECK(bad.worst_param == "head.w");
    CHECK(bad.worst_index == pick_k);
}

TEST_CASE("grad_check handles an identically zero loss") {
    ModelConfig c = tiny_config();
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
    GradCheckReport rep = grad_check(p, ep, 1e-5, 1e-4, false);
    CHECK(rep.pass);
    CHECK(rep.max_rel_err < 1e-8);
}

TEST_CASE("copy baseline equals a last-frame predictor and orders with motion") {
    // static scene: copy baseline is exactly zero
    ModelConfig c = tiny_config();
    PreparedEpisode still;
    Rng rng(71);
    Tensor2 img = rand_uniform(rng, 16, 1, 0.0, 1.0);
    for (std::size_t t = 0; t < c.t_in; ++t) still.inputs.push_back(img);
    for (std::size_t t = 0; t < c.t_out; ++t) still.targets.push_back(img);
    std::vector<double> copy_mse, lin_mse;
    baseline_mse({still}, copy_mse, lin_mse);
    for (double v : copy_mse) CHECK(v == 0.0);
    for (double v : lin_mse) CHECK(v == 0.0);

    // moving disk: copy error strictly grows with horizon
    WorldSpec spec;
    spec.rows = 32;
    spec.cols = 32;
    spec.radius = 0.12;
    std::vector<Vec2> line;
    for (int k = 0; k < 10; ++k) line.push_back({0.15 + 0.06 * k, 0.5});
    Episode ep;
    for (int k = 0; k < 5; ++k) ep.input_frames.push_back(render(line[k], spec));
    for (int k = 5; k < 10; ++k) ep.target_frames.push_back(render(line[k], spec));
    for (int k = 0; k < 5; ++k) {
        ep.actions.push_back({0.0, 0.0});
        ep.states.push_back({0.5, 0.5, 0.0, 0.0});
    }
    PrepConfig prep;
    PreparedEpisode moving = prepare_episode(ep, prep);
    baseline_mse({moving}, copy_mse, lin_mse);
    for (std::size_t h = 1; h < copy_mse.size(); ++h) CHECK(copy_mse[h] > copy_mse[h - 1]);

    // hand-computed identity: baseline == mse(last input, target)
    double manual = 0.0;
    for (std::size_t k = 0; k < moving.inputs.back().size(); ++k) {
        const double d = moving.inputs.back()[k] - moving.targets[0][k];
        manual += d * d;
    }
    manual /= static_cast<double>(moving.inputs.back().size());
    CHECK(copy_mse[0] == doctest::Approx(manual).epsilon(1e-14));
}

TEST_CASE("evaluate returns per-horizon tables for model and baselines") {
    ModelConfig c = tiny_config();
    Rng rng(81);
    ModelParams p = ModelParams::init(c, rng, 0.2);
    std::vector<PreparedEpisode> data;
    for (int i = 0; i < 4; ++i) data.push_back(random_episode(c, 400 + i));
    EvalMetrics m = evaluate(p, data);
    CHECK(m.model_horizon_mse.size() == c.t_out);
    CHECK(m.copy_horizon_mse.size() == c.t_out);
    CHECK(m.linear_horizon_mse.size() == c.t_out);
    CHECK(m.model_recon_mse > 0.0);
    CHECK(m.model_pred_mean > 0.0);
}

TEST_CASE("reports serialize to text and csv") {
    TrainReport rep;
    EpochStat e;
    e.epoch = 0;
    e.train_loss = 0.5;
    e.val_recon = 0.25;
    e.val_pred = 0.3;
    e.seconds = 0.01;
    rep.epochs.push_back(e);
    rep.horizon_mse = {0.1, 0.2};
    rep.recon_mse = 0.05;
    write_report_csv("t_rep.csv", rep);
    write_report_txt("t_rep.txt", rep);
    std::ifstream csv("t_rep.csv");
    std::string line;
    std::getline(csv, line);
    CHECK(line == "epoch,train_loss,val_recon,val_pred,seconds");
    std::getline(csv, line);
    CHECK(line.rfind("0,0.5,0.25,0.3,", 0) == 0);
    std::remove("t_rep.csv");
    std::remove("t_rep.txt");
}
