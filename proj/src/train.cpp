#include "framecast/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include "framecast/binio.hpp"
#include "framecast/errors.hpp"

namespace fc {

void OptimConfig::validate() const {
    if (learning_rate < 0.0) throw config_error("optim: learning_rate must be >= 0");
    if (clip_norm <= 0.0) throw config_error("optim: clip_norm must be > 0");
    if (batch_size == 0) throw config_error("optim: batch_size must be >= 1");
    if (workers == 0) throw config_error("optim: workers must be >= 1");
}

namespace {

std::vector<Tensor2*> collect(ModelParams& p) {
    std::vector<Tensor2*> out;
    p.for_each_param([&out](const std::string&, Tensor2& t) { out.push_back(&t); });
    return out;
}

std::vector<const Tensor2*> collect(const ModelParams& p) {
    std::vector<const Tensor2*> out;
    p.for_each_param([&out](const std::string&, const Tensor2& t) { out.push_back(&t); });
    return out;
}

} // namespace

double Optimizer::clip_global_norm(ModelGrads& grads, double clip_norm) {
    double sq = 0.0;
    grads.for_each_param([&sq](const std::string&, const Tensor2& t) {
        for (double v : t.data) sq += v * v;
    });
    const double norm = std::sqrt(sq);
    if (norm <= clip_norm || norm == 0.0) return 1.0;
    const double s = clip_norm / norm;
    grads.for_each_param([s](const std::string&, Tensor2& t) { scale_in_place(t, s); });
    return s;
}

void Optimizer::step(ModelParams& params, const ModelGrads& grads) {
    ModelGrads clipped = grads;
    clip_global_norm(clipped, cfg_.clip_norm);

    std::vector<Tensor2*> ps = collect(params);
    std::vector<const Tensor2*> gs = collect(static_cast<const ModelParams&>(clipped));
    if (m_.empty()) {
        for (const Tensor2* p : gs) m_.emplace_back(p->rows, p->cols);
        if (cfg_.algorithm == OptimAlgo::adam)
            for (const Tensor2* p : gs) v_.emplace_back(p->rows, p->cols);
    }
    ++t_;

    if (cfg_.algorithm == OptimAlgo::adam) {
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < ps.size(); ++i) {
            Tensor2& p = *ps[i];
            const Tensor2& g = *gs[i];
            Tensor2& m = m_[i];
            Tensor2& v = v_[i];
            for (std::size_t k = 0; k < p.size(); ++k) {
                m.data[k] = cfg_.beta1 * m.data[k] + (1.0 - cfg_.beta1) * g.data[k];
                v.data[k] = cfg_.beta2 * v.data[k] + (1.0 - cfg_.beta2) * g.data[k] * g.data[k];
                const double mhat = m.data[k] / bc1;
                const double vhat = v.data[k] / bc2;
                p.data[k] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.adam_eps);
            }
        }
    } else {
        for (std::size_t i = 0; i < ps.size(); ++i) {
            Tensor2& p = *ps[i];
            const Tensor2& g = *gs[i];
            Tensor2& m = m_[i];
            for (std::size_t k = 0; k < p.size(); ++k) {
                m.data[k] = cfg_.momentum * m.data[k] + g.data[k];
                p.data[k] -= cfg_.learning_rate * m.data[k];
            }
        }
    }
}

// ---------------------------------------------------------------------------
// dense autoencoder pretraining

namespace {

struct DenseAE {
    Dense enc;
    Dense dec;
};

// Whole batch as matrix products: X is pixels x B, features E = tanh(We X + be),
// output Y = sig(Wd E + bd), loss the per-frame pixel MSE averaged over the
// batch.
double dense_ae_step(DenseAE& ae, const std::vector<const Tensor2*>& batch, double lr,
                     std::size_t step, Tensor2* mw_e, Tensor2* mb_e, Tensor2* mw_d, Tensor2* mb_d,
                     Tensor2* vw_e, Tensor2* vb_e, Tensor2* vw_d, Tensor2* vb_d) {
    const std::size_t px = ae.dec.b.rows;
    const std::size_t feat = ae.enc.b.rows;
    const std::size_t b_n = batch.size();

    Tensor2 x(px, b_n);
    for (std::size_t j = 0; j < b_n; ++j)
        for (std::size_t i = 0; i < px; ++i) x(i, j) = batch[j]->data[i];

    Tensor2 e = matmul(ae.enc.w, x);
    for (std::size_t i = 0; i < feat; ++i)
        for (std::size_t j = 0; j < b_n; ++j) e(i, j) = std::tanh(e(i, j) + ae.enc.b[i]);
    Tensor2 y = matmul(ae.dec.w, e);
    for (std::size_t i = 0; i < px; ++i)
        for (std::size_t j = 0; j < b_n; ++j) y(i, j) = sigmoid_scalar(y(i, j) + ae.dec.b[i]);

    const double scale = 2.0 / (static_cast<double>(px) * static_cast<double>(b_n));
    double loss = 0.0;
    Tensor2 dz(px, b_n);
    for (std::size_t k = 0; k < y.size(); ++k) {
        const double d = y.data[k] - x.data[k];
        loss += d * d;
        dz.data[k] = scale * d * y.data[k] * (1.0 - y.data[k]);
    }
    loss /= static_cast<double>(px) * static_cast<double>(b_n);

    Tensor2 gw_d = matmul_nt(dz, e);
    Tensor2 gb_d(px, 1);
    for (std::size_t i = 0; i < px; ++i)
        for (std::size_t j = 0; j < b_n; ++j) gb_d[i] += dz(i, j);

    Tensor2 de = matmul_tn(ae.dec.w, dz);
    for (std::size_t k = 0; k < de.size(); ++k) de.data[k] *= 1.0 - e.data[k] * e.data[k];
    Tensor2 gw_e = matmul_nt(de, x);
    Tensor2 gb_e(feat, 1);
    for (std::size_t i = 0; i < feat; ++i)
        for (std::size_t j = 0; j < b_n; ++j) gb_e[i] += de(i, j);

    // adam
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step));
    Tensor2* params[] = {&ae.enc.w, &ae.enc.b, &ae.dec.w, &ae.dec.b};
    Tensor2* grads[] = {&gw_e, &gb_e, &gw_d, &gb_d};
    Tensor2* ms[] = {mw_e, mb_e, mw_d, mb_d};
    Tensor2* vs[] = {vw_e, vb_e, vw_d, vb_d};
    for (int i = 0; i < 4; ++i) {
        Tensor2& p = *params[i];
        Tensor2& g = *grads[i];
        Tensor2& m = *ms[i];
        Tensor2& v = *vs[i];
        for (std::size_t k = 0; k < p.size(); ++k) {
            m.data[k] = b1 * m.data[k] + (1.0 - b1) * g.data[k];
            v.data[k] = b2 * v.data[k] + (1.0 - b2) * g.data[k] * g.data[k];
            p.data[k] -= lr * (m.data[k] / bc1) / (std::sqrt(v.data[k] / bc2) + eps);
        }
    }
    return loss / static_cast<double>(batch.size());
}

} // namespace

PretrainResult pretrain_dense(const std::vector<Tensor2>& frames, std::size_t feature_dim,
                              const OptimConfig& cfg, double init_scale) {
    cfg.validate();
    if (frames.empty()) throw config_error("pretrain_dense: empty frame set");
    const std::size_t px = frames.front().rows;
    for (const Tensor2& f : frames)
        if (f.rows != px || f.cols != 1)
            throw shape_error("pretrain_dense: inconsistent frame vector shapes");

    Rng rng(cfg.seed);
    DenseAE ae;
    ae.enc.w = rand_uniform(rng, feature_dim, px, -init_scale, init_scale);
    ae.enc.b = Tensor2(feature_dim, 1);
    ae.dec.w = rand_uniform(rng, px, feature_dim, -init_scale, init_scale);
    ae.dec.b = Tensor2(px, 1);

    Tensor2 mw_e(feature_dim, px), mb_e(feature_dim, 1), mw_d(px, feature_dim), mb_d(px, 1);
    Tensor2 vw_e(feature_dim, px), vb_e(feature_dim, 1), vw_d(px, feature_dim), vb_d(px, 1);

    PretrainResult out;
    std::vector<std::size_t> order(frames.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng = derive_rng(cfg.seed, 0x70726500ULL + epoch);
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
            std::vector<const Tensor2*> batch;
            for (std::size_t k = at; k < std::min(order.size(), at + cfg.batch_size); ++k)
                batch.push_back(&frames[order[k]]);
            epoch_loss += dense_ae_step(ae, batch, cfg.learning_rate, ++step, &mw_e, &mb_e, &mw_d,
                                        &mb_d, &vw_e, &vb_e, &vw_d, &vb_d);
            ++batches;
        }
        out.epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
    }
    out.enc = std::move(ae.enc);
    out.dec = std::move(ae.dec);
    return out;
}

// ---------------------------------------------------------------------------
// sequence model training

namespace {

void accumulate(ModelGrads& into, const ModelGrads& from) {
    std::vector<Tensor2*> dst = collect(into);
    std::vector<const Tensor2*> src = collect(from);
    for (std::size_t i = 0; i < dst.size(); ++i) add_in_place(*dst[i], *src[i]);
}

struct EpisodeResult {
    ModelGrads grads;
    double loss = 0.0;
};

// Per-episode gradients are computed independently (possibly on several
// threads) and reduced in episode-index order, so the result is the same for
// any worker count.
std::pair<ModelGrads, double> batch_gradient(const ModelParams& params,
                                             const std::vector<const PreparedEpisode*>& batch,
                                             std::size_t workers, bool freeze_dense) {
    std::vector<EpisodeResult> results(batch.size());
    auto run_range = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            ForwardCache cache = forward_loss(params, *batch[i]);
            results[i].loss = cache.loss;
            results[i].grads = backward(params, cache, freeze_dense);
        }
    };
    const std::size_t n_workers = std::min(workers, batch.size());
    if (n_workers <= 1) {
        run_range(0, batch.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (batch.size() + n_workers - 1) / n_workers;
        for (std::size_t w = 0; w < n_workers; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(batch.size(), begin + chunk);
            if (begin < end) pool.emplace_back(run_range, begin, end);
        }
        for (auto& th : pool) th.join();
    }

    ModelGrads total = ModelParams::zeros(params.config);
    double loss = 0.0;
    for (const EpisodeResult& r : results) {
        accumulate(total, r.grads);
        loss += r.loss;
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    total.for_each_param([inv](const std::string&, Tensor2& t) { scale_in_place(t, inv); });
    return {std::move(total), loss * inv};
}

struct ValLosses {
    double recon = 0.0;
    double pred = 0.0;
};

ValLosses validation_loss(const ModelParams& params,
                          const std::vector<const PreparedEpisode*>& val) {
    ValLosses out;
    for (const PreparedEpisode* ep : val) {
        ForwardCache cache = forward_loss(params, *ep);
        out.recon += cache.recon_mse;
        out.pred += cache.pred_mse;
    }
    if (!val.empty()) {
        out.recon /= static_cast<double>(val.size());
        out.pred /= static_cast<double>(val.size());
    }
    return out;
}

} // namespace

TrainReport train(ModelParams& params, const std::vector<PreparedEpisode>& data,
                  const OptimConfig& cfg) {
    cfg.validate();
    params.validate_shapes();
    if (data.empty()) throw config_error("train: empty dataset");

    // deterministic split: last 10% by index is validation; tiny datasets
    // validate on the training set itself
    const std::size_t val_count = data.size() / 10;
    std::vector<const PreparedEpisode*> train_set, val_set;
    for (std::size_t i = 0; i < data.size() - val_count; ++i) train_set.push_back(&data[i]);
    for (std::size_t i = data.size() - val_count; i < data.size(); ++i) val_set.push_back(&data[i]);
    if (val_set.empty()) val_set = train_set;

    Optimizer opt(cfg);
    TrainReport report;
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        Rng shuffle_rng = derive_rng(cfg.seed, 0x65706F00ULL + epoch);
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);

        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
            std::vector<const PreparedEpisode*> batch;
            for (std::size_t k = at; k < std::min(order.size(), at + cfg.batch_size); ++k)
                batch.push_back(train_set[order[k]]);
            auto [grads, loss] = batch_gradient(params, batch, cfg.workers, cfg.freeze_dense);
            if (!std::isfinite(loss))
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", batch " +
                                         std::to_string(batches));
            opt.step(params, grads);
            epoch_loss += loss;
            ++batches;
        }

        const ValLosses val = validation_loss(params, val_set);
        const auto t1 = std::chrono::steady_clock::now();
        EpochStat stat;
        stat.epoch = epoch;
        stat.train_loss = epoch_loss / static_cast<double>(batches);
        stat.val_recon = val.recon;
        stat.val_pred = val.pred;
        stat.seconds = std::chrono::duration<double>(t1 - t0).count();
        report.epochs.push_back(stat);
    }

    // final per-horizon metrics on the validation set
    std::vector<PreparedEpisode> val_copy;
    val_copy.reserve(val_set.size());
    for (const PreparedEpisode* ep : val_set) val_copy.push_back(*ep);
    EvalMetrics metrics = evaluate(params, val_copy);
    report.horizon_mse = metrics.model_horizon_mse;
    report.recon_mse = metrics.model_recon_mse;
    return report;
}

void write_report_txt(const std::string& path, const TrainReport& report) {
    atomic_write_file(path, [&report](std::ostream& os) {
        for (const EpochStat& e : report.epochs)
            os << "epoch " << e.epoch << " train_loss " << e.train_loss << " val_recon "
               << e.val_recon << " val_pred " << e.val_pred << " seconds " << e.seconds << "\n";
        os << "final_recon_mse " << report.recon_mse << "\n";
        for (std::size_t h = 0; h < report.horizon_mse.size(); ++h)
            os << "horizon_" << (h + 1) << "_mse " << report.horizon_mse[h] << "\n";
    });
}

void write_report_csv(const std::string& path, const TrainReport& report) {
    atomic_write_file(path, [&report](std::ostream& os) {
        os << "epoch,train_loss,val_recon,val_pred,seconds\n";
        for (const EpochStat& e : report.epochs)
            os << e.epoch << "," << e.train_loss << "," << e.val_recon << "," << e.val_pred << ","
               << e.seconds << "\n";
    });
}

// ---------------------------------------------------------------------------
// gradient checking

GradCheckReport grad_check_against(ModelParams& params, const PreparedEpisode& episode, double eps,
                                   double tol, bool freeze_dense, const ModelGrads& analytic) {
    GradCheckReport report;
    std::vector<Tensor2*> ps;
    std::vector<std::string> names;
    params.for_each_param([&](const std::string& name, Tensor2& t) {
        ps.push_back(&t);
        names.push_back(name);
    });
    std::vector<const Tensor2*> gs = collect(analytic);

    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (freeze_dense && ModelParams::is_dense_param(names[i])) continue;
        Tensor2& t = *ps[i];
        for (std::size_t k = 0; k < t.size(); ++k) {
            const double saved = t.data[k];
            t.data[k] = saved + eps;
            const double lp = forward_loss(params, episode).loss;
            t.data[k] = saved - eps;
            const double lm = forward_loss(params, episode).loss;
            t.data[k] = saved;
            const double numeric = (lp - lm) / (2.0 * eps);
            const double analytic_v = gs[i]->data[k];
            // denominator floor keeps finite-difference roundoff on near-zero
            // gradients (|g| under ~1e-8, fd noise ~1e-12/eps) from dominating
            const double err = std::abs(numeric - analytic_v) /
                               std::max(std::abs(numeric) + std::abs(analytic_v), 1e-6);
            if (err > report.max_rel_err) {
                report.max_rel_err = err;
                report.worst_param = names[i];
                report.worst_index = k;
            }
            ++report.checked;
        }
    }
    report.pass = report.max_rel_err < tol;
    return report;
}

GradCheckReport grad_check(ModelParams& params, const PreparedEpisode& episode, double eps,
                           double tol, bool freeze_dense) {
    ForwardCache cache = forward_loss(params, episode);
    ModelGrads analytic = backward(params, cache, freeze_dense);
    return grad_check_against(params, episode, eps, tol, freeze_dense, analytic);
}

// ---------------------------------------------------------------------------
// evaluation and baselines

void baseline_mse(const std::vector<PreparedEpisode>& data, std::vector<double>& copy_out,
                  std::vector<double>& linear_out) {
    if (data.empty()) {
        copy_out.clear();
        linear_out.clear();
        return;
    }
    const std::size_t t_out = data.front().targets.size();
    copy_out.assign(t_out, 0.0);
    linear_out.assign(t_out, 0.0);
    for (const PreparedEpisode& ep : data) {
        const Tensor2& last = ep.inputs.back();
        const Tensor2& prev =
            ep.inputs.size() > 1 ? ep.inputs[ep.inputs.size() - 2] : ep.inputs.back();
        for (std::size_t h = 0; h < t_out; ++h) {
            const Tensor2& tgt = ep.targets[h];
            double copy_sq = 0.0, lin_sq = 0.0;
            for (std::size_t k = 0; k < tgt.size(); ++k) {
                const double dc = last[k] - tgt[k];
                copy_sq += dc * dc;
                const double ext = std::min(
                    1.0, std::max(0.0, last[k] + (h + 1.0) * (last[k] - prev[k])));
                const double dl = ext - tgt[k];
                lin_sq += dl * dl;
            }
            copy_out[h] += copy_sq / static_cast<double>(tgt.size());
            linear_out[h] += lin_sq / static_cast<double>(tgt.size());
        }
    }
    for (double& v : copy_out) v /= static_cast<double>(data.size());
    for (double& v : linear_out) v /= static_cast<double>(data.size());
}

EvalMetrics evaluate(const ModelParams& params, const std::vector<PreparedEpisode>& data) {
    EvalMetrics out;
    if (data.empty()) return out;
    const std::size_t t_out = params.config.t_out;
    out.model_horizon_mse.assign(t_out, 0.0);

    double recon_sum = 0.0;
    for (const PreparedEpisode& ep : data) {
        ForwardCache cache = forward_loss(params, ep);
        recon_sum += cache.recon_mse;
        for (std::size_t h = 0; h < t_out; ++h) {
            const Tensor2& y = cache.pred.outputs[h];
            const Tensor2& t = cache.pred.targets[h];
            double sq = 0.0;
            for (std::size_t k = 0; k < y.size(); ++k) {
                const double d = y[k] - t[k];
                sq += d * d;
            }
            out.model_horizon_mse[h] += sq / static_cast<double>(y.size());
        }
    }
    for (double& v : out.model_horizon_mse) v /= static_cast<double>(data.size());
    out.model_recon_mse = recon_sum / static_cast<double>(data.size());

    baseline_mse(data, out.copy_horizon_mse, out.linear_horizon_mse);

    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    };
    out.model_pred_mean = mean(out.model_horizon_mse);
    out.copy_pred_mean = mean(out.copy_horizon_mse);
    out.linear_pred_mean = mean(out.linear_horizon_mse);
    return out;
}

} // namespace fc
