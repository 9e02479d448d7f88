#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "framecast/model.hpp"
#include "framecast/tensor.hpp"

namespace fc {

enum class OptimAlgo { adam, sgd };

struct OptimConfig {
    OptimAlgo algorithm = OptimAlgo::adam;
    double learning_rate = 1e-3;
    double momentum = 0.9; // sgd
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 5.0;
    std::size_t epochs = 50;
    std::size_t batch_size = 16;
    std::uint64_t seed = 42;
    std::size_t workers = 1;
    bool freeze_dense = true;

    void validate() const;
};

struct EpochStat {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_recon = 0.0;
    double val_pred = 0.0;
    double seconds = 0.0;
};

struct TrainReport {
    std::vector<EpochStat> epochs;
    std::vector<double> horizon_mse; // final per-horizon prediction MSE, 1..t_out
    double recon_mse = 0.0;          // final reconstruction MSE
};

void write_report_txt(const std::string& path, const TrainReport& report);
void write_report_csv(const std::string& path, const TrainReport& report);

/// Flat gradient-descent state over an enumerated parameter list. Clips the
/// global gradient norm before every update.
class Optimizer {
public:
    explicit Optimizer(const OptimConfig& cfg) : cfg_(cfg) { cfg.validate(); }

    /// Applies one update. params and grads must enumerate identically.
    void step(ModelParams& params, const ModelGrads& grads);

    /// Global L2 norm clip; returns the scale that was applied.
    static double clip_global_norm(ModelGrads& grads, double clip_norm);

private:
    OptimConfig cfg_;
    std::size_t t_ = 0;
    std::vector<Tensor2> m_; // adam first moment / sgd momentum
    std::vector<Tensor2> v_; // adam second moment
};

struct PretrainResult {
    Dense enc;
    Dense dec;
    std::vector<double> epoch_loss;
};

/// Trains the frame autoencoder (tanh encode, sigmoid decode, MSE) that the
/// sequence model later adopts and freezes.
PretrainResult pretrain_dense(const std::vector<Tensor2>& frames, std::size_t feature_dim,
                              const OptimConfig& cfg, double init_scale = 0.08);

/// Mini-batch training with deterministic shuffling and fixed reduction
/// order; results do not depend on the worker count. Aborts on non-finite
/// loss.
TrainReport train(ModelParams& params, const std::vector<PreparedEpisode>& data,
                  const OptimConfig& cfg);

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
    bool pass = false;
};

/// Central finite differences over every unfrozen scalar parameter.
GradCheckReport grad_check(ModelParams& params, const PreparedEpisode& episode, double eps,
                           double tol, bool freeze_dense = false);

/// Same, but verifies a caller-supplied analytic gradient (fault injection
/// lives in the tests).
GradCheckReport grad_check_against(ModelParams& params, const PreparedEpisode& episode, double eps,
                                   double tol, bool freeze_dense, const ModelGrads& analytic);

struct EvalMetrics {
    std::vector<double> model_horizon_mse;
    std::vector<double> copy_horizon_mse;   // copy-last-input-frame baseline
    std::vector<double> linear_horizon_mse; // two-frame linear extrapolation, clamped
    double model_recon_mse = 0.0;
    double model_pred_mean = 0.0;
    double copy_pred_mean = 0.0;
    double linear_pred_mean = 0.0;
};

EvalMetrics evaluate(const ModelParams& params, const std::vector<PreparedEpisode>& data);

/// Baselines only (no model), exposed for oracle tests.
void baseline_mse(const std::vector<PreparedEpisode>& data, std::vector<double>& copy_out,
                  std::vector<double>& linear_out);

} // namespace fc
