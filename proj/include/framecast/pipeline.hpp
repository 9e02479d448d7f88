#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "framecast/model.hpp"
#include "framecast/preprocess.hpp"
#include "framecast/sim.hpp"
#include "framecast/train.hpp"

namespace fc {

/// Flat key=value run configuration covering the model, the optimizer, the
/// simulator and preprocessing. Precedence: built-in defaults, then config
/// file, then FRAMECAST_SEED, then command-line flags.
struct PipelineConfig {
    // model
    std::size_t frame_rows = 64, frame_cols = 64;
    std::size_t feature_dim = 128, hidden_dim = 128;
    std::size_t t_in = 5, t_out = 5;
    std::size_t action_dim = 2, state_dim = 4;
    bool conditioned = false;
    bool recon_reversed = true;
    bool teacher_forcing = false;
    double init_scale = 0.08;
    double forget_bias = 1.0;

    // training
    std::string algorithm = "adam";
    double learning_rate = 1e-3;
    double momentum = 0.9;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    double clip_norm = 5.0;
    std::size_t epochs = 50;
    std::size_t batch_size = 16;
    std::uint64_t seed = 42;
    std::size_t workers = 1;
    bool freeze_dense = true;
    std::size_t pretrain_epochs = 10;
    std::size_t pretrain_batch_size = 64;

    // world
    double radius = 0.08;
    double kp_lo = 2.0, kp_hi = 6.0;
    double ki_lo = 0.0, ki_hi = 0.5;
    double kd_lo = 2.0, kd_hi = 6.0;
    double dt = 0.1;
    double max_speed = 0.5;
    double noise_sigma = 0.0;
    std::size_t max_steps = 240;
    bool moving_observer = false;
    double ego_speed_max = 0.3;
    std::size_t episodes = 1000;

    // preprocessing
    double gaussian_sigma = 1.0;
    bool invert = true;
    bool scale_to_unit = true;

    /// Applies one key=value pair; unknown keys and bad values are rejected.
    void set(const std::string& key, const std::string& value);

    /// Reads a key=value file ('#' starts a comment).
    void load_file(const std::string& path);

    /// FRAMECAST_SEED, when set, overrides the seed.
    void apply_env();

    /// All keys in a stable order, for run logging.
    std::string resolved() const;

    ModelConfig model_config() const;
    OptimConfig optim_config() const;
    WorldSpec world_spec() const;
    PrepConfig prep_config() const;
};

} // namespace fc
