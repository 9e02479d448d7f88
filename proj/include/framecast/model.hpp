#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "framecast/lstm.hpp"
#include "framecast/tensor.hpp"

namespace fc {

/// Architecture hyperparameters. Serialized into checkpoints, so every field
/// is an integer or a flag.
struct ModelConfig {
    std::size_t frame_rows = 64;
    std::size_t frame_cols = 64;
    std::size_t feature_dim = 128;
    std::size_t hidden_dim = 128;
    std::size_t t_in = 5;
    std::size_t t_out = 5;
    std::size_t action_dim = 2;
    std::size_t state_dim = 4;
    bool conditioned = false;
    bool recon_reversed = true;
    bool teacher_forcing = false;

    std::size_t pixel_count() const { return frame_rows * frame_cols; }
    std::size_t pred_input_dim() const {
        return feature_dim + (conditioned ? action_dim + state_dim : 0);
    }
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

struct Dense {
    Tensor2 w;
    Tensor2 b;
};

/// Full trainable parameter set: frame embedding, encoder LSTM, the two
/// decoder LSTMs, shared head and pixel reconstruction layer.
struct ModelParams {
    ModelConfig config;
    Dense enc_dense; // feature x pixels, tanh
    Dense dec_dense; // pixels x feature, sigmoid
    Dense head;      // feature x hidden, linear
    LstmParams encoder;
    LstmParams recon_decoder;
    LstmParams pred_decoder;

    static ModelParams init(const ModelConfig& cfg, Rng& rng, double scale = 0.08,
                            double forget_bias = 1.0);
    static ModelParams zeros(const ModelConfig& cfg);

    /// Fixed enumeration order; also the checkpoint tensor order.
    void for_each_param(const std::function<void(const std::string&, Tensor2&)>& fn);
    void for_each_param(const std::function<void(const std::string&, const Tensor2&)>& fn) const;

    /// True for the pretrained dense layers, which freezing exempts from
    /// updates.
    static bool is_dense_param(const std::string& name);

    std::size_t param_count() const;
    /// Shape consistency against config; throws shape_error.
    void validate_shapes() const;
};

using ModelGrads = ModelParams;

/// Exogenous decoder inputs, one entry per prediction step.
struct Conditioning {
    std::vector<Tensor2> actions; // action_dim x 1 each
    std::vector<Tensor2> states;  // state_dim x 1 each
};

/// An episode already preprocessed into unit-range pixel columns.
struct PreparedEpisode {
    std::vector<Tensor2> inputs;  // t_in entries, pixels x 1
    std::vector<Tensor2> targets; // t_out entries, pixels x 1
    Conditioning cond;            // may be empty for unconditioned models
};

/// Per-branch forward record kept for the backward pass.
struct BranchTrace {
    std::vector<StepTape> tapes;
    std::vector<Tensor2> hs;
    std::vector<Tensor2> feats;   // head outputs, also the closed-loop feedback
    std::vector<Tensor2> outputs; // sigmoid pixel columns
    std::vector<Tensor2> targets; // in emission order
    std::vector<std::size_t> teacher_embed; // embed-record index feeding step s (teacher forcing)
};

struct ForwardCache {
    std::vector<Tensor2> embed_x; // every embedding call: input pixels ...
    std::vector<Tensor2> embed_e; // ... and resulting feature vector
    std::vector<StepTape> enc_tapes;
    LstmState ctx;
    BranchTrace recon;
    BranchTrace pred;
    double recon_mse = 0.0;
    double pred_mse = 0.0;
    double loss = 0.0;
};

/// tanh dense embedding of each frame.
std::vector<Tensor2> embed_frames(const ModelParams& p, const std::vector<Tensor2>& frames);

/// Runs the encoder over exactly t_in feature vectors from a zero state.
LstmState encode(const ModelParams& p, const std::vector<Tensor2>& features);

/// Closed-loop reconstruction decoder; emits t_in frame matrices
/// (frame_rows x frame_cols, values in (0,1)). Emission order follows
/// config.recon_reversed.
std::vector<Tensor2> decode_reconstruction(const ModelParams& p, const LstmState& ctx);

/// Prediction decoder; first step input is the last input frame's embedding,
/// then its own fed-back features. cond must be present iff the model is
/// conditioned. Emits t_out frames in forward time order.
std::vector<Tensor2> decode_prediction(const ModelParams& p, const LstmState& ctx,
                                       const Tensor2& last_feature, const Conditioning* cond);

/// Sum of the two branch MSEs, each averaged over frames and pixels.
ForwardCache forward_loss(const ModelParams& p, const PreparedEpisode& ep);

/// Reverse-mode gradients through both branches, the encoder and the
/// embedding. With freeze_dense the enc/dec dense blocks stay zero; gradients
/// still flow through them into the rest of the network.
ModelGrads backward(const ModelParams& p, const ForwardCache& cache, bool freeze_dense);

// Checkpoint container (magic "FCM1"): config as little-endian words, then
// every tensor in for_each_param order. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

} // namespace fc
