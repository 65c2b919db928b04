#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gzm/data.hpp"
#include "gzm/nn.hpp"
#include "gzm/vqvae.hpp"

namespace gzm {

enum class FusionMode { linear, convolution, summation };

std::string fusion_mode_name(FusionMode m);
FusionMode fusion_mode_from_name(const std::string& s);

struct GeneratorConfig {
    FusionMode fusion = FusionMode::linear;
    bool use_gaze = true;
    int gaze_dim = 16;   // D_g
    int model_dim = 64;  // D_x
    int layers = 2;
    int heads = 4;
    int ffn_mult = 4;
    double last_weight = 2.0;  // weight of the final token in the loss
    int max_tokens = 16;       // positional capacity, tokens past the object slot
    double lr = 3e-4;
    int epochs = 80;
    int batch = 16;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Pre-norm decoder block: causal multi-head self-attention with residual,
/// then a position-wise feed-forward with residual.
struct TransformerBlock {
    LayerNormLayer ln1, ln2;
    Tensor wq, wk, wv;  // [D,D] projections, bias-free
    LinearLayer out_proj;
    LinearLayer ff1, ff2;
    int heads = 1;

    TransformerBlock() = default;
    TransformerBlock(int d, int heads, int ffn_mult, Rng& rng);

    Tensor* forward(Tape& t, Tensor* x);
    void collect(const std::string& prefix, NamedParams& out);
};

struct GenerateResult {
    std::vector<int> tokens;        // predicted indices only
    MotionSequence frames;          // decoded predicted frames, l * n_future
    bool no_context = false;        // object set was empty
};

/// Autoregressive next-token model over the frozen hand-motion codebook,
/// conditioned on pooled gaze features and a leading object token.
class Generator {
  public:
    Generator(const GeneratorConfig& config, const Tensor& codebook);

    const GeneratorConfig& config() const { return cfg_; }
    int codebook_size() const { return token_table_.dim(0); }
    const Tensor& token_table() const { return token_table_; }

    /// Mean-pool gaze frames into one row per token. Gaze length must equal
    /// l * n_tokens (alignment with the padded hand sequence).
    static Tensor pool_gaze(const GazeSequence& gaze, int l, int n_tokens);

    /// Fused per-token rows F [n, D_x]. pooled_gaze may be null when the
    /// model runs without gaze.
    Tensor* fuse(Tape& t, std::span<const int> tokens, const Tensor* pooled_gaze);

    /// Leading conditioning token from the object set, [1, D_x]. Empty object
    /// sets produce a zero token and set *no_context.
    Tensor* condition_object(Tape& t, const ObjectSet& objects, bool* no_context = nullptr);

    /// Object token + fused rows + positional embeddings, [n+1, D_x].
    Tensor* build_input(Tape& t, std::span<const int> tokens, const Tensor* pooled_gaze,
                        const ObjectSet& objects, bool* no_context = nullptr);

    /// Per-position logits over the codebook, [n+1, K].
    Tensor* forward_logits(Tape& t, Tensor* x_rows);

    /// Teacher-forced weighted cross entropy for one token sequence; also
    /// reports how many next-token argmaxes hit their target.
    Tensor* sequence_loss(Tape& t, std::span<const int> tokens, const Tensor* pooled_gaze,
                          const ObjectSet& objects, int* correct = nullptr);

    /// Logits for the next token given the prefix (plain values).
    std::vector<double> next_logits(std::span<const int> tokens, const Tensor* pooled_gaze,
                                    const ObjectSet& objects) const;

    /// Greedy argmax of next_logits; ties break toward the lowest index.
    int predict_next_index(std::span<const int> tokens, const Tensor* pooled_gaze,
                           const ObjectSet& objects) const;

    /// Append n_future greedy tokens. Gaze rows beyond the prefix repeat the
    /// final pooled fixation.
    std::vector<int> generate_tokens(std::span<const int> prefix, const Tensor* pooled_gaze_prefix,
                                     const ObjectSet& objects, int n_future) const;

    NamedParams named_params();

    // Layers are public so tests and the checkpoint loader can reach them.
    Tensor token_table_;  // frozen codebook copy [K, D_c]
    EmbeddingTable pos_;
    LinearLayer obj_proj_;
    // Fusion layers; only the ones the configured mode uses are constructed.
    LinearLayer gaze_embed_;   // 3 -> D_g (linear / convolution)
    LinearLayer fuse_linear_;  // concat -> D_x (linear)
    Conv1dLayer fuse_conv_;    // 1x1 channels -> D_x (convolution)
    LinearLayer token_proj_;   // D_c -> D_x (summation)
    LinearLayer gaze_expand_;  // 3 -> D_x, zero bias at init (summation)
    std::vector<TransformerBlock> blocks_;
    LayerNormLayer final_ln_;
    LinearLayer head_;

  private:
    GeneratorConfig cfg_;
    int token_dim_ = 0;
};

struct GeneratorEpochLog {
    int epoch;
    double loss;
    double token_accuracy;
};

struct GeneratorTrainLog {
    std::vector<GeneratorEpochLog> epochs;
};

/// Teacher-forced training against tokens from the frozen VQ-VAE.
Generator train_generator(const VqVae& vqvae, const Dataset& dataset,
                          std::span<const int> sample_indices, const GeneratorConfig& config,
                          GeneratorTrainLog* log = nullptr);

/// Full prediction pipeline: encode the input frames, roll out n_future
/// tokens greedily, decode with prefix context, return the predicted frames.
GenerateResult generate(const VqVae& vqvae, const Generator& gen, const MotionSequence& input,
                        const GazeSequence& gaze, const ObjectSet& objects, int n_future_tokens);

}  // namespace gzm
