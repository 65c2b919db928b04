#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gzm/data.hpp"
#include "gzm/nn.hpp"
#include "gzm/rng.hpp"

namespace gzm {

struct VqVaeConfig {
    int codebook_size = 64;  // K
    int embed_dim = 32;      // D_c
    int downsample = 4;      // l; fixed by the two stride-2 encoder stages
    int hidden_channels = 128;
    int kernel_width = 5;
    double beta = 1.0;    // smooth-L1 threshold
    double gamma = 0.25;  // commitment weight
    double lr = 1e-3;     // cosine-decayed to lr/20 over training
    int epochs = 150;
    int batch = 16;
    std::uint64_t seed = 1;

    void validate() const;
};

struct QuantizationResult {
    Tensor embeddings;        // Q, [Td, D_c]; row t equals codebook[indices[t]]
    std::vector<int> indices;  // S
    Tensor encoder_out;       // E, [Td, D_c]
};

/// Nearest codebook row per encoder output row (L2); ties break toward the
/// lowest index.
QuantizationResult quantize(const Tensor& encoder_rows, const Tensor& codebook);

struct VqVaeLoss {
    double total, recon, embed, commit;
};

/// The three-part objective on plain values: smooth-L1 reconstruction,
/// codebook (embedding) loss, and gamma-weighted commitment loss.
VqVaeLoss vqvae_loss(const Tensor& target, const Tensor& recon, const Tensor& encoder_rows,
                     const Tensor& quantized_rows, double beta, double gamma);

struct VqVaeEpochLog {
    int epoch;
    double total, recon, embed, commit;
};

struct VqVaeTrainLog {
    std::vector<VqVaeEpochLog> epochs;
    std::vector<std::int64_t> usage;  // last-epoch codebook usage histogram
    int dead_reseeds = 0;
};

/// Discrete hand-motion autoencoder: two stride-2 convolutions down, nearest
/// neighbour upsampling with mirrored convolutions back up, and a learned
/// codebook in between. Immutable after training; concurrent read-only use is
/// safe.
class VqVae {
  public:
    explicit VqVae(const VqVaeConfig& config);

    const VqVaeConfig& config() const { return cfg_; }
    const Tensor& codebook() const { return codebook_; }
    Tensor& codebook() { return codebook_; }
    const Tensor& norm_mean() const { return norm_mean_; }
    const Tensor& norm_std() const { return norm_std_; }

    struct Encoded {
        Tensor rows;        // E, [Td, D_c]
        int padded_frames;  // trailing frames appended to reach a multiple of l
    };

    /// Encoder outputs at the token rate. Sequences not divisible by l are
    /// padded by repeating the last frame; T < l is an error.
    Encoded encode(const MotionSequence& motion) const;

    QuantizationResult quantize_rows(const Tensor& encoder_rows) const {
        return gzm::quantize(encoder_rows, codebook_);
    }

    /// encode + quantize to token indices.
    std::vector<int> tokenize(const MotionSequence& motion) const;

    /// Token indices back to a pose sequence of l * n_tokens frames.
    MotionSequence decode_indices(std::span<const int> tokens, int fps) const;

    /// encode -> quantize -> decode, trimmed back to the input length.
    MotionSequence reconstruct(const MotionSequence& motion) const;

    NamedParams named_params();

    /// Everything the checkpoint stores (parameters plus normalization).
    NamedParams named_tensors();

    void set_normalization(const Tensor& mean, const Tensor& std_dev);

    // Graph builders used by training; x_norm is [126, T] normalized.
    Tensor* encode_graph(Tape& t, Tensor* x_norm);    // -> [D_c, Td]
    Tensor* decode_graph(Tape& t, Tensor* token_ct);  // [D_c, Td] -> [126, l*Td]

    std::vector<double> normalize_frames(const MotionSequence& motion, int padded_t) const;
    void denormalize_into(const std::vector<double>& ct_values, MotionSequence& out) const;

  private:
    VqVaeConfig cfg_;
    Conv1dLayer enc1_, enc2_, enc_proj_;
    Conv1dLayer dec1_, dec2_, dec_proj_;
    Tensor codebook_;   // [K, D_c]
    Tensor norm_mean_;  // [126]
    Tensor norm_std_;   // [126]
};

/// Deterministic training on the listed samples (all samples when the list is
/// empty is not allowed; pass explicit indices). Dead codebook entries are
/// re-seeded from encoder outputs at each epoch end. Divergence raises
/// train_error with the failing epoch and batch.
VqVae train_vqvae(const Dataset& dataset, std::span<const int> sample_indices,
                  const VqVaeConfig& config, VqVaeTrainLog* log = nullptr);

}  // namespace gzm
