#include "gzm/vqvae.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gzm/optim.hpp"

namespace gzm {

void VqVaeConfig::validate() const {
    if (codebook_size < 2) throw config_error("vqvae: codebook_size must be >= 2");
    if (embed_dim < 1) throw config_error("vqvae: embed_dim must be >= 1");
    if (downsample != 4) {
        throw config_error("vqvae: downsample is fixed at 4 by the two stride-2 encoder stages");
    }
    if (hidden_channels < 1) throw config_error("vqvae: hidden_channels must be >= 1");
    if (kernel_width < 1 || kernel_width % 2 == 0) {
        throw config_error("vqvae: kernel_width must be odd and >= 1");
    }
    if (beta <= 0.0) throw config_error("vqvae: beta must be positive");
    if (gamma <= 0.0) throw config_error("vqvae: gamma must be positive");
    if (lr <= 0.0) throw config_error("vqvae: lr must be positive");
    if (epochs < 1 || batch < 1) throw config_error("vqvae: epochs and batch must be >= 1");
}

QuantizationResult quantize(const Tensor& encoder_rows, const Tensor& codebook) {
    if (encoder_rows.rank() != 2 || codebook.rank() != 2) {
        throw shape_error("quantize: expects [Td,Dc] encoder rows and [K,Dc] codebook");
    }
    if (encoder_rows.dim(1) != codebook.dim(1)) {
        throw shape_error("quantize: embedding dim " + std::to_string(encoder_rows.dim(1)) +
                          " does not match codebook dim " + std::to_string(codebook.dim(1)));
    }
    const int td = encoder_rows.dim(0), d = encoder_rows.dim(1), k = codebook.dim(0);
    QuantizationResult res;
    res.encoder_out = encoder_rows;
    res.embeddings = Tensor({td, d});
    res.indices.resize(static_cast<std::size_t>(td));
    for (int t = 0; t < td; ++t) {
        const double* e = encoder_rows.v.data() + static_cast<std::size_t>(t) * d;
        int best = 0;
        double best_d2 = 0.0;
        for (int i = 0; i < k; ++i) {
            const double* c = codebook.v.data() + static_cast<std::size_t>(i) * d;
            double d2 = 0.0;
            for (int j = 0; j < d; ++j) {
                const double diff = e[j] - c[j];
                d2 += diff * diff;
            }
            if (i == 0 || d2 < best_d2) {  // strict <: ties keep the lowest index
                best = i;
                best_d2 = d2;
            }
        }
        res.indices[static_cast<std::size_t>(t)] = best;
        const double* c = codebook.v.data() + static_cast<std::size_t>(best) * d;
        std::copy(c, c + d, res.embeddings.v.data() + static_cast<std::size_t>(t) * d);
    }
    return res;
}

VqVaeLoss vqvae_loss(const Tensor& target, const Tensor& recon, const Tensor& encoder_rows,
                     const Tensor& quantized_rows, double beta, double gamma) {
    if (beta <= 0.0) throw param_error("vqvae_loss: beta must be positive");
    if (target.shape != recon.shape || encoder_rows.shape != quantized_rows.shape) {
        throw shape_error("vqvae_loss: shape mismatch");
    }
    VqVaeLoss out{};
    for (std::size_t i = 0; i < target.v.size(); ++i) {
        const double d = recon.v[i] - target.v[i];
        const double ad = std::abs(d);
        out.recon += ad < beta ? 0.5 * d * d / beta : ad - 0.5 * beta;
    }
    out.recon /= static_cast<double>(target.v.size());
    for (std::size_t i = 0; i < encoder_rows.v.size(); ++i) {
        const double d = encoder_rows.v[i] - quantized_rows.v[i];
        out.embed += d * d;
    }
    out.embed /= static_cast<double>(encoder_rows.v.size());
    out.commit = gamma * out.embed;
    // The embedding and commitment losses share the same residual; only the
    // stop-gradient placement differs, which plain values cannot see.
    out.total = out.recon + out.embed + out.commit;
    return out;
}

VqVae::VqVae(const VqVaeConfig& config) : cfg_(config) {
    cfg_.validate();
    Rng rng = Rng(cfg_.seed).fork(0x76717661);  // model init stream
    const int h = cfg_.hidden_channels;
    const int kw = cfg_.kernel_width;
    const int pad = kw / 2;
    enc1_ = Conv1dLayer(kPoseDim, h, kw, 2, pad, rng);
    enc2_ = Conv1dLayer(h, h, kw, 2, pad, rng);
    enc_proj_ = Conv1dLayer(h, cfg_.embed_dim, 1, 1, 0, rng);
    dec1_ = Conv1dLayer(cfg_.embed_dim, h, kw, 1, pad, rng);
    dec2_ = Conv1dLayer(h, h, kw, 1, pad, rng);
    dec_proj_ = Conv1dLayer(h, kPoseDim, 1, 1, 0, rng);
    codebook_ = Tensor({cfg_.codebook_size, cfg_.embed_dim}, true);
    init_normal(codebook_, rng, 0.25);
    norm_mean_ = Tensor({kPoseDim});
    norm_std_ = Tensor({kPoseDim});
    norm_std_.fill(1.0);
}

void VqVae::set_normalization(const Tensor& mean, const Tensor& std_dev) {
    if (mean.shape != std::vector<int>{kPoseDim} || std_dev.shape != std::vector<int>{kPoseDim}) {
        throw shape_error("vqvae: normalization tensors must have shape [126]");
    }
    norm_mean_ = mean;
    norm_std_ = std_dev;
}

NamedParams VqVae::named_params() {
    NamedParams out;
    enc1_.collect("enc1", out);
    enc2_.collect("enc2", out);
    enc_proj_.collect("enc_proj", out);
    dec1_.collect("dec1", out);
    dec2_.collect("dec2", out);
    dec_proj_.collect("dec_proj", out);
    out.emplace_back("codebook", &codebook_);
    return out;
}

NamedParams VqVae::named_tensors() {
    NamedParams out = named_params();
    out.emplace_back("norm.mean", &norm_mean_);
    out.emplace_back("norm.std", &norm_std_);
    return out;
}

Tensor* VqVae::encode_graph(Tape& t, Tensor* x_norm) {
    Tensor* h1 = relu(t, enc1_.forward(t, x_norm));
    Tensor* h2 = relu(t, enc2_.forward(t, h1));
    return enc_proj_.forward(t, h2);
}

Tensor* VqVae::decode_graph(Tape& t, Tensor* token_ct) {
    Tensor* u1 = relu(t, dec1_.forward(t, nn_upsample(t, token_ct, 2)));
    Tensor* u2 = relu(t, dec2_.forward(t, nn_upsample(t, u1, 2)));
    return dec_proj_.forward(t, u2);
}

std::vector<double> VqVae::normalize_frames(const MotionSequence& motion, int padded_t) const {
    // [T,126] frames to normalized channels-by-time [126, padded_t], padding
    // by repeating the final frame.
    const int t_len = motion.length();
    std::vector<double> ct(static_cast<std::size_t>(kPoseDim) * padded_t);
    for (int d = 0; d < kPoseDim; ++d) {
        const double mu = norm_mean_.v[static_cast<std::size_t>(d)];
        const double sd = norm_std_.v[static_cast<std::size_t>(d)];
        double* row = ct.data() + static_cast<std::size_t>(d) * padded_t;
        for (int tt = 0; tt < padded_t; ++tt) {
            const int src = std::min(tt, t_len - 1);
            row[tt] = (motion.frames.at(src, d) - mu) / sd;
        }
    }
    return ct;
}

void VqVae::denormalize_into(const std::vector<double>& ct_values, MotionSequence& out) const {
    const int t_len = out.length();
    for (int d = 0; d < kPoseDim; ++d) {
        const double mu = norm_mean_.v[static_cast<std::size_t>(d)];
        const double sd = norm_std_.v[static_cast<std::size_t>(d)];
        const double* row = ct_values.data() + static_cast<std::size_t>(d) * t_len;
        for (int tt = 0; tt < t_len; ++tt) out.frames.at(tt, d) = row[tt] * sd + mu;
    }
}

VqVae::Encoded VqVae::encode(const MotionSequence& motion) const {
    const int t_len = motion.length();
    const int l = cfg_.downsample;
    if (t_len < l) {
        throw shape_error("vqvae encode: sequence of " + std::to_string(t_len) +
                          " frames is shorter than the downsample factor " + std::to_string(l));
    }
    const int padded = (l - t_len % l) % l;
    const int full_t = t_len + padded;
    const std::vector<double> ct = const_cast<VqVae*>(this)->normalize_frames(motion, full_t);
    Tape tape;
    Tensor* x = constant(tape, {kPoseDim, full_t}, ct);
    Tensor* e_ct = const_cast<VqVae*>(this)->encode_graph(tape, x);
    Tensor* e_rows = transpose(tape, e_ct);
    Encoded out;
    out.rows = *e_rows;
    out.rows.requires_grad = false;
    out.rows.g.clear();
    out.padded_frames = padded;
    return out;
}

std::vector<int> VqVae::tokenize(const MotionSequence& motion) const {
    return quantize_rows(encode(motion).rows).indices;
}

MotionSequence VqVae::decode_indices(std::span<const int> tokens, int fps) const {
    if (tokens.empty()) throw shape_error("vqvae decode: empty token sequence");
    const int td = static_cast<int>(tokens.size());
    Tape tape;
    Tensor codebook_copy = codebook_;
    codebook_copy.requires_grad = false;
    codebook_copy.g.clear();
    Tensor* q_rows = embedding_lookup(tape, &codebook_copy, tokens);
    Tensor* q_ct = transpose(tape, q_rows);
    Tensor* recon = const_cast<VqVae*>(this)->decode_graph(tape, q_ct);
    MotionSequence out(td * cfg_.downsample, fps);
    denormalize_into(recon->v, out);
    return out;
}

MotionSequence VqVae::reconstruct(const MotionSequence& motion) const {
    const std::vector<int> tokens = tokenize(motion);
    MotionSequence decoded = decode_indices(tokens, motion.fps);
    if (decoded.length() == motion.length()) return decoded;
    // Drop the frames created by padding so the output matches the input.
    MotionSequence trimmed(motion.length(), motion.fps);
    for (int t = 0; t < motion.length(); ++t) {
        for (int d = 0; d < kPoseDim; ++d) trimmed.frames.at(t, d) = decoded.frames.at(t, d);
    }
    return trimmed;
}

namespace {

// Per-channel mean/std over the training poses; near-constant channels are
// clamped so normalization never amplifies noise.
void fit_normalization(const Dataset& dataset, std::span<const int> idx, Tensor& mean,
                       Tensor& std_dev) {
    std::vector<double> acc(kPoseDim, 0.0), acc2(kPoseDim, 0.0);
    std::int64_t n = 0;
    for (int i : idx) {
        const Tensor& f = dataset.samples[static_cast<std::size_t>(i)].hands.frames;
        for (int t = 0; t < f.dim(0); ++t) {
            for (int d = 0; d < kPoseDim; ++d) {
                const double x = f.at(t, d);
                acc[static_cast<std::size_t>(d)] += x;
                acc2[static_cast<std::size_t>(d)] += x * x;
            }
        }
        n += f.dim(0);
    }
    for (int d = 0; d < kPoseDim; ++d) {
        const double mu = acc[static_cast<std::size_t>(d)] / static_cast<double>(n);
        const double var = acc2[static_cast<std::size_t>(d)] / static_cast<double>(n) - mu * mu;
        mean.v[static_cast<std::size_t>(d)] = mu;
        std_dev.v[static_cast<std::size_t>(d)] = std::max(1e-3, std::sqrt(std::max(0.0, var)));
    }
}

}  // namespace

VqVae train_vqvae(const Dataset& dataset, std::span<const int> sample_indices,
                  const VqVaeConfig& config, VqVaeTrainLog* log) {
    config.validate();
    if (sample_indices.empty()) throw param_error("train_vqvae: no training samples");
    for (int i : sample_indices) {
        if (i < 0 || i >= static_cast<int>(dataset.size())) {
            throw index_error("train_vqvae: sample index " + std::to_string(i) + " out of range");
        }
    }

    VqVae model(config);
    Tensor norm_mu({kPoseDim}), norm_sd({kPoseDim});
    fit_normalization(dataset, sample_indices, norm_mu, norm_sd);
    model.set_normalization(norm_mu, norm_sd);

    NamedParams named = model.named_params();
    AdamConfig adam_cfg;
    adam_cfg.lr = config.lr;
    Adam opt(params_of(named), adam_cfg);

    Rng rng = Rng(config.seed).fork(0x747261696e);  // training stream
    std::vector<int> order(sample_indices.begin(), sample_indices.end());

    const int l = config.downsample;
    const int k = config.codebook_size;
    const int dc = config.embed_dim;

    std::vector<std::int64_t> usage(static_cast<std::size_t>(k), 0);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        // Cosine decay to lr/20 settles the codebook late in training.
        const double progress = config.epochs > 1 ? static_cast<double>(epoch) / (config.epochs - 1) : 1.0;
        opt.set_lr(config.lr / 20.0 +
                   0.5 * (config.lr - config.lr / 20.0) * (1.0 + std::cos(3.14159265358979323846 * progress)));
        rng.shuffle(order);
        std::fill(usage.begin(), usage.end(), 0);
        // Reservoir of encoder output rows for re-seeding dead codes.
        std::vector<double> stash;
        int stash_rows = 0;
        std::int64_t seen_rows = 0;

        VqVaeLoss epoch_loss{};
        int batch_count = 0;
        for (std::size_t pos = 0; pos < order.size();) {
            const std::size_t batch_end = std::min(order.size(), pos + static_cast<std::size_t>(config.batch));
            const int batch_n = static_cast<int>(batch_end - pos);
            const int batch_index = batch_count;
            opt.zero_grad();
            for (; pos < batch_end; ++pos) {
                const auto& sample = dataset.samples[static_cast<std::size_t>(order[pos])];
                try {
                    const int t_len = sample.hands.length();
                    const int padded = (l - t_len % l) % l;
                    const int full_t = t_len + padded;
                    const std::vector<double> ct = model.normalize_frames(sample.hands, full_t);

                    Tape tape;
                    Tensor* x = constant(tape, {kPoseDim, full_t}, ct);
                    Tensor* e_ct = model.encode_graph(tape, x);
                    Tensor* e_rows = transpose(tape, e_ct);

                    Tensor e_plain = *e_rows;
                    e_plain.requires_grad = false;
                    e_plain.g.clear();
                    const QuantizationResult qr = quantize(e_plain, model.codebook());
                    for (int s : qr.indices) ++usage[static_cast<std::size_t>(s)];

                    // Reservoir-sample encoder rows (deterministic).
                    for (int r = 0; r < e_plain.dim(0); ++r) {
                        ++seen_rows;
                        if (stash_rows < 128) {
                            stash.insert(stash.end(), e_plain.v.begin() + r * dc,
                                         e_plain.v.begin() + (r + 1) * dc);
                            ++stash_rows;
                        } else if (rng.uniform_int(static_cast<int>(seen_rows)) < 128) {
                            const int slot = rng.uniform_int(128);
                            std::copy(e_plain.v.begin() + r * dc, e_plain.v.begin() + (r + 1) * dc,
                                      stash.begin() + slot * dc);
                        }
                    }

                    Tensor* q_rows = embedding_lookup(tape, &model.codebook(), qr.indices);
                    Tensor* dec_in = transpose(tape, straight_through(tape, e_rows, q_rows));
                    Tensor* recon = model.decode_graph(tape, dec_in);

                    Tensor* l_recon = smooth_l1(tape, recon, x, config.beta);
                    Tensor* d_embed = sub(tape, stop_gradient(tape, e_rows), q_rows);
                    Tensor* l_embed = mean(tape, mul(tape, d_embed, d_embed));
                    Tensor* d_commit = sub(tape, e_rows, stop_gradient(tape, q_rows));
                    Tensor* l_commit =
                        mul_scalar(tape, mean(tape, mul(tape, d_commit, d_commit)), config.gamma);
                    Tensor* total = add(tape, add(tape, l_recon, l_embed), l_commit);

                    epoch_loss.recon += l_recon->scalar();
                    epoch_loss.embed += l_embed->scalar();
                    epoch_loss.commit += l_commit->scalar();
                    epoch_loss.total += total->scalar();

                    tape.backward(mul_scalar(tape, total, 1.0 / batch_n));
                } catch (const numerics_error& e) {
                    throw train_error("vqvae training diverged at epoch " + std::to_string(epoch) +
                                      ", batch " + std::to_string(batch_index) + ": " + e.what());
                }
            }
            try {
                opt.step();
            } catch (const train_error& e) {
                throw train_error("vqvae training diverged at epoch " + std::to_string(epoch) +
                                  ", batch " + std::to_string(batch_index) + ": " + e.what());
            }
            ++batch_count;
        }

        // Re-seed codebook entries that went unused this epoch.
        int reseeds = 0;
        for (int i = 0; i < k; ++i) {
            if (usage[static_cast<std::size_t>(i)] != 0 || stash_rows == 0) continue;
            const int pick = rng.uniform_int(stash_rows);
            for (int j = 0; j < dc; ++j) {
                model.codebook().at(i, j) =
                    stash[static_cast<std::size_t>(pick) * dc + j] + rng.normal(0.0, 1e-6);
            }
            ++reseeds;
        }

        const double inv_n = 1.0 / static_cast<double>(order.size());
        if (log) {
            log->epochs.push_back({epoch, epoch_loss.total * inv_n, epoch_loss.recon * inv_n,
                                   epoch_loss.embed * inv_n, epoch_loss.commit * inv_n});
            log->dead_reseeds += reseeds;
        }
        if (!std::isfinite(epoch_loss.total)) {
            throw train_error("vqvae training diverged at epoch " + std::to_string(epoch));
        }
    }
    if (log) log->usage = usage;
    return model;
}

}  // namespace gzm
