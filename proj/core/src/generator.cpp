#include "gzm/generator.hpp"

#include <algorithm>
#include <cmath>

#include "gzm/optim.hpp"

namespace gzm {

std::string fusion_mode_name(FusionMode m) {
    switch (m) {
        case FusionMode::linear: return "linear";
        case FusionMode::convolution: return "convolution";
        case FusionMode::summation: return "summation";
    }
    return "?";
}

FusionMode fusion_mode_from_name(const std::string& s) {
    if (s == "linear") return FusionMode::linear;
    if (s == "convolution") return FusionMode::convolution;
    if (s == "summation") return FusionMode::summation;
    throw config_error("unknown fusion mode '" + s +
                       "' (expected linear, convolution, or summation)");
}

void GeneratorConfig::validate() const {
    if (model_dim < 1 || heads < 1 || model_dim % heads != 0) {
        throw config_error("generator: model_dim must be a positive multiple of heads");
    }
    if (gaze_dim < 1) throw config_error("generator: gaze_dim must be >= 1");
    if (layers < 1) throw config_error("generator: layers must be >= 1");
    if (ffn_mult < 1) throw config_error("generator: ffn_mult must be >= 1");
    if (last_weight < 1.0) throw config_error("generator: last_weight must be >= 1");
    if (max_tokens < 1) throw config_error("generator: max_tokens must be >= 1");
    if (lr <= 0.0) throw config_error("generator: lr must be positive");
    if (epochs < 1 || batch < 1) throw config_error("generator: epochs and batch must be >= 1");
}

TransformerBlock::TransformerBlock(int d, int n_heads, int ffn_mult, Rng& rng)
    : ln1(d),
      ln2(d),
      wq({d, d}, true),
      wk({d, d}, true),
      wv({d, d}, true),
      out_proj(d, d, rng),
      ff1(d, d * ffn_mult, rng),
      ff2(d * ffn_mult, d, rng),
      heads(n_heads) {
    const double std_dev = 1.0 / std::sqrt(static_cast<double>(d));
    init_normal(wq, rng, std_dev);
    init_normal(wk, rng, std_dev);
    init_normal(wv, rng, std_dev);
}

Tensor* TransformerBlock::forward(Tape& t, Tensor* x) {
    const int d = x->dim(1);
    const int dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Tensor* a = ln1.forward(t, x);
    Tensor* q = matmul(t, a, &wq);
    Tensor* k = matmul(t, a, &wk);
    Tensor* v = matmul(t, a, &wv);
    Tensor* heads_out = nullptr;
    for (int h = 0; h < heads; ++h) {
        Tensor* qh = slice_cols(t, q, h * dh, (h + 1) * dh);
        Tensor* kh = slice_cols(t, k, h * dh, (h + 1) * dh);
        Tensor* vh = slice_cols(t, v, h * dh, (h + 1) * dh);
        Tensor* scores = mul_scalar(t, matmul(t, qh, transpose(t, kh)), scale);
        Tensor* att = causal_softmax(t, scores);
        Tensor* oh = matmul(t, att, vh);
        heads_out = heads_out ? concat_lastdim(t, heads_out, oh) : oh;
    }
    Tensor* x1 = add(t, x, out_proj.forward(t, heads_out));
    Tensor* f = ln2.forward(t, x1);
    Tensor* ff = ff2.forward(t, relu(t, ff1.forward(t, f)));
    return add(t, x1, ff);
}

void TransformerBlock::collect(const std::string& prefix, NamedParams& out) {
    ln1.collect(prefix + ".ln1", out);
    ln2.collect(prefix + ".ln2", out);
    out.emplace_back(prefix + ".wq", &wq);
    out.emplace_back(prefix + ".wk", &wk);
    out.emplace_back(prefix + ".wv", &wv);
    out_proj.collect(prefix + ".out", out);
    ff1.collect(prefix + ".ff1", out);
    ff2.collect(prefix + ".ff2", out);
}

Generator::Generator(const GeneratorConfig& config, const Tensor& codebook) : cfg_(config) {
    cfg_.validate();
    if (codebook.rank() != 2) throw shape_error("generator: codebook must be [K,Dc]");
    token_table_ = codebook;
    token_table_.requires_grad = false;  // the codebook stays frozen here
    token_table_.g.clear();
    token_dim_ = token_table_.dim(1);

    Rng rng = Rng(cfg_.seed).fork(0x67656e);  // model init stream
    const int dx = cfg_.model_dim;
    pos_ = EmbeddingTable(cfg_.max_tokens + 1, dx, rng, 0.02);
    obj_proj_ = LinearLayer(kMaxObjects * kObjectCode, dx, rng);
    switch (cfg_.fusion) {
        case FusionMode::linear:
            if (cfg_.use_gaze) gaze_embed_ = LinearLayer(3, cfg_.gaze_dim, rng);
            fuse_linear_ =
                LinearLayer(token_dim_ + (cfg_.use_gaze ? cfg_.gaze_dim : 0), dx, rng);
            break;
        case FusionMode::convolution:
            if (cfg_.use_gaze) gaze_embed_ = LinearLayer(3, cfg_.gaze_dim, rng);
            fuse_conv_ =
                Conv1dLayer(token_dim_ + (cfg_.use_gaze ? cfg_.gaze_dim : 0), dx, 1, 1, 0, rng);
            break;
        case FusionMode::summation:
            token_proj_ = LinearLayer(token_dim_, dx, rng);
            if (cfg_.use_gaze) {
                gaze_expand_ = LinearLayer(3, dx, rng);
                gaze_expand_.b.fill(0.0);  // zero gaze contributes nothing at init
            }
            break;
    }
    blocks_.reserve(static_cast<std::size_t>(cfg_.layers));
    for (int i = 0; i < cfg_.layers; ++i) blocks_.emplace_back(dx, cfg_.heads, cfg_.ffn_mult, rng);
    final_ln_ = LayerNormLayer(dx);
    head_ = LinearLayer(dx, token_table_.dim(0), rng);
}

Tensor Generator::pool_gaze(const GazeSequence& gaze, int l, int n_tokens) {
    if (gaze.length() != l * n_tokens) {
        throw shape_error("pool_gaze: " + std::to_string(gaze.length()) +
                          " gaze frames do not align with " + std::to_string(n_tokens) +
                          " tokens of " + std::to_string(l) + " frames");
    }
    Tensor out({n_tokens, 3});
    for (int tok = 0; tok < n_tokens; ++tok) {
        Vec3 acc{};
        for (int i = 0; i < l; ++i) acc = acc + gaze.at(tok * l + i);
        const Vec3 m = acc * (1.0 / l);
        out.at(tok, 0) = m.x;
        out.at(tok, 1) = m.y;
        out.at(tok, 2) = m.z;
    }
    return out;
}

Tensor* Generator::fuse(Tape& t, std::span<const int> tokens, const Tensor* pooled_gaze) {
    if (tokens.empty()) throw shape_error("fuse: empty token sequence");
    const int n = static_cast<int>(tokens.size());
    if (cfg_.use_gaze) {
        if (pooled_gaze == nullptr) throw shape_error("fuse: gaze model needs pooled gaze rows");
        if (pooled_gaze->rank() != 2 || pooled_gaze->dim(0) != n || pooled_gaze->dim(1) != 3) {
            throw shape_error("fuse: pooled gaze must be [n,3] aligned with the tokens");
        }
    }
    Tensor* tok_rows = embedding_lookup(t, &token_table_, tokens);
    Tensor* gaze_rows =
        cfg_.use_gaze ? constant(t, pooled_gaze->shape, pooled_gaze->v) : nullptr;
    switch (cfg_.fusion) {
        case FusionMode::linear: {
            Tensor* feats = cfg_.use_gaze
                                ? concat_lastdim(t, tok_rows, gaze_embed_.forward(t, gaze_rows))
                                : tok_rows;
            return relu(t, fuse_linear_.forward(t, feats));
        }
        case FusionMode::convolution: {
            Tensor* feats = cfg_.use_gaze
                                ? concat_lastdim(t, tok_rows, gaze_embed_.forward(t, gaze_rows))
                                : tok_rows;
            // 1x1 convolution over channels; time runs along the columns.
            Tensor* ct = transpose(t, feats);
            return relu(t, transpose(t, fuse_conv_.forward(t, ct)));
        }
        case FusionMode::summation: {
            Tensor* base = token_proj_.forward(t, tok_rows);
            if (!cfg_.use_gaze) return base;
            return add(t, base, gaze_expand_.forward(t, gaze_rows));
        }
    }
    throw config_error("fuse: unknown fusion mode");
}

Tensor* Generator::condition_object(Tape& t, const ObjectSet& objects, bool* no_context) {
    objects.validate();
    std::vector<double> flat(static_cast<std::size_t>(kMaxObjects * kObjectCode), 0.0);
    for (std::size_t i = 0; i < objects.objects.size(); ++i) {
        const auto code = objects.objects[i].code();
        std::copy(code.begin(), code.end(), flat.begin() + i * kObjectCode);
    }
    if (no_context) *no_context = objects.objects.empty();
    Tensor* row = constant(t, {1, kMaxObjects * kObjectCode}, flat);
    return obj_proj_.forward(t, row);
}

Tensor* Generator::build_input(Tape& t, std::span<const int> tokens, const Tensor* pooled_gaze,
                               const ObjectSet& objects, bool* no_context) {
    const int n = static_cast<int>(tokens.size());
    if (n > cfg_.max_tokens) {
        throw shape_error("build_input: " + std::to_string(n) + " tokens exceed max_tokens " +
                          std::to_string(cfg_.max_tokens));
    }
    Tensor* obj_row = condition_object(t, objects, no_context);
    Tensor* x = n > 0 ? concat_rows(t, obj_row, fuse(t, tokens, pooled_gaze)) : obj_row;
    std::vector<int> positions(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) positions[static_cast<std::size_t>(i)] = i;
    return add(t, x, pos_.forward(t, positions));
}

Tensor* Generator::forward_logits(Tape& t, Tensor* x_rows) {
    Tensor* x = x_rows;
    for (auto& block : blocks_) x = block.forward(t, x);
    return head_.forward(t, final_ln_.forward(t, x));
}

Tensor* Generator::sequence_loss(Tape& t, std::span<const int> tokens, const Tensor* pooled_gaze,
                                 const ObjectSet& objects, int* correct) {
    const int n = static_cast<int>(tokens.size());
    if (n < 1) throw shape_error("sequence_loss: need at least one token");
    Tensor* x = build_input(t, tokens, pooled_gaze, objects);
    Tensor* logits = forward_logits(t, x);
    // Row i predicts tokens[i]; the last input row has no target.
    Tensor* shifted = slice_rows(t, logits, 0, n);
    std::vector<double> weights(static_cast<std::size_t>(n), 1.0);
    weights.back() = cfg_.last_weight;
    if (correct) {
        int hits = 0;
        const int k = codebook_size();
        for (int i = 0; i < n; ++i) {
            const double* row = shifted->v.data() + static_cast<std::size_t>(i) * k;
            const int arg = static_cast<int>(std::max_element(row, row + k) - row);
            hits += arg == tokens[static_cast<std::size_t>(i)] ? 1 : 0;
        }
        *correct = hits;
    }
    return cross_entropy(t, shifted, tokens, weights);
}

NamedParams Generator::named_params() {
    NamedParams out;
    pos_.collect("pos", out);
    obj_proj_.collect("obj", out);
    switch (cfg_.fusion) {
        case FusionMode::linear:
            if (cfg_.use_gaze) gaze_embed_.collect("gaze_embed", out);
            fuse_linear_.collect("fuse", out);
            break;
        case FusionMode::convolution:
            if (cfg_.use_gaze) gaze_embed_.collect("gaze_embed", out);
            fuse_conv_.collect("fuse_conv", out);
            break;
        case FusionMode::summation:
            token_proj_.collect("token_proj", out);
            if (cfg_.use_gaze) gaze_expand_.collect("gaze_expand", out);
            break;
    }
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        blocks_[i].collect("block" + std::to_string(i), out);
    }
    final_ln_.collect("final_ln", out);
    head_.collect("head", out);
    return out;
}

std::vector<double> Generator::next_logits(std::span<const int> tokens, const Tensor* pooled_gaze,
                                           const ObjectSet& objects) const {
    auto* self = const_cast<Generator*>(this);  // inference only reads parameters
    Tape t;
    Tensor* x = self->build_input(t, tokens, pooled_gaze, objects);
    Tensor* logits = self->forward_logits(t, x);
    const int k = codebook_size();
    const int last = logits->dim(0) - 1;
    std::vector<double> out(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) out[static_cast<std::size_t>(j)] = logits->at(last, j);
    return out;
}

int Generator::predict_next_index(std::span<const int> tokens, const Tensor* pooled_gaze,
                                  const ObjectSet& objects) const {
    const std::vector<double> logits = next_logits(tokens, pooled_gaze, objects);
    return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

std::vector<int> Generator::generate_tokens(std::span<const int> prefix,
                                            const Tensor* pooled_gaze_prefix,
                                            const ObjectSet& objects, int n_future) const {
    if (n_future < 1) throw param_error("generate: horizon must be >= 1 token");
    std::vector<int> tokens(prefix.begin(), prefix.end());
    Tensor gaze_rows;
    if (cfg_.use_gaze) {
        if (pooled_gaze_prefix == nullptr || pooled_gaze_prefix->dim(0) < 1) {
            throw shape_error("generate: gaze model needs pooled gaze for the prefix");
        }
        gaze_rows = *pooled_gaze_prefix;
    }
    for (int step = 0; step < n_future; ++step) {
        const int next = predict_next_index(tokens, cfg_.use_gaze ? &gaze_rows : nullptr, objects);
        tokens.push_back(next);
        if (cfg_.use_gaze) {
            // Hold the final fixation for generated steps.
            const int rows = gaze_rows.dim(0);
            Tensor grown({rows + 1, 3});
            std::copy(gaze_rows.v.begin(), gaze_rows.v.end(), grown.v.begin());
            for (int j = 0; j < 3; ++j) grown.at(rows, j) = gaze_rows.at(rows - 1, j);
            gaze_rows = std::move(grown);
        }
    }
    return std::vector<int>(tokens.begin() + static_cast<std::ptrdiff_t>(prefix.size()),
                            tokens.end());
}

Generator train_generator(const VqVae& vqvae, const Dataset& dataset,
                          std::span<const int> sample_indices, const GeneratorConfig& config,
                          GeneratorTrainLog* log) {
    config.validate();
    if (sample_indices.empty()) throw param_error("train_generator: no training samples");

    Generator gen(config, vqvae.codebook());
    const int l = vqvae.config().downsample;

    // The VQ-VAE is frozen: tokenize every training sample once.
    struct Prepared {
        std::vector<int> tokens;
        Tensor pooled_gaze;
        const ObjectSet* objects;
    };
    std::vector<Prepared> prepared;
    prepared.reserve(sample_indices.size());
    for (int i : sample_indices) {
        const auto& sample = dataset.samples[static_cast<std::size_t>(i)];
        Prepared p;
        p.tokens = vqvae.tokenize(sample.hands);
        if (config.use_gaze) {
            // Pad gaze exactly like the hand sequence: repeat the last frame.
            const int full_t = static_cast<int>(p.tokens.size()) * l;
            GazeSequence padded(full_t);
            for (int t = 0; t < full_t; ++t) {
                padded.set(t, sample.gaze.at(std::min(t, sample.gaze.length() - 1)));
            }
            p.pooled_gaze = Generator::pool_gaze(padded, l, static_cast<int>(p.tokens.size()));
        }
        p.objects = &sample.scene.objects;
        prepared.push_back(std::move(p));
    }

    NamedParams named = gen.named_params();
    AdamConfig adam_cfg;
    adam_cfg.lr = config.lr;
    Adam opt(params_of(named), adam_cfg);

    Rng rng = Rng(config.seed).fork(0x67656e74);  // training stream
    std::vector<int> order(prepared.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double progress = config.epochs > 1 ? static_cast<double>(epoch) / (config.epochs - 1) : 1.0;
        opt.set_lr(config.lr / 20.0 +
                   0.5 * (config.lr - config.lr / 20.0) * (1.0 + std::cos(3.14159265358979323846 * progress)));
        rng.shuffle(order);
        double epoch_loss = 0.0;
        std::int64_t hits = 0, positions = 0;
        int batch_index = 0;
        for (std::size_t pos = 0; pos < order.size(); ++batch_index) {
            const std::size_t batch_end =
                std::min(order.size(), pos + static_cast<std::size_t>(config.batch));
            const int batch_n = static_cast<int>(batch_end - pos);
            opt.zero_grad();
            for (; pos < batch_end; ++pos) {
                const Prepared& p = prepared[static_cast<std::size_t>(order[pos])];
                try {
                    Tape tape;
                    int correct = 0;
                    Tensor* loss = gen.sequence_loss(
                        tape, p.tokens, config.use_gaze ? &p.pooled_gaze : nullptr, *p.objects,
                        &correct);
                    epoch_loss += loss->scalar();
                    hits += correct;
                    positions += static_cast<std::int64_t>(p.tokens.size());
                    tape.backward(mul_scalar(tape, loss, 1.0 / batch_n));
                } catch (const numerics_error& e) {
                    throw train_error("generator training diverged at epoch " +
                                      std::to_string(epoch) + ", batch " +
                                      std::to_string(batch_index) + ": " + e.what());
                }
            }
            try {
                opt.step();
            } catch (const train_error& e) {
                throw train_error("generator training diverged at epoch " + std::to_string(epoch) +
                                  ", batch " + std::to_string(batch_index) + ": " + e.what());
            }
        }
        if (!std::isfinite(epoch_loss)) {
            throw train_error("generator training diverged at epoch " + std::to_string(epoch));
        }
        if (log) {
            log->epochs.push_back({epoch, epoch_loss / static_cast<double>(order.size()),
                                   static_cast<double>(hits) / static_cast<double>(positions)});
        }
    }
    return gen;
}

GenerateResult generate(const VqVae& vqvae, const Generator& gen, const MotionSequence& input,
                        const GazeSequence& gaze, const ObjectSet& objects, int n_future_tokens) {
    if (n_future_tokens < 1) throw param_error("generate: horizon must be >= 1 token");
    const int l = vqvae.config().downsample;
    const std::vector<int> prefix = vqvae.tokenize(input);
    const int n_in = static_cast<int>(prefix.size());

    Tensor pooled;
    if (gen.config().use_gaze) {
        if (gaze.length() != input.length()) {
            throw shape_error("generate: gaze and hand inputs must have the same length");
        }
        GazeSequence padded(n_in * l);
        for (int t = 0; t < n_in * l; ++t) padded.set(t, gaze.at(std::min(t, gaze.length() - 1)));
        pooled = Generator::pool_gaze(padded, l, n_in);
    }

    GenerateResult res;
    objects.validate();
    res.no_context = objects.objects.empty();
    res.tokens = gen.generate_tokens(prefix, gen.config().use_gaze ? &pooled : nullptr, objects,
                                     n_future_tokens);

    // Decode the whole token sequence so the convolutional decoder sees the
    // prefix context, then keep the predicted tail.
    std::vector<int> all_tokens = prefix;
    all_tokens.insert(all_tokens.end(), res.tokens.begin(), res.tokens.end());
    const MotionSequence full = vqvae.decode_indices(all_tokens, input.fps);
    res.frames = MotionSequence(n_future_tokens * l, input.fps);
    const int offset = n_in * l;
    for (int t = 0; t < res.frames.length(); ++t) {
        for (int d = 0; d < kPoseDim; ++d) {
            res.frames.frames.at(t, d) = full.frames.at(offset + t, d);
        }
    }
    return res;
}

}  // namespace gzm
