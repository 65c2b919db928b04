#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gzm/rng.hpp"
#include "gzm/tensor.hpp"

namespace gzm {

/// (name, parameter) pairs, used by the optimizer and the checkpoint writer.
using NamedParams = std::vector<std::pair<std::string, Tensor*>>;

inline std::vector<Tensor*> params_of(const NamedParams& named) {
    std::vector<Tensor*> ps;
    ps.reserve(named.size());
    for (const auto& [name, p] : named) ps.push_back(p);
    return ps;
}

struct LinearLayer {
    Tensor w;  // [Din,Dout]
    Tensor b;  // [Dout]

    LinearLayer() = default;
    LinearLayer(int din, int dout, Rng& rng);

    Tensor* forward(Tape& t, Tensor* x) { return linear(t, x, &w, &b); }
    void collect(const std::string& prefix, NamedParams& out) {
        out.emplace_back(prefix + ".w", &w);
        out.emplace_back(prefix + ".b", &b);
    }
};

struct Conv1dLayer {
    Tensor k;  // [Cout,Cin,kw]
    Tensor b;  // [Cout]
    int stride = 1;
    int padding = 0;

    Conv1dLayer() = default;
    Conv1dLayer(int cin, int cout, int kw, int stride, int padding, Rng& rng);

    Tensor* forward(Tape& t, Tensor* x) {
        return add_channel_bias(t, conv1d(t, x, &k, stride, padding), &b);
    }
    void collect(const std::string& prefix, NamedParams& out) {
        out.emplace_back(prefix + ".k", &k);
        out.emplace_back(prefix + ".b", &b);
    }
};

struct LayerNormLayer {
    Tensor gain;  // [D], ones
    Tensor bias;  // [D], zeros

    LayerNormLayer() = default;
    explicit LayerNormLayer(int d);

    Tensor* forward(Tape& t, Tensor* x) { return layer_norm(t, x, &gain, &bias); }
    void collect(const std::string& prefix, NamedParams& out) {
        out.emplace_back(prefix + ".gain", &gain);
        out.emplace_back(prefix + ".bias", &bias);
    }
};

struct EmbeddingTable {
    Tensor table;  // [K,D]

    EmbeddingTable() = default;
    EmbeddingTable(int k, int d, Rng& rng, double scale = 0.02);

    Tensor* forward(Tape& t, std::span<const int> idx) { return embedding_lookup(t, &table, idx); }
    void collect(const std::string& prefix, NamedParams& out) {
        out.emplace_back(prefix + ".table", &table);
    }
};

/// Fill with N(0, std) entries.
void init_normal(Tensor& x, Rng& rng, double std_dev);

}  // namespace gzm
