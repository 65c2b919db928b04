#include "gzm/nn.hpp"

#include <cmath>

namespace gzm {

void init_normal(Tensor& x, Rng& rng, double std_dev) {
    for (double& xi : x.v) xi = rng.normal(0.0, std_dev);
}

LinearLayer::LinearLayer(int din, int dout, Rng& rng) : w({din, dout}, true), b({dout}, true) {
    init_normal(w, rng, 1.0 / std::sqrt(static_cast<double>(din)));
}

Conv1dLayer::Conv1dLayer(int cin, int cout, int kw, int stride_, int padding_, Rng& rng)
    : k({cout, cin, kw}, true), b({cout}, true), stride(stride_), padding(padding_) {
    init_normal(k, rng, 1.0 / std::sqrt(static_cast<double>(cin * kw)));
}

LayerNormLayer::LayerNormLayer(int d) : gain({d}, true), bias({d}, true) { gain.fill(1.0); }

EmbeddingTable::EmbeddingTable(int k, int d, Rng& rng, double scale) : table({k, d}, true) {
    init_normal(table, rng, scale);
}

}  // namespace gzm
