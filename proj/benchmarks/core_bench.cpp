#include <benchmark/benchmark.h>

#include "gzm/nn.hpp"
#include "gzm/optim.hpp"
#include "gzm/rng.hpp"
#include "gzm/tensor.hpp"

namespace {

using namespace gzm;

Tensor random_tensor(std::vector<int> dims, Rng& rng, double scale = 1.0, bool grad = false) {
    Tensor x(std::move(dims), grad);
    for (double& v : x.v) v = rng.normal(0.0, scale);
    return x;
}

void BM_Matmul(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng(1);
    Tensor a = random_tensor({n, n}, rng);
    Tensor b = random_tensor({n, n}, rng);
    for (auto _ : state) {
        Tape t;
        Tensor* c = matmul(t, &a, &b);
        benchmark::DoNotOptimize(c->v.data());
    }
    state.SetItemsProcessed(state.iterations() * 2LL * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

// One forward+backward through the motion encoder stack shape:
// [126,48] -> conv s2 -> [H,24] -> conv s2 -> [H,12] -> 1x1 -> [32,12].
void BM_EncoderStack(benchmark::State& state) {
    const int hidden = static_cast<int>(state.range(0));
    Rng rng(2);
    Tensor x = random_tensor({126, 48}, rng);
    Conv1dLayer c1(126, hidden, 3, 2, 1, rng);
    Conv1dLayer c2(hidden, hidden, 3, 2, 1, rng);
    Conv1dLayer proj(hidden, 32, 1, 1, 0, rng);
    for (auto _ : state) {
        Tape t;
        Tensor* h = relu(t, c1.forward(t, &x));
        Tensor* h2 = relu(t, c2.forward(t, h));
        Tensor* e = proj.forward(t, h2);
        Tensor* loss = mean(t, mul(t, e, e));
        c1.k.zero_grad();
        c1.b.zero_grad();
        c2.k.zero_grad();
        c2.b.zero_grad();
        proj.k.zero_grad();
        proj.b.zero_grad();
        t.backward(loss);
        benchmark::DoNotOptimize(loss->v[0]);
    }
}
BENCHMARK(BM_EncoderStack)->Arg(64)->Arg(128);

// Causal attention block at generator scale: 13 tokens, width 64, 4 heads.
void BM_AttentionBlock(benchmark::State& state) {
    const int tn = 13, d = 64, heads = 4, dh = d / heads;
    Rng rng(3);
    Tensor x = random_tensor({tn, d}, rng, 1.0, true);
    Tensor wq = random_tensor({d, d}, rng, 0.1, true);
    Tensor wk = random_tensor({d, d}, rng, 0.1, true);
    Tensor wv = random_tensor({d, d}, rng, 0.1, true);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (auto _ : state) {
        Tape t;
        Tensor* q = matmul(t, &x, &wq);
        Tensor* k = matmul(t, &x, &wk);
        Tensor* v = matmul(t, &x, &wv);
        Tensor* out = nullptr;
        for (int h = 0; h < heads; ++h) {
            Tensor* qh = slice_cols(t, q, h * dh, (h + 1) * dh);
            Tensor* kh = slice_cols(t, k, h * dh, (h + 1) * dh);
            Tensor* vh = slice_cols(t, v, h * dh, (h + 1) * dh);
            Tensor* att = causal_softmax(t, mul_scalar(t, matmul(t, qh, transpose(t, kh)), scale));
            Tensor* oh = matmul(t, att, vh);
            out = out ? concat_lastdim(t, out, oh) : oh;
        }
        Tensor* loss = mean(t, mul(t, out, out));
        x.zero_grad();
        wq.zero_grad();
        wk.zero_grad();
        wv.zero_grad();
        t.backward(loss);
        benchmark::DoNotOptimize(loss->v[0]);
    }
}
BENCHMARK(BM_AttentionBlock);

}  // namespace

BENCHMARK_MAIN();
