#include "gzm/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <utility>

namespace gzm {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string shape_str(const std::vector<int>& dims) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) os << ',';
        os << dims[i];
    }
    os << ']';
    return os.str();
}

void check_finite(const Tensor* x, const char* op) {
    if (!x->all_finite()) {
        throw numerics_error(std::string(op) + ": non-finite values at operation boundary");
    }
}

void require(bool cond, const char* op, const std::string& msg) {
    if (!cond) throw shape_error(std::string(op) + ": " + msg);
}

// C (+)= op(A) * op(B). A is ar x ac, B is br x bc, both row-major.
void gemm(const double* a, int ar, int ac, bool ta, const double* b, int br, int bc, bool tb,
          double* c, bool accumulate) {
    Eigen::Map<const RowMat> ma(a, ar, ac);
    Eigen::Map<const RowMat> mb(b, br, bc);
    const int m = ta ? ac : ar;
    const int n = tb ? br : bc;
    Eigen::Map<RowMat> mc(c, m, n);
    if (!ta && !tb) {
        if (accumulate) mc.noalias() += ma * mb;
        else mc.noalias() = ma * mb;
    } else if (ta && !tb) {
        if (accumulate) mc.noalias() += ma.transpose() * mb;
        else mc.noalias() = ma.transpose() * mb;
    } else if (!ta && tb) {
        if (accumulate) mc.noalias() += ma * mb.transpose();
        else mc.noalias() = ma * mb.transpose();
    } else {
        if (accumulate) mc.noalias() += ma.transpose() * mb.transpose();
        else mc.noalias() = ma.transpose() * mb.transpose();
    }
}

constexpr double kLayerNormEps = 1e-5;

}  // namespace

int numel_of(const std::vector<int>& dims) {
    int n = 1;
    for (int d : dims) n *= d;
    return n;
}

Tensor::Tensor(std::vector<int> dims, bool req_grad) : shape(std::move(dims)), requires_grad(req_grad) {
    for (int d : shape) {
        if (d < 1) throw shape_error("tensor: dimensions must be positive, got " + shape_str(shape));
    }
    v.assign(static_cast<std::size_t>(numel_of(shape)), 0.0);
    if (requires_grad) g.assign(v.size(), 0.0);
}

Tensor::Tensor(std::vector<int> dims, std::vector<double> values, bool req_grad)
    : Tensor(std::move(dims), req_grad) {
    if (values.size() != v.size()) {
        throw shape_error("tensor: " + std::to_string(values.size()) + " values for shape " + shape_str(shape));
    }
    v = std::move(values);
}

int Tensor::numel() const { return numel_of(shape); }

double Tensor::scalar() const {
    if (!is_scalar()) throw shape_error("scalar(): tensor has shape " + shape_str(shape));
    return v[0];
}

void Tensor::fill(double x) { std::fill(v.begin(), v.end(), x); }

void Tensor::zero_grad() { std::fill(g.begin(), g.end(), 0.0); }

bool Tensor::all_finite() const {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

Tensor* Tape::make(std::vector<int> dims, bool req_grad) {
    arena_.emplace_back(std::move(dims), req_grad);
    return &arena_.back();
}

void Tape::record(const char* op, Tensor* out, std::function<void()> backward) {
    steps_.push_back(Step{op, out, std::move(backward)});
}

void Tape::backward(Tensor* loss) {
    if (!loss->is_scalar()) {
        throw shape_error("backward: loss must be scalar, got " + shape_str(loss->shape));
    }
    if (!loss->requires_grad) return;  // nothing reachable requires gradients
    loss->g[0] = 1.0;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
        if (it->fn) it->fn();
    }
}

void Tape::clear() {
    steps_.clear();
    arena_.clear();
}

std::vector<std::string> Tape::step_ops() const {
    std::vector<std::string> names;
    names.reserve(steps_.size());
    for (const auto& s : steps_) names.emplace_back(s.op);
    return names;
}

// ---------------------------------------------------------------------------

Tensor* constant(Tape& t, std::vector<int> dims, std::span<const double> values) {
    Tensor* out = t.make(std::move(dims), false);
    require(values.size() == out->v.size(), "constant",
            std::to_string(values.size()) + " values for shape " + shape_str(out->shape));
    std::copy(values.begin(), values.end(), out->v.begin());
    check_finite(out, "constant");
    return out;
}

Tensor* add(Tape& t, Tensor* a, Tensor* b) {
    require(a->shape == b->shape, "add", shape_str(a->shape) + " vs " + shape_str(b->shape));
    Tensor* out = t.make(a->shape, a->requires_grad || b->requires_grad);
    for (std::size_t i = 0; i < out->v.size(); ++i) out->v[i] = a->v[i] + b->v[i];
    check_finite(out, "add");
    if (out->requires_grad) {
        t.record("add", out, [a, b, out] {
            if (a->requires_grad)
                for (std::size_t i = 0; i < out->g.size(); ++i) a->g[i] += out->g[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < out->g.size(); ++i) b->g[i] += out->g[i];
        });
    }
    return out;
}

Tensor* sub(Tape& t, Tensor* a, Tensor* b) {
    require(a->shape == b->shape, "sub", shape_str(a->shape) + " vs " + shape_str(b->shape));
    Tensor* out = t.make(a->shape, a->requires_grad || b->requires_grad);
    for (std::size_t i = 0; i < out->v.size(); ++i) out->v[i] = a->v[i] - b->v[i];
    check_finite(out, "sub");
    if (out->requires_grad) {
        t.record("sub", out, [a, b, out] {
            if (a->requires_grad)
                for (std::size_t i = 0; i < out->g.size(); ++i) a->g[i] += out->g[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < out->g.size(); ++i) b->g[i] -= out->g[i];
        });
    }
    return out;
}

Tensor* mul(Tape& t, Tensor* a, Tensor* b) {
    require(a->shape == b->shape, "mul", shape_str(a->shape) + " vs " + shape_str(b->shape));
    Tensor* out = t.make(a->shape, a->requires_grad || b->requires_grad);
    for (std::size_t i = 0; i < out->v.size(); ++i) out->v[i] = a->v[i] * b->v[i];
    check_finite(out, "mul");
    if (out->requires_grad) {
        t.record("mul", out, [a, b, out] {
            if (a->requires_grad)
                for (std::size_t i = 0; i < out->g.size(); ++i) a->g[i] += out->g[i] * b->v[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < out->g.size(); ++i) b->g[i] += out->g[i] * a->v[i];
        });
    }
    return out;
}

Tensor* mul_scalar(Tape& t, Tensor* a, double s) {
    if (!std::isfinite(s)) throw numerics_error("mul_scalar: non-finite scalar");
    Tensor* out = t.make(a->shape, a->requires_grad);
    for (std::size_t i = 0; i < out->v.size(); ++i) out->v[i] = a->v[i] * s;
    check_finite(out, "mul_scalar");
    if (out->requires_grad) {
        t.record("mul_scalar", out, [a, out, s] {
            for (std::size_t i = 0; i < out->g.size(); ++i) a->g[i] += out->g[i] * s;
        });
    }
    return out;
}

Tensor* relu(Tape& t, Tensor* x) {
    Tensor* out = t.make(x->shape, x->requires_grad);
    for (std::size_t i = 0; i < out->v.size(); ++i) out->v[i] = x->v[i] > 0.0 ? x->v[i] : 0.0;
    if (out->requires_grad) {
        t.record("relu", out, [x, out] {
            for (std::size_t i = 0; i < out->g.size(); ++i) {
                if (x->v[i] > 0.0) x->g[i] += out->g[i];
            }
        });
    }
    return out;
}

Tensor* stop_gradient(Tape& t, Tensor* x) {
    Tensor* out = t.make(x->shape, false);
    out->v = x->v;
    return out;
}

Tensor* straight_through(Tape& t, Tensor* encoder_out, Tensor* quantized) {
    require(encoder_out->shape == quantized->shape, "straight_through",
            shape_str(encoder_out->shape) + " vs " + shape_str(quantized->shape));
    Tensor* out = t.make(quantized->shape, encoder_out->requires_grad);
    out->v = quantized->v;
    check_finite(out, "straight_through");
    if (out->requires_grad) {
        t.record("straight_through", out, [encoder_out, out] {
            for (std::size_t i = 0; i < out->g.size(); ++i) encoder_out->g[i] += out->g[i];
        });
    }
    return out;
}

Tensor* matmul(Tape& t, Tensor* a, Tensor* b) {
    require(a->rank() == 2 && b->rank() == 2, "matmul", "expects rank-2 operands");
    require(a->dim(1) == b->dim(0), "matmul", shape_str(a->shape) + " x " + shape_str(b->shape));
    const int m = a->dim(0), k = a->dim(1), n = b->dim(1);
    Tensor* out = t.make({m, n}, a->requires_grad || b->requires_grad);
    gemm(a->v.data(), m, k, false, b->v.data(), k, n, false, out->v.data(), false);
    check_finite(out, "matmul");
    if (out->requires_grad) {
        t.record("matmul", out, [a, b, out, m, k, n] {
            if (a->requires_grad)
                gemm(out->g.data(), m, n, false, b->v.data(), k, n, true, a->g.data(), true);
            if (b->requires_grad)
                gemm(a->v.data(), m, k, true, out->g.data(), m, n, false, b->g.data(), true);
        });
    }
    return out;
}

Tensor* transpose(Tape& t, Tensor* a) {
    require(a->rank() == 2, "transpose", "expects rank-2 input");
    const int r = a->dim(0), c = a->dim(1);
    Tensor* out = t.make({c, r}, a->requires_grad);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out->at(j, i) = a->at(i, j);
    if (out->requires_grad) {
        t.record("transpose", out, [a, out, r, c] {
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j) a->grad_at(i, j) += out->grad_at(j, i);
        });
    }
    return out;
}

Tensor* linear(Tape& t, Tensor* x, Tensor* w, Tensor* b) {
    require(x->rank() == 2 && w->rank() == 2 && b->rank() == 1, "linear",
            "expects x [N,Din], w [Din,Dout], b [Dout]");
    require(x->dim(1) == w->dim(0), "linear",
            "inner dims " + shape_str(x->shape) + " x " + shape_str(w->shape));
    require(w->dim(1) == b->dim(0), "linear", "bias length vs output dim");
    const int n = x->dim(0), din = x->dim(1), dout = w->dim(1);
    Tensor* out = t.make({n, dout}, x->requires_grad || w->requires_grad || b->requires_grad);
    gemm(x->v.data(), n, din, false, w->v.data(), din, dout, false, out->v.data(), false);
    for (int i = 0; i < n; ++i) {
        double* row = out->v.data() + static_cast<std::size_t>(i) * dout;
        for (int j = 0; j < dout; ++j) row[j] += b->v[static_cast<std::size_t>(j)];
    }
    check_finite(out, "linear");
    if (out->requires_grad) {
        t.record("linear", out, [x, w, b, out, n, din, dout] {
            if (x->requires_grad)
                gemm(out->g.data(), n, dout, false, w->v.data(), din, dout, true, x->g.data(), true);
            if (w->requires_grad)
                gemm(x->v.data(), n, din, true, out->g.data(), n, dout, false, w->g.data(), true);
            if (b->requires_grad) {
                for (int i = 0; i < n; ++i) {
                    const double* row = out->g.data() + static_cast<std::size_t>(i) * dout;
                    for (int j = 0; j < dout; ++j) b->g[static_cast<std::size_t>(j)] += row[j];
                }
            }
        });
    }
    return out;
}

Tensor* concat_lastdim(Tape& t, Tensor* a, Tensor* b) {
    require(a->rank() == 2 && b->rank() == 2, "concat_lastdim", "expects rank-2 inputs");
    require(a->dim(0) == b->dim(0), "concat_lastdim",
            "row counts " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    const int n = a->dim(0), p = a->dim(1), q = b->dim(1);
    Tensor* out = t.make({n, p + q}, a->requires_grad || b->requires_grad);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) out->at(i, j) = a->at(i, j);
        for (int j = 0; j < q; ++j) out->at(i, p + j) = b->at(i, j);
    }
    if (out->requires_grad) {
        t.record("concat_lastdim", out, [a, b, out, n, p, q] {
            for (int i = 0; i < n; ++i) {
                if (a->requires_grad)
                    for (int j = 0; j < p; ++j) a->grad_at(i, j) += out->grad_at(i, j);
                if (b->requires_grad)
                    for (int j = 0; j < q; ++j) b->grad_at(i, j) += out->grad_at(i, p + j);
            }
        });
    }
    return out;
}

Tensor* concat_rows(Tape& t, Tensor* a, Tensor* b) {
    require(a->rank() == 2 && b->rank() == 2, "concat_rows", "expects rank-2 inputs");
    require(a->dim(1) == b->dim(1), "concat_rows",
            "column counts " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    const int p = a->dim(0), q = b->dim(0), d = a->dim(1);
    Tensor* out = t.make({p + q, d}, a->requires_grad || b->requires_grad);
    std::copy(a->v.begin(), a->v.end(), out->v.begin());
    std::copy(b->v.begin(), b->v.end(), out->v.begin() + a->v.size());
    if (out->requires_grad) {
        t.record("concat_rows", out, [a, b, out] {
            if (a->requires_grad)
                for (std::size_t i = 0; i < a->g.size(); ++i) a->g[i] += out->g[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < b->g.size(); ++i) b->g[i] += out->g[a->g.size() + i];
        });
    }
    return out;
}

Tensor* slice_cols(Tape& t, Tensor* x, int c0, int c1) {
    require(x->rank() == 2, "slice_cols", "expects rank-2 input");
    require(0 <= c0 && c0 < c1 && c1 <= x->dim(1), "slice_cols", "bad column range");
    const int n = x->dim(0), w = c1 - c0;
    Tensor* out = t.make({n, w}, x->requires_grad);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < w; ++j) out->at(i, j) = x->at(i, c0 + j);
    if (out->requires_grad) {
        t.record("slice_cols", out, [x, out, n, w, c0] {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < w; ++j) x->grad_at(i, c0 + j) += out->grad_at(i, j);
        });
    }
    return out;
}

Tensor* slice_rows(Tape& t, Tensor* x, int r0, int r1) {
    require(x->rank() == 2, "slice_rows", "expects rank-2 input");
    require(0 <= r0 && r0 < r1 && r1 <= x->dim(0), "slice_rows", "bad row range");
    const int h = r1 - r0, d = x->dim(1);
    Tensor* out = t.make({h, d}, x->requires_grad);
    std::copy(x->v.begin() + static_cast<std::size_t>(r0) * d,
              x->v.begin() + static_cast<std::size_t>(r1) * d, out->v.begin());
    if (out->requires_grad) {
        t.record("slice_rows", out, [x, out, r0, h, d] {
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < d; ++j) x->grad_at(r0 + i, j) += out->grad_at(i, j);
        });
    }
    return out;
}

Tensor* conv1d(Tape& t, Tensor* x, Tensor* kernels, int stride, int padding) {
    require(x->rank() == 2, "conv1d", "expects x [Cin,T]");
    require(kernels->rank() == 3, "conv1d", "expects kernels [Cout,Cin,kw]");
    const int cin = x->dim(0), tin = x->dim(1);
    const int cout = kernels->dim(0), kcin = kernels->dim(1), kw = kernels->dim(2);
    require(cin == kcin, "conv1d", "input channels " + std::to_string(cin) + " vs kernel " + std::to_string(kcin));
    if (kw < 1 || stride < 1 || padding < 0) throw param_error("conv1d: kw >= 1, stride >= 1, padding >= 0 required");
    if (tin + 2 * padding < kw) {
        throw shape_error("conv1d: input length " + std::to_string(tin) + " too short for kernel " +
                          std::to_string(kw) + " with padding " + std::to_string(padding));
    }
    const int tout = (tin + 2 * padding - kw) / stride + 1;
    require(tout >= 1, "conv1d", "output length < 1");

    // im2col: cols[(ci*kw + j), to] = x[ci, to*stride + j - padding], zeros
    // outside the sequence.
    const int crows = cin * kw;
    std::vector<double> cols(static_cast<std::size_t>(crows) * tout, 0.0);
    for (int ci = 0; ci < cin; ++ci) {
        const double* xrow = x->v.data() + static_cast<std::size_t>(ci) * tin;
        for (int j = 0; j < kw; ++j) {
            double* crow = cols.data() + static_cast<std::size_t>(ci * kw + j) * tout;
            for (int to = 0; to < tout; ++to) {
                const int pos = to * stride + j - padding;
                if (pos >= 0 && pos < tin) crow[to] = xrow[pos];
            }
        }
    }
    Tensor* out = t.make({cout, tout}, x->requires_grad || kernels->requires_grad);
    gemm(kernels->v.data(), cout, crows, false, cols.data(), crows, tout, false, out->v.data(), false);
    check_finite(out, "conv1d");
    if (out->requires_grad) {
        t.record("conv1d", out,
                 [x, kernels, out, cols = std::move(cols), cin, tin, cout, kw, tout, stride, padding, crows] {
                     if (kernels->requires_grad) {
                         gemm(out->g.data(), cout, tout, false, cols.data(), crows, tout, true,
                              kernels->g.data(), true);
                     }
                     if (x->requires_grad) {
                         std::vector<double> dcols(static_cast<std::size_t>(crows) * tout);
                         gemm(kernels->v.data(), cout, crows, true, out->g.data(), cout, tout, false,
                              dcols.data(), false);
                         for (int ci = 0; ci < cin; ++ci) {
                             double* gx = x->g.data() + static_cast<std::size_t>(ci) * tin;
                             for (int j = 0; j < kw; ++j) {
                                 const double* drow = dcols.data() + static_cast<std::size_t>(ci * kw + j) * tout;
                                 for (int to = 0; to < tout; ++to) {
                                     const int pos = to * stride + j - padding;
                                     if (pos >= 0 && pos < tin) gx[pos] += drow[to];
                                 }
                             }
                         }
                     }
                 });
    }
    return out;
}

Tensor* add_channel_bias(Tape& t, Tensor* x, Tensor* b) {
    require(x->rank() == 2 && b->rank() == 1, "add_channel_bias", "expects x [C,T], b [C]");
    require(x->dim(0) == b->dim(0), "add_channel_bias", "channel counts differ");
    const int c = x->dim(0), tn = x->dim(1);
    Tensor* out = t.make(x->shape, x->requires_grad || b->requires_grad);
    for (int ci = 0; ci < c; ++ci) {
        const double bias = b->v[static_cast<std::size_t>(ci)];
        for (int ti = 0; ti < tn; ++ti) out->at(ci, ti) = x->at(ci, ti) + bias;
    }
    check_finite(out, "add_channel_bias");
    if (out->requires_grad) {
        t.record("add_channel_bias", out, [x, b, out, c, tn] {
            for (int ci = 0; ci < c; ++ci) {
                for (int ti = 0; ti < tn; ++ti) {
                    const double go = out->grad_at(ci, ti);
                    if (x->requires_grad) x->grad_at(ci, ti) += go;
                    if (b->requires_grad) b->g[static_cast<std::size_t>(ci)] += go;
                }
            }
        });
    }
    return out;
}

Tensor* nn_upsample(Tape& t, Tensor* x, int factor) {
    if (factor < 1) throw param_error("nn_upsample: factor must be >= 1");
    require(x->rank() == 2, "nn_upsample", "expects x [C,T]");
    const int c = x->dim(0), tn = x->dim(1);
    Tensor* out = t.make({c, tn * factor}, x->requires_grad);
    for (int ci = 0; ci < c; ++ci)
        for (int ti = 0; ti < tn * factor; ++ti) out->at(ci, ti) = x->at(ci, ti / factor);
    if (out->requires_grad) {
        t.record("nn_upsample", out, [x, out, c, tn, factor] {
            for (int ci = 0; ci < c; ++ci)
                for (int ti = 0; ti < tn * factor; ++ti) x->grad_at(ci, ti / factor) += out->grad_at(ci, ti);
        });
    }
    return out;
}

Tensor* embedding_lookup(Tape& t, Tensor* table, std::span<const int> indices) {
    require(table->rank() == 2, "embedding_lookup", "expects table [K,D]");
    require(!indices.empty(), "embedding_lookup", "empty index list");
    const int k = table->dim(0), d = table->dim(1);
    const int n = static_cast<int>(indices.size());
    for (int idx : indices) {
        if (idx < 0 || idx >= k) {
            throw index_error("embedding_lookup: index " + std::to_string(idx) + " outside [0," +
                              std::to_string(k) + ")");
        }
    }
    Tensor* out = t.make({n, d}, table->requires_grad);
    for (int i = 0; i < n; ++i) {
        const double* src = table->v.data() + static_cast<std::size_t>(indices[static_cast<std::size_t>(i)]) * d;
        std::copy(src, src + d, out->v.data() + static_cast<std::size_t>(i) * d);
    }
    check_finite(out, "embedding_lookup");
    if (out->requires_grad) {
        std::vector<int> idx(indices.begin(), indices.end());
        t.record("embedding_lookup", out, [table, out, idx = std::move(idx), d] {
            for (std::size_t i = 0; i < idx.size(); ++i) {
                double* dst = table->g.data() + static_cast<std::size_t>(idx[i]) * d;
                const double* src = out->g.data() + i * static_cast<std::size_t>(d);
                for (int j = 0; j < d; ++j) dst[j] += src[j];
            }
        });
    }
    return out;
}

Tensor* layer_norm(Tape& t, Tensor* x, Tensor* gain, Tensor* bias) {
    require(x->rank() == 2 && gain->rank() == 1 && bias->rank() == 1, "layer_norm",
            "expects x [N,D], gain [D], bias [D]");
    require(x->dim(1) == gain->dim(0) && x->dim(1) == bias->dim(0), "layer_norm", "width mismatch");
    const int n = x->dim(0), d = x->dim(1);
    Tensor* out = t.make(x->shape, x->requires_grad || gain->requires_grad || bias->requires_grad);
    // Cache normalized activations and inverse stddev for backward.
    std::vector<double> xhat(static_cast<std::size_t>(n) * d);
    std::vector<double> inv_std(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double* row = x->v.data() + static_cast<std::size_t>(i) * d;
        double mu = 0.0;
        for (int j = 0; j < d; ++j) mu += row[j];
        mu /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= d;
        const double is = 1.0 / std::sqrt(var + kLayerNormEps);
        inv_std[static_cast<std::size_t>(i)] = is;
        double* xh = xhat.data() + static_cast<std::size_t>(i) * d;
        double* orow = out->v.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j) {
            xh[j] = (row[j] - mu) * is;
            orow[j] = gain->v[static_cast<std::size_t>(j)] * xh[j] + bias->v[static_cast<std::size_t>(j)];
        }
    }
    check_finite(out, "layer_norm");
    if (out->requires_grad) {
        t.record("layer_norm", out,
                 [x, gain, bias, out, xhat = std::move(xhat), inv_std = std::move(inv_std), n, d] {
                     for (int i = 0; i < n; ++i) {
                         const double* go = out->g.data() + static_cast<std::size_t>(i) * d;
                         const double* xh = xhat.data() + static_cast<std::size_t>(i) * d;
                         if (gain->requires_grad)
                             for (int j = 0; j < d; ++j) gain->g[static_cast<std::size_t>(j)] += go[j] * xh[j];
                         if (bias->requires_grad)
                             for (int j = 0; j < d; ++j) bias->g[static_cast<std::size_t>(j)] += go[j];
                         if (x->requires_grad) {
                             // dxhat = go * gain; dx = (dxhat - mean(dxhat) - xhat*mean(dxhat*xhat)) * inv_std
                             double m1 = 0.0, m2 = 0.0;
                             for (int j = 0; j < d; ++j) {
                                 const double dxh = go[j] * gain->v[static_cast<std::size_t>(j)];
                                 m1 += dxh;
                                 m2 += dxh * xh[j];
                             }
                             m1 /= d;
                             m2 /= d;
                             double* gx = x->g.data() + static_cast<std::size_t>(i) * d;
                             const double is = inv_std[static_cast<std::size_t>(i)];
                             for (int j = 0; j < d; ++j) {
                                 const double dxh = go[j] * gain->v[static_cast<std::size_t>(j)];
                                 gx[j] += (dxh - m1 - xh[j] * m2) * is;
                             }
                         }
                     }
                 });
    }
    return out;
}

namespace {

// Shared softmax core: rows normalized over [0, limit(i)).
template <typename LimitFn>
Tensor* softmax_impl(Tape& t, Tensor* x, LimitFn limit, const char* op) {
    const int n = x->dim(0), k = x->dim(1);
    Tensor* out = t.make(x->shape, x->requires_grad);
    for (int i = 0; i < n; ++i) {
        const int w = limit(i);
        const double* row = x->v.data() + static_cast<std::size_t>(i) * k;
        double* orow = out->v.data() + static_cast<std::size_t>(i) * k;
        double hi = row[0];
        for (int j = 1; j < w; ++j) hi = std::max(hi, row[j]);
        double z = 0.0;
        for (int j = 0; j < w; ++j) {
            orow[j] = std::exp(row[j] - hi);
            z += orow[j];
        }
        for (int j = 0; j < w; ++j) orow[j] /= z;
    }
    check_finite(out, op);
    if (out->requires_grad) {
        t.record(op, out, [x, out, limit, n, k] {
            for (int i = 0; i < n; ++i) {
                const int w = limit(i);
                const double* p = out->v.data() + static_cast<std::size_t>(i) * k;
                const double* go = out->g.data() + static_cast<std::size_t>(i) * k;
                double dot = 0.0;
                for (int j = 0; j < w; ++j) dot += go[j] * p[j];
                double* gx = x->g.data() + static_cast<std::size_t>(i) * k;
                for (int j = 0; j < w; ++j) gx[j] += p[j] * (go[j] - dot);
            }
        });
    }
    return out;
}

}  // namespace

Tensor* softmax_rows(Tape& t, Tensor* x) {
    require(x->rank() == 2, "softmax_rows", "expects rank-2 input");
    require(x->dim(1) >= 1, "softmax_rows", "empty rows");
    const int k = x->dim(1);
    return softmax_impl(t, x, [k](int) { return k; }, "softmax_rows");
}

Tensor* causal_softmax(Tape& t, Tensor* scores) {
    require(scores->rank() == 2, "causal_softmax", "expects rank-2 input");
    require(scores->dim(0) == scores->dim(1), "causal_softmax",
            "expects square scores, got " + shape_str(scores->shape));
    // Row i only ever reads columns 0..i, so positions strictly above the
    // diagonal cannot influence outputs at or before i.
    return softmax_impl(t, scores, [](int i) { return i + 1; }, "causal_softmax");
}

Tensor* sum(Tape& t, Tensor* x) {
    Tensor* out = t.make({1}, x->requires_grad);
    double acc = 0.0;
    for (double xi : x->v) acc += xi;
    out->v[0] = acc;
    check_finite(out, "sum");
    if (out->requires_grad) {
        t.record("sum", out, [x, out] {
            const double go = out->g[0];
            for (std::size_t i = 0; i < x->g.size(); ++i) x->g[i] += go;
        });
    }
    return out;
}

Tensor* mean(Tape& t, Tensor* x) {
    Tensor* out = t.make({1}, x->requires_grad);
    double acc = 0.0;
    for (double xi : x->v) acc += xi;
    const int n = x->numel();
    out->v[0] = acc / n;
    check_finite(out, "mean");
    if (out->requires_grad) {
        t.record("mean", out, [x, out, n] {
            const double go = out->g[0] / n;
            for (std::size_t i = 0; i < x->g.size(); ++i) x->g[i] += go;
        });
    }
    return out;
}

Tensor* smooth_l1(Tape& t, Tensor* pred, Tensor* target, double beta) {
    if (beta <= 0.0) throw param_error("smooth_l1: beta must be positive");
    require(pred->shape == target->shape, "smooth_l1",
            shape_str(pred->shape) + " vs " + shape_str(target->shape));
    const int n = pred->numel();
    Tensor* out = t.make({1}, pred->requires_grad || target->requires_grad);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = pred->v[static_cast<std::size_t>(i)] - target->v[static_cast<std::size_t>(i)];
        const double ad = std::abs(d);
        acc += ad < beta ? 0.5 * d * d / beta : ad - 0.5 * beta;
    }
    out->v[0] = acc / n;
    check_finite(out, "smooth_l1");
    if (out->requires_grad) {
        t.record("smooth_l1", out, [pred, target, out, beta, n] {
            const double go = out->g[0] / n;
            for (int i = 0; i < n; ++i) {
                const double d = pred->v[static_cast<std::size_t>(i)] - target->v[static_cast<std::size_t>(i)];
                const double deriv = std::abs(d) < beta ? d / beta : (d > 0.0 ? 1.0 : -1.0);
                if (pred->requires_grad) pred->g[static_cast<std::size_t>(i)] += go * deriv;
                if (target->requires_grad) target->g[static_cast<std::size_t>(i)] -= go * deriv;
            }
        });
    }
    return out;
}

Tensor* cross_entropy(Tape& t, Tensor* logits, std::span<const int> targets,
                      std::span<const double> weights) {
    require(logits->rank() == 2, "cross_entropy", "expects logits [N,K]");
    const int n = logits->dim(0), k = logits->dim(1);
    require(static_cast<int>(targets.size()) == n, "cross_entropy", "one target per row required");
    require(static_cast<int>(weights.size()) == n, "cross_entropy", "one weight per row required");
    for (int y : targets) {
        if (y < 0 || y >= k) {
            throw index_error("cross_entropy: target " + std::to_string(y) + " outside [0," +
                              std::to_string(k) + ")");
        }
    }
    Tensor* out = t.make({1}, logits->requires_grad);
    std::vector<double> probs(static_cast<std::size_t>(n) * k);
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* row = logits->v.data() + static_cast<std::size_t>(i) * k;
        double hi = row[0];
        for (int j = 1; j < k; ++j) hi = std::max(hi, row[j]);
        double z = 0.0;
        double* prow = probs.data() + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < k; ++j) {
            prow[j] = std::exp(row[j] - hi);
            z += prow[j];
        }
        for (int j = 0; j < k; ++j) prow[j] /= z;
        const double log_z = std::log(z) + hi;
        loss += weights[static_cast<std::size_t>(i)] *
                (log_z - row[targets[static_cast<std::size_t>(i)]]);
    }
    out->v[0] = loss;
    check_finite(out, "cross_entropy");
    if (out->requires_grad) {
        std::vector<int> ys(targets.begin(), targets.end());
        std::vector<double> ws(weights.begin(), weights.end());
        t.record("cross_entropy", out,
                 [logits, out, probs = std::move(probs), ys = std::move(ys), ws = std::move(ws), n, k] {
                     const double go = out->g[0];
                     for (int i = 0; i < n; ++i) {
                         const double* prow = probs.data() + static_cast<std::size_t>(i) * k;
                         double* grow = logits->g.data() + static_cast<std::size_t>(i) * k;
                         const double w = ws[static_cast<std::size_t>(i)] * go;
                         for (int j = 0; j < k; ++j) grow[j] += w * prow[j];
                         grow[ys[static_cast<std::size_t>(i)]] -= w;
                     }
                 });
    }
    return out;
}

}  // namespace gzm
