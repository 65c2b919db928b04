#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "gzm/error.hpp"

namespace gzm {

/// Dense row-major tensor of 64-bit floats. Used both as a plain value type
/// (datasets, metrics) and as a node in a Tape-recorded computation.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;  // values, row-major
    std::vector<double> g;  // gradient; same length as v when requires_grad
    bool requires_grad = false;

    Tensor() = default;
    explicit Tensor(std::vector<int> dims, bool req_grad = false);
    Tensor(std::vector<int> dims, std::vector<double> values, bool req_grad = false);

    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    int numel() const;
    bool is_scalar() const { return numel() == 1; }

    // Rank-2 element access.
    double& at(int r, int c) { return v[static_cast<std::size_t>(r) * static_cast<std::size_t>(shape[1]) + static_cast<std::size_t>(c)]; }
    double at(int r, int c) const { return v[static_cast<std::size_t>(r) * static_cast<std::size_t>(shape[1]) + static_cast<std::size_t>(c)]; }
    double& grad_at(int r, int c) { return g[static_cast<std::size_t>(r) * static_cast<std::size_t>(shape[1]) + static_cast<std::size_t>(c)]; }

    double scalar() const;

    void fill(double x);
    void zero_grad();
    bool all_finite() const;
};

int numel_of(const std::vector<int>& dims);

/// Records operations so gradients can be propagated in reverse. Ops append
/// one closure each; backward() replays them once, in reverse creation
/// order, which is a valid topological order because an op's inputs always
/// exist before its output.
///
/// A tape owns its intermediate tensors (stable addresses). Parameters and
/// inputs live outside the tape and are referenced by the closures; their
/// gradients accumulate across backward calls until explicitly zeroed.
class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Arena-allocated intermediate, zero-initialized.
    Tensor* make(std::vector<int> dims, bool req_grad);

    /// Register the backward closure for the op that produced `out`.
    void record(const char* op, Tensor* out, std::function<void()> backward);

    /// Seed d(loss)/d(loss) = 1 and run every recorded closure in reverse.
    /// The loss must be a scalar produced on this tape.
    void backward(Tensor* loss);

    /// Drop all intermediates and recorded steps.
    void clear();

    std::size_t num_steps() const { return steps_.size(); }

    /// Op names in recording order (diagnostics and tests).
    std::vector<std::string> step_ops() const;

  private:
    struct Step {
        const char* op;
        Tensor* out;
        std::function<void()> fn;
    };
    std::deque<Tensor> arena_;
    std::vector<Step> steps_;
};

// ---------------------------------------------------------------------------
// Graph operations. Each checks shapes, computes forward values, verifies the
// result is finite, and records its backward rule on the tape.
// ---------------------------------------------------------------------------

/// Leaf holding a copy of external data. Throws numerics_error if any value
/// is non-finite: this is where raw data enters the graph.
Tensor* constant(Tape& t, std::vector<int> dims, std::span<const double> values);

Tensor* add(Tape& t, Tensor* a, Tensor* b);
Tensor* sub(Tape& t, Tensor* a, Tensor* b);
Tensor* mul(Tape& t, Tensor* a, Tensor* b);
Tensor* mul_scalar(Tape& t, Tensor* a, double s);
Tensor* relu(Tape& t, Tensor* x);

/// Values pass through; gradients do not.
Tensor* stop_gradient(Tape& t, Tensor* x);

/// Straight-through estimator: forward takes the quantized values, backward
/// routes the whole gradient to the encoder output and none to `quantized`.
Tensor* straight_through(Tape& t, Tensor* encoder_out, Tensor* quantized);

Tensor* matmul(Tape& t, Tensor* a, Tensor* b);  // [m,k] x [k,n]
Tensor* transpose(Tape& t, Tensor* a);          // rank-2

/// y = x W + b with x [N,Din], W [Din,Dout], b [Dout].
Tensor* linear(Tape& t, Tensor* x, Tensor* w, Tensor* b);

Tensor* concat_lastdim(Tape& t, Tensor* a, Tensor* b);  // [N,p] ++ [N,q] -> [N,p+q]
Tensor* concat_rows(Tape& t, Tensor* a, Tensor* b);     // [p,D] ++ [q,D] -> [p+q,D]
Tensor* slice_cols(Tape& t, Tensor* x, int c0, int c1);
Tensor* slice_rows(Tape& t, Tensor* x, int r0, int r1);

/// Cross-correlation over time: x [Cin,T], kernels [Cout,Cin,kw].
/// Output length T' = floor((T + 2*padding - kw)/stride) + 1; must be >= 1.
Tensor* conv1d(Tape& t, Tensor* x, Tensor* kernels, int stride, int padding);

/// x [C,T] + b [C] broadcast over time.
Tensor* add_channel_bias(Tape& t, Tensor* x, Tensor* b);

/// Nearest-neighbour upsampling over time: each step repeated `factor` times.
Tensor* nn_upsample(Tape& t, Tensor* x, int factor);

/// Gather rows of `table` [K,D]; backward scatter-adds into the table.
Tensor* embedding_lookup(Tape& t, Tensor* table, std::span<const int> indices);

/// Row-wise layer normalization with learned gain/bias over the last dim.
Tensor* layer_norm(Tape& t, Tensor* x, Tensor* gain, Tensor* bias);

Tensor* softmax_rows(Tape& t, Tensor* x);

/// Masked softmax for causal attention: row i is a distribution over
/// columns 0..i; columns above the diagonal are exactly zero.
Tensor* causal_softmax(Tape& t, Tensor* scores);

Tensor* sum(Tape& t, Tensor* x);   // -> scalar [1]
Tensor* mean(Tape& t, Tensor* x);  // -> scalar [1]

/// Smooth-L1 between pred and target, mean-reduced over all elements:
/// 0.5 d^2 / beta where |d| < beta, |d| - 0.5 beta otherwise.
Tensor* smooth_l1(Tape& t, Tensor* pred, Tensor* target, double beta);

/// Weighted token classification loss over logits [N,K]:
/// -sum_t w_t * log softmax(logits_t)[target_t].
Tensor* cross_entropy(Tape& t, Tensor* logits, std::span<const int> targets,
                      std::span<const double> weights);

}  // namespace gzm
