/* Copyright 2026 The hilots Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace hilots {

// Dense 64-bit float array, row-major. Rank is 1 or 2 for everything the
// pipeline needs; a [n] tensor behaves like [1 x n] where a matrix is
// expected.
struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<double> values;
    std::vector<double> grad;  // same size as values when requires_grad
    bool requires_grad = false;

    std::int64_t numel() const { return static_cast<std::int64_t>(values.size()); }
    std::int64_t rows() const { return shape.size() == 2 ? shape[0] : 1; }
    std::int64_t cols() const { return shape.empty() ? 0 : shape.back(); }

    double& at(std::int64_t r, std::int64_t c) { return values[r * cols() + c]; }
    double at(std::int64_t r, std::int64_t c) const { return values[r * cols() + c]; }

    void ensure_grad();
    void zero_grad();
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(std::vector<std::int64_t> shape, bool requires_grad = false);
TensorPtr make_tensor(std::vector<std::int64_t> shape, std::vector<double> values,
                      bool requires_grad = false);
TensorPtr scalar_tensor(double value, bool requires_grad = false);

// Records executed operations so backward() can replay them in reverse.
// A tape constructed with recording=false computes values only; nothing is
// recorded and no output carries a gradient (used for teacher forwards).
class Tape {
  public:
    explicit Tape(bool recording = true) : recording_(recording) {}

    bool recording() const { return recording_; }

    // Registers a backward closure for an op whose output is `out`.
    void record(TensorPtr out, std::function<void()> backward);

    // Seeds grad(loss)=1 and replays the tape in reverse topological order;
    // each recorded node runs exactly once. Rejects non-scalar roots.
    void backward(const TensorPtr& loss);

    std::size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        TensorPtr out;
        std::function<void()> back;
    };
    std::vector<Node> nodes_;
    bool recording_;
};

// ---- differentiable operations -------------------------------------------

TensorPtr matmul(Tape& tape, const TensorPtr& a, const TensorPtr& b);
// a [n x k] times b[p x k] transposed -> [n x p]
TensorPtr matmul_nt(Tape& tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr add(Tape& tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(Tape& tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(Tape& tape, const TensorPtr& a, const TensorPtr& b);
// x [n x d] plus bias [d] broadcast over rows
TensorPtr add_rowvec(Tape& tape, const TensorPtr& x, const TensorPtr& bias);
TensorPtr scale(Tape& tape, const TensorPtr& x, double c);
// s is a learnable 1-element tensor: out = s * x
TensorPtr scalar_scale(Tape& tape, const TensorPtr& s, const TensorPtr& x);
TensorPtr relu(Tape& tape, const TensorPtr& x);
// Row-wise softmax with per-row max subtraction.
TensorPtr softmax_rows(Tape& tape, const TensorPtr& x);
// ln(max(x, 1e-300)); keeps the loss finite if a probability underflows.
TensorPtr log_clamped(Tape& tape, const TensorPtr& x);
// x^p elementwise; backward is p*x^(p-1)*g, defined as 0 when p == 0.
TensorPtr pow_const(Tape& tape, const TensorPtr& x, double p);
// sqrt with subgradient 0 at x == 0 (the consistency loss sits there when
// student and teacher agree exactly).
TensorPtr sqrt_elem(Tape& tape, const TensorPtr& x);
TensorPtr sum_all(Tape& tape, const TensorPtr& x);
TensorPtr mean_all(Tape& tape, const TensorPtr& x);
// Gathers rows of x; index -1 yields a zero row and routes no gradient.
TensorPtr gather_rows(Tape& tape, const TensorPtr& x, const std::vector<std::int64_t>& idx);
// out[g] = mean over rows with group_id == g; empty groups stay zero.
TensorPtr group_mean(Tape& tape, const TensorPtr& x, const std::vector<std::int64_t>& group_id,
                     std::int64_t groups);
// out[g][c] = max over member rows; gradient flows to the first argmax row.
TensorPtr group_max(Tape& tape, const TensorPtr& x, const std::vector<std::int64_t>& group_id,
                    std::int64_t groups);
TensorPtr concat_cols(Tape& tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr concat_rows(Tape& tape, const std::vector<TensorPtr>& parts);
TensorPtr slice_cols(Tape& tape, const TensorPtr& x, std::int64_t start, std::int64_t len);
// Per-row normalization with learnable gain/bias of width d.
TensorPtr layer_norm_rows(Tape& tape, const TensorPtr& x, const TensorPtr& gain,
                          const TensorPtr& bias, double eps = 1e-5);

// ---- parameters ------------------------------------------------------------

// Named map from parameter path to tensor. Iteration order is lexicographic,
// which keeps optimizer and checkpoint traversal deterministic.
class ParameterSet {
  public:
    TensorPtr create(const std::string& name, std::vector<std::int64_t> shape,
                     const std::function<double()>& init);
    TensorPtr at(const std::string& name) const;
    bool has(const std::string& name) const;
    std::size_t size() const { return names_.size(); }

    const std::vector<std::string>& names() const { return names_; }

    void zero_grad();
    // Deep copy; the clone's tensors carry gradients only if requires_grad.
    ParameterSet clone(bool requires_grad) const;
    void copy_values_from(const ParameterSet& other);

    std::int64_t total_elements() const;

    // Versioned binary checkpoint: magic "HILO", u32 version, u32 record
    // count, then per record u32 name length, name bytes, u32 rank, u32 dims,
    // and raw little-endian 64-bit floats.
    void save(const std::string& path) const;
    static ParameterSet load(const std::string& path);

  private:
    std::vector<std::string> names_;  // sorted
    std::vector<TensorPtr> tensors_;  // parallel to names_
    std::int64_t find(const std::string& name) const;
};

// ---- gradient verification -------------------------------------------------

// Re-evaluates f under central differences for every element of every
// parameter and compares against the analytic gradients produced by one
// backward pass. f must be deterministic and return a scalar tensor.
// Returns max over elements of
// |analytic - numeric| / (|analytic| + |numeric| + 1e-12).
double finite_diff_check(const std::function<TensorPtr(Tape&)>& f, ParameterSet& params,
                         double h = 1e-5);

}  // namespace hilots
