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
#include "hilots/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "hilots/kernels.hpp"

namespace hilots {

namespace {

std::int64_t shape_numel(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (auto d : shape) {
        if (d < 0) throw std::invalid_argument("tensor: negative dimension");
        n *= d;
    }
    return n;
}

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

bool want_grad(const Tape& tape, std::initializer_list<const TensorPtr*> inputs) {
    if (!tape.recording()) return false;
    for (const TensorPtr* t : inputs) {
        if (*t && (*t)->requires_grad) return true;
    }
    return false;
}

const kernels::Ops& K() { return kernels::active(); }

}  // namespace

void Tensor::ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
}

void Tensor::zero_grad() {
    if (requires_grad) grad.assign(values.size(), 0.0);
}

TensorPtr make_tensor(std::vector<std::int64_t> shape, bool requires_grad) {
    auto t = std::make_shared<Tensor>();
    const std::int64_t n = shape_numel(shape);
    t->shape = std::move(shape);
    t->values.assign(static_cast<std::size_t>(n), 0.0);
    t->requires_grad = requires_grad;
    if (requires_grad) t->ensure_grad();
    return t;
}

TensorPtr make_tensor(std::vector<std::int64_t> shape, std::vector<double> values,
                      bool requires_grad) {
    const std::int64_t n = shape_numel(shape);
    require(n == static_cast<std::int64_t>(values.size()), "tensor: value count does not match shape");
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->values = std::move(values);
    t->requires_grad = requires_grad;
    if (requires_grad) t->ensure_grad();
    return t;
}

TensorPtr scalar_tensor(double value, bool requires_grad) {
    return make_tensor({1}, {value}, requires_grad);
}

void Tape::record(TensorPtr out, std::function<void()> backward) {
    if (!recording_) return;
    nodes_.push_back(Node{std::move(out), std::move(backward)});
}

void Tape::backward(const TensorPtr& loss) {
    require(loss != nullptr, "backward: null loss");
    if (loss->numel() != 1) throw std::invalid_argument("backward: root must be a scalar");
    if (!loss->requires_grad) return;  // loss is a constant; all gradients are zero
    loss->ensure_grad();
    loss->grad[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->out->requires_grad) it->back();
    }
}

// ---- op helpers -------------------------------------------------------------

namespace {

TensorPtr new_output(Tape& tape, std::vector<std::int64_t> shape,
                     std::initializer_list<const TensorPtr*> inputs) {
    return make_tensor(std::move(shape), want_grad(tape, inputs));
}

}  // namespace

TensorPtr matmul(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
    require(a->shape.size() == 2 && b->shape.size() == 2, "matmul: operands must be rank 2");
    const std::int64_t n = a->shape[0], k = a->shape[1], p = b->shape[1];
    require(b->shape[0] == k, "matmul: inner dimensions disagree");
    auto out = new_output(tape, {n, p}, {&a, &b});
    K().matmul_nn(a->values.data(), b->values.data(), out->values.data(),
                  static_cast<std::size_t>(n), static_cast<std::size_t>(k),
                  static_cast<std::size_t>(p));
    tape.record(out, [a, b, out, n, k, p] {
        if (a->requires_grad) {
            a->ensure_grad();
            // dA += G * B^T
            K().matmul_nt(out->grad.data(), b->values.data(), a->grad.data(),
                          static_cast<std::size_t>(n), static_cast<std::size_t>(p),
                          static_cast<std::size_t>(k));
        }
        if (b->requires_grad) {
            b->ensure_grad();
            // dB += A^T * G
            K().matmul_tn(a->values.data(), out->grad.data(), b->grad.data(),
                          static_cast<std::size_t>(n), static_cast<std::size_t>(k),
                          static_cast<std::size_t>(p));
        }
    });
    return out;
}

TensorPtr matmul_nt(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
    require(a->shape.size() == 2 && b->shape.size() == 2, "matmul_nt: operands must be rank 2");
    const std::int64_t n = a->shape[0], k = a->shape[1], p = b->shape[0];
    require(b->shape[1] == k, "matmul_nt: inner dimensions disagree");
    auto out = new_output(tape, {n, p}, {&a, &b});
    K().matmul_nt(a->values.data(), b->values.data(), out->values.data(),
                  static_cast<std::size_t>(n), static_cast<std::size_t>(k),
                  static_cast<std::size_t>(p));
    tape.record(out, [a, b, out, n, k, p] {
        if (a->requires_grad) {
            a->ensure_grad();
            // L = A B^T: dA += G * B
            K().matmul_nn(out->grad.data(), b->values.data(), a->grad.data(),
                          static_cast<std::size_t>(n), static_cast<std::size_t>(p),
                          static_cast<std::size_t>(k));
        }
        if (b->requires_grad) {
            b->ensure_grad();
            // dB += G^T * A
            K().matmul_tn(out->grad.data(), a->values.data(), b->grad.data(),
                          static_cast<std::size_t>(n), static_cast<std::size_t>(p),
                          static_cast<std::size_t>(k));
        }
    });
    return out;
}

TensorPtr add(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
    require(same_shape(*a, *b), "add: shape mismatch");
    auto out = new_output(tape, a->shape, {&a, &b});
    K().add(a->values.data(), b->values.data(), out->values.data(), out->values.size());
    tape.record(out, [a, b, out] {
        if (a->requires_grad) {
            a->ensure_grad();
            K().axpy(1.0, out->grad.data(), a->grad.data(), a->grad.size());
        }
        if (b->requires_grad) {
            b->ensure_grad();
            K().axpy(1.0, out->grad.data(), b->grad.data(), b->grad.size());
        }
    });
    return out;
}

TensorPtr sub(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
    require(same_shape(*a, *b), "sub: shape mismatch");
    auto out = new_output(tape, a->shape, {&a, &b});
    K().sub(a->values.data(), b->values.data(), out->values.data(), out->values.size());
    tape.record(out, [a, b, out] {
        if (a->requires_grad) {
            a->ensure_grad();
            K().axpy(1.0, out->grad.data(), a->grad.data(), a->grad.size());
        }
        if (b->requires_grad) {
            b->ensure_grad();
            K().axpy(-1.0, out->grad.data(), b->grad.data(), b->grad.size());
        }
    });
    return out;
}

TensorPtr mul(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
    require(same_shape(*a, *b), "mul: shape mismatch");
    auto out = new_output(tape, a->shape, {&a, &b});
    K().mul(a->values.data(), b->values.data(), out->values.data(), out->values.size());
    tape.record(out, [a, b, out] {
        const std::size_t n = out->values.size();
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) a->grad[i] += out->grad[i] * b->values[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) b->grad[i] += out->grad[i] * a->values[i];
        }
    });
    return out;
}

TensorPtr add_rowvec(Tape& tape, const TensorPtr& x, const TensorPtr& bias) {
    require(x->shape.size() == 2, "add_rowvec: x must be rank 2");
    const std::int64_t n = x->shape[0], d = x->shape[1];
    require(bias->numel() == d, "add_rowvec: bias width mismatch");
    auto out = new_output(tape, x->shape, {&x, &bias});
    for (std::int64_t i = 0; i < n; ++i) {
        K().add(x->values.data() + i * d, bias->values.data(), out->values.data() + i * d,
                static_cast<std::size_t>(d));
    }
    tape.record(out, [x, bias, out, n, d] {
        if (x->requires_grad) {
            x->ensure_grad();
            K().axpy(1.0, out->grad.data(), x->grad.data(), x->grad.size());
        }
        if (bias->requires_grad) {
            bias->ensure_grad();
            for (std::int64_t i = 0; i < n; ++i) {
                K().axpy(1.0, out->grad.data() + i * d, bias->grad.data(),
                         static_cast<std::size_t>(d));
            }
        }
    });
    return out;
}

TensorPtr scale(Tape& tape, const TensorPtr& x, double c) {
    auto out = new_output(tape, x->shape, {&x});
    K().scale(x->values.data(), c, out->values.data(), out->values.size());
    tape.record(out, [x, out, c] {
        if (x->requires_grad) {
            x->ensure_grad();
            K().axpy(c, out->grad.data(), x->grad.data(), x->grad.size());
        }
    });
    return out;
}

TensorPtr scalar_scale(Tape& tape, const TensorPtr& s, const TensorPtr& x) {
    require(s->numel() == 1, "scalar_scale: s must hold one element");
    auto out = new_output(tape, x->shape, {&s, &x});
    K().scale(x->values.data(), s->values[0], out->values.data(), out->values.size());
    tape.record(out, [s, x, out] {
        if (x->requires_grad) {
            x->ensure_grad();
            K().axpy(s->values[0], out->grad.data(), x->grad.data(), x->grad.size());
        }
        if (s->requires_grad) {
            s->ensure_grad();
            s->grad[0] += K().dot(out->grad.data(), x->values.data(), x->values.size());
        }
    });
    return out;
}

TensorPtr relu(Tape& tape, const TensorPtr& x) {
    auto out = new_output(tape, x->shape, {&x});
    K().relu(x->values.data(), out->values.data(), out->values.size());
    tape.record(out, [x, out] {
        if (x->requires_grad) {
            x->ensure_grad();
            K().relu_backward(x->values.data(), out->grad.data(), x->grad.data(), x->grad.size());
        }
    });
    return out;
}

TensorPtr softmax_rows(Tape& tape, const TensorPtr& x) {
    require(x->shape.size() == 2, "softmax_rows: x must be rank 2");
    const std::int64_t n = x->shape[0], d = x->shape[1];
    require(d >= 1, "softmax_rows: empty rows");
    auto out = new_output(tape, x->shape, {&x});
    for (std::int64_t i = 0; i < n; ++i) {
        const double* xi = x->values.data() + i * d;
        double* yi = out->values.data() + i * d;
        double mx = xi[0];
        for (std::int64_t j = 1; j < d; ++j) mx = std::max(mx, xi[j]);
        double total = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
            yi[j] = std::exp(xi[j] - mx);
            total += yi[j];
        }
        const double inv = 1.0 / total;
        for (std::int64_t j = 0; j < d; ++j) yi[j] *= inv;
    }
    tape.record(out, [x, out, n, d] {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (std::int64_t i = 0; i < n; ++i) {
            const double* y = out->values.data() + i * d;
            const double* g = out->grad.data() + i * d;
            double dotgy = 0.0;
            for (std::int64_t j = 0; j < d; ++j) dotgy += g[j] * y[j];
            double* dx = x->grad.data() + i * d;
            for (std::int64_t j = 0; j < d; ++j) dx[j] += y[j] * (g[j] - dotgy);
        }
    });
    return out;
}

TensorPtr log_clamped(Tape& tape, const TensorPtr& x) {
    static constexpr double kFloor = 1e-300;
    auto out = new_output(tape, x->shape, {&x});
    for (std::size_t i = 0; i < x->values.size(); ++i) {
        out->values[i] = std::log(std::max(x->values[i], kFloor));
    }
    tape.record(out, [x, out] {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < x->values.size(); ++i) {
            x->grad[i] += out->grad[i] / std::max(x->values[i], kFloor);
        }
    });
    return out;
}

TensorPtr pow_const(Tape& tape, const TensorPtr& x, double p) {
    auto out = new_output(tape, x->shape, {&x});
    for (std::size_t i = 0; i < x->values.size(); ++i) out->values[i] = std::pow(x->values[i], p);
    tape.record(out, [x, out, p] {
        if (!x->requires_grad || p == 0.0) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < x->values.size(); ++i) {
            x->grad[i] += out->grad[i] * p * std::pow(x->values[i], p - 1.0);
        }
    });
    return out;
}

TensorPtr sqrt_elem(Tape& tape, const TensorPtr& x) {
    auto out = new_output(tape, x->shape, {&x});
    for (std::size_t i = 0; i < x->values.size(); ++i) out->values[i] = std::sqrt(x->values[i]);
    tape.record(out, [x, out] {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < x->values.size(); ++i) {
            if (out->values[i] > 0.0) x->grad[i] += out->grad[i] * 0.5 / out->values[i];
        }
    });
    return out;
}

TensorPtr sum_all(Tape& tape, const TensorPtr& x) {
    auto out = new_output(tape, {1}, {&x});
    out->values[0] = K().sum(x->values.data(), x->values.size());
    tape.record(out, [x, out] {
        if (!x->requires_grad) return;
        x->ensure_grad();
        const double g = out->grad[0];
        for (auto& v : x->grad) v += g;
    });
    return out;
}

TensorPtr mean_all(Tape& tape, const TensorPtr& x) {
    require(x->numel() > 0, "mean_all: empty tensor");
    return scale(tape, sum_all(tape, x), 1.0 / static_cast<double>(x->numel()));
}

TensorPtr gather_rows(Tape& tape, const TensorPtr& x, const std::vector<std::int64_t>& idx) {
    require(x->shape.size() == 2, "gather_rows: x must be rank 2");
    const std::int64_t m = x->shape[0], d = x->shape[1];
    for (auto i : idx) {
        require(i >= -1 && i < m, "gather_rows: index out of bounds");
    }
    auto out = new_output(tape, {static_cast<std::int64_t>(idx.size()), d}, {&x});
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] < 0) continue;  // missing row stays zero
        std::memcpy(out->values.data() + r * d, x->values.data() + idx[r] * d,
                    sizeof(double) * static_cast<std::size_t>(d));
    }
    tape.record(out, [x, out, idx, d] {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (std::size_t r = 0; r < idx.size(); ++r) {
            if (idx[r] < 0) continue;
            K().axpy(1.0, out->grad.data() + r * d, x->grad.data() + idx[r] * d,
                     static_cast<std::size_t>(d));
        }
    });
    return out;
}

TensorPtr group_mean(Tape& tape, const TensorPtr& x, const std::vector<std::int64_t>& group_id,
                     std::int64_t groups) {
    require(x->shape.size() == 2, "group_mean: x must be rank 2");
    const std::int64_t n = x->shape[0], d = x->shape[1];
    require(static_cast<std::int64_t>(group_id.size()) == n, "group_mean: group id count mismatch");
    std::vector<std::int64_t> count(static_cast<std::size_t>(groups), 0);
    for (auto g : group_id) {
        require(g >= 0 && g < groups, "group_mean: group id out of range");
        ++count[static_cast<std::size_t>(g)];
    }
    auto out = new_output(tape, {groups, d}, {&x});
    for (std::int64_t r = 0; r < n; ++r) {
        K().axpy(1.0, x->values.data() + r * d, out->values.data() + group_id[r] * d,
                 static_cast<std::size_t>(d));
    }
    for (std::int64_t g = 0; g < groups; ++g) {
        if (count[g] > 1) {
            K().scale(out->values.data() + g * d, 1.0 / static_cast<double>(count[g]),
                      out->values.data() + g * d, static_cast<std::size_t>(d));
        }
    }
    tape.record(out, [x, out, group_id, count, d] {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (std::size_t r = 0; r < group_id.size(); ++r) {
            const auto g = group_id[r];
            K().axpy(1.0 / static_cast<double>(count[g]), out->grad.data() + g * d,
                     x->grad.data() + static_cast<std::int64_t>(r) * d, static_cast<std::size_t>(d));
        }
    });
    return out;
}

TensorPtr group_max(Tape& tape, const TensorPtr& x, const std::vector<std::int64_t>& group_id,
                    std::int64_t groups) {
    require(x->shape.size() == 2, "group_max: x must be rank 2");
    const std::int64_t n = x->shape[0], d = x->shape[1];
    require(static_cast<std::int64_t>(group_id.size()) == n, "group_max: group id count mismatch");
    auto out = new_output(tape, {groups, d}, {&x});
    // argmax rows per (group, column); first row wins ties so gradients are
    // deterministic
    auto argmax = std::make_shared<std::vector<std::int64_t>>(
        static_cast<std::size_t>(groups * d), -1);
    for (std::int64_t r = 0; r < n; ++r) {
        const std::int64_t g = group_id[r];
        require(g >= 0 && g < groups, "group_max: group id out of range");
        for (std::int64_t c = 0; c < d; ++c) {
            const double v = x->values[r * d + c];
            auto& slot = (*argmax)[g * d + c];
            if (slot < 0 || v > out->values[g * d + c]) {
                slot = r;
                out->values[g * d + c] = v;
            }
        }
    }
    tape.record(out, [x, out, argmax, groups, d] {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (std::int64_t g = 0; g < groups; ++g) {
            for (std::int64_t c = 0; c < d; ++c) {
                const std::int64_t r = (*argmax)[g * d + c];
                if (r >= 0) x->grad[r * d + c] += out->grad[g * d + c];
            }
        }
    });
    return out;
}

TensorPtr concat_cols(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
    require(a->shape.size() == 2 && b->shape.size() == 2, "concat_cols: operands must be rank 2");
    require(a->shape[0] == b->shape[0], "concat_cols: row counts differ");
    const std::int64_t n = a->shape[0], da = a->shape[1], db = b->shape[1];
    auto out = new_output(tape, {n, da + db}, {&a, &b});
    for (std::int64_t i = 0; i < n; ++i) {
        std::memcpy(out->values.data() + i * (da + db), a->values.data() + i * da,
                    sizeof(double) * static_cast<std::size_t>(da));
        std::memcpy(out->values.data() + i * (da + db) + da, b->values.data() + i * db,
                    sizeof(double) * static_cast<std::size_t>(db));
    }
    tape.record(out, [a, b, out, n, da, db] {
        for (std::int64_t i = 0; i < n; ++i) {
            const double* g = out->grad.data() + i * (da + db);
            if (a->requires_grad) {
                a->ensure_grad();
                K().axpy(1.0, g, a->grad.data() + i * da, static_cast<std::size_t>(da));
            }
            if (b->requires_grad) {
                b->ensure_grad();
                K().axpy(1.0, g + da, b->grad.data() + i * db, static_cast<std::size_t>(db));
            }
        }
    });
    return out;
}

TensorPtr concat_rows(Tape& tape, const std::vector<TensorPtr>& parts) {
    require(!parts.empty(), "concat_rows: no parts");
    const std::int64_t d = parts[0]->shape.size() == 2 ? parts[0]->shape[1] : parts[0]->numel();
    std::int64_t total = 0;
    bool grad = false;
    for (const auto& p : parts) {
        require(p->shape.size() == 2 && p->shape[1] == d, "concat_rows: column widths differ");
        total += p->shape[0];
        grad = grad || p->requires_grad;
    }
    auto out = make_tensor({total, d}, tape.recording() && grad);
    std::int64_t row = 0;
    for (const auto& p : parts) {
        std::memcpy(out->values.data() + row * d, p->values.data(),
                    sizeof(double) * p->values.size());
        row += p->shape[0];
    }
    tape.record(out, [parts, out, d] {
        std::int64_t row = 0;
        for (const auto& p : parts) {
            if (p->requires_grad) {
                p->ensure_grad();
                K().axpy(1.0, out->grad.data() + row * d, p->grad.data(), p->grad.size());
            }
            row += p->shape[0];
        }
    });
    return out;
}

TensorPtr slice_cols(Tape& tape, const TensorPtr& x, std::int64_t start, std::int64_t len) {
    require(x->shape.size() == 2, "slice_cols: x must be rank 2");
    const std::int64_t n = x->shape[0], d = x->shape[1];
    require(start >= 0 && len >= 1 && start + len <= d, "slice_cols: range out of bounds");
    auto out = new_output(tape, {n, len}, {&x});
    for (std::int64_t i = 0; i < n; ++i) {
        std::memcpy(out->values.data() + i * len, x->values.data() + i * d + start,
                    sizeof(double) * static_cast<std::size_t>(len));
    }
    tape.record(out, [x, out, start, len, n, d] {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (std::int64_t i = 0; i < n; ++i) {
            K().axpy(1.0, out->grad.data() + i * len, x->grad.data() + i * d + start,
                     static_cast<std::size_t>(len));
        }
    });
    return out;
}

TensorPtr layer_norm_rows(Tape& tape, const TensorPtr& x, const TensorPtr& gain,
                          const TensorPtr& bias, double eps) {
    require(x->shape.size() == 2, "layer_norm_rows: x must be rank 2");
    const std::int64_t n = x->shape[0], d = x->shape[1];
    require(gain->numel() == d && bias->numel() == d, "layer_norm_rows: gain/bias width mismatch");
    auto out = new_output(tape, x->shape, {&x, &gain, &bias});
    auto normalized = std::make_shared<std::vector<double>>(x->values.size());
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        const double* xi = x->values.data() + i * d;
        double mean = 0.0;
        for (std::int64_t j = 0; j < d; ++j) mean += xi[j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
            const double c = xi[j] - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + eps);
        (*inv_std)[i] = inv;
        double* xh = normalized->data() + i * d;
        double* yi = out->values.data() + i * d;
        for (std::int64_t j = 0; j < d; ++j) {
            xh[j] = (xi[j] - mean) * inv;
            yi[j] = xh[j] * gain->values[j] + bias->values[j];
        }
    }
    tape.record(out, [x, gain, bias, out, normalized, inv_std, n, d] {
        for (std::int64_t i = 0; i < n; ++i) {
            const double* g = out->grad.data() + i * d;
            const double* xh = normalized->data() + i * d;
            if (gain->requires_grad) {
                gain->ensure_grad();
                for (std::int64_t j = 0; j < d; ++j) gain->grad[j] += g[j] * xh[j];
            }
            if (bias->requires_grad) {
                bias->ensure_grad();
                for (std::int64_t j = 0; j < d; ++j) bias->grad[j] += g[j];
            }
            if (x->requires_grad) {
                x->ensure_grad();
                double mean_gy = 0.0, mean_gyxh = 0.0;
                for (std::int64_t j = 0; j < d; ++j) {
                    const double gy = g[j] * gain->values[j];
                    mean_gy += gy;
                    mean_gyxh += gy * xh[j];
                }
                mean_gy /= static_cast<double>(d);
                mean_gyxh /= static_cast<double>(d);
                const double inv = (*inv_std)[i];
                double* dx = x->grad.data() + i * d;
                for (std::int64_t j = 0; j < d; ++j) {
                    const double gy = g[j] * gain->values[j];
                    dx[j] += inv * (gy - mean_gy - xh[j] * mean_gyxh);
                }
            }
        }
    });
    return out;
}

// ---- ParameterSet -----------------------------------------------------------

std::int64_t ParameterSet::find(const std::string& name) const {
    auto it = std::lower_bound(names_.begin(), names_.end(), name);
    if (it == names_.end() || *it != name) return -1;
    return it - names_.begin();
}

TensorPtr ParameterSet::create(const std::string& name, std::vector<std::int64_t> shape,
                               const std::function<double()>& init) {
    require(!name.empty(), "parameter: empty name");
    if (find(name) >= 0) throw std::invalid_argument("parameter already exists: " + name);
    auto t = make_tensor(std::move(shape), true);
    require(t->numel() > 0, "parameter: zero-sized tensor");
    for (auto& v : t->values) v = init();
    auto it = std::lower_bound(names_.begin(), names_.end(), name);
    const auto pos = it - names_.begin();
    names_.insert(it, name);
    tensors_.insert(tensors_.begin() + pos, t);
    return t;
}

TensorPtr ParameterSet::at(const std::string& name) const {
    const auto pos = find(name);
    if (pos < 0) throw std::out_of_range("parameter not found: " + name);
    return tensors_[static_cast<std::size_t>(pos)];
}

bool ParameterSet::has(const std::string& name) const { return find(name) >= 0; }

void ParameterSet::zero_grad() {
    for (auto& t : tensors_) t->zero_grad();
}

ParameterSet ParameterSet::clone(bool requires_grad) const {
    ParameterSet copy;
    copy.names_ = names_;
    copy.tensors_.reserve(tensors_.size());
    for (const auto& t : tensors_) {
        copy.tensors_.push_back(make_tensor(t->shape, t->values, requires_grad));
    }
    return copy;
}

void ParameterSet::copy_values_from(const ParameterSet& other) {
    require(names_ == other.names_, "parameter sets name mismatch");
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
        require(tensors_[i]->shape == other.tensors_[i]->shape, "parameter shape mismatch");
        tensors_[i]->values = other.tensors_[i]->values;
    }
}

std::int64_t ParameterSet::total_elements() const {
    std::int64_t n = 0;
    for (const auto& t : tensors_) n += t->numel();
    return n;
}

namespace {

void write_u32(std::ofstream& f, std::uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::ifstream& f, const std::string& path) {
    std::uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!f) throw std::runtime_error("checkpoint truncated: " + path);
    return v;
}

}  // namespace

void ParameterSet::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    f.write("HILO", 4);
    write_u32(f, 1u);  // format version
    write_u32(f, static_cast<std::uint32_t>(names_.size()));
    for (std::size_t i = 0; i < names_.size(); ++i) {
        const auto& name = names_[i];
        const auto& t = tensors_[i];
        write_u32(f, static_cast<std::uint32_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(f, static_cast<std::uint32_t>(t->shape.size()));
        for (auto d : t->shape) write_u32(f, static_cast<std::uint32_t>(d));
        f.write(reinterpret_cast<const char*>(t->values.data()),
                static_cast<std::streamsize>(sizeof(double) * t->values.size()));
    }
    if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

ParameterSet ParameterSet::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4] = {};
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "HILO", 4) != 0) {
        throw std::runtime_error("not a hilots checkpoint: " + path);
    }
    const std::uint32_t version = read_u32(f, path);
    if (version != 1u) throw std::runtime_error("unsupported checkpoint version: " + path);
    const std::uint32_t count = read_u32(f, path);
    ParameterSet ps;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = read_u32(f, path);
        std::string name(name_len, '\0');
        f.read(name.data(), name_len);
        const std::uint32_t rank = read_u32(f, path);
        std::vector<std::int64_t> shape(rank);
        std::int64_t numel = 1;
        for (auto& d : shape) {
            d = read_u32(f, path);
            numel *= d;
        }
        std::vector<double> values(static_cast<std::size_t>(numel));
        f.read(reinterpret_cast<char*>(values.data()),
               static_cast<std::streamsize>(sizeof(double) * values.size()));
        if (!f) throw std::runtime_error("checkpoint truncated: " + path);
        ps.create(name, std::move(shape), [] { return 0.0; });
        ps.at(name)->values = std::move(values);
    }
    return ps;
}

// ---- finite differences -----------------------------------------------------

double finite_diff_check(const std::function<TensorPtr(Tape&)>& f, ParameterSet& params,
                         double h) {
    params.zero_grad();
    Tape tape;
    auto loss = f(tape);
    tape.backward(loss);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const auto& name : params.names()) {
        auto t = params.at(name);
        t->ensure_grad();
        analytic.push_back(t->grad);
    }

    double worst = 0.0;
    std::size_t pi = 0;
    for (const auto& name : params.names()) {
        auto t = params.at(name);
        for (std::size_t i = 0; i < t->values.size(); ++i) {
            const double saved = t->values[i];
            t->values[i] = saved + h;
            Tape plus(false);
            const double fp = f(plus)->values[0];
            t->values[i] = saved - h;
            Tape minus(false);
            const double fm = f(minus)->values[0];
            t->values[i] = saved;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[pi][i];
            const double rel = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + 1e-12);
            worst = std::max(worst, rel);
        }
        ++pi;
    }
    return worst;
}

}  // namespace hilots
