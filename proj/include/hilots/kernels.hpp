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

#include <cstddef>
#include <string>

namespace hilots::kernels {

// Double-precision inner-loop kernels. Every entry has a scalar reference
// implementation and (on x86-64 with AVX2) a vectorized variant. The two
// variants of each elementwise kernel, matmul_nn and matmul_tn are
// bitwise-identical because the per-element operation order matches and the
// build disables FP contraction; dot/sum/matmul_nt reorder accumulation and
// only agree to rounding.
struct Ops {
    const char* name;

    // out[i] = a[i] (+,-,*) b[i]
    void (*add)(const double* a, const double* b, double* out, std::size_t n);
    void (*sub)(const double* a, const double* b, double* out, std::size_t n);
    void (*mul)(const double* a, const double* b, double* out, std::size_t n);
    // out[i] = c * x[i]
    void (*scale)(const double* x, double c, double* out, std::size_t n);
    // y[i] += c * x[i]
    void (*axpy)(double c, const double* x, double* y, std::size_t n);
    // out[i] = x[i] > 0 ? x[i] : 0
    void (*relu)(const double* x, double* out, std::size_t n);
    // dx[i] += x[i] > 0 ? g[i] : 0
    void (*relu_backward)(const double* x, const double* g, double* dx, std::size_t n);

    // c[n x p] += a[n x k] * b[k x p]
    void (*matmul_nn)(const double* a, const double* b, double* c,
                      std::size_t n, std::size_t k, std::size_t p);
    // c[n x p] += a[n x k] * b[p x k]^T
    void (*matmul_nt)(const double* a, const double* b, double* c,
                      std::size_t n, std::size_t k, std::size_t p);
    // c[n x p] += a[k x n]^T * b[k x p]
    void (*matmul_tn)(const double* a, const double* b, double* c,
                      std::size_t k, std::size_t n, std::size_t p);

    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*sum)(const double* x, std::size_t n);

    // teacher[i] = gamma * teacher[i] + (1 - gamma) * student[i]
    void (*ema)(double gamma, const double* student, double* teacher, std::size_t n);

    // Fused decoupled-weight-decay adaptive update. bc1/bc2 are the bias
    // corrections (1 - beta^step) for the current step.
    void (*adamw)(double* param, const double* grad, double* m, double* v,
                  std::size_t n, double lr, double beta1, double beta2,
                  double eps, double weight_decay, double bc1, double bc2);
};

const Ops& scalar_ops();
// Returns the AVX2 table, or the scalar table when the CPU (or build) lacks AVX2.
const Ops& avx2_ops();
bool avx2_available();

// Active table. Selected once: HILOTS_KERNELS=scalar|avx2 overrides, otherwise
// the best available variant is used.
const Ops& active();
// Test hook; accepts "scalar", "avx2" or "auto".
void select(const std::string& name);

}  // namespace hilots::kernels
