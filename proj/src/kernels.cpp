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
#include "hilots/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace hilots::kernels {

namespace {

void s_add(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void s_sub(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void s_mul(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void s_scale(const double* x, double c, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = c * x[i];
}

void s_axpy(double c, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += c * x[i];
}

void s_relu(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void s_relu_backward(const double* x, const double* g, double* dx, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dx[i] += x[i] > 0.0 ? g[i] : 0.0;
}

// Broadcast-over-columns order: for each (i, k), sweep j. The AVX2 variant
// keeps the same order, so results match bitwise.
void s_matmul_nn(const double* a, const double* b, double* c,
                 std::size_t n, std::size_t k, std::size_t p) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = a[i * k + kk];
            if (aik == 0.0) continue;
            const double* brow = b + kk * p;
            double* crow = c + i * p;
            for (std::size_t j = 0; j < p; ++j) crow[j] += aik * brow[j];
        }
    }
}

void s_matmul_nt(const double* a, const double* b, double* c,
                 std::size_t n, std::size_t k, std::size_t p) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = a + i * k;
        for (std::size_t j = 0; j < p; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
            c[i * p + j] += acc;
        }
    }
}

void s_matmul_tn(const double* a, const double* b, double* c,
                 std::size_t k, std::size_t n, std::size_t p) {
    for (std::size_t kk = 0; kk < k; ++kk) {
        const double* arow = a + kk * n;
        const double* brow = b + kk * p;
        for (std::size_t i = 0; i < n; ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            double* crow = c + i * p;
            for (std::size_t j = 0; j < p; ++j) crow[j] += aki * brow[j];
        }
    }
}

double s_dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double s_sum(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

void s_ema(double gamma, const double* student, double* teacher, std::size_t n) {
    const double w = 1.0 - gamma;
    for (std::size_t i = 0; i < n; ++i) teacher[i] = gamma * teacher[i] + w * student[i];
}

void s_adamw(double* param, const double* grad, double* m, double* v,
             std::size_t n, double lr, double beta1, double beta2,
             double eps, double weight_decay, double bc1, double bc2) {
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grad[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * (g * g);
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        param[i] -= lr * (m_hat / (std::sqrt(v_hat) + eps) + weight_decay * param[i]);
    }
}

const Ops kScalar = {
    "scalar", s_add,       s_sub,       s_mul,    s_scale, s_axpy,
    s_relu,   s_relu_backward, s_matmul_nn, s_matmul_nt, s_matmul_tn,
    s_dot,    s_sum,       s_ema,       s_adamw,
};

const Ops* g_active = nullptr;

const Ops* pick_default() {
    if (const char* env = std::getenv("HILOTS_KERNELS")) {
        const std::string want(env);
        if (want == "scalar") return &scalar_ops();
        if (want == "avx2") return &avx2_ops();
    }
    return avx2_available() ? &avx2_ops() : &scalar_ops();
}

}  // namespace

const Ops& scalar_ops() { return kScalar; }

const Ops& active() {
    if (g_active == nullptr) g_active = pick_default();
    return *g_active;
}

void select(const std::string& name) {
    if (name == "scalar") {
        g_active = &scalar_ops();
    } else if (name == "avx2") {
        if (!avx2_available()) throw std::runtime_error("kernels: avx2 not available on this cpu");
        g_active = &avx2_ops();
    } else if (name == "auto") {
        g_active = pick_default();
    } else {
        throw std::invalid_argument("kernels: unknown variant '" + name + "'");
    }
}

}  // namespace hilots::kernels
