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

// AVX2 kernel variants. This translation unit is built with -mavx2; nothing
// here runs unless the dispatcher confirmed CPU support. Elementwise kernels,
// matmul_nn and matmul_tn keep the scalar per-element operation order and are
// bitwise-identical to the reference; dot/sum/matmul_nt use lane accumulators.

#include "hilots/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define HILOTS_X86 1
#include <immintrin.h>
#else
#define HILOTS_X86 0
#endif

#include <cmath>

namespace hilots::kernels {

#if HILOTS_X86

namespace {

void v_add(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void v_sub(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void v_mul(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void v_scale(const double* x, double c, double* out, std::size_t n) {
    const __m256d vc = _mm256_set1_pd(c);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(vc, _mm256_loadu_pd(x + i)));
    }
    for (; i < n; ++i) out[i] = c * x[i];
}

void v_axpy(double c, const double* x, double* y, std::size_t n) {
    const __m256d vc = _mm256_set1_pd(c);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d prod = _mm256_mul_pd(vc, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (; i < n; ++i) y[i] += c * x[i];
}

void v_relu(const double* x, double* out, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    }
    for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void v_relu_backward(const double* x, const double* g, double* dx, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
        const __m256d gated = _mm256_and_pd(mask, _mm256_loadu_pd(g + i));
        _mm256_storeu_pd(dx + i, _mm256_add_pd(_mm256_loadu_pd(dx + i), gated));
    }
    for (; i < n; ++i) dx[i] += x[i] > 0.0 ? g[i] : 0.0;
}

void v_matmul_nn(const double* a, const double* b, double* c,
                 std::size_t n, std::size_t k, std::size_t p) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = a[i * k + kk];
            if (aik == 0.0) continue;
            const __m256d va = _mm256_set1_pd(aik);
            const double* brow = b + kk * p;
            double* crow = c + i * p;
            std::size_t j = 0;
            for (; j + 4 <= p; j += 4) {
                const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(brow + j));
                _mm256_storeu_pd(crow + j, _mm256_add_pd(_mm256_loadu_pd(crow + j), prod));
            }
            for (; j < p; ++j) crow[j] += aik * brow[j];
        }
    }
}

double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void v_matmul_nt(const double* a, const double* b, double* c,
                 std::size_t n, std::size_t k, std::size_t p) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = a + i * k;
        for (std::size_t j = 0; j < p; ++j) {
            const double* brow = b + j * k;
            __m256d acc = _mm256_setzero_pd();
            std::size_t kk = 0;
            for (; kk + 4 <= k; kk += 4) {
                const __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(arow + kk), _mm256_loadu_pd(brow + kk));
                acc = _mm256_add_pd(acc, prod);
            }
            double tail = 0.0;
            for (; kk < k; ++kk) tail += arow[kk] * brow[kk];
            c[i * p + j] += hsum(acc) + tail;
        }
    }
}

void v_matmul_tn(const double* a, const double* b, double* c,
                 std::size_t k, std::size_t n, std::size_t p) {
    for (std::size_t kk = 0; kk < k; ++kk) {
        const double* arow = a + kk * n;
        const double* brow = b + kk * p;
        for (std::size_t i = 0; i < n; ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            const __m256d va = _mm256_set1_pd(aki);
            double* crow = c + i * p;
            std::size_t j = 0;
            for (; j + 4 <= p; j += 4) {
                const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(brow + j));
                _mm256_storeu_pd(crow + j, _mm256_add_pd(_mm256_loadu_pd(crow + j), prod));
            }
            for (; j < p; ++j) crow[j] += aki * brow[j];
        }
    }
}

double v_dot(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    double tail = 0.0;
    for (; i < n; ++i) tail += a[i] * b[i];
    return hsum(acc) + tail;
}

double v_sum(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double tail = 0.0;
    for (; i < n; ++i) tail += x[i];
    return hsum(acc) + tail;
}

void v_ema(double gamma, const double* student, double* teacher, std::size_t n) {
    const __m256d vg = _mm256_set1_pd(gamma);
    const __m256d vw = _mm256_set1_pd(1.0 - gamma);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d t = _mm256_mul_pd(vg, _mm256_loadu_pd(teacher + i));
        const __m256d s = _mm256_mul_pd(vw, _mm256_loadu_pd(student + i));
        _mm256_storeu_pd(teacher + i, _mm256_add_pd(t, s));
    }
    const double w = 1.0 - gamma;
    for (; i < n; ++i) teacher[i] = gamma * teacher[i] + w * student[i];
}

void v_adamw(double* param, const double* grad, double* m, double* v,
             std::size_t n, double lr, double beta1, double beta2,
             double eps, double weight_decay, double bc1, double bc2) {
    const __m256d vb1 = _mm256_set1_pd(beta1);
    const __m256d vb1c = _mm256_set1_pd(1.0 - beta1);
    const __m256d vb2 = _mm256_set1_pd(beta2);
    const __m256d vb2c = _mm256_set1_pd(1.0 - beta2);
    const __m256d vbc1 = _mm256_set1_pd(bc1);
    const __m256d vbc2 = _mm256_set1_pd(bc2);
    const __m256d veps = _mm256_set1_pd(eps);
    const __m256d vlr = _mm256_set1_pd(lr);
    const __m256d vwd = _mm256_set1_pd(weight_decay);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d g = _mm256_loadu_pd(grad + i);
        __m256d mi = _mm256_loadu_pd(m + i);
        __m256d vi = _mm256_loadu_pd(v + i);
        mi = _mm256_add_pd(_mm256_mul_pd(vb1, mi), _mm256_mul_pd(vb1c, g));
        vi = _mm256_add_pd(_mm256_mul_pd(vb2, vi), _mm256_mul_pd(vb2c, _mm256_mul_pd(g, g)));
        _mm256_storeu_pd(m + i, mi);
        _mm256_storeu_pd(v + i, vi);
        const __m256d m_hat = _mm256_div_pd(mi, vbc1);
        const __m256d v_hat = _mm256_div_pd(vi, vbc2);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(v_hat), veps);
        __m256d pi = _mm256_loadu_pd(param + i);
        const __m256d step = _mm256_add_pd(_mm256_div_pd(m_hat, denom), _mm256_mul_pd(vwd, pi));
        pi = _mm256_sub_pd(pi, _mm256_mul_pd(vlr, step));
        _mm256_storeu_pd(param + i, pi);
    }
    for (; i < n; ++i) {
        const double g = grad[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * (g * g);
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        param[i] -= lr * (m_hat / (std::sqrt(v_hat) + eps) + weight_decay * param[i]);
    }
}

const Ops kAvx2 = {
    "avx2",  v_add,       v_sub,       v_mul,    v_scale, v_axpy,
    v_relu,  v_relu_backward, v_matmul_nn, v_matmul_nt, v_matmul_tn,
    v_dot,   v_sum,       v_ema,       v_adamw,
};

}  // namespace

bool avx2_available() { return __builtin_cpu_supports("avx2"); }

const Ops& avx2_ops() { return avx2_available() ? kAvx2 : scalar_ops(); }

#else  // !HILOTS_X86

bool avx2_available() { return false; }
const Ops& avx2_ops() { return scalar_ops(); }

#endif

}  // namespace hilots::kernels
