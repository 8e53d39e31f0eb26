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
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "doctest.h"
#include "hilots/kernels.hpp"

using namespace hilots;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng, double lo = -2.0,
                               double hi = 2.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

double rel_err(double a, double b) { return std::abs(a - b) / (std::abs(a) + std::abs(b) + 1e-300); }

// Odd lengths so the vector tail paths run too.
const std::size_t kSizes[] = {1, 3, 4, 7, 8, 64, 129, 1000};

}  // namespace

TEST_CASE("elementwise kernels match bitwise across variants") {
    if (!kernels::avx2_available()) return;
    const auto& s = kernels::scalar_ops();
    const auto& v = kernels::avx2_ops();
    std::mt19937_64 rng(11);

    for (const auto n : kSizes) {
        const auto a = random_vec(n, rng);
        const auto b = random_vec(n, rng);
        std::vector<double> out_s(n), out_v(n);

        s.add(a.data(), b.data(), out_s.data(), n);
        v.add(a.data(), b.data(), out_v.data(), n);
        CHECK(bitwise_equal(out_s, out_v));

        s.sub(a.data(), b.data(), out_s.data(), n);
        v.sub(a.data(), b.data(), out_v.data(), n);
        CHECK(bitwise_equal(out_s, out_v));

        s.mul(a.data(), b.data(), out_s.data(), n);
        v.mul(a.data(), b.data(), out_v.data(), n);
        CHECK(bitwise_equal(out_s, out_v));

        s.scale(a.data(), 0.37, out_s.data(), n);
        v.scale(a.data(), 0.37, out_v.data(), n);
        CHECK(bitwise_equal(out_s, out_v));

        auto y_s = b, y_v = b;
        s.axpy(-1.25, a.data(), y_s.data(), n);
        v.axpy(-1.25, a.data(), y_v.data(), n);
        CHECK(bitwise_equal(y_s, y_v));

        s.relu(a.data(), out_s.data(), n);
        v.relu(a.data(), out_v.data(), n);
        CHECK(bitwise_equal(out_s, out_v));
        for (std::size_t i = 0; i < n; ++i) CHECK(out_s[i] == (a[i] > 0.0 ? a[i] : 0.0));

        auto dx_s = random_vec(n, rng);
        auto dx_v = dx_s;
        s.relu_backward(a.data(), b.data(), dx_s.data(), n);
        v.relu_backward(a.data(), b.data(), dx_v.data(), n);
        CHECK(bitwise_equal(dx_s, dx_v));
    }
}

TEST_CASE("ema and adamw kernels match bitwise across variants") {
    if (!kernels::avx2_available()) return;
    const auto& s = kernels::scalar_ops();
    const auto& v = kernels::avx2_ops();
    std::mt19937_64 rng(12);

    for (const auto n : kSizes) {
        const auto student = random_vec(n, rng);
        auto t_s = random_vec(n, rng);
        auto t_v = t_s;
        s.ema(0.99, student.data(), t_s.data(), n);
        v.ema(0.99, student.data(), t_v.data(), n);
        CHECK(bitwise_equal(t_s, t_v));

        auto p_s = random_vec(n, rng);
        auto p_v = p_s;
        const auto g = random_vec(n, rng);
        auto m_s = random_vec(n, rng, 0.0, 0.1), m_v = m_s;
        auto mv_s = random_vec(n, rng, 0.0, 0.1), mv_v = mv_s;
        s.adamw(p_s.data(), g.data(), m_s.data(), mv_s.data(), n, 1e-3, 0.9, 0.999, 1e-8,
                0.01, 0.1, 0.001999);
        v.adamw(p_v.data(), g.data(), m_v.data(), mv_v.data(), n, 1e-3, 0.9, 0.999, 1e-8,
                0.01, 0.1, 0.001999);
        CHECK(bitwise_equal(p_s, p_v));
        CHECK(bitwise_equal(m_s, m_v));
        CHECK(bitwise_equal(mv_s, mv_v));
    }
}

TEST_CASE("matmul broadcast variants match bitwise, reductions to rounding") {
    if (!kernels::avx2_available()) return;
    const auto& s = kernels::scalar_ops();
    const auto& v = kernels::avx2_ops();
    std::mt19937_64 rng(13);

    const struct {
        std::size_t n, k, p;
    } shapes[] = {{1, 1, 1}, {2, 3, 4}, {5, 7, 9}, {16, 16, 16}, {13, 21, 6}, {33, 17, 29}};

    for (const auto& sh : shapes) {
        auto a = random_vec(sh.n * sh.k, rng);
        const auto b_nn = random_vec(sh.k * sh.p, rng);
        // sprinkle zeros to exercise the skip path
        for (std::size_t i = 0; i < a.size(); i += 5) a[i] = 0.0;

        std::vector<double> c_s(sh.n * sh.p, 0.125), c_v(sh.n * sh.p, 0.125);
        s.matmul_nn(a.data(), b_nn.data(), c_s.data(), sh.n, sh.k, sh.p);
        v.matmul_nn(a.data(), b_nn.data(), c_v.data(), sh.n, sh.k, sh.p);
        CHECK(bitwise_equal(c_s, c_v));

        const auto a_tn = random_vec(sh.k * sh.n, rng);
        const auto b_tn = random_vec(sh.k * sh.p, rng);
        std::fill(c_s.begin(), c_s.end(), 0.0);
        std::fill(c_v.begin(), c_v.end(), 0.0);
        s.matmul_tn(a_tn.data(), b_tn.data(), c_s.data(), sh.k, sh.n, sh.p);
        v.matmul_tn(a_tn.data(), b_tn.data(), c_v.data(), sh.k, sh.n, sh.p);
        CHECK(bitwise_equal(c_s, c_v));

        const auto a_nt = random_vec(sh.n * sh.k, rng);
        const auto b_nt = random_vec(sh.p * sh.k, rng);
        std::fill(c_s.begin(), c_s.end(), 0.0);
        std::fill(c_v.begin(), c_v.end(), 0.0);
        s.matmul_nt(a_nt.data(), b_nt.data(), c_s.data(), sh.n, sh.k, sh.p);
        v.matmul_nt(a_nt.data(), b_nt.data(), c_v.data(), sh.n, sh.k, sh.p);
        for (std::size_t i = 0; i < c_s.size(); ++i) CHECK(rel_err(c_s[i], c_v[i]) < 1e-13);
    }

    for (const auto n : kSizes) {
        const auto a = random_vec(n, rng);
        const auto b = random_vec(n, rng);
        CHECK(rel_err(s.dot(a.data(), b.data(), n), v.dot(a.data(), b.data(), n)) < 1e-12);
        CHECK(rel_err(s.sum(a.data(), n), v.sum(a.data(), n)) < 1e-12);
    }
}

TEST_CASE("matmul_nn agrees with a plain triple loop") {
    std::mt19937_64 rng(14);
    const std::size_t n = 7, k = 5, p = 6;
    const auto a = random_vec(n * k, rng);
    const auto b = random_vec(k * p, rng);
    std::vector<double> expect(n * p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            double acc = 0.0;
            for (std::size_t kk = 0; kk < k; ++kk) acc += a[i * k + kk] * b[kk * p + j];
            expect[i * p + j] = acc;
        }
    }
    std::vector<double> got(n * p, 0.0);
    kernels::active().matmul_nn(a.data(), b.data(), got.data(), n, k, p);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(rel_err(got[i], expect[i]) < 1e-13);
}

TEST_CASE("variant selection") {
    kernels::select("scalar");
    CHECK(std::string(kernels::active().name) == "scalar");
    kernels::select("auto");
    if (kernels::avx2_available()) {
        kernels::select("avx2");
        CHECK(std::string(kernels::active().name) == "avx2");
        kernels::select("auto");
    }
    CHECK_THROWS_AS(kernels::select("sse9"), std::invalid_argument);
}
