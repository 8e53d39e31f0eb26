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
#include <filesystem>
#include <random>

#include "doctest.h"
#include "hilots/nn.hpp"
#include "hilots/tensor.hpp"

using namespace hilots;

namespace {

TensorPtr constant(std::vector<std::int64_t> shape, std::vector<double> v) {
    return make_tensor(std::move(shape), std::move(v));
}

// Random values bounded away from zero so ramp kinks stay clear of the
// finite-difference step.
std::function<double()> away_from_kink(std::mt19937_64& rng) {
    return [&rng] {
        std::uniform_real_distribution<double> mag(0.2, 1.0);
        std::bernoulli_distribution sign(0.5);
        return sign(rng) ? mag(rng) : -mag(rng);
    };
}

}  // namespace

TEST_CASE("matmul basics") {
    Tape tape;
    auto eye = constant({2, 2}, {1, 0, 0, 1});
    auto x = constant({2, 2}, {3.5, -1, 2, 7});
    auto y = matmul(tape, eye, x);
    CHECK(y->values == x->values);

    auto a = constant({2, 2}, {1, 2, 3, 4});
    auto b = constant({2, 1}, {5, 6});
    auto c = matmul(tape, a, b);
    CHECK(c->values[0] == doctest::Approx(17).epsilon(1e-15));
    CHECK(c->values[1] == doctest::Approx(39).epsilon(1e-15));

    auto s1 = constant({1, 1}, {3.0});
    auto s2 = constant({1, 1}, {-4.0});
    CHECK(matmul(tape, s1, s2)->values[0] == -12.0);

    auto bad = constant({3, 2}, {1, 2, 3, 4, 5, 6});
    CHECK_THROWS_AS(matmul(tape, a, bad), std::invalid_argument);
}

TEST_CASE("softmax rows") {
    Tape tape;
    auto equal = softmax_rows(tape, constant({1, 4}, {2.5, 2.5, 2.5, 2.5}));
    for (auto v : equal->values) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));

    auto two = softmax_rows(tape, constant({1, 2}, {0.0, std::log(3.0)}));
    CHECK(two->values[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(two->values[1] == doctest::Approx(0.75).epsilon(1e-12));

    CHECK(softmax_rows(tape, constant({1, 1}, {42.0}))->values[0] == 1.0);

    // rows sum to one and shifting a row leaves it unchanged
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> dist(-3, 3);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v(12);
        for (auto& x : v) x = dist(rng);
        auto base = softmax_rows(tape, constant({3, 4}, v));
        for (int i = 0; i < 3; ++i) {
            double row = 0.0;
            for (int j = 0; j < 4; ++j) row += base->values[i * 4 + j];
            CHECK(std::abs(row - 1.0) <= 1e-12);
        }
        auto shifted = v;
        for (int j = 0; j < 4; ++j) shifted[4 + j] += 1.75;
        auto moved = softmax_rows(tape, constant({3, 4}, shifted));
        for (int j = 0; j < 4; ++j) {
            CHECK(moved->values[4 + j] == doctest::Approx(base->values[4 + j]).epsilon(1e-12));
        }
    }
}

TEST_CASE("mlp apply") {
    std::mt19937_64 rng(7);
    SUBCASE("zero weights and bias give zero output") {
        ParameterSet ps;
        MlpSpec spec{{3, 2}, true};
        mlp_init(ps, "m", spec, rng);
        for (auto& v : ps.at("m/l0/w")->values) v = 0.0;
        Tape tape;
        auto out = mlp_apply(tape, ps, "m", spec, constant({2, 3}, {1, 2, 3, 4, 5, 6}));
        for (auto v : out->values) CHECK(v == 0.0);
    }
    SUBCASE("identity single layer passes input through") {
        ParameterSet ps;
        MlpSpec spec{{2, 2}, true};
        mlp_init(ps, "m", spec, rng);
        ps.at("m/l0/w")->values = {1, 0, 0, 1};
        Tape tape;
        auto in = constant({2, 2}, {0.5, -1.5, 2.0, 3.0});
        auto out = mlp_apply(tape, ps, "m", spec, in);
        CHECK(out->values == in->values);
    }
    SUBCASE("two layer forward matches a plain-loop evaluation") {
        ParameterSet ps;
        MlpSpec spec{{2, 3, 1}, true};
        mlp_init(ps, "m", spec, rng);
        const std::vector<double> w0 = {0.1, -0.2, 0.3, 0.4, 0.05, -0.6};
        const std::vector<double> b0 = {0.01, -0.02, 0.03};
        const std::vector<double> w1 = {0.7, -0.8, 0.9};
        const std::vector<double> b1 = {0.11};
        ps.at("m/l0/w")->values = w0;
        ps.at("m/l0/b")->values = b0;
        ps.at("m/l1/w")->values = w1;
        ps.at("m/l1/b")->values = b1;
        const std::vector<double> x = {1.5, -0.5};

        double hidden[3];
        for (int j = 0; j < 3; ++j) {
            double acc = b0[j];
            for (int i = 0; i < 2; ++i) acc += x[i] * w0[i * 3 + j];
            hidden[j] = acc > 0 ? acc : 0;
        }
        double expect = b1[0];
        for (int j = 0; j < 3; ++j) expect += hidden[j] * w1[j];

        Tape tape;
        auto out = mlp_apply(tape, ps, "m", spec, constant({1, 2}, x));
        CHECK(out->values[0] == doctest::Approx(expect).epsilon(1e-15));
    }
    SUBCASE("broken shape chain is rejected") {
        ParameterSet ps;
        MlpSpec spec{{3, 2}, true};
        mlp_init(ps, "m", spec, rng);
        Tape tape;
        CHECK_THROWS_AS(mlp_apply(tape, ps, "m", spec, constant({1, 4}, {1, 2, 3, 4})),
                        std::invalid_argument);
    }
}

TEST_CASE("backward basics") {
    SUBCASE("sum gradient is ones") {
        ParameterSet ps;
        std::mt19937_64 rng(3);
        auto w = ps.create("w", {2, 3}, away_from_kink(rng));
        Tape tape;
        auto loss = sum_all(tape, w);
        tape.backward(loss);
        for (auto g : w->grad) CHECK(g == 1.0);
    }
    SUBCASE("squared norm gradient is 2W") {
        ParameterSet ps;
        std::mt19937_64 rng(4);
        auto w = ps.create("w", {4}, away_from_kink(rng));
        Tape tape;
        auto loss = sum_all(tape, mul(tape, w, w));
        tape.backward(loss);
        for (std::size_t i = 0; i < w->values.size(); ++i) {
            CHECK(w->grad[i] == doctest::Approx(2.0 * w->values[i]).epsilon(1e-14));
        }
    }
    SUBCASE("non-scalar root is rejected") {
        Tape tape;
        auto t = make_tensor({2}, {1.0, 2.0}, true);
        CHECK_THROWS_AS(tape.backward(t), std::invalid_argument);
    }
    SUBCASE("random three-op graph matches central differences") {
        ParameterSet ps;
        std::mt19937_64 rng(9);
        ps.create("w1", {2, 3}, away_from_kink(rng));
        ps.create("w2", {3, 2}, away_from_kink(rng));
        auto x = constant({2, 2}, {0.4, -0.7, 1.1, 0.6});
        auto f = [&](Tape& t) {
            auto h = softmax_rows(t, matmul(t, x, ps.at("w1")));
            return sum_all(t, matmul(t, h, ps.at("w2")));
        };
        CHECK(finite_diff_check(f, ps) < 1e-6);
    }
}

TEST_CASE("finite_diff_check calibration") {
    SUBCASE("linear map is exact to rounding") {
        ParameterSet ps;
        std::mt19937_64 rng(21);
        ps.create("w", {3, 2}, away_from_kink(rng));
        auto x = constant({1, 3}, {0.3, -1.2, 0.8});
        auto f = [&](Tape& t) { return sum_all(t, matmul(t, x, ps.at("w"))); };
        CHECK(finite_diff_check(f, ps) < 1e-9);
    }
    SUBCASE("softmax attention block, 3 tokens, d=4") {
        ParameterSet ps;
        std::mt19937_64 rng(22);
        ps.create("wq", {4, 4}, away_from_kink(rng));
        ps.create("wk", {4, 4}, away_from_kink(rng));
        ps.create("wv", {4, 4}, away_from_kink(rng));
        std::vector<double> xv(12);
        std::uniform_real_distribution<double> dist(-1, 1);
        for (auto& v : xv) v = dist(rng);
        auto x = constant({3, 4}, xv);
        auto f = [&](Tape& t) {
            auto q = matmul(t, x, ps.at("wq"));
            auto k = matmul(t, x, ps.at("wk"));
            auto v = matmul(t, x, ps.at("wv"));
            auto logits = scale(t, matmul_nt(t, q, k), 1.0 / 2.0);
            auto attn = softmax_rows(t, logits);
            return mean_all(t, matmul(t, attn, v));
        };
        CHECK(finite_diff_check(f, ps) < 1e-6);
    }
    SUBCASE("constant function has zero error") {
        ParameterSet ps;
        std::mt19937_64 rng(23);
        ps.create("w", {2}, away_from_kink(rng));
        auto f = [&](Tape& t) {
            (void)t;
            return scalar_tensor(3.0);
        };
        CHECK(finite_diff_check(f, ps) == 0.0);
    }
}

TEST_CASE("every differentiable op passes the gradient oracle") {
    std::mt19937_64 rng(31);
    auto rand_const = [&](std::vector<std::int64_t> shape) {
        std::uniform_real_distribution<double> dist(-1.5, 1.5);
        auto t = make_tensor(shape);
        for (auto& v : t->values) v = dist(rng);
        return t;
    };

    struct Case {
        const char* name;
        std::function<TensorPtr(Tape&, ParameterSet&)> f;
    };

    const std::vector<std::int64_t> gather_idx = {2, 0, -1, 1, 2};
    const std::vector<std::int64_t> group_id = {0, 1, 0, 2, 1, 0};

    std::vector<Case> cases = {
        {"matmul", [&](Tape& t, ParameterSet& ps) {
             return sum_all(t, matmul(t, ps.at("a"), ps.at("b")));
         }},
        {"matmul_nt", [&](Tape& t, ParameterSet& ps) {
             return sum_all(t, matmul_nt(t, ps.at("a"), ps.at("a2")));
         }},
        {"add_sub_mul", [&](Tape& t, ParameterSet& ps) {
             auto s = add(t, ps.at("a"), ps.at("a2"));
             auto d = sub(t, s, ps.at("a"));
             return sum_all(t, mul(t, d, s));
         }},
        {"add_rowvec", [&](Tape& t, ParameterSet& ps) {
             return sum_all(t, mul(t, add_rowvec(t, ps.at("a"), ps.at("bias")), ps.at("a2")));
         }},
        {"scale_scalar_scale", [&](Tape& t, ParameterSet& ps) {
             return sum_all(t, scalar_scale(t, ps.at("alpha"), scale(t, ps.at("a"), 1.7)));
         }},
        {"relu", [&](Tape& t, ParameterSet& ps) {
             return sum_all(t, mul(t, relu(t, ps.at("a")), ps.at("a2")));
         }},
        {"softmax_rows", [&](Tape& t, ParameterSet& ps) {
             return sum_all(t, mul(t, softmax_rows(t, ps.at("a")), ps.at("a2")));
         }},
        {"log_pow_sqrt", [&](Tape& t, ParameterSet& ps) {
             auto pos = add(t, mul(t, ps.at("a"), ps.at("a")), ps.at("ones"));
             auto lg = log_clamped(t, pos);
             auto pw = pow_const(t, pos, 1.6);
             return sum_all(t, add(t, sqrt_elem(t, pos), add(t, lg, pw)));
         }},
        {"mean_all", [&](Tape& t, ParameterSet& ps) { return mean_all(t, ps.at("a")); }},
        {"gather_rows", [&](Tape& t, ParameterSet& ps) {
             return sum_all(t, mul(t, gather_rows(t, ps.at("m"), gather_idx), ps.at("g5")));
         }},
        {"group_mean", [&](Tape& t, ParameterSet& ps) {
             return sum_all(t, mul(t, group_mean(t, ps.at("m6"), group_id, 3), ps.at("g3")));
         }},
        {"group_max", [&](Tape& t, ParameterSet& ps) {
             return sum_all(t, mul(t, group_max(t, ps.at("m6"), group_id, 3), ps.at("g3")));
         }},
        {"concat_slice", [&](Tape& t, ParameterSet& ps) {
             auto cc = concat_cols(t, ps.at("a"), ps.at("a2"));
             auto cr = concat_rows(t, {cc, cc});
             return sum_all(t, mul(t, slice_cols(t, cr, 1, 3), ps.at("g6x3")));
         }},
        {"layer_norm", [&](Tape& t, ParameterSet& ps) {
             auto y = layer_norm_rows(t, ps.at("a"), ps.at("gain"), ps.at("beta"));
             return sum_all(t, mul(t, y, ps.at("a2")));
         }},
    };

    for (auto& c : cases) {
        CAPTURE(c.name);
        ParameterSet ps;
        auto init = away_from_kink(rng);
        ps.create("a", {3, 4}, init);
        ps.create("a2", {3, 4}, init);
        ps.create("b", {4, 2}, init);
        ps.create("bias", {4}, init);
        ps.create("alpha", {1}, init);
        ps.create("ones", {3, 4}, [] { return 1.5; });
        ps.create("m", {3, 2}, init);
        ps.create("g5", {5, 2}, init);
        ps.create("m6", {6, 2}, init);
        ps.create("g3", {3, 2}, init);
        ps.create("g6x3", {6, 3}, init);
        ps.create("gain", {4}, init);
        ps.create("beta", {4}, init);
        (void)rand_const({1, 1});
        auto f = [&](Tape& t) { return c.f(t, ps); };
        CHECK(finite_diff_check(f, ps) < 1e-4);
    }
}

TEST_CASE("tape replay is deterministic") {
    ParameterSet ps;
    std::mt19937_64 rng(41);
    ps.create("w1", {4, 4}, away_from_kink(rng));
    ps.create("w2", {4, 4}, away_from_kink(rng));
    auto x = make_tensor({4, 4});
    std::uniform_real_distribution<double> dist(-1, 1);
    for (auto& v : x->values) v = dist(rng);

    auto run = [&] {
        Tape t;
        auto h = softmax_rows(t, matmul(t, x, ps.at("w1")));
        auto loss = mean_all(t, relu(t, matmul(t, h, ps.at("w2"))));
        ps.zero_grad();
        t.backward(loss);
        std::vector<double> out = loss->values;
        out.insert(out.end(), ps.at("w1")->grad.begin(), ps.at("w1")->grad.end());
        return out;
    };
    CHECK(run() == run());
}

TEST_CASE("checkpoint round trip") {
    namespace fs = std::filesystem;
    const auto path = (fs::temp_directory_path() / "hilots_ckpt_test.bin").string();

    ParameterSet ps;
    std::mt19937_64 rng(51);
    std::uniform_real_distribution<double> dist(-2, 2);
    ps.create("heu/htsf/l0/wq", {4, 4}, [&] { return dist(rng); });
    ps.create("segnet/alpha1", {1}, [&] { return dist(rng); });
    ps.create("refine/l0/b", {7}, [&] { return dist(rng); });
    ps.save(path);

    auto loaded = ParameterSet::load(path);
    REQUIRE(loaded.size() == ps.size());
    for (const auto& name : ps.names()) {
        REQUIRE(loaded.has(name));
        CHECK(loaded.at(name)->shape == ps.at(name)->shape);
        CHECK(loaded.at(name)->values == ps.at(name)->values);
    }

    // truncated file is rejected
    {
        std::ifstream in(path, std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)), {});
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_AS(ParameterSet::load(path), std::runtime_error);
    fs::remove(path);
}
