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
#include "hilots/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace hilots {

double xavier_uniform(std::mt19937_64& rng, std::int64_t fan_in, std::int64_t fan_out) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    return dist(rng);
}

void mlp_init(ParameterSet& params, const std::string& prefix, const MlpSpec& spec,
              std::mt19937_64& rng) {
    if (spec.dims.size() < 2) throw std::invalid_argument("mlp: need at least in and out dims");
    for (std::size_t i = 0; i + 1 < spec.dims.size(); ++i) {
        const auto in = spec.dims[i], out = spec.dims[i + 1];
        params.create(prefix + "/l" + std::to_string(i) + "/w", {in, out},
                      [&] { return xavier_uniform(rng, in, out); });
        if (spec.bias) {
            params.create(prefix + "/l" + std::to_string(i) + "/b", {out}, [] { return 0.0; });
        }
    }
}

TensorPtr mlp_apply(Tape& tape, const ParameterSet& params, const std::string& prefix,
                    const MlpSpec& spec, const TensorPtr& x) {
    if (x->cols() != spec.dims.front()) {
        throw std::invalid_argument("mlp: input width does not match layer chain");
    }
    TensorPtr h = x;
    const std::size_t layers = spec.dims.size() - 1;
    for (std::size_t i = 0; i < layers; ++i) {
        h = matmul(tape, h, params.at(prefix + "/l" + std::to_string(i) + "/w"));
        if (spec.bias) h = add_rowvec(tape, h, params.at(prefix + "/l" + std::to_string(i) + "/b"));
        if (i + 1 < layers) h = relu(tape, h);
    }
    return h;
}

void linear_init(ParameterSet& params, const std::string& prefix, std::int64_t in,
                 std::int64_t out, bool bias, std::mt19937_64& rng) {
    params.create(prefix + "/w", {in, out}, [&] { return xavier_uniform(rng, in, out); });
    if (bias) params.create(prefix + "/b", {out}, [] { return 0.0; });
}

TensorPtr linear_apply(Tape& tape, const ParameterSet& params, const std::string& prefix,
                       const TensorPtr& x, bool bias) {
    auto h = matmul(tape, x, params.at(prefix + "/w"));
    if (bias) h = add_rowvec(tape, h, params.at(prefix + "/b"));
    return h;
}

void layer_norm_init(ParameterSet& params, const std::string& prefix, std::int64_t width) {
    params.create(prefix + "/gain", {width}, [] { return 1.0; });
    params.create(prefix + "/bias", {width}, [] { return 0.0; });
}

TensorPtr layer_norm_apply(Tape& tape, const ParameterSet& params, const std::string& prefix,
                           const TensorPtr& x) {
    return layer_norm_rows(tape, x, params.at(prefix + "/gain"), params.at(prefix + "/bias"));
}

}  // namespace hilots
