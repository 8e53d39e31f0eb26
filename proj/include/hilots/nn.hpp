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

#include <random>
#include <string>
#include <vector>

#include "hilots/tensor.hpp"

namespace hilots {

// Multi-layer perceptron: affine layers with ramp activations between them,
// final layer affine only.
struct MlpSpec {
    std::vector<std::int64_t> dims;  // in, hidden..., out
    bool bias = true;
};

// Uniform Glorot draw for a weight of the given fan-in/out.
double xavier_uniform(std::mt19937_64& rng, std::int64_t fan_in, std::int64_t fan_out);

// Creates "{prefix}/l{i}/w" (and "/b" when spec.bias) parameters.
void mlp_init(ParameterSet& params, const std::string& prefix, const MlpSpec& spec,
              std::mt19937_64& rng);
TensorPtr mlp_apply(Tape& tape, const ParameterSet& params, const std::string& prefix,
                    const MlpSpec& spec, const TensorPtr& x);

// Single affine layer "{prefix}/w" + optional "{prefix}/b".
void linear_init(ParameterSet& params, const std::string& prefix, std::int64_t in,
                 std::int64_t out, bool bias, std::mt19937_64& rng);
TensorPtr linear_apply(Tape& tape, const ParameterSet& params, const std::string& prefix,
                       const TensorPtr& x, bool bias);

// Layer norm parameters "{prefix}/gain" (ones) and "{prefix}/bias" (zeros).
void layer_norm_init(ParameterSet& params, const std::string& prefix, std::int64_t width);
TensorPtr layer_norm_apply(Tape& tape, const ParameterSet& params, const std::string& prefix,
                           const TensorPtr& x);

}  // namespace hilots
