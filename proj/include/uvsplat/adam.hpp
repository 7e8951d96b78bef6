// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace uvsplat {

struct AdamParams {
    double learningRate = 0.0025;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    int64_t step = 0;

    void reset(size_t count) {
        m.assign(count, 0.0);
        v.assign(count, 0.0);
        step = 0;
    }
};

/// Bias-corrected Adam update, in place. Throws ShapeMismatch.
void adamStep(std::span<double> params, std::span<const double> grads, AdamState &state,
              const AdamParams &p);

/// "GGOS", u32 version 1, u32 H, u32 W, u32 C = 14, i64 step, then the first
/// and second moments as H*W*C little-endian float64 each.
void writeOptimizerState(std::ostream &out, const AdamState &state, int height, int width);
AdamState readOptimizerState(std::istream &in, int &height, int &width);
void saveOptimizerState(const std::string &path, const AdamState &state, int height, int width);

} // namespace uvsplat
