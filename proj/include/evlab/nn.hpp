#pragma once

#include "evlab/optim.hpp"
#include "evlab/rng.hpp"
#include "evlab/tensor.hpp"

#include <string>

namespace evlab {

// uniform [-a, a] with a = sqrt(1/fan_in); the rng is derived from a named
// 64-bit seed by the layer constructors
Tensor init_uniform_fanin(Shape shape, int fan_in, Rng& rng);

struct Conv2dLayer {
    Tensor w, b;
    int in_ch = 0, out_ch = 0, k = 3;

    Conv2dLayer() = default;
    Conv2dLayer(int in, int out, int kernel, const std::string& name, std::uint64_t seed);

    Tensor operator()(const Tensor& x) const { return conv2d(x, w, b); }

    void collect(ParamList& out, const std::string& prefix) const;
    void copy_values_from(const Conv2dLayer& other);
};

struct LinearLayer {
    Tensor w, b; // w: [in, out], b: [out]
    int in_dim = 0, out_dim = 0;

    LinearLayer() = default;
    LinearLayer(int in, int out, const std::string& name, std::uint64_t seed);

    // x: [1, in] -> [1, out]
    Tensor operator()(const Tensor& x) const;

    void collect(ParamList& out, const std::string& prefix) const;
};

} // namespace evlab
