#include "evlab/nn.hpp"

#include <cmath>

namespace evlab {

Tensor init_uniform_fanin(Shape shape, int fan_in, Rng& rng) {
    const double a = std::sqrt(1.0 / static_cast<double>(fan_in));
    std::vector<double> data(shape_numel(shape));
    for (double& v : data) v = rng.uniform(-a, a);
    return Tensor::param(std::move(shape), std::move(data));
}

Conv2dLayer::Conv2dLayer(int in, int out, int kernel, const std::string& name,
                         std::uint64_t seed)
    : in_ch(in), out_ch(out), k(kernel) {
    Rng rng(mix_seed(seed, fnv1a64(name)));
    const int fan_in = in * kernel * kernel;
    w = init_uniform_fanin({out, in, kernel, kernel}, fan_in, rng);
    b = init_uniform_fanin({out}, fan_in, rng);
}

void Conv2dLayer::collect(ParamList& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".w", w);
    out.emplace_back(prefix + ".b", b);
}

void Conv2dLayer::copy_values_from(const Conv2dLayer& other) {
    w.values() = other.w.values();
    b.values() = other.b.values();
}

LinearLayer::LinearLayer(int in, int out, const std::string& name, std::uint64_t seed)
    : in_dim(in), out_dim(out) {
    Rng rng(mix_seed(seed, fnv1a64(name)));
    w = init_uniform_fanin({in, out}, in, rng);
    b = init_uniform_fanin({out}, in, rng);
}

Tensor LinearLayer::operator()(const Tensor& x) const {
    Tensor y = matmul(x, w);
    return add(y, reshape(b, {1, out_dim}));
}

void LinearLayer::collect(ParamList& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".w", w);
    out.emplace_back(prefix + ".b", b);
}

} // namespace evlab
