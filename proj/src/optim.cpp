#include "evlab/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace evlab {

AdamW::AdamW(ParamList params, Config cfg) : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& [name, p] : params_) {
        (void)name;
        m_.emplace_back(p.numel(), 0.0);
        v_.emplace_back(p.numel(), 0.0);
    }
}

void AdamW::zero_grad() {
    for (auto& [name, p] : params_) {
        (void)name;
        p.zero_grad();
    }
}

void AdamW::step() {
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        auto& [name, p] = params_[pi];
        if (p.grad().empty()) continue; // never touched by backward
        double* w = p.data();
        const double* g = p.grad().data();
        double* m = m_[pi].data();
        double* v = v_[pi].data();
        const std::size_t n = p.numel();
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(g[i]))
                throw std::runtime_error("AdamW: non-finite gradient in parameter '" + name +
                                         "'");
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] *= 1.0 - cfg_.lr * cfg_.weight_decay;
            w[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

} // namespace evlab
