#pragma once

#include "evlab/tensor.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace evlab {

using ParamList = std::vector<std::pair<std::string, Tensor>>;

// AdamW with decoupled weight decay. Paper-scale defaults for lr/betas;
// toy-scale training configs override lr.
class AdamW {
public:
    struct Config {
        double lr = 5e-6;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 0.0;
    };

    explicit AdamW(ParamList params) : AdamW(std::move(params), Config()) {}
    AdamW(ParamList params, Config cfg);

    // one update from the gradients currently stored on the parameters;
    // rejects non-finite gradients naming the offending parameter
    void step();
    void zero_grad();

    std::int64_t step_count() const { return step_; }
    const ParamList& params() const { return params_; }
    Config& config() { return cfg_; }

private:
    ParamList params_;
    Config cfg_;
    std::int64_t step_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

} // namespace evlab
