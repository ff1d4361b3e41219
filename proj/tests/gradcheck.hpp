#pragma once

// Central-finite-difference gradient oracle shared by the unit tests and the
// acceptance suite. Independent of the autodiff path: it only re-runs the
// forward closure at perturbed leaf values.

#include "evlab/rng.hpp"
#include "evlab/tensor.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace evlab::testing {

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
    std::string worst; // description of the worst element
};

// forward() must rebuild the graph from the leaves' current values and
// return the scalar loss value (plain double, no tape needed).
// analytic gradients are taken from leaf.grad() computed by the caller.
inline GradCheckResult finite_diff_check(const std::vector<Tensor>& leaves,
                                         const std::function<double()>& forward,
                                         double h = 1e-5,
                                         std::size_t max_elems_per_leaf = 0) {
    GradCheckResult res;
    Rng pick(0x5eedf00d);
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        Tensor leaf = leaves[li];
        const std::size_t n = leaf.numel();
        std::vector<std::size_t> idx;
        if (max_elems_per_leaf == 0 || n <= max_elems_per_leaf) {
            idx.resize(n);
            for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        } else {
            for (std::size_t i = 0; i < max_elems_per_leaf; ++i)
                idx.push_back(static_cast<std::size_t>(
                    pick.uniform_int(0, static_cast<std::int64_t>(n) - 1)));
        }
        for (std::size_t i : idx) {
            double* p = leaf.data() + i;
            const double orig = *p;
            *p = orig + h;
            const double fp = forward();
            *p = orig - h;
            const double fm = forward();
            *p = orig;
            const double numeric = (fp - fm) / (2.0 * h);
            const double analytic = leaf.grad().empty() ? 0.0 : leaf.grad()[i];
            const double denom = std::max({1.0, std::fabs(numeric), std::fabs(analytic)});
            const double rel = std::fabs(numeric - analytic) / denom;
            ++res.checked;
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.worst = "leaf " + std::to_string(li) + " elem " + std::to_string(i) +
                            " analytic " + std::to_string(analytic) + " numeric " +
                            std::to_string(numeric);
            }
        }
    }
    return res;
}

} // namespace evlab::testing
