#pragma once

#include "evlab/image.hpp"

#include <optional>
#include <string>
#include <vector>

namespace evlab {

double mse(const Image& a, const Image& b);

// Wang et al. SSIM: 11x11 Gaussian window sigma 1.5, k1=0.01, k2=0.03,
// dynamic range 1, mean over valid (fully interior) windows. Gray inputs.
double ssim(const Image& a, const Image& b);

struct MetricReport {
    std::vector<double> frame_mse;
    std::vector<double> frame_ssim;
    double mean_mse = 0.0;
    double mean_ssim = 0.0;
    std::size_t frames = 0;

    // reserved for externally computed perceptual metrics; not produced here
    std::optional<double> lpips;
    std::optional<double> fid;
    std::optional<double> fvd;

    std::string to_csv() const;
    std::string summary() const;
};

// Color inputs are luma-converted before comparison (the evaluation
// protocol used for grayscale-vs-color comparisons).
MetricReport evaluate_sequence(const std::vector<Image>& pred, const std::vector<Image>& gt);

} // namespace evlab
