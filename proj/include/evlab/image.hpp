#pragma once

#include "evlab/tensor.hpp"

#include <string>
#include <vector>

namespace evlab {

// Planar CHW image with values in [0,1]; c is 1 (gray) or 3 (RGB).
struct Image {
    int h = 0;
    int w = 0;
    int c = 0;
    std::vector<double> data;

    Image() = default;
    Image(int h_, int w_, int c_, double fill = 0.0)
        : h(h_), w(w_), c(c_), data(static_cast<std::size_t>(h_) * w_ * c_, fill) {}

    double& at(int ch, int y, int x) { return data[(static_cast<std::size_t>(ch) * h + y) * w + x]; }
    double at(int ch, int y, int x) const {
        return data[(static_cast<std::size_t>(ch) * h + y) * w + x];
    }
    std::size_t numel() const { return data.size(); }
    bool empty() const { return data.empty(); }
};

// ITU-R BT.601 luma
Image to_luma(const Image& img);

// replicate gray to 3 channels; 3-channel input passes through
Image to_rgb(const Image& img);

Tensor image_to_tensor(const Image& img);
Image tensor_to_image(const Tensor& t);

// 8-bit binary PGM (P5) / PPM (P6); values clamped to [0,1] on write.
// load_image picks the reader from the file's magic; PPM loads as c=3.
Image load_image(const std::string& path);
void save_pgm(const std::string& path, const Image& img);
void save_ppm(const std::string& path, const Image& img);
// .pgm writes luma, .ppm writes RGB (gray replicated)
void save_image(const std::string& path, const Image& img);

double image_mse(const Image& a, const Image& b);

} // namespace evlab
