#include "evlab/image.hpp"

#include "evlab/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace evlab {

Image to_luma(const Image& img) {
    if (img.c == 1) return img;
    if (img.c != 3) throw std::invalid_argument("to_luma: expected 1 or 3 channels");
    Image out(img.h, img.w, 1);
    const std::size_t plane = static_cast<std::size_t>(img.h) * img.w;
    for (std::size_t i = 0; i < plane; ++i)
        out.data[i] =
            0.299 * img.data[i] + 0.587 * img.data[plane + i] + 0.114 * img.data[2 * plane + i];
    return out;
}

Image to_rgb(const Image& img) {
    if (img.c == 3) return img;
    if (img.c != 1) throw std::invalid_argument("to_rgb: expected 1 or 3 channels");
    Image out(img.h, img.w, 3);
    const std::size_t plane = img.numel();
    for (int ch = 0; ch < 3; ++ch)
        std::copy(img.data.begin(), img.data.end(), out.data.begin() + ch * plane);
    return out;
}

Tensor image_to_tensor(const Image& img) {
    return Tensor::from_data({img.c, img.h, img.w}, img.data);
}

Image tensor_to_image(const Tensor& t) {
    if (t.shape().size() != 3)
        throw std::invalid_argument("tensor_to_image: expected [C,H,W], got " +
                                    shape_str(t.shape()));
    Image img(t.shape()[1], t.shape()[2], t.shape()[0]);
    img.data = t.values();
    return img;
}

namespace {

int read_pnm_token(std::istream& is, const std::string& path) {
    // skips whitespace and '#' comments per the PNM grammar
    while (true) {
        const int ch = is.peek();
        if (ch == '#') {
            std::string line;
            std::getline(is, line);
        } else if (std::isspace(ch)) {
            is.get();
        } else {
            break;
        }
    }
    int v;
    if (!(is >> v)) throw std::runtime_error("image: malformed PNM header in " + path);
    return v;
}

unsigned char quantize(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<unsigned char>(std::lround(c * 255.0));
}

} // namespace

Image load_image(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("image: cannot open " + path);
    char m0 = 0, m1 = 0;
    is.get(m0);
    is.get(m1);
    if (m0 != 'P' || (m1 != '5' && m1 != '6'))
        throw std::runtime_error("image: " + path + " is not binary PGM/PPM");
    const int channels = m1 == '5' ? 1 : 3;
    const int w = read_pnm_token(is, path);
    const int h = read_pnm_token(is, path);
    const int maxval = read_pnm_token(is, path);
    if (w <= 0 || h <= 0) throw std::runtime_error("image: bad dimensions in " + path);
    if (maxval != 255)
        throw std::runtime_error("image: only maxval 255 supported, got " +
                                 std::to_string(maxval) + " in " + path);
    is.get(); // single whitespace after maxval
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * channels);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!is) throw std::runtime_error("image: truncated pixel data in " + path);
    Image img(h, w, channels);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    // PNM is interleaved; we store planes
    for (std::size_t i = 0; i < plane; ++i)
        for (int ch = 0; ch < channels; ++ch)
            img.data[ch * plane + i] = raw[i * channels + ch] / 255.0;
    return img;
}

void save_pgm(const std::string& path, const Image& img) {
    const Image gray = to_luma(img);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("image: cannot write " + path);
    os << "P5\n" << gray.w << " " << gray.h << "\n255\n";
    std::vector<unsigned char> raw(gray.numel());
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = quantize(gray.data[i]);
    os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!os) throw std::runtime_error("image: write failed for " + path);
}

void save_ppm(const std::string& path, const Image& img) {
    const Image rgb = to_rgb(img);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("image: cannot write " + path);
    os << "P6\n" << rgb.w << " " << rgb.h << "\n255\n";
    const std::size_t plane = static_cast<std::size_t>(rgb.h) * rgb.w;
    std::vector<unsigned char> raw(plane * 3);
    for (std::size_t i = 0; i < plane; ++i)
        for (int ch = 0; ch < 3; ++ch) raw[i * 3 + ch] = quantize(rgb.data[ch * plane + i]);
    os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!os) throw std::runtime_error("image: write failed for " + path);
}

void save_image(const std::string& path, const Image& img) {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".ppm") == 0)
        save_ppm(path, img);
    else
        save_pgm(path, img);
}

double image_mse(const Image& a, const Image& b) {
    if (a.h != b.h || a.w != b.w || a.c != b.c)
        throw std::invalid_argument("image_mse: shape mismatch");
    if (a.numel() == 0) return 0.0;
    return kernels::active().sqdiff_sum(a.data.data(), b.data.data(), a.numel()) /
           static_cast<double>(a.numel());
}

} // namespace evlab
