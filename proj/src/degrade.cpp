#include "evlab/degrade.hpp"

#include "evlab/config.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace evlab {

namespace {

constexpr double kPi = 3.14159265358979323846;

int reflect(int i, int n) {
    // symmetric reflection: -1 -> 0, n -> n-1
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - i - 1;
    }
    return i;
}

Image expect_gray(const Image& img, const char* op) {
    if (img.c != 1) throw std::invalid_argument(std::string(op) + ": expected grayscale input");
    return img;
}

void clamp01(Image& img) {
    for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
}

// nearest-rank percentile of a value set
double percentile_value(std::vector<double> v, double pct) {
    if (v.empty()) return 0.0;
    const std::size_t rank = static_cast<std::size_t>(
        std::clamp(std::ceil(pct / 100.0 * static_cast<double>(v.size())), 1.0,
                   static_cast<double>(v.size())));
    std::nth_element(v.begin(), v.begin() + (rank - 1), v.end());
    return v[rank - 1];
}

// bilinear value noise, values in [0,1]
std::vector<double> value_noise(int h, int w, int cell, Rng& rng) {
    const int gh = h / cell + 2, gw = w / cell + 2;
    std::vector<double> grid(static_cast<std::size_t>(gh) * gw);
    for (auto& v : grid) v = rng.uniform();
    std::vector<double> out(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        const double gy = static_cast<double>(y) / cell;
        const int y0 = static_cast<int>(gy);
        const double fy = gy - y0;
        for (int x = 0; x < w; ++x) {
            const double gx = static_cast<double>(x) / cell;
            const int x0 = static_cast<int>(gx);
            const double fx = gx - x0;
            const double a = grid[y0 * gw + x0], b = grid[y0 * gw + x0 + 1];
            const double c = grid[(y0 + 1) * gw + x0], d = grid[(y0 + 1) * gw + x0 + 1];
            out[static_cast<std::size_t>(y) * w + x] =
                (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * c + fx * d);
        }
    }
    return out;
}

void gradient_maps(const Image& g, std::vector<double>& mag, std::vector<double>* gx_out,
                   std::vector<double>* gy_out) {
    const int h = g.h, w = g.w;
    mag.assign(static_cast<std::size_t>(h) * w, 0.0);
    if (gx_out) gx_out->assign(mag.size(), 0.0);
    if (gy_out) gy_out->assign(mag.size(), 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double gx =
                0.5 * (g.at(0, y, std::min(x + 1, w - 1)) - g.at(0, y, std::max(x - 1, 0)));
            const double gy =
                0.5 * (g.at(0, std::min(y + 1, h - 1), x) - g.at(0, std::max(y - 1, 0), x));
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            mag[i] = std::sqrt(gx * gx + gy * gy);
            if (gx_out) (*gx_out)[i] = gx;
            if (gy_out) (*gy_out)[i] = gy;
        }
    }
}

} // namespace

const char* factor_name(DegradeFactor f) {
    switch (f) {
    case DegradeFactor::Blotch: return "blotch";
    case DegradeFactor::Edge: return "edge";
    case DegradeFactor::Noise: return "noise";
    case DegradeFactor::MotionBlur: return "motion_blur";
    case DegradeFactor::Resize: return "resize";
    }
    return "?";
}

DegradeFactor factor_from_name(const std::string& name) {
    if (name == "blotch") return DegradeFactor::Blotch;
    if (name == "edge") return DegradeFactor::Edge;
    if (name == "noise") return DegradeFactor::Noise;
    if (name == "motion_blur") return DegradeFactor::MotionBlur;
    if (name == "resize") return DegradeFactor::Resize;
    throw std::runtime_error("recipe: unknown degradation factor '" + name + "'");
}

void DegradationRecipe::validate() const {
    std::array<int, 5> seen{};
    for (DegradeFactor f : factor_order) seen[static_cast<int>(f)]++;
    for (int c : seen)
        if (c != 1) throw std::invalid_argument("recipe: factor_order must be a permutation");
    if (var_window < 3 || var_window % 2 == 0)
        throw std::invalid_argument("recipe: var_window must be odd and >= 3");
    if (mask_percentile <= 0.0 || mask_percentile >= 100.0)
        throw std::invalid_argument("recipe: mask_percentile must be in (0,100)");
    if (blotch_count_min < 0 || blotch_count_max < blotch_count_min)
        throw std::invalid_argument("recipe: bad blotch count range");
    if (edge_break_prob < 0.0 || edge_break_prob > 1.0)
        throw std::invalid_argument("recipe: edge_break_prob must be in [0,1]");
    if (edge_blur_sigma < 0.0) throw std::invalid_argument("recipe: edge_blur_sigma must be >= 0");
    if (noise_sigma < 0.0) throw std::invalid_argument("recipe: noise_sigma must be >= 0");
    if (blur_length < 1) throw std::invalid_argument("recipe: blur_length must be >= 1");
    if (resize_scale <= 0.0 || resize_scale > 1.0)
        throw std::invalid_argument("recipe: resize_scale must be in (0,1]");
}

std::string DegradationRecipe::serialize() const {
    KvConfig cfg;
    cfg.set_u64("seed", seed);
    std::ostringstream order;
    for (std::size_t i = 0; i < factor_order.size(); ++i) {
        if (i) order << ',';
        order << factor_name(factor_order[i]);
    }
    cfg.set("factor_order", order.str());
    cfg.set_int("var_window", var_window);
    cfg.set_double("mask_percentile", mask_percentile);
    cfg.set_int("blotch_count_min", blotch_count_min);
    cfg.set_int("blotch_count_max", blotch_count_max);
    cfg.set_double("blotch_radius_min", blotch_radius_min);
    cfg.set_double("blotch_radius_max", blotch_radius_max);
    cfg.set_double("blotch_darkness_min", blotch_darkness_min);
    cfg.set_double("blotch_darkness_max", blotch_darkness_max);
    cfg.set_int("blotch_noise_octaves", blotch_noise_octaves);
    cfg.set_double("edge_blur_sigma", edge_blur_sigma);
    cfg.set_double("edge_break_prob", edge_break_prob);
    cfg.set_int("edge_max_shift", edge_max_shift);
    cfg.set_double("noise_sigma", noise_sigma);
    cfg.set_int("blur_length", blur_length);
    cfg.set_double("blur_angle_deg", blur_angle_deg);
    cfg.set_double("resize_scale", resize_scale);
    return cfg.to_string();
}

DegradationRecipe DegradationRecipe::deserialize(const std::string& text) {
    const KvConfig cfg = KvConfig::parse_string(text);
    DegradationRecipe r;
    r.seed = cfg.get_u64("seed", 0);
    const std::string order = cfg.get_str("factor_order", "");
    if (!order.empty()) {
        std::istringstream os(order);
        std::string tok;
        std::size_t i = 0;
        while (std::getline(os, tok, ',')) {
            if (i >= r.factor_order.size())
                throw std::runtime_error("recipe: too many factors in factor_order");
            r.factor_order[i++] = factor_from_name(tok);
        }
        if (i != r.factor_order.size())
            throw std::runtime_error("recipe: factor_order must list all 5 factors");
    }
    r.var_window = static_cast<int>(cfg.get_int("var_window", r.var_window));
    r.mask_percentile = cfg.get_double("mask_percentile", r.mask_percentile);
    r.blotch_count_min = static_cast<int>(cfg.get_int("blotch_count_min", r.blotch_count_min));
    r.blotch_count_max = static_cast<int>(cfg.get_int("blotch_count_max", r.blotch_count_max));
    r.blotch_radius_min = cfg.get_double("blotch_radius_min", r.blotch_radius_min);
    r.blotch_radius_max = cfg.get_double("blotch_radius_max", r.blotch_radius_max);
    r.blotch_darkness_min = cfg.get_double("blotch_darkness_min", r.blotch_darkness_min);
    r.blotch_darkness_max = cfg.get_double("blotch_darkness_max", r.blotch_darkness_max);
    r.blotch_noise_octaves =
        static_cast<int>(cfg.get_int("blotch_noise_octaves", r.blotch_noise_octaves));
    r.edge_blur_sigma = cfg.get_double("edge_blur_sigma", r.edge_blur_sigma);
    r.edge_break_prob = cfg.get_double("edge_break_prob", r.edge_break_prob);
    r.edge_max_shift = static_cast<int>(cfg.get_int("edge_max_shift", r.edge_max_shift));
    r.noise_sigma = cfg.get_double("noise_sigma", r.noise_sigma);
    r.blur_length = static_cast<int>(cfg.get_int("blur_length", r.blur_length));
    r.blur_angle_deg = cfg.get_double("blur_angle_deg", r.blur_angle_deg);
    r.resize_scale = cfg.get_double("resize_scale", r.resize_scale);
    r.validate();
    return r;
}

DegradationRecipe DegradationRecipe::identity(std::uint64_t seed) {
    DegradationRecipe r;
    r.seed = seed;
    r.blotch_count_min = 0;
    r.blotch_count_max = 0;
    r.edge_blur_sigma = 0.0;
    r.edge_break_prob = 0.0;
    r.noise_sigma = 0.0;
    r.blur_length = 1;
    r.resize_scale = 1.0;
    return r;
}

std::size_t RegionMask::count() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t(1)));
}

Image to_grayscale(const Image& rgb) {
    if (rgb.c != 3) throw std::invalid_argument("to_grayscale: expected 3 channels");
    for (double v : rgb.data)
        if (v < 0.0 || v > 1.0)
            throw std::invalid_argument("to_grayscale: values must be in [0,1]");
    return to_luma(rgb);
}

RegionMask low_detail_mask(const Image& gray_in, int var_window, double percentile) {
    const Image gray = expect_gray(gray_in, "low_detail_mask");
    if (var_window < 3 || var_window % 2 == 0)
        throw std::invalid_argument("low_detail_mask: var_window must be odd and >= 3");
    if (percentile <= 0.0 || percentile >= 100.0)
        throw std::invalid_argument("low_detail_mask: percentile must be in (0,100)");
    const int h = gray.h, w = gray.w, r = var_window / 2;

    std::vector<double> var(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s = 0.0, s2 = 0.0;
            int n = 0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const double v = gray.at(0, reflect(y + dy, h), reflect(x + dx, w));
                    s += v;
                    s2 += v * v;
                    ++n;
                }
            const double m = s / n;
            var[static_cast<std::size_t>(y) * w + x] = std::max(0.0, s2 / n - m * m);
        }
    }
    std::vector<double> mag;
    gradient_maps(gray, mag, nullptr, nullptr);

    const double var_thr = percentile_value(var, percentile);
    const double mag_thr = percentile_value(mag, percentile);
    RegionMask mask(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            mask.set(y, x, var[i] <= var_thr && mag[i] <= mag_thr);
        }
    return mask;
}

Image synth_blotches(const Image& gray_in, const RegionMask& mask, Rng& rng,
                     const BlotchParams& params) {
    Image out = expect_gray(gray_in, "synth_blotches");
    if (mask.h != out.h || mask.w != out.w)
        throw std::invalid_argument("synth_blotches: mask shape mismatch");
    const int n_patches = static_cast<int>(rng.uniform_int(params.count_min, params.count_max));
    if (n_patches <= 0) return out;

    std::vector<std::size_t> masked;
    for (std::size_t i = 0; i < mask.mask.size(); ++i)
        if (mask.mask[i]) masked.push_back(i);
    if (masked.empty()) return out;

    const int h = out.h, w = out.w;
    const double dim = static_cast<double>(std::min(h, w));

    for (int pi = 0; pi < n_patches; ++pi) {
        const std::size_t centre =
            masked[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(masked.size()) - 1))];
        const double cy = static_cast<double>(centre / w);
        const double cx = static_cast<double>(centre % w);
        const double rx = dim * rng.uniform(params.radius_min, params.radius_max);
        const double ry = dim * rng.uniform(params.radius_min, params.radius_max);
        const double rot = rng.uniform(0.0, kPi);
        const double darkness = rng.uniform(params.darkness_min, params.darkness_max);
        const bool polygonal = rng.bernoulli(0.5);

        // star-shaped radial profile: constant 1 for ellipses, piecewise
        // linear between random vertex radii for polygonal bases
        std::vector<double> vertex_radius;
        if (polygonal) {
            const int k = static_cast<int>(rng.uniform_int(5, 8));
            vertex_radius.resize(k);
            for (double& v : vertex_radius) v = rng.uniform(0.55, 1.0);
        }

        // layered noise over the patch bounding box
        const int x0 = std::max(0, static_cast<int>(cx - rx - ry));
        const int x1 = std::min(w - 1, static_cast<int>(cx + rx + ry) + 1);
        const int y0 = std::max(0, static_cast<int>(cy - rx - ry));
        const int y1 = std::min(h - 1, static_cast<int>(cy + rx + ry) + 1);
        const int bw = x1 - x0 + 1, bh = y1 - y0 + 1;
        std::vector<double> noise(static_cast<std::size_t>(bw) * bh, 0.0);
        double amp = 1.0, amp_total = 0.0;
        int cell = std::max(2, std::min(bw, bh) / 2);
        for (int oct = 0; oct < std::max(1, params.noise_octaves); ++oct) {
            const auto layer = value_noise(bh, bw, cell, rng);
            for (std::size_t i = 0; i < noise.size(); ++i) noise[i] += amp * layer[i];
            amp_total += amp;
            amp *= 0.5;
            cell = std::max(2, cell / 2);
        }
        for (double& v : noise) v /= amp_total;

        const double cr = std::cos(rot), sr = std::sin(rot);
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                if (!mask.at(y, x)) continue; // strictly confined to the mask
                const double dx = x - cx, dy = y - cy;
                const double ux = (dx * cr + dy * sr) / rx;
                const double uy = (-dx * sr + dy * cr) / ry;
                double d = std::sqrt(ux * ux + uy * uy);
                if (polygonal && d > 0.0) {
                    const double theta = std::atan2(uy, ux) + kPi; // [0, 2pi)
                    const int k = static_cast<int>(vertex_radius.size());
                    const double seg = theta / (2.0 * kPi) * k;
                    const int s0 = std::min(k - 1, static_cast<int>(seg));
                    const double f = seg - s0;
                    const double rad =
                        (1.0 - f) * vertex_radius[s0] + f * vertex_radius[(s0 + 1) % k];
                    d /= rad;
                }
                if (d >= 1.0) continue;
                const double falloff = std::min(1.0, (1.0 - d) / 0.35);
                const double grain =
                    0.25 + 0.75 * noise[static_cast<std::size_t>(y - y0) * bw + (x - x0)];
                out.at(0, y, x) =
                    std::clamp(out.at(0, y, x) - darkness * falloff * grain, 0.0, 1.0);
            }
        }
    }
    return out;
}

Image gaussian_blur(const Image& gray_in, double sigma) {
    Image gray = expect_gray(gray_in, "gaussian_blur");
    if (sigma <= 0.0) return gray;
    const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * r + 1);
    double norm = 0.0;
    for (int i = -r; i <= r; ++i) {
        k[i + r] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        norm += k[i + r];
    }
    for (double& v : k) v /= norm;

    const int h = gray.h, w = gray.w;
    Image tmp(h, w, 1), out(h, w, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k[i + r] * gray.at(0, y, reflect(x + i, w));
            tmp.at(0, y, x) = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.at(0, reflect(y + i, h), x);
            out.at(0, y, x) = acc;
        }
    return out;
}

double otsu_threshold(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    const auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
    const double mn = *mn_it, mx = *mx_it;
    if (mx <= mn) return mn;
    constexpr int kBins = 256;
    std::vector<double> hist(kBins, 0.0);
    for (double v : values) {
        int b = static_cast<int>((v - mn) / (mx - mn) * (kBins - 1));
        hist[std::clamp(b, 0, kBins - 1)] += 1.0;
    }
    const double total = static_cast<double>(values.size());
    double sum_all = 0.0;
    for (int i = 0; i < kBins; ++i) sum_all += i * hist[i];
    double w0 = 0.0, sum0 = 0.0, best_var = -1.0;
    int best_bin = 0;
    for (int i = 0; i < kBins; ++i) {
        w0 += hist[i];
        if (w0 == 0.0) continue;
        const double w1 = total - w0;
        if (w1 == 0.0) break;
        sum0 += i * hist[i];
        const double m0 = sum0 / w0;
        const double m1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (between > best_var) {
            best_var = between;
            best_bin = i;
        }
    }
    return mn + (best_bin + 0.5) / (kBins - 1) * (mx - mn);
}

Image degrade_edges(const Image& gray_in, Rng& rng, double blur_sigma, double break_prob,
                    int max_shift) {
    Image gray = expect_gray(gray_in, "degrade_edges");
    if (blur_sigma < 0.0) throw std::invalid_argument("degrade_edges: blur_sigma must be >= 0");
    if (blur_sigma == 0.0 && break_prob == 0.0) return gray;

    const int h = gray.h, w = gray.w;
    std::vector<double> mag, gx, gy;
    gradient_maps(gray, mag, &gx, &gy);
    const double thr = otsu_threshold(mag);
    std::vector<std::uint8_t> edge(mag.size(), 0);
    bool any_edge = false;
    for (std::size_t i = 0; i < mag.size(); ++i)
        if (mag[i] > thr && mag[i] > 1e-12) {
            edge[i] = 1;
            any_edge = true;
        }
    if (!any_edge) return gray;

    Image out = gray;
    if (blur_sigma > 0.0) {
        const Image blurred = gaussian_blur(gray, blur_sigma);
        // soften the edge mask with the same kernel to get a blend weight
        Image mask_img(h, w, 1);
        for (std::size_t i = 0; i < edge.size(); ++i) mask_img.data[i] = edge[i] ? 1.0 : 0.0;
        Image soft = gaussian_blur(mask_img, blur_sigma);
        double peak = 0.0;
        for (double v : soft.data) peak = std::max(peak, v);
        if (peak > 0.0)
            for (double& v : soft.data) v = std::min(1.0, v / peak);
        for (std::size_t i = 0; i < out.data.size(); ++i)
            out.data[i] = soft.data[i] * blurred.data[i] + (1.0 - soft.data[i]) * gray.data[i];
    }

    if (break_prob > 0.0 && max_shift > 0) {
        // edge segments are 8x8 tiles containing edge pixels; a broken
        // segment displaces its edge pixels along the dominant normal
        constexpr int kTile = 8;
        const Image src = out;
        for (int ty = 0; ty < h; ty += kTile) {
            for (int tx = 0; tx < w; tx += kTile) {
                double sgx = 0.0, sgy = 0.0;
                int n_edge = 0;
                for (int y = ty; y < std::min(ty + kTile, h); ++y)
                    for (int x = tx; x < std::min(tx + kTile, w); ++x) {
                        const std::size_t i = static_cast<std::size_t>(y) * w + x;
                        if (edge[i]) {
                            sgx += gx[i];
                            sgy += gy[i];
                            ++n_edge;
                        }
                    }
                if (n_edge == 0) continue;
                if (!rng.bernoulli(break_prob)) continue;
                const double norm = std::hypot(sgx, sgy);
                double nx = 1.0, ny = 0.0;
                if (norm > 1e-12) {
                    nx = sgx / norm;
                    ny = sgy / norm;
                }
                const int shift = static_cast<int>(rng.uniform_int(1, max_shift));
                const int ox = static_cast<int>(std::lround(nx * shift));
                const int oy = static_cast<int>(std::lround(ny * shift));
                for (int y = ty; y < std::min(ty + kTile, h); ++y)
                    for (int x = tx; x < std::min(tx + kTile, w); ++x) {
                        const std::size_t i = static_cast<std::size_t>(y) * w + x;
                        if (!edge[i]) continue;
                        out.at(0, y, x) =
                            src.at(0, std::clamp(y - oy, 0, h - 1), std::clamp(x - ox, 0, w - 1));
                    }
            }
        }
    }
    clamp01(out);
    return out;
}

Image add_gaussian_noise(const Image& gray_in, Rng& rng, double sigma) {
    Image out = expect_gray(gray_in, "add_gaussian_noise");
    if (sigma < 0.0) throw std::invalid_argument("add_gaussian_noise: sigma must be >= 0");
    if (sigma == 0.0) return out;
    for (double& v : out.data) v = std::clamp(v + sigma * rng.normal(), 0.0, 1.0);
    return out;
}

Image motion_blur(const Image& gray_in, int length, double angle_deg) {
    Image gray = expect_gray(gray_in, "motion_blur");
    if (length < 1) throw std::invalid_argument("motion_blur: length must be >= 1");
    if (length == 1) return gray;

    // bilinear splat of `length` unit-spaced taps along the line
    const int half = (length - 1) / 2 + 1;
    const int ks = 2 * half + 1;
    std::vector<double> kernel(static_cast<std::size_t>(ks) * ks, 0.0);
    const double rad = angle_deg * kPi / 180.0;
    const double dx = std::cos(rad), dy = std::sin(rad);
    for (int i = 0; i < length; ++i) {
        const double s = i - (length - 1) / 2.0;
        const double px = half + s * dx;
        const double py = half + s * dy;
        const int x0 = static_cast<int>(std::floor(px)), y0 = static_cast<int>(std::floor(py));
        const double fx = px - x0, fy = py - y0;
        kernel[static_cast<std::size_t>(y0) * ks + x0] += (1 - fx) * (1 - fy);
        kernel[static_cast<std::size_t>(y0) * ks + x0 + 1] += fx * (1 - fy);
        kernel[static_cast<std::size_t>(y0 + 1) * ks + x0] += (1 - fx) * fy;
        kernel[static_cast<std::size_t>(y0 + 1) * ks + x0 + 1] += fx * fy;
    }
    double norm = 0.0;
    for (double v : kernel) norm += v;
    for (double& v : kernel) v /= norm;

    const int h = gray.h, w = gray.w;
    Image out(h, w, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int ky = 0; ky < ks; ++ky)
                for (int kx = 0; kx < ks; ++kx) {
                    const double kv = kernel[static_cast<std::size_t>(ky) * ks + kx];
                    if (kv == 0.0) continue;
                    acc += kv * gray.at(0, reflect(y + ky - half, h), reflect(x + kx - half, w));
                }
            out.at(0, y, x) = acc;
        }
    return out;
}

namespace {

// exact area-average resampling along one axis
std::vector<double> area_downsample_axis(const std::vector<double>& src, int n_src, int n_dst,
                                         int stride, int count, int outer_stride) {
    // resamples `count` independent lines of length n_src
    std::vector<double> dst(static_cast<std::size_t>(n_dst) * count, 0.0);
    const double f = static_cast<double>(n_src) / n_dst;
    for (int line = 0; line < count; ++line) {
        const double* s = src.data() + static_cast<std::size_t>(line) * outer_stride;
        double* d = dst.data() + static_cast<std::size_t>(line) * n_dst;
        for (int o = 0; o < n_dst; ++o) {
            const double a = o * f, b = (o + 1) * f;
            double acc = 0.0;
            for (int i = static_cast<int>(a); i < n_src && i < b; ++i) {
                const double lo = std::max(a, static_cast<double>(i));
                const double hi = std::min(b, static_cast<double>(i + 1));
                if (hi > lo) acc += (hi - lo) * s[i * stride];
            }
            d[o] = acc / f;
        }
    }
    return dst;
}

} // namespace

Image resize_cycle(const Image& gray_in, double scale) {
    Image gray = expect_gray(gray_in, "resize_cycle");
    if (scale <= 0.0 || scale > 1.0)
        throw std::invalid_argument("resize_cycle: scale must be in (0,1]");
    if (scale == 1.0) return gray;
    const int h = gray.h, w = gray.w;
    const int dh = std::max(1, static_cast<int>(std::lround(h * scale)));
    const int dw = std::max(1, static_cast<int>(std::lround(w * scale)));
    if (dh == h && dw == w) return gray;

    // area-average down: rows then columns
    std::vector<double> rows = area_downsample_axis(gray.data, w, dw, 1, h, w);
    // transpose access for the column pass
    std::vector<double> cols_in(static_cast<std::size_t>(dw) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < dw; ++x)
            cols_in[static_cast<std::size_t>(x) * h + y] = rows[static_cast<std::size_t>(y) * dw + x];
    std::vector<double> small_t = area_downsample_axis(cols_in, h, dh, 1, dw, h);
    Image small(dh, dw, 1);
    for (int x = 0; x < dw; ++x)
        for (int y = 0; y < dh; ++y)
            small.at(0, y, x) = small_t[static_cast<std::size_t>(x) * dh + y];

    // bilinear up with half-pixel centres
    Image out(h, w, 1);
    const double fy = static_cast<double>(dh) / h;
    const double fx = static_cast<double>(dw) / w;
    for (int y = 0; y < h; ++y) {
        const double sy = (y + 0.5) * fy - 0.5;
        int y0 = static_cast<int>(std::floor(sy));
        double wy = sy - y0;
        if (y0 < 0) {
            y0 = 0;
            wy = 0.0;
        }
        if (y0 >= dh - 1) {
            y0 = dh - 1;
            wy = 0.0;
        }
        const int y1 = std::min(y0 + 1, dh - 1);
        for (int x = 0; x < w; ++x) {
            const double sx = (x + 0.5) * fx - 0.5;
            int x0 = static_cast<int>(std::floor(sx));
            double wx = sx - x0;
            if (x0 < 0) {
                x0 = 0;
                wx = 0.0;
            }
            if (x0 >= dw - 1) {
                x0 = dw - 1;
                wx = 0.0;
            }
            const int x1 = std::min(x0 + 1, dw - 1);
            out.at(0, y, x) = (1 - wy) * ((1 - wx) * small.at(0, y0, x0) + wx * small.at(0, y0, x1)) +
                              wy * ((1 - wx) * small.at(0, y1, x0) + wx * small.at(0, y1, x1));
        }
    }
    return out;
}

Image apply_recipe(const Image& image, const DegradationRecipe& recipe) {
    recipe.validate();
    Image cur = image.c == 3 ? to_grayscale(image) : expect_gray(image, "apply_recipe");
    // independent per-factor streams so each factor's draw depends only on
    // the recipe seed, not on the shuffle order
    for (DegradeFactor f : recipe.factor_order) {
        Rng rng(mix_seed(recipe.seed, static_cast<std::uint64_t>(f) + 101));
        switch (f) {
        case DegradeFactor::Blotch: {
            if (recipe.blotch_count_max <= 0) break;
            const RegionMask mask =
                low_detail_mask(cur, recipe.var_window, recipe.mask_percentile);
            BlotchParams bp;
            bp.count_min = recipe.blotch_count_min;
            bp.count_max = recipe.blotch_count_max;
            bp.radius_min = recipe.blotch_radius_min;
            bp.radius_max = recipe.blotch_radius_max;
            bp.darkness_min = recipe.blotch_darkness_min;
            bp.darkness_max = recipe.blotch_darkness_max;
            bp.noise_octaves = recipe.blotch_noise_octaves;
            cur = synth_blotches(cur, mask, rng, bp);
            break;
        }
        case DegradeFactor::Edge:
            cur = degrade_edges(cur, rng, recipe.edge_blur_sigma, recipe.edge_break_prob,
                                recipe.edge_max_shift);
            break;
        case DegradeFactor::Noise:
            cur = add_gaussian_noise(cur, rng, recipe.noise_sigma);
            break;
        case DegradeFactor::MotionBlur:
            cur = motion_blur(cur, recipe.blur_length, recipe.blur_angle_deg);
            break;
        case DegradeFactor::Resize:
            cur = resize_cycle(cur, recipe.resize_scale);
            break;
        }
    }
    clamp01(cur);
    return cur;
}

} // namespace evlab
