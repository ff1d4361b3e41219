#pragma once

#include "evlab/image.hpp"
#include "evlab/rng.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace evlab {

enum class DegradeFactor { Blotch, Edge, Noise, MotionBlur, Resize };

const char* factor_name(DegradeFactor f);
DegradeFactor factor_from_name(const std::string& name);

// Seeded, ordered description of one LQ synthesis. apply_recipe is a pure
// function of (image, recipe); identical recipes give bit-identical output.
struct DegradationRecipe {
    std::uint64_t seed = 0;
    std::array<DegradeFactor, 5> factor_order = {
        DegradeFactor::Blotch, DegradeFactor::Edge, DegradeFactor::Noise,
        DegradeFactor::MotionBlur, DegradeFactor::Resize};

    // low-detail mask feeding the blotch factor
    int var_window = 7;
    double mask_percentile = 35.0;

    // blotches
    int blotch_count_min = 1;
    int blotch_count_max = 4;
    double blotch_radius_min = 0.05; // fraction of min(h,w)
    double blotch_radius_max = 0.16;
    double blotch_darkness_min = 0.10;
    double blotch_darkness_max = 0.35;
    int blotch_noise_octaves = 3;

    // edges
    double edge_blur_sigma = 1.0;
    double edge_break_prob = 0.3;
    int edge_max_shift = 2;

    // noise
    double noise_sigma = 0.04;

    // motion blur
    int blur_length = 5;
    double blur_angle_deg = 0.0;

    // resize cycle; 1.0 disables the factor
    double resize_scale = 0.5;

    void validate() const;
    std::string serialize() const;
    static DegradationRecipe deserialize(const std::string& text);
    static DegradationRecipe identity(std::uint64_t seed);
};

struct RegionMask {
    int h = 0;
    int w = 0;
    std::vector<std::uint8_t> mask;

    RegionMask() = default;
    RegionMask(int h_, int w_) : h(h_), w(w_), mask(static_cast<std::size_t>(h_) * w_, 0) {}
    bool at(int y, int x) const { return mask[static_cast<std::size_t>(y) * w + x] != 0; }
    void set(int y, int x, bool v) { mask[static_cast<std::size_t>(y) * w + x] = v ? 1 : 0; }
    std::size_t count() const;
};

// validated luma conversion (3-channel [0,1] input)
Image to_grayscale(const Image& rgb);

// marks pixels whose local variance AND gradient magnitude both fall at or
// below their percentile thresholds over the whole image
RegionMask low_detail_mask(const Image& gray, int var_window, double percentile);

struct BlotchParams {
    int count_min = 1;
    int count_max = 4;
    double radius_min = 0.05;
    double radius_max = 0.16;
    double darkness_min = 0.10;
    double darkness_max = 0.35;
    int noise_octaves = 3;
};

// dark soft-edged elliptical/polygonal patches modulated by value noise,
// strictly confined to masked pixels
Image synth_blotches(const Image& gray, const RegionMask& mask, Rng& rng,
                     const BlotchParams& params);

// Gaussian blur along detected edges (Otsu threshold on gradient magnitude)
// plus stochastic local displacement of edge segments
Image degrade_edges(const Image& gray, Rng& rng, double blur_sigma, double break_prob,
                    int max_shift);

Image add_gaussian_noise(const Image& gray, Rng& rng, double sigma);

// normalized line kernel, reflective border
Image motion_blur(const Image& gray, int length, double angle_deg);

// area-average downsample by scale, bilinear upsample back; output shape
// always equals input shape
Image resize_cycle(const Image& gray, double scale);

// grayscale conversion then the five factors in recipe order
Image apply_recipe(const Image& image, const DegradationRecipe& recipe);

// shared helpers (also used by tests)
Image gaussian_blur(const Image& gray, double sigma);
double otsu_threshold(const std::vector<double>& values);

} // namespace evlab
