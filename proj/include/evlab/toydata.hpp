#pragma once

#include "evlab/image.hpp"
#include "evlab/simulator.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace evlab {

// Procedural color image: smooth gradient background plus a few soft
// shapes. Deterministic in the seed.
Image make_toy_image(std::uint64_t seed, int h, int w);

struct ToyVideo {
    std::vector<Image> color;             // [0,1] RGB frames
    std::vector<std::uint64_t> timestamps; // microseconds

    FrameSequence luma_sequence() const;
};

// moving shapes over a static gradient background
ToyVideo make_toy_video(std::uint64_t seed, int n_frames, int h, int w,
                        std::uint64_t frame_dt_us);

// writes count PPM images named 000000.ppm.. plus returns the paths
std::vector<std::string> generate_toy_corpus(const std::string& dir, int count, int h, int w,
                                             std::uint64_t seed);

// writes video_000/.. each with frame PPMs and a "timestamp path" manifest
std::vector<std::string> generate_toy_videos(const std::string& root, int count, int n_frames,
                                             int h, int w, std::uint64_t frame_dt_us,
                                             std::uint64_t seed);

} // namespace evlab
