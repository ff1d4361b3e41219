#pragma once

#include "evlab/events.hpp"
#include "evlab/image.hpp"
#include "evlab/rng.hpp"

#include <string>
#include <vector>

namespace evlab {

// DVS model configuration. Contrast thresholds are in log-intensity units.
struct SimConfig {
    double c_pos = 0.2;
    double c_neg = 0.2;
    std::uint64_t refractory_us = 0;
    double log_eps = 1e-3;          // added before the log, guards log(0)
    double bandwidth_cutoff = 1.0;  // first-order IIR coefficient in (0,1]; 1 = off
    double noise_rate = 0.0;        // background events per pixel per second
    double threshold_jitter = 0.0;  // per-pixel std of C

    void validate() const;
};

// grayscale frames in [0,1] with strictly increasing microsecond timestamps
struct FrameSequence {
    std::vector<Image> frames;
    std::vector<std::uint64_t> timestamps;

    void validate() const;
    int height() const { return frames.front().h; }
    int width() const { return frames.front().w; }
};

// manifest text file: one "timestamp_us path" line per frame
FrameSequence load_frame_manifest(const std::string& path);
void write_frame_manifest(const std::string& path, const std::vector<std::uint64_t>& timestamps,
                          const std::vector<std::string>& frame_paths);

// Emits an event whenever the linearly-interpolated log intensity crosses
// the per-pixel reference by +-C; the reference moves by exactly +-C per
// event. Refractory suppresses emissions too close to the pixel's last
// emitted event. With noise_rate = 0 and threshold_jitter = 0 the rng is
// never drawn from.
EventStream simulate(const FrameSequence& frames, const SimConfig& cfg, Rng& rng);

// Direct integration baseline: accumulates +-C in log space from init_log
// and snapshots intensity exp(log) at the requested timestamps. Events with
// t <= snapshot time are applied.
std::vector<Image> integrate_events(const EventStream& stream, double c_pos, double c_neg,
                                    const Image& init_log,
                                    const std::vector<std::uint64_t>& snapshot_times);

// log(I + log_eps) helper used by both simulate and the round-trip tests
Image log_image(const Image& gray, double log_eps);

} // namespace evlab
