#pragma once

#include "evlab/rng.hpp"
#include "evlab/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace evlab {

struct Event {
    std::uint16_t x = 0;
    std::uint16_t y = 0;
    std::uint64_t t = 0; // microseconds
    std::int8_t p = 1;   // +1 or -1

    bool operator==(const Event&) const = default;
};

// Time-sorted event list with fixed sensor geometry. Immutable by
// convention after construction/parsing.
struct EventStream {
    std::uint16_t width = 0;
    std::uint16_t height = 0;
    std::vector<Event> events;

    bool empty() const { return events.empty(); }
    std::size_t size() const { return events.size(); }
    std::uint64_t t_first() const { return events.front().t; }
    std::uint64_t t_last() const { return events.back().t; }
};

// validates coordinates/polarity/order; stable-sorts by timestamp
void finalize_stream(EventStream& s, const std::string& context);

// Binary event file, magic "EVS1":
//   "EVS1" | u16 width | u16 height | u64 count | count * (u16 x, u16 y, u64 t, i8 p)
// little-endian throughout.
EventStream parse_evs(const std::string& path);
void write_evs(const std::string& path, const EventStream& s);

// CSV alternative with header line "t,x,y,p"
EventStream parse_csv(const std::string& path, std::uint16_t width, std::uint16_t height);
void write_csv(const std::string& path, const EventStream& s);

// events with t in [t0, t0+dt)
EventStream window(const EventStream& s, std::uint64_t t0, std::uint64_t dt);

struct VoxelGrid {
    int h = 0;
    int w = 0;
    int t_bins = 0;
    std::vector<double> data; // [T][H][W]

    VoxelGrid() = default;
    VoxelGrid(int h_, int w_, int t_bins_)
        : h(h_), w(w_), t_bins(t_bins_),
          data(static_cast<std::size_t>(h_) * w_ * t_bins_, 0.0) {}

    double& at(int bin, int y, int x) {
        return data[(static_cast<std::size_t>(bin) * h + y) * w + x];
    }
    double at(int bin, int y, int x) const {
        return data[(static_cast<std::size_t>(bin) * h + y) * w + x];
    }

    Tensor to_tensor() const { return Tensor::from_data({t_bins, h, w}, data); }
};

// Bilinear temporal binning over explicit window bounds [t0, t1): each event
// contributes p split between the two nearest of T bin centres placed at
// normalized times 0..T-1. Per-event absolute mass is exactly 1.
VoxelGrid to_voxel_grid(const EventStream& window, int t_bins, std::uint64_t t0,
                        std::uint64_t t1);
// bounds from the stream's first/last event
VoxelGrid to_voxel_grid(const EventStream& window, int t_bins);

struct KillRect {
    std::uint16_t x0 = 0, y0 = 0;
    std::uint16_t w = 0, h = 0;
    std::int8_t polarity = 1; // the polarity removed inside the rect

    bool contains(std::uint16_t x, std::uint16_t y) const {
        return x >= x0 && x < x0 + w && y >= y0 && y < y0 + h;
    }
};

struct KillRectParams {
    int min_count = 0;
    int max_count = 3;
    double max_frac = 0.25; // per-dimension size cap
};

std::vector<KillRect> sample_kill_rects(Rng& rng, std::uint16_t width, std::uint16_t height,
                                        const KillRectParams& params);

// Training-time event corruption: same-pixel same-polarity events within
// merge_window collapse onto the earliest of the group, survivors drop with
// drop_prob, and each kill rect removes one polarity entirely.
EventStream degrade_online(const EventStream& s, Rng& rng, std::uint64_t merge_window,
                           double drop_prob, const std::vector<KillRect>& kill_rects);

} // namespace evlab
