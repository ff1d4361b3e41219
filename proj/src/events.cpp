#include "evlab/events.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace evlab {

namespace {

static_assert(std::endian::native == std::endian::little);

[[noreturn]] void bad_stream(const std::string& context, const std::string& msg) {
    throw std::runtime_error("events: " + context + ": " + msg);
}

void check_event(const Event& e, std::uint16_t w, std::uint16_t h, const std::string& context,
                 const std::string& where) {
    if (e.x >= w || e.y >= h)
        bad_stream(context, "coordinate (" + std::to_string(e.x) + "," + std::to_string(e.y) +
                                ") out of bounds for " + std::to_string(w) + "x" +
                                std::to_string(h) + " at " + where);
    if (e.p != 1 && e.p != -1)
        bad_stream(context, "bad polarity " + std::to_string(static_cast<int>(e.p)) + " at " + where);
}

} // namespace

void finalize_stream(EventStream& s, const std::string& context) {
    for (std::size_t i = 0; i < s.events.size(); ++i)
        check_event(s.events[i], s.width, s.height, context, "record " + std::to_string(i));
    std::stable_sort(s.events.begin(), s.events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
}

EventStream parse_evs(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("events: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "EVS1", 4) != 0)
        bad_stream(path, "bad magic at byte 0");
    EventStream s;
    std::uint64_t count = 0;
    is.read(reinterpret_cast<char*>(&s.width), 2);
    is.read(reinterpret_cast<char*>(&s.height), 2);
    is.read(reinterpret_cast<char*>(&count), 8);
    if (!is) bad_stream(path, "truncated header");
    s.events.reserve(count);
    // 13-byte packed record: u16 x, u16 y, u64 t, i8 p
    for (std::uint64_t i = 0; i < count; ++i) {
        unsigned char rec[13];
        is.read(reinterpret_cast<char*>(rec), 13);
        if (!is)
            bad_stream(path, "truncated record " + std::to_string(i) + " at byte offset " +
                                 std::to_string(16 + i * 13));
        Event e;
        std::memcpy(&e.x, rec, 2);
        std::memcpy(&e.y, rec + 2, 2);
        std::memcpy(&e.t, rec + 4, 8);
        std::memcpy(&e.p, rec + 12, 1);
        check_event(e, s.width, s.height, path,
                    "byte offset " + std::to_string(16 + i * 13));
        s.events.push_back(e);
    }
    std::stable_sort(s.events.begin(), s.events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
    return s;
}

void write_evs(const std::string& path, const EventStream& s) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("events: cannot write " + path);
    os.write("EVS1", 4);
    os.write(reinterpret_cast<const char*>(&s.width), 2);
    os.write(reinterpret_cast<const char*>(&s.height), 2);
    const std::uint64_t count = s.events.size();
    os.write(reinterpret_cast<const char*>(&count), 8);
    for (const Event& e : s.events) {
        unsigned char rec[13];
        std::memcpy(rec, &e.x, 2);
        std::memcpy(rec + 2, &e.y, 2);
        std::memcpy(rec + 4, &e.t, 8);
        std::memcpy(rec + 12, &e.p, 1);
        os.write(reinterpret_cast<const char*>(rec), 13);
    }
    if (!os) throw std::runtime_error("events: write failed for " + path);
}

EventStream parse_csv(const std::string& path, std::uint16_t width, std::uint16_t height) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("events: cannot open " + path);
    EventStream s;
    s.width = width;
    s.height = height;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        if (lineno == 1 && line.rfind("t,", 0) == 0) continue; // header "t,x,y,p"
        std::istringstream ls(line);
        std::uint64_t t;
        long x, y, p;
        char c1, c2, c3;
        if (!(ls >> t >> c1 >> x >> c2 >> y >> c3 >> p) || c1 != ',' || c2 != ',' || c3 != ',')
            bad_stream(path, "malformed CSV at line " + std::to_string(lineno) + ": " + line);
        if (x < 0 || y < 0 || x > 0xffff || y > 0xffff)
            bad_stream(path, "coordinate out of range at line " + std::to_string(lineno));
        Event e{static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), t,
                static_cast<std::int8_t>(p)};
        check_event(e, width, height, path, "line " + std::to_string(lineno));
        s.events.push_back(e);
    }
    std::stable_sort(s.events.begin(), s.events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
    return s;
}

void write_csv(const std::string& path, const EventStream& s) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("events: cannot write " + path);
    os << "t,x,y,p\n";
    for (const Event& e : s.events)
        os << e.t << ',' << e.x << ',' << e.y << ',' << static_cast<int>(e.p) << "\n";
    if (!os) throw std::runtime_error("events: write failed for " + path);
}

EventStream window(const EventStream& s, std::uint64_t t0, std::uint64_t dt) {
    if (dt == 0) throw std::invalid_argument("events::window: dt must be positive");
    EventStream out;
    out.width = s.width;
    out.height = s.height;
    const auto lo = std::lower_bound(s.events.begin(), s.events.end(), t0,
                                     [](const Event& e, std::uint64_t t) { return e.t < t; });
    const auto hi = std::lower_bound(lo, s.events.end(), t0 + dt,
                                     [](const Event& e, std::uint64_t t) { return e.t < t; });
    out.events.assign(lo, hi);
    return out;
}

VoxelGrid to_voxel_grid(const EventStream& win, int t_bins, std::uint64_t t0,
                        std::uint64_t t1) {
    if (t_bins < 1) throw std::invalid_argument("to_voxel_grid: t_bins must be >= 1");
    VoxelGrid grid(win.height, win.width, t_bins);
    const double span = t1 > t0 ? static_cast<double>(t1 - t0) : 0.0;
    for (const Event& e : win.events) {
        const double p = static_cast<double>(e.p);
        if (t_bins == 1 || span <= 0.0) {
            grid.at(0, e.y, e.x) += p;
            continue;
        }
        const double tn =
            (static_cast<double>(e.t - t0) / span) * static_cast<double>(t_bins - 1);
        int b0 = static_cast<int>(tn);
        if (b0 > t_bins - 1) b0 = t_bins - 1;
        const double frac = tn - b0;
        grid.at(b0, e.y, e.x) += p * (1.0 - frac);
        if (frac > 0.0 && b0 + 1 < t_bins) grid.at(b0 + 1, e.y, e.x) += p * frac;
    }
    return grid;
}

VoxelGrid to_voxel_grid(const EventStream& win, int t_bins) {
    if (win.empty()) return VoxelGrid(win.height, win.width, t_bins < 1 ? 1 : t_bins);
    return to_voxel_grid(win, t_bins, win.t_first(), win.t_last());
}

std::vector<KillRect> sample_kill_rects(Rng& rng, std::uint16_t width, std::uint16_t height,
                                        const KillRectParams& params) {
    std::vector<KillRect> rects;
    const int count = static_cast<int>(rng.uniform_int(params.min_count, params.max_count));
    for (int i = 0; i < count; ++i) {
        KillRect r;
        const int max_w = std::max(1, static_cast<int>(width * params.max_frac));
        const int max_h = std::max(1, static_cast<int>(height * params.max_frac));
        r.w = static_cast<std::uint16_t>(rng.uniform_int(1, max_w));
        r.h = static_cast<std::uint16_t>(rng.uniform_int(1, max_h));
        r.x0 = static_cast<std::uint16_t>(rng.uniform_int(0, width - r.w));
        r.y0 = static_cast<std::uint16_t>(rng.uniform_int(0, height - r.h));
        r.polarity = rng.bernoulli(0.5) ? 1 : -1;
        rects.push_back(r);
    }
    return rects;
}

EventStream degrade_online(const EventStream& s, Rng& rng, std::uint64_t merge_window,
                           double drop_prob, const std::vector<KillRect>& kill_rects) {
    if (drop_prob < 0.0 || drop_prob > 1.0)
        throw std::invalid_argument("degrade_online: drop_prob must be in [0,1]");
    EventStream out;
    out.width = s.width;
    out.height = s.height;
    out.events.reserve(s.events.size());

    // anchor timestamp of the last kept event per (pixel, polarity)
    const std::size_t npx = static_cast<std::size_t>(s.width) * s.height;
    std::vector<std::uint64_t> last_kept(npx * 2, ~0ULL);

    for (const Event& e : s.events) {
        if (merge_window > 0) {
            const std::size_t slot =
                (static_cast<std::size_t>(e.y) * s.width + e.x) * 2 + (e.p > 0 ? 0 : 1);
            const std::uint64_t anchor = last_kept[slot];
            if (anchor != ~0ULL && e.t >= anchor && e.t - anchor < merge_window)
                continue; // merged into the anchor event
            last_kept[slot] = e.t;
        }
        if (drop_prob > 0.0 && rng.bernoulli(drop_prob)) continue;
        bool killed = false;
        for (const KillRect& r : kill_rects) {
            if (e.p == r.polarity && r.contains(e.x, e.y)) {
                killed = true;
                break;
            }
        }
        if (killed) continue;
        out.events.push_back(e);
    }
    return out;
}

} // namespace evlab
