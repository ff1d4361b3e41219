#include "evlab/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace evlab {

void SimConfig::validate() const {
    if (c_pos <= 0.0 || c_neg <= 0.0)
        throw std::invalid_argument("SimConfig: contrast thresholds must be positive");
    if (noise_rate < 0.0) throw std::invalid_argument("SimConfig: noise_rate must be >= 0");
    if (bandwidth_cutoff <= 0.0 || bandwidth_cutoff > 1.0)
        throw std::invalid_argument("SimConfig: bandwidth_cutoff must be in (0,1]");
    if (log_eps <= 0.0) throw std::invalid_argument("SimConfig: log_eps must be positive");
    if (threshold_jitter < 0.0)
        throw std::invalid_argument("SimConfig: threshold_jitter must be >= 0");
}

void FrameSequence::validate() const {
    if (frames.size() < 2)
        throw std::invalid_argument("FrameSequence: need at least 2 frames");
    if (frames.size() != timestamps.size())
        throw std::invalid_argument("FrameSequence: frame/timestamp count mismatch");
    const int h = frames.front().h, w = frames.front().w;
    for (const Image& f : frames)
        if (f.h != h || f.w != w)
            throw std::invalid_argument("FrameSequence: frames differ in shape");
    for (std::size_t i = 1; i < timestamps.size(); ++i)
        if (timestamps[i] <= timestamps[i - 1])
            throw std::invalid_argument("FrameSequence: timestamps must strictly increase");
}

FrameSequence load_frame_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("simulator: cannot open manifest " + path);
    const auto base = std::filesystem::path(path).parent_path();
    FrameSequence seq;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::uint64_t ts;
        std::string frame_path;
        if (!(ls >> ts >> frame_path))
            throw std::runtime_error("simulator: malformed manifest line " +
                                     std::to_string(lineno) + " in " + path);
        std::filesystem::path fp(frame_path);
        if (fp.is_relative()) fp = base / fp;
        Image img = load_image(fp.string());
        seq.frames.push_back(to_luma(img));
        seq.timestamps.push_back(ts);
    }
    seq.validate();
    return seq;
}

void write_frame_manifest(const std::string& path, const std::vector<std::uint64_t>& timestamps,
                          const std::vector<std::string>& frame_paths) {
    if (timestamps.size() != frame_paths.size())
        throw std::invalid_argument("simulator: manifest count mismatch");
    std::ofstream os(path);
    if (!os) throw std::runtime_error("simulator: cannot write manifest " + path);
    for (std::size_t i = 0; i < timestamps.size(); ++i)
        os << timestamps[i] << " " << frame_paths[i] << "\n";
}

Image log_image(const Image& gray, double log_eps) {
    Image out(gray.h, gray.w, 1);
    const Image g = to_luma(gray);
    for (std::size_t i = 0; i < g.numel(); ++i) out.data[i] = std::log(g.data[i] + log_eps);
    return out;
}

EventStream simulate(const FrameSequence& seq, const SimConfig& cfg, Rng& rng) {
    cfg.validate();
    seq.validate();
    const int h = seq.height(), w = seq.width();
    for (const Image& f : seq.frames)
        for (double v : f.data)
            if (!std::isfinite(v))
                throw std::invalid_argument("simulate: non-finite frame value");

    EventStream out;
    out.width = static_cast<std::uint16_t>(w);
    out.height = static_cast<std::uint16_t>(h);

    const std::size_t npx = static_cast<std::size_t>(h) * w;
    std::vector<double> c_pos(npx, cfg.c_pos), c_neg(npx, cfg.c_neg);
    if (cfg.threshold_jitter > 0.0) {
        for (std::size_t i = 0; i < npx; ++i) {
            c_pos[i] = std::max(1e-3, cfg.c_pos + cfg.threshold_jitter * rng.normal());
            c_neg[i] = std::max(1e-3, cfg.c_neg + cfg.threshold_jitter * rng.normal());
        }
    }

    // per-pixel reference level and optional first-order low-pass state
    std::vector<double> log_prev(npx), log_cur(npx), ref(npx);
    std::vector<std::uint64_t> last_emit(npx, ~0ULL);
    {
        const Image l0 = log_image(seq.frames[0], cfg.log_eps);
        std::copy(l0.data.begin(), l0.data.end(), log_prev.begin());
        ref = log_prev;
    }

    for (std::size_t fi = 1; fi < seq.frames.size(); ++fi) {
        const Image lf = log_image(seq.frames[fi], cfg.log_eps);
        const double t0 = static_cast<double>(seq.timestamps[fi - 1]);
        const double t1 = static_cast<double>(seq.timestamps[fi]);
        for (std::size_t i = 0; i < npx; ++i) {
            double target = lf.data[i];
            if (cfg.bandwidth_cutoff < 1.0)
                target = log_prev[i] + cfg.bandwidth_cutoff * (target - log_prev[i]);
            log_cur[i] = target;

            const double l_start = log_prev[i];
            const double l_end = log_cur[i];
            if (l_end == l_start) continue;
            const std::uint16_t ex = static_cast<std::uint16_t>(i % w);
            const std::uint16_t ey = static_cast<std::uint16_t>(i / w);
            while (true) {
                double crossing;
                std::int8_t pol;
                if (l_end >= ref[i] + c_pos[i]) {
                    crossing = ref[i] + c_pos[i];
                    pol = 1;
                } else if (l_end <= ref[i] - c_neg[i]) {
                    crossing = ref[i] - c_neg[i];
                    pol = -1;
                } else {
                    break;
                }
                const double frac = (crossing - l_start) / (l_end - l_start);
                const double tc = t0 + frac * (t1 - t0);
                // ceil keeps "applied by integer snapshot time" equivalent to
                // "crossed by that time", which the round-trip bound relies on
                const std::uint64_t ts = static_cast<std::uint64_t>(std::ceil(tc));
                ref[i] += pol > 0 ? c_pos[i] : -c_neg[i];
                const bool refractory_hit = cfg.refractory_us > 0 && last_emit[i] != ~0ULL &&
                                            ts - last_emit[i] < cfg.refractory_us;
                if (!refractory_hit) {
                    out.events.push_back(Event{ex, ey, ts, pol});
                    last_emit[i] = ts;
                }
            }
        }
        std::swap(log_prev, log_cur);
    }

    // background noise as a per-pixel Poisson process with random polarity
    if (cfg.noise_rate > 0.0) {
        const double t_begin = static_cast<double>(seq.timestamps.front());
        const double t_end = static_cast<double>(seq.timestamps.back());
        for (std::size_t i = 0; i < npx; ++i) {
            double t = t_begin;
            while (true) {
                t += rng.exponential(cfg.noise_rate) * 1e6; // rate is per second
                if (t > t_end) break;
                out.events.push_back(Event{static_cast<std::uint16_t>(i % w),
                                           static_cast<std::uint16_t>(i / w),
                                           static_cast<std::uint64_t>(t),
                                           rng.bernoulli(0.5) ? std::int8_t(1) : std::int8_t(-1)});
            }
        }
    }

    // canonical order, independent of generation schedule
    std::sort(out.events.begin(), out.events.end(), [](const Event& a, const Event& b) {
        if (a.t != b.t) return a.t < b.t;
        if (a.y != b.y) return a.y < b.y;
        if (a.x != b.x) return a.x < b.x;
        return a.p > b.p;
    });
    return out;
}

std::vector<Image> integrate_events(const EventStream& stream, double c_pos, double c_neg,
                                    const Image& init_log,
                                    const std::vector<std::uint64_t>& snapshot_times) {
    if (init_log.h != stream.height || init_log.w != stream.width || init_log.c != 1)
        throw std::invalid_argument("integrate_events: init_log shape mismatch");
    for (std::size_t i = 1; i < snapshot_times.size(); ++i)
        if (snapshot_times[i] < snapshot_times[i - 1])
            throw std::invalid_argument("integrate_events: snapshot times must be sorted");

    std::vector<Image> out;
    out.reserve(snapshot_times.size());
    Image log_state = init_log;
    std::size_t ei = 0;
    for (std::uint64_t ts : snapshot_times) {
        while (ei < stream.events.size() && stream.events[ei].t <= ts) {
            const Event& e = stream.events[ei];
            log_state.at(0, e.y, e.x) += e.p > 0 ? c_pos : -c_neg;
            ++ei;
        }
        Image frame(init_log.h, init_log.w, 1);
        for (std::size_t i = 0; i < frame.numel(); ++i)
            frame.data[i] = std::exp(log_state.data[i]);
        out.push_back(std::move(frame));
    }
    return out;
}

} // namespace evlab
