#include "evlab/toydata.hpp"

#include "evlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

namespace evlab {

namespace {

struct Blob {
    double cx, cy, r;
    double col[3];
    double vx = 0.0, vy = 0.0;
    bool box = false;
};

void paint_background(Image& img, Rng& rng) {
    const int h = img.h, w = img.w;
    double base[3], gx[3], gy[3];
    for (int c = 0; c < 3; ++c) {
        base[c] = rng.uniform(0.25, 0.75);
        gx[c] = rng.uniform(-0.3, 0.3);
        gy[c] = rng.uniform(-0.3, 0.3);
    }
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                img.at(c, y, x) = std::clamp(
                    base[c] + gx[c] * (static_cast<double>(x) / w - 0.5) +
                        gy[c] * (static_cast<double>(y) / h - 0.5),
                    0.0, 1.0);
}

void paint_blob(Image& img, const Blob& b, double t) {
    const int h = img.h, w = img.w;
    const double cx = b.cx + b.vx * t;
    const double cy = b.cy + b.vy * t;
    const int x0 = std::max(0, static_cast<int>(cx - b.r - 2));
    const int x1 = std::min(w - 1, static_cast<int>(cx + b.r + 2));
    const int y0 = std::max(0, static_cast<int>(cy - b.r - 2));
    const int y1 = std::min(h - 1, static_cast<int>(cy + b.r + 2));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            double alpha;
            if (b.box) {
                const double dx = std::fabs(x - cx), dy = std::fabs(y - cy);
                const double d = std::max(dx, dy);
                alpha = std::clamp((b.r - d) / 1.5, 0.0, 1.0);
            } else {
                const double d = std::hypot(x - cx, y - cy);
                alpha = std::clamp((b.r - d) / 1.5, 0.0, 1.0);
            }
            if (alpha <= 0.0) continue;
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) = std::clamp(
                    (1.0 - alpha) * img.at(c, y, x) + alpha * b.col[c], 0.0, 1.0);
        }
}

Blob random_blob(Rng& rng, int h, int w, bool moving) {
    Blob b;
    b.cx = rng.uniform(0.2, 0.8) * w;
    b.cy = rng.uniform(0.2, 0.8) * h;
    b.r = rng.uniform(0.08, 0.22) * std::min(h, w);
    for (double& c : b.col) c = rng.uniform(0.05, 0.95);
    b.box = rng.bernoulli(0.4);
    if (moving) {
        b.vx = rng.uniform(-2.5, 2.5);
        b.vy = rng.uniform(-2.5, 2.5);
        if (std::fabs(b.vx) < 0.5 && std::fabs(b.vy) < 0.5) b.vx = 1.0;
    }
    return b;
}

} // namespace

Image make_toy_image(std::uint64_t seed, int h, int w) {
    Rng rng(mix_seed(seed, 0xa11ce));
    Image img(h, w, 3);
    paint_background(img, rng);
    const int n = static_cast<int>(rng.uniform_int(2, 4));
    for (int i = 0; i < n; ++i) paint_blob(img, random_blob(rng, h, w, false), 0.0);
    return img;
}

FrameSequence ToyVideo::luma_sequence() const {
    FrameSequence seq;
    seq.timestamps = timestamps;
    for (const Image& f : color) seq.frames.push_back(to_luma(f));
    return seq;
}

ToyVideo make_toy_video(std::uint64_t seed, int n_frames, int h, int w,
                        std::uint64_t frame_dt_us) {
    Rng rng(mix_seed(seed, 0xbadge));
    Image bg(h, w, 3);
    paint_background(bg, rng);
    std::vector<Blob> blobs;
    const int n = static_cast<int>(rng.uniform_int(1, 3));
    for (int i = 0; i < n; ++i) blobs.push_back(random_blob(rng, h, w, true));

    ToyVideo video;
    for (int f = 0; f < n_frames; ++f) {
        Image frame = bg;
        for (const Blob& b : blobs) paint_blob(frame, b, static_cast<double>(f));
        video.color.push_back(std::move(frame));
        video.timestamps.push_back(1000 + static_cast<std::uint64_t>(f) * frame_dt_us);
    }
    return video;
}

std::vector<std::string> generate_toy_corpus(const std::string& dir, int count, int h, int w,
                                             std::uint64_t seed) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::vector<std::string> paths;
    for (int i = 0; i < count; ++i) {
        std::ostringstream name;
        name.width(6);
        name.fill('0');
        name << i;
        const std::string path = (fs::path(dir) / (name.str() + ".ppm")).string();
        save_ppm(path, make_toy_image(mix_seed(seed, i), h, w));
        paths.push_back(path);
    }
    return paths;
}

std::vector<std::string> generate_toy_videos(const std::string& root, int count, int n_frames,
                                             int h, int w, std::uint64_t frame_dt_us,
                                             std::uint64_t seed) {
    namespace fs = std::filesystem;
    std::vector<std::string> dirs;
    for (int vi = 0; vi < count; ++vi) {
        std::ostringstream name;
        name.width(3);
        name.fill('0');
        name << vi;
        const fs::path vdir = fs::path(root) / ("video_" + name.str());
        fs::create_directories(vdir);
        const ToyVideo video = make_toy_video(mix_seed(seed, 1000 + vi), n_frames, h, w,
                                              frame_dt_us);
        std::vector<std::string> frame_names;
        for (std::size_t f = 0; f < video.color.size(); ++f) {
            std::ostringstream fname;
            fname.width(4);
            fname.fill('0');
            fname << f;
            const std::string rel = "frame_" + fname.str() + ".ppm";
            save_ppm((vdir / rel).string(), video.color[f]);
            frame_names.push_back(rel);
        }
        write_frame_manifest((vdir / "manifest.txt").string(), video.timestamps, frame_names);
        dirs.push_back(vdir.string());
    }
    return dirs;
}

} // namespace evlab
