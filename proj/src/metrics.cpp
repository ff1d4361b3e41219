#include "evlab/metrics.hpp"

#include "evlab/kernels.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace evlab {

double mse(const Image& a, const Image& b) {
    if (a.h != b.h || a.w != b.w || a.c != b.c)
        throw std::invalid_argument("mse: shape mismatch");
    if (a.numel() == 0) throw std::invalid_argument("mse: empty image");
    return kernels::active().sqdiff_sum(a.data.data(), b.data.data(), a.numel()) /
           static_cast<double>(a.numel());
}

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::vector<double>& ssim_window_1d() {
    static const std::vector<double> win = [] {
        std::vector<double> k(kWin);
        double norm = 0.0;
        for (int i = 0; i < kWin; ++i) {
            const double d = i - (kWin - 1) / 2.0;
            k[i] = std::exp(-0.5 * d * d / (kSigma * kSigma));
            norm += k[i];
        }
        for (double& v : k) v /= norm;
        return k;
    }();
    return win;
}

// separable Gaussian filter evaluated at valid centres only
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w) {
    const auto& k = ssim_window_1d();
    const int vh = h - kWin + 1, vw = w - kWin + 1;
    std::vector<double> rowpass(static_cast<std::size_t>(h) * vw);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < vw; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kWin; ++i) acc += k[i] * src[static_cast<std::size_t>(y) * w + x + i];
            rowpass[static_cast<std::size_t>(y) * vw + x] = acc;
        }
    std::vector<double> out(static_cast<std::size_t>(vh) * vw);
    for (int y = 0; y < vh; ++y)
        for (int x = 0; x < vw; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kWin; ++i) acc += k[i] * rowpass[static_cast<std::size_t>(y + i) * vw + x];
            out[static_cast<std::size_t>(y) * vw + x] = acc;
        }
    return out;
}

} // namespace

double ssim(const Image& a_in, const Image& b_in) {
    const Image a = to_luma(a_in), b = to_luma(b_in);
    if (a.h != b.h || a.w != b.w) throw std::invalid_argument("ssim: shape mismatch");
    if (a.h < kWin || a.w < kWin)
        throw std::invalid_argument("ssim: image smaller than the 11x11 window");

    const int h = a.h, w = a.w;
    const std::size_t n = a.numel();
    std::vector<double> aa(n), bb(n), ab(n);
    for (std::size_t i = 0; i < n; ++i) {
        aa[i] = a.data[i] * a.data[i];
        bb[i] = b.data[i] * b.data[i];
        ab[i] = a.data[i] * b.data[i];
    }
    const auto mu_a = filter_valid(a.data, h, w);
    const auto mu_b = filter_valid(b.data, h, w);
    const auto m_aa = filter_valid(aa, h, w);
    const auto m_bb = filter_valid(bb, h, w);
    const auto m_ab = filter_valid(ab, h, w);

    double acc = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double ma = mu_a[i], mb = mu_b[i];
        const double va = m_aa[i] - ma * ma;
        const double vb = m_bb[i] - mb * mb;
        const double cov = m_ab[i] - ma * mb;
        acc += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) /
               ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
    }
    return acc / static_cast<double>(mu_a.size());
}

std::string MetricReport::to_csv() const {
    std::ostringstream os;
    os.precision(12);
    os << "frame,mse,ssim,lpips,fid,fvd\n";
    for (std::size_t i = 0; i < frame_mse.size(); ++i)
        os << i << ',' << frame_mse[i] << ',' << frame_ssim[i] << ",,,\n";
    os << "mean," << mean_mse << ',' << mean_ssim << ',';
    if (lpips) os << *lpips;
    os << ',';
    if (fid) os << *fid;
    os << ',';
    if (fvd) os << *fvd;
    os << "\n";
    return os.str();
}

std::string MetricReport::summary() const {
    std::ostringstream os;
    os.precision(6);
    os << "frames:    " << frames << "\n"
       << "mean MSE:  " << mean_mse << "\n"
       << "mean SSIM: " << mean_ssim << "\n";
    return os.str();
}

MetricReport evaluate_sequence(const std::vector<Image>& pred, const std::vector<Image>& gt) {
    if (pred.size() != gt.size())
        throw std::invalid_argument("evaluate_sequence: frame count mismatch (" +
                                    std::to_string(pred.size()) + " vs " +
                                    std::to_string(gt.size()) + ")");
    if (pred.empty()) throw std::invalid_argument("evaluate_sequence: empty sequences");
    MetricReport rep;
    rep.frames = pred.size();
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const Image p = to_luma(pred[i]);
        const Image g = to_luma(gt[i]);
        rep.frame_mse.push_back(mse(p, g));
        rep.frame_ssim.push_back(ssim(p, g));
    }
    for (double v : rep.frame_mse) rep.mean_mse += v;
    for (double v : rep.frame_ssim) rep.mean_ssim += v;
    rep.mean_mse /= static_cast<double>(rep.frames);
    rep.mean_ssim /= static_cast<double>(rep.frames);
    return rep;
}

} // namespace evlab
