#include "gdr/metrics.hpp"

#include <cmath>

namespace gdr::metrics {

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

double item_psnr(const float* a, const float* b, int64_t n) {
    double mse = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(n);
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

std::vector<double> luma_plane(const Tensor& t, int64_t item) {
    const int64_t hw = t.shape.h * t.shape.w;
    std::vector<double> out(static_cast<size_t>(hw));
    if (t.shape.c == 3) {
        const float* r = t.ptr() + (item * 3 + 0) * hw;
        const float* g = t.ptr() + (item * 3 + 1) * hw;
        const float* b = t.ptr() + (item * 3 + 2) * hw;
        for (int64_t i = 0; i < hw; ++i)
            out[static_cast<size_t>(i)] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
    } else {
        // Non-RGB inputs: mean across channels.
        for (int64_t i = 0; i < hw; ++i) {
            double acc = 0.0;
            for (int64_t c = 0; c < t.shape.c; ++c)
                acc += t.ptr()[(item * t.shape.c + c) * hw + i];
            out[static_cast<size_t>(i)] = acc / static_cast<double>(t.shape.c);
        }
    }
    return out;
}

const std::vector<double>& gaussian_window() {
    static const std::vector<double> win = [] {
        std::vector<double> w(kWin * kWin);
        double sum = 0.0;
        for (int y = 0; y < kWin; ++y)
            for (int x = 0; x < kWin; ++x) {
                const double dy = y - (kWin - 1) / 2.0;
                const double dx = x - (kWin - 1) / 2.0;
                const double v = std::exp(-(dx * dx + dy * dy) / (2 * kSigma * kSigma));
                w[y * kWin + x] = v;
                sum += v;
            }
        for (auto& v : w) v /= sum;
        return w;
    }();
    return win;
}

double item_ssim(const std::vector<double>& xa, const std::vector<double>& xb,
                 int64_t h, int64_t w) {
    const auto& win = gaussian_window();
    double total = 0.0;
    int64_t count = 0;
    for (int64_t y = 0; y + kWin <= h; ++y) {
        for (int64_t x = 0; x + kWin <= w; ++x) {
            double mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
            for (int wy = 0; wy < kWin; ++wy)
                for (int wx = 0; wx < kWin; ++wx) {
                    const double wv = win[wy * kWin + wx];
                    const double va = xa[(y + wy) * w + (x + wx)];
                    const double vb = xb[(y + wy) * w + (x + wx)];
                    mx += wv * va;
                    my += wv * vb;
                    sxx += wv * va * va;
                    syy += wv * vb * vb;
                    sxy += wv * va * vb;
                }
            const double vx = sxx - mx * mx;
            const double vy = syy - my * my;
            const double cxy = sxy - mx * my;
            total += (2 * mx * my + kC1) * (2 * cxy + kC2) /
                     ((mx * mx + my * my + kC1) * (vx + vy + kC2));
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "psnr");
    const int64_t per = a.shape.c * a.shape.h * a.shape.w;
    double acc = 0.0;
    for (int64_t n = 0; n < a.shape.n; ++n)
        acc += item_psnr(a.ptr() + n * per, b.ptr() + n * per, per);
    return acc / static_cast<double>(a.shape.n);
}

double ssim(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "ssim");
    if (a.shape.h < kWin || a.shape.w < kWin)
        throw ShapeError("ssim: image " + a.shape.str() + " smaller than " +
                         std::to_string(kWin) + "x" + std::to_string(kWin) + " window");
    double acc = 0.0;
    for (int64_t n = 0; n < a.shape.n; ++n)
        acc += item_ssim(luma_plane(a, n), luma_plane(b, n), a.shape.h, a.shape.w);
    return acc / static_cast<double>(a.shape.n);
}

MetricReport report(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "metrics");
    MetricReport r;
    const int64_t per = a.shape.c * a.shape.h * a.shape.w;
    for (int64_t n = 0; n < a.shape.n; ++n) {
        r.psnr.push_back(item_psnr(a.ptr() + n * per, b.ptr() + n * per, per));
        r.ssim.push_back(item_ssim(luma_plane(a, n), luma_plane(b, n), a.shape.h,
                                   a.shape.w));
        r.mean_psnr += r.psnr.back();
        r.mean_ssim += r.ssim.back();
    }
    r.mean_psnr /= static_cast<double>(a.shape.n);
    r.mean_ssim /= static_cast<double>(a.shape.n);
    return r;
}

}  // namespace gdr::metrics
