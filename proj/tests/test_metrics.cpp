#include "gdr/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "gdr/degrade.hpp"
#include "gdr/rng.hpp"

using namespace gdr;
using namespace gdr::metrics;

namespace {

// Independent SSIM reference: same protocol (11x11 Gaussian sigma 1.5 on
// BT.601 luma, valid windows) but written as explicit mean-subtracted
// moments over each window rather than accumulated raw moments.
double ssim_reference(const Tensor& a, const Tensor& b) {
    const int win = 11;
    const double sigma = 1.5;
    std::vector<double> w(win * win);
    double wsum = 0;
    for (int y = 0; y < win; ++y)
        for (int x = 0; x < win; ++x) {
            const double dy = y - 5.0, dx = x - 5.0;
            w[y * win + x] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
            wsum += w[y * win + x];
        }
    for (auto& v : w) v /= wsum;

    const int64_t H = a.shape.h, W = a.shape.w;
    auto luma = [&](const Tensor& t, int64_t n, int64_t y, int64_t x) {
        return 0.299 * t.at(n, 0, y, x) + 0.587 * t.at(n, 1, y, x) +
               0.114 * t.at(n, 2, y, x);
    };

    double total_items = 0;
    for (int64_t n = 0; n < a.shape.n; ++n) {
        double total = 0;
        int64_t count = 0;
        for (int64_t y = 0; y + win <= H; ++y)
            for (int64_t x = 0; x + win <= W; ++x) {
                double mx = 0, my = 0;
                for (int wy = 0; wy < win; ++wy)
                    for (int wx = 0; wx < win; ++wx) {
                        mx += w[wy * win + wx] * luma(a, n, y + wy, x + wx);
                        my += w[wy * win + wx] * luma(b, n, y + wy, x + wx);
                    }
                double vx = 0, vy = 0, cov = 0;
                for (int wy = 0; wy < win; ++wy)
                    for (int wx = 0; wx < win; ++wx) {
                        const double da = luma(a, n, y + wy, x + wx) - mx;
                        const double db = luma(b, n, y + wy, x + wx) - my;
                        vx += w[wy * win + wx] * da * da;
                        vy += w[wy * win + wx] * db * db;
                        cov += w[wy * win + wx] * da * db;
                    }
                const double c1 = 1e-4, c2 = 9e-4;
                total += (2 * mx * my + c1) * (2 * cov + c2) /
                         ((mx * mx + my * my + c1) * (vx + vy + c2));
                ++count;
            }
        total_items += total / count;
    }
    return total_items / a.shape.n;
}

}  // namespace

TEST(Psnr, IdenticalCapsAt100) {
    const Tensor a = Tensor::full({1, 3, 4, 4}, 0.3f);
    EXPECT_DOUBLE_EQ(psnr(a, a), 100.0);
}

TEST(Psnr, AnalyticUniformDifference) {
    // Uniform |diff| 10/255: 20*log10(255/10).
    const Tensor a = Tensor::full({1, 3, 8, 8}, 0.5f);
    const Tensor b = Tensor::full({1, 3, 8, 8}, 0.5f + 10.0f / 255.0f);
    EXPECT_NEAR(psnr(a, b), 20.0 * std::log10(25.5), 1e-4);
}

TEST(Psnr, ZeroVsOneIsZeroDb) {
    const Tensor a({1, 3, 4, 4});
    const Tensor b = Tensor::full({1, 3, 4, 4}, 1.0f);
    EXPECT_NEAR(psnr(a, b), 0.0, 1e-9);
    EXPECT_THROW(psnr(a, Tensor({1, 3, 4, 5})), ShapeError);
}

TEST(Psnr, DecreasesWithNoiseLevel) {
    Rng rng(6);
    Tensor img = rng.uniform_tensor({1, 3, 32, 32}, 0.2, 0.8);
    double prev = 1e9;
    for (double sigma : {5.0, 10.0, 20.0, 30.0}) {
        degrade::DegradationSpec spec;
        spec.sigma = sigma;
        spec.seed = 11;
        const double v = psnr(degrade::apply(spec, img), img);
        EXPECT_LT(v, prev);
        prev = v;
    }
}

TEST(Ssim, SelfIsExactlyOne) {
    Rng rng(7);
    const Tensor a = rng.uniform_tensor({2, 3, 16, 16}, 0.0, 1.0);
    EXPECT_DOUBLE_EQ(ssim(a, a), 1.0);
}

TEST(Ssim, Symmetry) {
    Rng rng(8);
    const Tensor a = rng.uniform_tensor({1, 3, 16, 16}, 0.0, 1.0);
    const Tensor b = rng.uniform_tensor({1, 3, 16, 16}, 0.0, 1.0);
    EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
}

TEST(Ssim, MatchesIndependentReference) {
    Rng rng(9);
    for (int fixture = 0; fixture < 5; ++fixture) {
        Tensor a = rng.uniform_tensor({1, 3, 16, 16}, 0.0, 1.0);
        Tensor b = a;
        if (fixture == 0) {
            b = Tensor::full(a.shape, 0.6f);
            a = Tensor::full(a.shape, 0.5f);
        } else if (fixture < 3) {
            for (auto& v : b.data)
                v = std::min(1.0f, std::max(0.0f, v + 0.08f * static_cast<float>(rng.normal())));
        } else {
            b = rng.uniform_tensor(a.shape, 0.0, 1.0);
        }
        EXPECT_NEAR(ssim(a, b), ssim_reference(a, b), 1e-4) << "fixture " << fixture;
    }
}

TEST(Ssim, RejectsTinyImages) {
    const Tensor small({1, 3, 8, 8});
    EXPECT_THROW(ssim(small, small), ShapeError);
}

TEST(Metrics, BatchPermutationInvariance) {
    Rng rng(10);
    Tensor a = rng.uniform_tensor({3, 3, 16, 16}, 0.0, 1.0);
    Tensor b = rng.uniform_tensor({3, 3, 16, 16}, 0.0, 1.0);

    // Swap items 0 and 2 in both.
    Tensor ap = a, bp = b;
    const int64_t per = 3 * 16 * 16;
    for (int64_t i = 0; i < per; ++i) {
        std::swap(ap.data[i], ap.data[2 * per + i]);
        std::swap(bp.data[i], bp.data[2 * per + i]);
    }
    EXPECT_NEAR(psnr(a, b), psnr(ap, bp), 1e-9);
    EXPECT_NEAR(ssim(a, b), ssim(ap, bp), 1e-9);

    const MetricReport r = report(a, b);
    EXPECT_EQ(r.psnr.size(), 3u);
    EXPECT_NEAR(r.mean_psnr, psnr(a, b), 1e-9);
}
