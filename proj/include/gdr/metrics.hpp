#pragma once

#include <vector>

#include "gdr/tensor.hpp"

namespace gdr::metrics {

// Both metrics take images in [0,1] (dynamic range 1) and average per-item
// values over the batch. PSNR of identical images is capped at 100 dB.
constexpr double kPsnrCap = 100.0;

double psnr(const Tensor& a, const Tensor& b);

// Mean local SSIM, 11x11 Gaussian window sigma 1.5, K1=0.01 K2=0.03,
// computed on BT.601 luma for 3-channel inputs.
double ssim(const Tensor& a, const Tensor& b);

struct MetricReport {
    std::vector<double> psnr;
    std::vector<double> ssim;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
};

MetricReport report(const Tensor& a, const Tensor& b);

}  // namespace gdr::metrics
