#include "gdr/kernels.hpp"

namespace gdr::kernels {
namespace {

void conv2d_fwd_scalar(const float* in, const float* w, const float* bias,
                       float* out, const ConvDims& d) {
    for (int64_t n = 0; n < d.n; ++n) {
        for (int64_t oc = 0; oc < d.oc; ++oc) {
            const float b = bias ? bias[oc] : 0.0f;
            for (int64_t oy = 0; oy < d.oh; ++oy) {
                for (int64_t ox = 0; ox < d.ow; ++ox) {
                    float acc = b;
                    for (int64_t ic = 0; ic < d.ic; ++ic) {
                        for (int64_t ky = 0; ky < d.kh; ++ky) {
                            const int64_t iy = oy * d.stride + ky - d.pad;
                            if (iy < 0 || iy >= d.ih) continue;
                            for (int64_t kx = 0; kx < d.kw; ++kx) {
                                const int64_t ix = ox * d.stride + kx - d.pad;
                                if (ix < 0 || ix >= d.iw) continue;
                                acc += in[((n * d.ic + ic) * d.ih + iy) * d.iw + ix] *
                                       w[((oc * d.ic + ic) * d.kh + ky) * d.kw + kx];
                            }
                        }
                    }
                    out[((n * d.oc + oc) * d.oh + oy) * d.ow + ox] = acc;
                }
            }
        }
    }
}

void conv2d_bwd_input_scalar(const float* gout, const float* w, float* gin,
                             const ConvDims& d) {
    const int64_t in_sz = d.n * d.ic * d.ih * d.iw;
    for (int64_t i = 0; i < in_sz; ++i) gin[i] = 0.0f;
    for (int64_t n = 0; n < d.n; ++n) {
        for (int64_t oc = 0; oc < d.oc; ++oc) {
            for (int64_t oy = 0; oy < d.oh; ++oy) {
                for (int64_t ox = 0; ox < d.ow; ++ox) {
                    const float g = gout[((n * d.oc + oc) * d.oh + oy) * d.ow + ox];
                    for (int64_t ic = 0; ic < d.ic; ++ic) {
                        for (int64_t ky = 0; ky < d.kh; ++ky) {
                            const int64_t iy = oy * d.stride + ky - d.pad;
                            if (iy < 0 || iy >= d.ih) continue;
                            for (int64_t kx = 0; kx < d.kw; ++kx) {
                                const int64_t ix = ox * d.stride + kx - d.pad;
                                if (ix < 0 || ix >= d.iw) continue;
                                gin[((n * d.ic + ic) * d.ih + iy) * d.iw + ix] +=
                                    g * w[((oc * d.ic + ic) * d.kh + ky) * d.kw + kx];
                            }
                        }
                    }
                }
            }
        }
    }
}

void conv2d_bwd_weight_scalar(const float* gout, const float* in, float* gw,
                              float* gb, const ConvDims& d) {
    for (int64_t n = 0; n < d.n; ++n) {
        for (int64_t oc = 0; oc < d.oc; ++oc) {
            for (int64_t oy = 0; oy < d.oh; ++oy) {
                for (int64_t ox = 0; ox < d.ow; ++ox) {
                    const float g = gout[((n * d.oc + oc) * d.oh + oy) * d.ow + ox];
                    if (gb) gb[oc] += g;
                    for (int64_t ic = 0; ic < d.ic; ++ic) {
                        for (int64_t ky = 0; ky < d.kh; ++ky) {
                            const int64_t iy = oy * d.stride + ky - d.pad;
                            if (iy < 0 || iy >= d.ih) continue;
                            for (int64_t kx = 0; kx < d.kw; ++kx) {
                                const int64_t ix = ox * d.stride + kx - d.pad;
                                if (ix < 0 || ix >= d.iw) continue;
                                gw[((oc * d.ic + ic) * d.kh + ky) * d.kw + kx] +=
                                    g * in[((n * d.ic + ic) * d.ih + iy) * d.iw + ix];
                            }
                        }
                    }
                }
            }
        }
    }
}

void add_scalar_k(const float* a, const float* b, float* dst, int64_t n) {
    for (int64_t i = 0; i < n; ++i) dst[i] = a[i] + b[i];
}
void sub_scalar_k(const float* a, const float* b, float* dst, int64_t n) {
    for (int64_t i = 0; i < n; ++i) dst[i] = a[i] - b[i];
}
void mul_scalar_k(const float* a, const float* b, float* dst, int64_t n) {
    for (int64_t i = 0; i < n; ++i) dst[i] = a[i] * b[i];
}
void axpy_scalar_k(float a, const float* x, float* y, int64_t n) {
    for (int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}
void scale_scalar_k(const float* x, float a, float* dst, int64_t n) {
    for (int64_t i = 0; i < n; ++i) dst[i] = a * x[i];
}
void lrelu_fwd_scalar(const float* x, float slope, float* dst, int64_t n) {
    for (int64_t i = 0; i < n; ++i) dst[i] = x[i] > 0.0f ? x[i] : slope * x[i];
}
void lrelu_bwd_scalar(const float* x, const float* g, float slope, float* dst,
                      int64_t n) {
    for (int64_t i = 0; i < n; ++i) dst[i] = x[i] > 0.0f ? g[i] : slope * g[i];
}

double sum_scalar_k(const float* x, int64_t n) {
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}
double sumsq_diff_scalar_k(const float* a, const float* b, int64_t n) {
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double di = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += di * di;
    }
    return acc;
}
double dot_scalar_k(const float* a, const float* b, int64_t n) {
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i)
        acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return acc;
}

}  // namespace

const Backend& scalar_backend() {
    static const Backend table = {
        "scalar",
        conv2d_fwd_scalar,
        conv2d_bwd_input_scalar,
        conv2d_bwd_weight_scalar,
        add_scalar_k,
        sub_scalar_k,
        mul_scalar_k,
        axpy_scalar_k,
        scale_scalar_k,
        lrelu_fwd_scalar,
        lrelu_bwd_scalar,
        sum_scalar_k,
        sumsq_diff_scalar_k,
        dot_scalar_k,
    };
    return table;
}

}  // namespace gdr::kernels
