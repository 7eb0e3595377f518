#pragma once

#include <cstdint>
#include <string>

namespace gdr::kernels {

// Geometry of one conv2d call (cross-correlation, NCHW, no dilation).
struct ConvDims {
    int64_t n, ic, ih, iw;  // input
    int64_t oc, oh, ow;     // output
    int64_t kh, kw;         // kernel
    int64_t stride, pad;
};

inline int64_t conv_out_dim(int64_t in, int64_t k, int64_t stride, int64_t pad) {
    return (in + 2 * pad - k) / stride + 1;
}

// One table of inner-loop kernels. The scalar table is the reference
// semantics; vector tables must agree with it within float rounding
// (reassociation/FMA differences only), which the equivalence tests pin.
struct Backend {
    const char* name;

    // out = cross_correlate(in, w) + bias; bias may be null.
    void (*conv2d_fwd)(const float* in, const float* w, const float* bias,
                       float* out, const ConvDims& d);
    // gin := dL/din given gout (writes the whole buffer).
    void (*conv2d_bwd_input)(const float* gout, const float* w, float* gin,
                             const ConvDims& d);
    // gw/gb are accumulated into (callers zero them first); gb may be null.
    void (*conv2d_bwd_weight)(const float* gout, const float* in, float* gw,
                              float* gb, const ConvDims& d);

    void (*add)(const float* a, const float* b, float* dst, int64_t n);
    void (*sub)(const float* a, const float* b, float* dst, int64_t n);
    void (*mul)(const float* a, const float* b, float* dst, int64_t n);
    void (*axpy)(float a, const float* x, float* y, int64_t n);  // y += a*x
    void (*scale)(const float* x, float a, float* dst, int64_t n);

    // dst = x > 0 ? x : slope*x   (slope 0 gives relu)
    void (*lrelu_fwd)(const float* x, float slope, float* dst, int64_t n);
    // dst = x > 0 ? g : slope*g
    void (*lrelu_bwd)(const float* x, const float* g, float slope, float* dst,
                      int64_t n);

    double (*sum)(const float* x, int64_t n);
    double (*sumsq_diff)(const float* a, const float* b, int64_t n);
    double (*dot)(const float* a, const float* b, int64_t n);
};

const Backend& scalar_backend();
bool avx2_supported();
const Backend& avx2_backend();  // throws if unsupported at runtime

enum class Select { Auto, Scalar, Avx2 };
Select parse_select(const std::string& s);  // "auto" | "scalar" | "avx2"

void select(Select s);        // process-wide; defaults to Auto
const Backend& active();

}  // namespace gdr::kernels
