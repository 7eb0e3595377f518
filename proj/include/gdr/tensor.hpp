#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace gdr {

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ValueError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Dense NCHW shape. All tensors in this codebase are 4-d; vectors and
// scalars are carried as (1,1,1,len) / (1,1,1,1).
struct Shape4 {
    int64_t n = 0, c = 0, h = 0, w = 0;

    int64_t numel() const { return n * c * h * w; }
    bool operator==(const Shape4&) const = default;

    std::string str() const {
        return std::to_string(n) + "x" + std::to_string(c) + "x" +
               std::to_string(h) + "x" + std::to_string(w);
    }
};

class Tensor {
public:
    Shape4 shape{};
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(Shape4 s, float fill = 0.0f)
        : shape(s), data(static_cast<size_t>(check_shape(s).numel()), fill) {}

    static Tensor zeros(Shape4 s) { return Tensor(s); }
    static Tensor full(Shape4 s, float v) { return Tensor(s, v); }
    static Tensor scalar(float v) { return Tensor({1, 1, 1, 1}, v); }

    static Tensor from(Shape4 s, std::initializer_list<float> vals) {
        Tensor t(s);
        if (static_cast<int64_t>(vals.size()) != s.numel())
            throw ShapeError("Tensor::from: " + std::to_string(vals.size()) +
                             " values for shape " + s.str());
        std::copy(vals.begin(), vals.end(), t.data.begin());
        return t;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    bool empty() const { return data.empty(); }

    float* ptr() { return data.data(); }
    const float* ptr() const { return data.data(); }

    float& at(int64_t n, int64_t c, int64_t h, int64_t w) {
        return data[static_cast<size_t>(index(n, c, h, w))];
    }
    float at(int64_t n, int64_t c, int64_t h, int64_t w) const {
        return data[static_cast<size_t>(index(n, c, h, w))];
    }

    int64_t index(int64_t in, int64_t ic, int64_t ih, int64_t iw) const {
        return ((in * shape.c + ic) * shape.h + ih) * shape.w + iw;
    }

    float item() const {
        if (numel() != 1) throw ShapeError("item(): tensor has shape " + shape.str());
        return data[0];
    }

    bool all_finite() const {
        for (float v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void fill(float v) { std::fill(data.begin(), data.end(), v); }

private:
    static const Shape4& check_shape(const Shape4& s) {
        if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0)
            throw ShapeError("negative dimension in shape " + s.str());
        return s;
    }
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!(a.shape == b.shape))
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape.str() +
                         " vs " + b.shape.str());
}

}  // namespace gdr
