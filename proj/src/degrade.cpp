#include "gdr/degrade.hpp"

#include <cmath>
#include <sstream>

namespace gdr::degrade {

namespace {

float clip01(float v) { return std::min(std::max(v, 0.0f), 1.0f); }

void check_range01(const Tensor& t, const char* op) {
    for (float v : t.data)
        if (!(v >= 0.0f && v <= 1.0f))
            throw ValueError(std::string(op) + ": input value " + std::to_string(v) +
                             " outside [0,1]");
}

// Low-frequency field: a coarse random grid bilinearly upsampled, mapped to
// [lo, hi]. Mimics unevenly distributed haze.
Tensor smooth_field(int64_t h, int64_t w, double lo, double hi, Rng& rng) {
    const int64_t gh = 4, gw = 4;
    Tensor grid({1, 1, gh, gw});
    for (auto& v : grid.data) v = static_cast<float>(rng.uniform());
    Tensor field({1, 1, h, w});
    for (int64_t y = 0; y < h; ++y) {
        const double gy = (h > 1) ? static_cast<double>(y) / (h - 1) * (gh - 1) : 0.0;
        const int64_t y0 = static_cast<int64_t>(gy);
        const int64_t y1 = std::min(y0 + 1, gh - 1);
        const double fy = gy - y0;
        for (int64_t x = 0; x < w; ++x) {
            const double gx = (w > 1) ? static_cast<double>(x) / (w - 1) * (gw - 1) : 0.0;
            const int64_t x0 = static_cast<int64_t>(gx);
            const int64_t x1 = std::min(x0 + 1, gw - 1);
            const double fx = gx - x0;
            const double v =
                (1 - fy) * ((1 - fx) * grid.at(0, 0, y0, x0) + fx * grid.at(0, 0, y0, x1)) +
                fy * ((1 - fx) * grid.at(0, 0, y1, x0) + fx * grid.at(0, 0, y1, x1));
            field.at(0, 0, y, x) = static_cast<float>(lo + (hi - lo) * v);
        }
    }
    return field;
}

}  // namespace

void DegradationSpec::validate() const {
    switch (kind) {
        case Kind::GaussianNoise:
            if (sigma < 0.0) throw ValueError("degradation: sigma must be >= 0");
            break;
        case Kind::Haze:
            if (!(t_min > 0.0) || !(t_max <= 1.0) || t_min > t_max)
                throw ValueError("degradation: need 0 < t_min <= t_max <= 1");
            if (airlight < 0.0 || airlight > 1.0)
                throw ValueError("degradation: airlight must be in [0,1]");
            break;
        case Kind::LowLight:
            if (gamma < 1.0) throw ValueError("degradation: gamma must be >= 1");
            if (read_noise < 0.0) throw ValueError("degradation: read_noise must be >= 0");
            break;
    }
}

std::string DegradationSpec::describe() const {
    std::ostringstream os;
    switch (kind) {
        case Kind::GaussianNoise:
            os << "gaussian_noise sigma=" << sigma;
            break;
        case Kind::Haze:
            os << "haze airlight=" << airlight << " t=[" << t_min << "," << t_max << "]";
            break;
        case Kind::LowLight:
            os << "low_light gamma=" << gamma << " read_noise=" << read_noise;
            break;
    }
    os << " seed=" << seed;
    return os.str();
}

DegradationSpec DegradationSpec::parse(const std::string& kind_name,
                                       const std::string& params_csv) {
    DegradationSpec spec;
    std::vector<double> p;
    std::stringstream ss(params_csv);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) p.push_back(std::stod(tok));

    if (kind_name == "noise" || kind_name == "gaussian_noise") {
        spec.kind = Kind::GaussianNoise;
        if (p.size() > 0) spec.sigma = p[0];
    } else if (kind_name == "haze") {
        spec.kind = Kind::Haze;
        if (p.size() > 0) spec.airlight = p[0];
        if (p.size() > 1) spec.t_min = p[1];
        if (p.size() > 2) spec.t_max = p[2];
    } else if (kind_name == "lowlight" || kind_name == "low_light") {
        spec.kind = Kind::LowLight;
        if (p.size() > 0) spec.gamma = p[0];
        if (p.size() > 1) spec.read_noise = p[1];
    } else {
        throw ValueError("unknown degradation kind '" + kind_name + "'");
    }
    spec.validate();
    return spec;
}

Tensor apply(const DegradationSpec& spec, const Tensor& clean) {
    spec.validate();
    check_range01(clean, "degrade::apply");
    Rng rng(spec.seed);
    Tensor out = clean;
    switch (spec.kind) {
        case DegradationSpec::Kind::GaussianNoise: {
            const float s = static_cast<float>(spec.sigma / 255.0);
            for (auto& v : out.data)
                v = clip01(v + s * static_cast<float>(rng.normal()));
            break;
        }
        case DegradationSpec::Kind::Haze: {
            const Tensor t = smooth_field(clean.shape.h, clean.shape.w, spec.t_min,
                                          spec.t_max, rng);
            const float A = static_cast<float>(spec.airlight);
            for (int64_t n = 0; n < out.shape.n; ++n)
                for (int64_t c = 0; c < out.shape.c; ++c)
                    for (int64_t y = 0; y < out.shape.h; ++y)
                        for (int64_t x = 0; x < out.shape.w; ++x) {
                            const float tv = t.at(0, 0, y, x);
                            out.at(n, c, y, x) =
                                clip01(clean.at(n, c, y, x) * tv + A * (1.0f - tv));
                        }
            break;
        }
        case DegradationSpec::Kind::LowLight: {
            const float g = static_cast<float>(spec.gamma);
            const float s = static_cast<float>(spec.read_noise / 255.0);
            for (auto& v : out.data)
                v = clip01(std::pow(v, g) + s * static_cast<float>(rng.normal()));
            break;
        }
    }
    return out;
}

Tensor center_crop_resize(const Tensor& image, int side) {
    if (side <= 0) throw ValueError("center_crop_resize: side must be positive");
    const Shape4 s = image.shape;
    if (s.h < 1 || s.w < 1)
        throw ShapeError("center_crop_resize: empty image " + s.str());
    const int64_t crop = std::min(s.h, s.w);
    const int64_t oy = (s.h - crop) / 2;
    const int64_t ox = (s.w - crop) / 2;

    Tensor out({s.n, s.c, side, side});
    // Bilinear with edge clamping; identity when crop == side.
    const double scale = static_cast<double>(crop) / side;
    for (int64_t n = 0; n < s.n; ++n) {
        for (int64_t c = 0; c < s.c; ++c) {
            for (int64_t y = 0; y < side; ++y) {
                const double sy = (y + 0.5) * scale - 0.5;
                const int64_t y0 = static_cast<int64_t>(std::floor(sy));
                const double fy = sy - y0;
                const int64_t yy0 = std::clamp<int64_t>(y0, 0, crop - 1);
                const int64_t yy1 = std::clamp<int64_t>(y0 + 1, 0, crop - 1);
                for (int64_t x = 0; x < side; ++x) {
                    const double sx = (x + 0.5) * scale - 0.5;
                    const int64_t x0 = static_cast<int64_t>(std::floor(sx));
                    const double fx = sx - x0;
                    const int64_t xx0 = std::clamp<int64_t>(x0, 0, crop - 1);
                    const int64_t xx1 = std::clamp<int64_t>(x0 + 1, 0, crop - 1);
                    const double v =
                        (1 - fy) * ((1 - fx) * image.at(n, c, oy + yy0, ox + xx0) +
                                    fx * image.at(n, c, oy + yy0, ox + xx1)) +
                        fy * ((1 - fx) * image.at(n, c, oy + yy1, ox + xx0) +
                              fx * image.at(n, c, oy + yy1, ox + xx1));
                    out.at(n, c, y, x) = static_cast<float>(v);
                }
            }
        }
    }
    return out;
}

Tensor shapes32_image(Rng& rng) {
    const int64_t side = 32;
    Tensor img({1, 3, side, side});

    // Background: linear gradient between two random colors.
    float ca[3], cb[3];
    for (int i = 0; i < 3; ++i) {
        ca[i] = static_cast<float>(rng.uniform());
        cb[i] = static_cast<float>(rng.uniform());
    }
    const bool horizontal = rng.uniform() < 0.5;
    for (int64_t y = 0; y < side; ++y)
        for (int64_t x = 0; x < side; ++x) {
            const float f = static_cast<float>(horizontal ? x : y) / (side - 1);
            for (int64_t c = 0; c < 3; ++c)
                img.at(0, c, y, x) = ca[c] + f * (cb[c] - ca[c]);
        }

    const int count = 2 + static_cast<int>(rng.uniform_int(3));
    for (int k = 0; k < count; ++k) {
        float col[3];
        for (int i = 0; i < 3; ++i) col[i] = static_cast<float>(rng.uniform());
        const bool disc = rng.uniform() < 0.5;
        if (disc) {
            const double cy = rng.uniform(4, side - 4);
            const double cx = rng.uniform(4, side - 4);
            const double r = rng.uniform(3, 9);
            for (int64_t y = 0; y < side; ++y)
                for (int64_t x = 0; x < side; ++x) {
                    const double d = std::hypot(y - cy, x - cx);
                    if (d <= r)
                        for (int64_t c = 0; c < 3; ++c) img.at(0, c, y, x) = col[c];
                }
        } else {
            const int64_t y0 = rng.uniform_int(side - 4);
            const int64_t x0 = rng.uniform_int(side - 4);
            const int64_t hgt = 3 + rng.uniform_int(side / 2);
            const int64_t wid = 3 + rng.uniform_int(side / 2);
            for (int64_t y = y0; y < std::min(side, y0 + hgt); ++y)
                for (int64_t x = x0; x < std::min(side, x0 + wid); ++x)
                    for (int64_t c = 0; c < 3; ++c) img.at(0, c, y, x) = col[c];
        }
    }
    return img;
}

PairedDataset make_dataset(const ImageSource& source, const DegradationSpec& spec,
                           int n, uint64_t seed) {
    if (n < 1) throw ValueError("make_dataset: n must be >= 1");
    if (!source) throw ValueError("make_dataset: empty image source");
    spec.validate();

    PairedDataset ds;
    std::ostringstream manifest;
    manifest << "pairs = " << n << "\n";
    manifest << "seed = " << seed << "\n";
    manifest << "degradation = " << spec.describe() << "\n";
    for (int i = 0; i < n; ++i) {
        Tensor clean = source(i);
        check_range01(clean, "make_dataset");
        DegradationSpec per = spec;
        per.seed = Rng::mix(seed, static_cast<uint64_t>(i));
        Tensor bad = apply(per, clean);
        manifest << "pair_" << i << "_seed = " << per.seed << "\n";
        ds.clean.push_back(std::move(clean));
        ds.degraded.push_back(std::move(bad));
        ds.specs.push_back(per);
    }
    ds.manifest = manifest.str();
    return ds;
}

}  // namespace gdr::degrade
