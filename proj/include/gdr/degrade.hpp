#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gdr/rng.hpp"
#include "gdr/tensor.hpp"

namespace gdr::degrade {

// Synthetic degradations with known ground truth. sigma is on the 0-255
// scale; haze transmission comes from a smooth random field in
// [t_min, t_max]; low light is a gamma curve plus read noise.
struct DegradationSpec {
    enum class Kind { GaussianNoise, Haze, LowLight };

    Kind kind = Kind::GaussianNoise;
    double sigma = 30.0;     // gaussian noise, 0-255 scale
    double airlight = 0.8;   // haze A in [0,1]
    double t_min = 0.3;      // haze transmission field range
    double t_max = 0.9;
    double gamma = 2.5;      // low light exponent, >= 1
    double read_noise = 2.0; // low light sensor noise, 0-255 scale
    uint64_t seed = 0;

    void validate() const;
    std::string describe() const;

    static DegradationSpec parse(const std::string& kind_name,
                                 const std::string& params_csv);
};

// clean in [0,1] -> degraded in [0,1] (clipped). Deterministic in spec.seed.
Tensor apply(const DegradationSpec& spec, const Tensor& clean);

// Center square crop on the shorter edge, then bilinear resize to side^2.
Tensor center_crop_resize(const Tensor& image, int side);

// Toy clean-image source: random rectangles, discs and gradients at 32x32.
Tensor shapes32_image(Rng& rng);

using ImageSource = std::function<Tensor(int index)>;

struct PairedDataset {
    std::vector<Tensor> clean;
    std::vector<Tensor> degraded;
    std::vector<DegradationSpec> specs;  // per-pair (seed varies)
    std::string manifest;                // plain-text key-value record
};

PairedDataset make_dataset(const ImageSource& source, const DegradationSpec& spec,
                           int n, uint64_t seed);

}  // namespace gdr::degrade
