#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "gdr/tensor.hpp"

namespace gdr {

// Deterministic random source. mt19937_64 output is pinned by the standard
// and the Gaussian transform is done by hand (std::normal_distribution is
// implementation-defined), so streams reproduce bit-for-bit across builds.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    // splitmix64 over (seed, stream) for independent substreams.
    static uint64_t mix(uint64_t seed, uint64_t stream) {
        uint64_t z = seed + (stream + 1) * 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    double uniform() {  // [0, 1)
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {  // Box-Muller, pairs cached
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586477 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    int64_t uniform_int(int64_t n) {  // [0, n)
        uint64_t un = static_cast<uint64_t>(n);
        uint64_t limit = UINT64_MAX - UINT64_MAX % un;
        uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return static_cast<int64_t>(x % un);
    }

    Tensor normal_tensor(Shape4 s) {
        Tensor t(s);
        for (auto& v : t.data) v = static_cast<float>(normal());
        return t;
    }

    Tensor uniform_tensor(Shape4 s, double lo, double hi) {
        Tensor t(s);
        for (auto& v : t.data) v = static_cast<float>(uniform(lo, hi));
        return t;
    }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace gdr
