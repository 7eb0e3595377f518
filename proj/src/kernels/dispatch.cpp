#include <atomic>
#include <stdexcept>

#include "gdr/kernels.hpp"

namespace gdr::kernels {
namespace {

const Backend* resolve(Select s) {
    switch (s) {
        case Select::Scalar: return &scalar_backend();
        case Select::Avx2: return &avx2_backend();
        case Select::Auto:
        default: return avx2_supported() ? &avx2_backend() : &scalar_backend();
    }
}

std::atomic<const Backend*>& active_slot() {
    static std::atomic<const Backend*> slot{resolve(Select::Auto)};
    return slot;
}

}  // namespace

Select parse_select(const std::string& s) {
    if (s == "auto") return Select::Auto;
    if (s == "scalar") return Select::Scalar;
    if (s == "avx2") return Select::Avx2;
    throw std::invalid_argument("unknown kernel backend '" + s +
                                "' (expected auto|scalar|avx2)");
}

void select(Select s) { active_slot().store(resolve(s)); }

const Backend& active() { return *active_slot().load(); }

}  // namespace gdr::kernels
