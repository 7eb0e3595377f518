#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gdr/tensor.hpp"

namespace gdr::io {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Binary PPM (P6) / PGM (P5), 8-bit. Values map to [0,1]; grayscale reads
// are promoted to 3 channels. Round trip is exact up to the 1/255
// quantization step.
Tensor read_image(const std::string& path);
void write_image(const std::string& path, const Tensor& unit_range);

// Raw tensor container: magic "ZAIR1", one dtype byte (1 = f32), four
// little-endian int64 dims (n,c,h,w), then the row-major f32 payload.
void write_tensor(const std::string& path, const Tensor& t);
Tensor read_tensor(const std::string& path);

// Several named tensors plus string metadata in one file (network
// checkpoints). Each record embeds a full ZAIR1 blob, so the container
// round-trips bit-exactly.
struct TensorBundle {
    std::vector<std::pair<std::string, Tensor>> tensors;
    std::map<std::string, std::string> meta;
};

void write_bundle(const std::string& path, const TensorBundle& b);
TensorBundle read_bundle(const std::string& path);

// Flat "key = value" config text, '#' comments. Parsing collects entries;
// typed getters track which keys were consumed so unknown keys can be
// rejected with their name.
class KeyValues {
public:
    static KeyValues parse(const std::string& text);
    static KeyValues load(const std::string& path);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback);
    int64_t get_int(const std::string& key, int64_t fallback);
    double get_double(const std::string& key, double fallback);
    bool get_bool(const std::string& key, bool fallback);

    // Throws naming the first key never consumed by a getter.
    void reject_unknown() const;

    const std::vector<std::pair<std::string, std::string>>& entries() const {
        return entries_;
    }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
    mutable std::vector<bool> consumed_;

    const std::string* find(const std::string& key) const;
};

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

std::string format_float(double v, int decimals = 4);

}  // namespace gdr::io
