#include "gdr/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace gdr::io {

namespace {

constexpr char kTensorMagic[5] = {'Z', 'A', 'I', 'R', '1'};
constexpr uint8_t kDtypeF32 = 1;
constexpr const char* kBundleMagic = "GDRBUNDLE1";

void put_i64(std::ostream& os, int64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), 8);
}

int64_t get_i64(std::istream& is) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    if (!is) throw IoError("tensor file: truncated dimension field");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[i]) << (8 * i);
    return static_cast<int64_t>(v);
}

void put_f32_payload(std::ostream& os, const Tensor& t) {
    for (float v : t.data) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        unsigned char buf[4];
        for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
        os.write(reinterpret_cast<const char*>(buf), 4);
    }
}

void get_f32_payload(std::istream& is, Tensor& t) {
    for (auto& v : t.data) {
        unsigned char buf[4];
        is.read(reinterpret_cast<char*>(buf), 4);
        if (!is) throw IoError("tensor file: truncated payload");
        uint32_t bits = 0;
        for (int i = 0; i < 4; ++i) bits |= static_cast<uint32_t>(buf[i]) << (8 * i);
        std::memcpy(&v, &bits, 4);
    }
}

void write_tensor_stream(std::ostream& os, const Tensor& t) {
    os.write(kTensorMagic, 5);
    os.put(static_cast<char>(kDtypeF32));
    put_i64(os, t.shape.n);
    put_i64(os, t.shape.c);
    put_i64(os, t.shape.h);
    put_i64(os, t.shape.w);
    put_f32_payload(os, t);
}

Tensor read_tensor_stream(std::istream& is) {
    char magic[5];
    is.read(magic, 5);
    if (!is || std::memcmp(magic, kTensorMagic, 5) != 0)
        throw IoError("tensor file: bad magic (expected ZAIR1)");
    const int dtype = is.get();
    if (dtype != kDtypeF32)
        throw IoError("tensor file: unsupported dtype tag " + std::to_string(dtype));
    Shape4 s;
    s.n = get_i64(is);
    s.c = get_i64(is);
    s.h = get_i64(is);
    s.w = get_i64(is);
    if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0 || s.numel() > (int64_t{1} << 34))
        throw IoError("tensor file: implausible shape " + s.str());
    Tensor t(s);
    get_f32_payload(is, t);
    return t;
}

int read_pnm_token(std::istream& is) {
    // Skips whitespace and '#' comments per the PNM header grammar.
    while (true) {
        int c = is.peek();
        if (c == '#') {
            std::string line;
            std::getline(is, line);
        } else if (std::isspace(c)) {
            is.get();
        } else {
            break;
        }
    }
    int v;
    if (!(is >> v)) throw IoError("image: malformed PNM header");
    return v;
}

}  // namespace

Tensor read_image(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("image: cannot open '" + path + "'");
    char p, kind;
    f.get(p);
    f.get(kind);
    if (!f || p != 'P' || (kind != '6' && kind != '5'))
        throw IoError("image: '" + path + "' is not a binary PPM/PGM (P6/P5)");
    const int w = read_pnm_token(f);
    const int h = read_pnm_token(f);
    const int maxval = read_pnm_token(f);
    if (w < 1 || h < 1 || maxval != 255)
        throw IoError("image: unsupported PNM header in '" + path + "'");
    f.get();  // single whitespace after maxval

    const int in_ch = kind == '6' ? 3 : 1;
    std::vector<unsigned char> raw(static_cast<size_t>(w) * h * in_ch);
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!f) throw IoError("image: truncated pixel data in '" + path + "'");

    Tensor t({1, 3, h, w});
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x)
            for (int64_t c = 0; c < 3; ++c) {
                const size_t src = (static_cast<size_t>(y) * w + x) * in_ch +
                                   (in_ch == 3 ? static_cast<size_t>(c) : 0);
                t.at(0, c, y, x) = static_cast<float>(raw[src]) / 255.0f;
            }
    return t;
}

void write_image(const std::string& path, const Tensor& unit_range) {
    const Shape4 s = unit_range.shape;
    if (s.n != 1 || s.c != 3)
        throw ShapeError("write_image: need (1,3,H,W), got " + s.str());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("image: cannot write '" + path + "'");
    f << "P6\n" << s.w << " " << s.h << "\n255\n";
    std::vector<unsigned char> raw(static_cast<size_t>(s.w) * s.h * 3);
    for (int64_t y = 0; y < s.h; ++y)
        for (int64_t x = 0; x < s.w; ++x)
            for (int64_t c = 0; c < 3; ++c) {
                const float v = std::min(std::max(unit_range.at(0, c, y, x), 0.0f), 1.0f);
                raw[(static_cast<size_t>(y) * s.w + x) * 3 + static_cast<size_t>(c)] =
                    static_cast<unsigned char>(std::lround(v * 255.0f));
            }
    f.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
    if (!f) throw IoError("image: short write to '" + path + "'");
}

void write_tensor(const std::string& path, const Tensor& t) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("tensor file: cannot write '" + path + "'");
    write_tensor_stream(f, t);
    if (!f) throw IoError("tensor file: short write to '" + path + "'");
}

Tensor read_tensor(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("tensor file: cannot open '" + path + "'");
    return read_tensor_stream(f);
}

void write_bundle(const std::string& path, const TensorBundle& b) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("bundle: cannot write '" + path + "'");
    f << kBundleMagic << "\n";
    f << b.meta.size() << "\n";
    for (const auto& [k, v] : b.meta) f << k << " " << v << "\n";
    f << b.tensors.size() << "\n";
    for (const auto& [name, t] : b.tensors) {
        f << name << "\n";
        write_tensor_stream(f, t);
    }
    if (!f) throw IoError("bundle: short write to '" + path + "'");
}

TensorBundle read_bundle(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("bundle: cannot open '" + path + "'");
    std::string line;
    std::getline(f, line);
    if (line != kBundleMagic) throw IoError("bundle: bad magic in '" + path + "'");
    TensorBundle b;
    std::getline(f, line);
    const size_t n_meta = static_cast<size_t>(std::stoull(line));
    for (size_t i = 0; i < n_meta; ++i) {
        std::getline(f, line);
        const auto sp = line.find(' ');
        if (sp == std::string::npos) throw IoError("bundle: malformed meta line");
        b.meta[line.substr(0, sp)] = line.substr(sp + 1);
    }
    std::getline(f, line);
    const size_t n_tensors = static_cast<size_t>(std::stoull(line));
    for (size_t i = 0; i < n_tensors; ++i) {
        std::string name;
        std::getline(f, name);
        if (!f) throw IoError("bundle: truncated tensor list");
        b.tensors.emplace_back(name, read_tensor_stream(f));
        f.get();  // trailing newline after binary blob
    }
    return b;
}

KeyValues KeyValues::parse(const std::string& text) {
    KeyValues kv;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw IoError("config line " + std::to_string(lineno) +
                          ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty())
            throw IoError("config line " + std::to_string(lineno) + ": empty key");
        kv.entries_.emplace_back(key, val);
    }
    kv.consumed_.assign(kv.entries_.size(), false);
    return kv;
}

KeyValues KeyValues::load(const std::string& path) { return parse(read_text(path)); }

const std::string* KeyValues::find(const std::string& key) const {
    for (size_t i = 0; i < entries_.size(); ++i)
        if (entries_[i].first == key) {
            consumed_[i] = true;
            return &entries_[i].second;
        }
    return nullptr;
}

bool KeyValues::has(const std::string& key) const {
    for (const auto& [k, v] : entries_)
        if (k == key) return true;
    return false;
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) {
    const std::string* v = find(key);
    return v ? *v : fallback;
}

int64_t KeyValues::get_int(const std::string& key, int64_t fallback) {
    const std::string* v = find(key);
    if (!v) return fallback;
    try {
        size_t pos = 0;
        const int64_t r = std::stoll(*v, &pos);
        if (pos != v->size()) throw std::invalid_argument("");
        return r;
    } catch (const std::exception&) {
        throw IoError("config field '" + key + "': bad integer '" + *v + "'");
    }
}

double KeyValues::get_double(const std::string& key, double fallback) {
    const std::string* v = find(key);
    if (!v) return fallback;
    try {
        size_t pos = 0;
        const double r = std::stod(*v, &pos);
        if (pos != v->size()) throw std::invalid_argument("");
        return r;
    } catch (const std::exception&) {
        throw IoError("config field '" + key + "': bad number '" + *v + "'");
    }
}

bool KeyValues::get_bool(const std::string& key, bool fallback) {
    const std::string* v = find(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw IoError("config field '" + key + "': bad boolean '" + *v + "'");
}

void KeyValues::reject_unknown() const {
    for (size_t i = 0; i < entries_.size(); ++i)
        if (!consumed_[i])
            throw IoError("config: unknown field '" + entries_[i].first + "'");
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write '" + path + "'");
    f << text;
    if (!f) throw IoError("short write to '" + path + "'");
}

std::string read_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "'");
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

std::string format_float(double v, int decimals) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(decimals);
    os << v;
    return os.str();
}

}  // namespace gdr::io
