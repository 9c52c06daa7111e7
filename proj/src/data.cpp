#include "uesa/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "uesa/random.hpp"

namespace uesa {

// ---------------------------------------------------------------------------
// Synthetic data

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Ellipse {
    double cx, cy, a, b, theta;

    bool contains(double x, double y) const {
        const double dx = x - cx, dy = y - cy;
        const double c = std::cos(theta), s = std::sin(theta);
        const double u = (dx * c + dy * s) / a;
        const double v = (-dx * s + dy * c) / b;
        return u * u + v * v <= 1.0;
    }
};

Ellipse random_ellipse(Rng& rng, double size, double min_axis, double max_axis) {
    Ellipse e{};
    e.a = rng.uniform(min_axis, max_axis) * size;
    e.b = rng.uniform(min_axis, max_axis) * size;
    e.theta = rng.uniform(0.0, kPi);
    const double r = std::max(e.a, e.b) + 1.0;
    e.cx = rng.uniform(r, size - r);
    e.cy = rng.uniform(r, size - r);
    return e;
}

std::vector<double> gaussian_blur(const std::vector<double>& img, std::size_t n, double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double z = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        kernel[static_cast<std::size_t>(k + radius)] = std::exp(-0.5 * k * k / (sigma * sigma));
        z += kernel[static_cast<std::size_t>(k + radius)];
    }
    for (auto& k : kernel) k /= z;
    const auto clampi = [n](int i) { return static_cast<std::size_t>(std::clamp(i, 0, static_cast<int>(n) - 1)); };
    std::vector<double> tmp(img.size()), out(img.size());
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[static_cast<std::size_t>(k + radius)] * img[y * n + clampi(static_cast<int>(x) + k)];
            tmp[y * n + x] = acc;
        }
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[static_cast<std::size_t>(k + radius)] * tmp[clampi(static_cast<int>(y) + k) * n + x];
            out[y * n + x] = acc;
        }
    return out;
}

Sample synth_one(std::size_t index, std::size_t size, std::uint64_t seed, const SynthParams& p) {
    Rng rng(mix_seed(seed, index));
    const double s = static_cast<double>(size);
    std::vector<Ellipse> nodules{random_ellipse(rng, s, 0.09, 0.25)};
    if (rng.uniform() < 0.35) nodules.push_back(random_ellipse(rng, s, 0.06, 0.14));

    struct Wave {
        double fx, fy, phase;
    };
    std::vector<Wave> waves;
    for (int k = 0; k < 3; ++k)
        waves.push_back({rng.uniform(0.5, 4.0), rng.uniform(0.5, 4.0), rng.uniform(0.0, 2.0 * kPi)});

    std::vector<double> img(size * size), mask(size * size);
    for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) {
            const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
            const bool inside =
                std::any_of(nodules.begin(), nodules.end(), [&](const Ellipse& e) { return e.contains(px, py); });
            double v = inside ? p.foreground : p.background;
            if (p.texture_amplitude > 0.0) {
                double t = 0.0;
                for (const auto& w : waves) t += std::sin(2.0 * kPi * (w.fx * px + w.fy * py) / s + w.phase);
                v += p.texture_amplitude * t / static_cast<double>(waves.size());
            }
            img[y * size + x] = v;
            mask[y * size + x] = inside ? 1.0 : 0.0;
        }
    if (p.speckle > 0.0) {
        for (auto& v : img) v *= rng.uniform(1.0 - p.speckle, 1.0 + p.speckle) * rng.uniform(1.0 - p.speckle, 1.0 + p.speckle);
    }
    if (p.blur_sigma > 0.0) img = gaussian_blur(img, size, p.blur_sigma);
    for (auto& v : img) v = std::clamp(v, 0.0, 1.0);

    char id[32];
    std::snprintf(id, sizeof id, "s%05zu", index);
    return {Tensor({1, size, size}, std::move(img)), Tensor({1, size, size}, std::move(mask)), id};
}

}  // namespace

std::vector<Sample> synth_dataset(std::size_t n, std::size_t size, std::uint64_t seed, const SynthParams& params) {
    if (n < 1) throw std::invalid_argument("synth_dataset: n must be >= 1");
    if (size < 32 || (size & (size - 1)) != 0) {
        throw std::invalid_argument("synth_dataset: size must be a power of two >= 32, got " + std::to_string(size));
    }
    std::vector<Sample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(synth_one(i, size, seed, params));
    return out;
}

// ---------------------------------------------------------------------------
// PGM

PgmError::PgmError(const std::string& what, std::size_t offset)
    : std::runtime_error("pgm: " + what + " at byte offset " + std::to_string(offset)), offset_(offset) {}

namespace {

std::size_t skip_space_and_comments(const std::vector<std::uint8_t>& b, std::size_t pos) {
    while (pos < b.size()) {
        if (b[pos] == '#') {
            while (pos < b.size() && b[pos] != '\n') ++pos;
        } else if (std::isspace(b[pos])) {
            ++pos;
        } else {
            break;
        }
    }
    return pos;
}

std::size_t read_header_int(const std::vector<std::uint8_t>& b, std::size_t& pos, const char* field) {
    pos = skip_space_and_comments(b, pos);
    if (pos >= b.size()) throw PgmError(std::string("truncated header before ") + field, pos);
    if (!std::isdigit(b[pos])) throw PgmError(std::string("expected ") + field, pos);
    std::size_t v = 0;
    const std::size_t start = pos;
    while (pos < b.size() && std::isdigit(b[pos])) {
        v = v * 10 + static_cast<std::size_t>(b[pos] - '0');
        if (v > (1u << 24)) throw PgmError(std::string(field) + " is too large", start);
        ++pos;
    }
    return v;
}

}  // namespace

Tensor decode_pgm(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw PgmError("missing P5 magic", 0);
    std::size_t pos = 2;
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw PgmError("expected whitespace after magic", pos);
    const std::size_t width = read_header_int(bytes, pos, "width");
    const std::size_t height = read_header_int(bytes, pos, "height");
    const std::size_t maxval_pos = skip_space_and_comments(bytes, pos);
    const std::size_t maxval = read_header_int(bytes, pos, "maxval");
    if (width == 0 || height == 0) throw PgmError("zero image dimension", pos);
    if (maxval != 255) throw PgmError("maxval must be 255, got " + std::to_string(maxval), maxval_pos);
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw PgmError("expected single whitespace after maxval", pos);
    ++pos;
    const std::size_t need = width * height;
    if (bytes.size() - pos < need) {
        throw PgmError("truncated payload: expected " + std::to_string(need) + " bytes, found " +
                           std::to_string(bytes.size() - pos),
                       bytes.size());
    }
    std::vector<double> data(need);
    for (std::size_t i = 0; i < need; ++i) data[i] = static_cast<double>(bytes[pos + i]) / 255.0;
    return Tensor({1, height, width}, std::move(data));
}

std::vector<std::uint8_t> encode_pgm(const Tensor& image) {
    if (image.rank() != 3 || image.dim(0) != 1) {
        throw std::invalid_argument("encode_pgm: expected [1,H,W], got " + shape_to_string(image.shape()));
    }
    const std::string header = "P5\n" + std::to_string(image.dim(2)) + " " + std::to_string(image.dim(1)) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    for (double v : image.data()) {
        const double q = std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
        out.push_back(static_cast<std::uint8_t>(q));
    }
    return out;
}

Tensor load_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_pgm(bytes);
}

void save_pgm(const Tensor& image, const std::string& path) {
    const auto bytes = encode_pgm(image);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

void save_dataset(const std::vector<Sample>& samples, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "images");
    fs::create_directories(fs::path(dir) / "masks");
    for (const auto& s : samples) {
        save_pgm(s.image, (fs::path(dir) / "images" / (s.id + ".pgm")).string());
        save_pgm(s.mask, (fs::path(dir) / "masks" / (s.id + ".pgm")).string());
    }
}

std::vector<Sample> load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path images = fs::path(dir) / "images";
    if (!fs::is_directory(images)) throw std::runtime_error("no images/ directory under '" + dir + "'");
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(images))
        if (entry.path().extension() == ".pgm") ids.push_back(entry.path().stem().string());
    std::sort(ids.begin(), ids.end());
    if (ids.empty()) throw std::runtime_error("no .pgm images under '" + images.string() + "'");
    std::vector<Sample> out;
    for (const auto& id : ids) {
        Tensor image = load_pgm((images / (id + ".pgm")).string());
        Tensor raw_mask = load_pgm((fs::path(dir) / "masks" / (id + ".pgm")).string());
        if (raw_mask.shape() != image.shape()) throw std::runtime_error("mask shape mismatch for '" + id + "'");
        std::vector<double> mask(raw_mask.numel());
        for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = raw_mask[i] >= 0.5 ? 1.0 : 0.0;
        out.push_back({image, Tensor(image.shape(), std::move(mask)), id});
    }
    return out;
}

}  // namespace uesa
