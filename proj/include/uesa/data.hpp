#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "uesa/tensor.hpp"

namespace uesa {

struct Sample {
    Tensor image;  // [1,S,S] in [0,1]
    Tensor mask;   // [1,S,S] in {0,1}
    std::string id;
};

/// Knobs of the synthetic ultrasound-like generator. `clean()` disables every
/// noise source, leaving a two-level ellipse scene.
struct SynthParams {
    double background = 0.35;
    double foreground = 0.65;
    double texture_amplitude = 0.08;
    double speckle = 0.35;  // each of two uniform factors drawn from [1-speckle, 1+speckle]
    double blur_sigma = 0.8;

    static SynthParams clean() { return {0.35, 0.65, 0.0, 0.0, 0.0}; }
};

/// n samples of size x size with one or two bright elliptical nodules. Fully
/// determined by (n, size, seed, params). Sample i depends only on (seed, i).
std::vector<Sample> synth_dataset(std::size_t n, std::size_t size, std::uint64_t seed,
                                  const SynthParams& params = {});

/// Binary PGM ("P5", maxval 255) parse failure with the byte offset of the problem.
class PgmError : public std::runtime_error {
public:
    PgmError(const std::string& what, std::size_t offset);
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Bytes b map to b/255 in a [1,H,W] tensor.
Tensor decode_pgm(const std::vector<std::uint8_t>& bytes);
/// Values in [0,1] map to floor(v*255 + 0.5); out-of-range values are clamped.
std::vector<std::uint8_t> encode_pgm(const Tensor& image);
Tensor load_pgm(const std::string& path);
void save_pgm(const Tensor& image, const std::string& path);

/// Writes DIR/images/<id>.pgm and DIR/masks/<id>.pgm.
void save_dataset(const std::vector<Sample>& samples, const std::string& dir);
/// Reads every DIR/images/*.pgm with its mask, ordered by id. Masks binarize at 0.5.
std::vector<Sample> load_dataset(const std::string& dir);

}  // namespace uesa
