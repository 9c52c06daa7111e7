#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "uesa/network.hpp"

namespace uesa {

namespace {

constexpr char kMagic[] = {'U', 'E', 'S', 'A', '1'};

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
    std::uint8_t bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.insert(out.end(), bytes, bytes + sizeof(T));
}

void put_f64(std::vector<std::uint8_t>& out, double v) { put(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        if (pos_ + sizeof(T) > bytes_.size()) fail("truncated checkpoint");
        std::uint8_t raw[sizeof(T)];
        std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
        pos_ += sizeof(T);
        T v;
        std::memcpy(&v, raw, sizeof(T));
        return v;
    }
    double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
    std::string get_string(std::size_t n) {
        if (pos_ + n > bytes_.size()) fail("truncated checkpoint");
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == bytes_.size(); }
    [[noreturn]] void fail(const std::string& what) const {
        throw std::invalid_argument(what + " at byte offset " + std::to_string(pos_));
    }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(Model& model) {
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    auto params = model.parameters();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
        out.insert(out.end(), p.name.begin(), p.name.end());
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p.tensor->rank()));
        for (auto d : p.tensor->shape()) put<std::uint64_t>(out, d);
    }
    for (const auto& p : params)
        for (double v : p.tensor->data()) put_f64(out, v);
    auto norms = model.batch_norms();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(norms.size()));
    for (const auto& bn : norms) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(bn.stats->mean.size()));
        for (double v : bn.stats->mean) put_f64(out, v);
        for (double v : bn.stats->var) put_f64(out, v);
    }
    return out;
}

void deserialize_checkpoint(Model& model, const std::vector<std::uint8_t>& bytes) {
    Reader in(bytes);
    if (in.get_string(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) in.fail("bad checkpoint magic");
    auto params = model.parameters();
    const auto count = in.get<std::uint32_t>();
    if (count != params.size()) {
        in.fail("checkpoint holds " + std::to_string(count) + " tensors, model expects " +
                std::to_string(params.size()));
    }
    for (const auto& p : params) {
        const std::string name = in.get_string(in.get<std::uint32_t>());
        if (name != p.name) in.fail("checkpoint tensor '" + name + "' where model expects '" + p.name + "'");
        Shape shape(in.get<std::uint32_t>());
        for (auto& d : shape) d = in.get<std::uint64_t>();
        if (shape != p.tensor->shape()) {
            in.fail("tensor '" + name + "' has shape " + shape_to_string(shape) + ", model expects " +
                    shape_to_string(p.tensor->shape()));
        }
    }
    std::vector<Tensor> loaded;
    for (const auto& p : params) {
        std::vector<double> values(p.tensor->numel());
        for (auto& v : values) v = in.get_f64();
        loaded.emplace_back(p.tensor->shape(), std::move(values), true);
    }
    auto norms = model.batch_norms();
    if (in.get<std::uint32_t>() != norms.size()) in.fail("batch-norm count mismatch");
    std::vector<ChannelStats> stats;
    for (const auto& bn : norms) {
        const auto c = in.get<std::uint32_t>();
        if (c != bn.stats->mean.size()) in.fail("batch-norm '" + bn.name + "' channel mismatch");
        ChannelStats s{std::vector<double>(c), std::vector<double>(c)};
        for (auto& v : s.mean) v = in.get_f64();
        for (auto& v : s.var) v = in.get_f64();
        stats.push_back(std::move(s));
    }
    if (!in.done()) in.fail("trailing bytes in checkpoint");

    for (std::size_t i = 0; i < params.size(); ++i) *params[i].tensor = loaded[i];
    for (std::size_t i = 0; i < norms.size(); ++i) *norms[i].stats = stats[i];
}

void save_checkpoint(Model& model, const std::string& path) {
    const auto bytes = serialize_checkpoint(model);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("failed writing checkpoint '" + path + "'");
}

void load_checkpoint(Model& model, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    deserialize_checkpoint(model, bytes);
}

}  // namespace uesa
