#include "sarlv/nf4.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "sarlv/ops.hpp"

namespace sarlv {

const std::array<double, 16>& nf4_levels() {
    // QLoRA NF4 constants, adopted verbatim as a fixture.
    static const std::array<double, 16> levels = {
        -1.0,
        -0.6961928009986877,
        -0.5250730514526367,
        -0.39491748809814453,
        -0.28444138169288635,
        -0.18477343022823334,
        -0.09105003625154495,
        0.0,
        0.07958029955625534,
        0.16093020141124725,
        0.24611230194568634,
        0.33791524171829224,
        0.44070982933044434,
        0.5626170039176941,
        0.7229568362236023,
        1.0,
    };
    return levels;
}

namespace {

std::uint8_t nearest_level(double normalized) {
    const auto& levels = nf4_levels();
    // levels are sorted; pick the closest, lower index on exact ties
    std::uint8_t best = 0;
    double best_dist = std::fabs(normalized - levels[0]);
    for (std::uint8_t i = 1; i < 16; ++i) {
        double d = std::fabs(normalized - levels[i]);
        if (d < best_dist) {
            best = i;
            best_dist = d;
        }
    }
    return best;
}

}  // namespace

QuantizedTensor quantize_nf4(const Tensor& x, std::int64_t block_size) {
    if (block_size < 1) throw std::invalid_argument("quantize_nf4: block_size must be >= 1");
    for (double v : x.data()) {
        if (!std::isfinite(v)) throw std::invalid_argument("quantize_nf4: non-finite input");
    }
    QuantizedTensor q;
    q.shape = x.shape();
    q.block_size = block_size;
    std::int64_t n = x.size();
    std::int64_t blocks = (n + block_size - 1) / block_size;
    q.absmax.resize(static_cast<std::size_t>(blocks));
    q.codes.assign(static_cast<std::size_t>((n + 1) / 2), 0);
    const auto& data = x.data();
    for (std::int64_t b = 0; b < blocks; ++b) {
        std::int64_t begin = b * block_size;
        std::int64_t end = std::min(n, begin + block_size);
        double amax = 0.0;
        for (std::int64_t i = begin; i < end; ++i)
            amax = std::max(amax, std::fabs(data[static_cast<std::size_t>(i)]));
        if (amax == 0.0) amax = 1.0;  // all-zero block convention
        float amax32 = static_cast<float>(amax);
        q.absmax[static_cast<std::size_t>(b)] = amax32;
        for (std::int64_t i = begin; i < end; ++i) {
            std::uint8_t code = nearest_level(data[static_cast<std::size_t>(i)] / amax32);
            auto byte = static_cast<std::size_t>(i / 2);
            if (i % 2 == 0) q.codes[byte] |= code;
            else q.codes[byte] |= static_cast<std::uint8_t>(code << 4);
        }
    }
    return q;
}

namespace {

double decode_element(const QuantizedTensor& q, std::int64_t i) {
    std::uint8_t byte = q.codes[static_cast<std::size_t>(i / 2)];
    std::uint8_t code = (i % 2 == 0) ? (byte & 0xf) : (byte >> 4);
    double amax = q.absmax[static_cast<std::size_t>(i / q.block_size)];
    return nf4_levels()[code] * amax;
}

}  // namespace

Tensor dequantize(const QuantizedTensor& q) {
    std::vector<double> out(static_cast<std::size_t>(q.count()));
    for (std::int64_t i = 0; i < q.count(); ++i) out[static_cast<std::size_t>(i)] = decode_element(q, i);
    return Tensor::from_data(q.shape, std::move(out), Precision::f32);
}

Tensor quantized_linear_forward(const QuantizedTensor& q, const Tensor& x) {
    if (q.shape.size() != 2) {
        throw std::invalid_argument("quantized_linear_forward: weight must be rank 2, got " +
                                    shape_str(q.shape));
    }
    return matmul(bf16_round(dequantize(q)), x);
}

void save_quantized(const std::filesystem::path& file, const QuantizedTensor& q) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("save_quantized: cannot open " + file.string());
    auto write_u64 = [&](std::uint64_t v) {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
        out.write(reinterpret_cast<const char*>(b), 8);
    };
    write_u64(static_cast<std::uint64_t>(q.shape.size()));
    for (auto d : q.shape) write_u64(static_cast<std::uint64_t>(d));
    write_u64(static_cast<std::uint64_t>(q.block_size));
    write_u64(static_cast<std::uint64_t>(q.absmax.size()));
    for (float a : q.absmax) {
        std::uint32_t u;
        std::memcpy(&u, &a, 4);
        unsigned char b[4] = {static_cast<unsigned char>(u & 0xff),
                              static_cast<unsigned char>((u >> 8) & 0xff),
                              static_cast<unsigned char>((u >> 16) & 0xff),
                              static_cast<unsigned char>((u >> 24) & 0xff)};
        out.write(reinterpret_cast<const char*>(b), 4);
    }
    write_u64(static_cast<std::uint64_t>(q.codes.size()));
    out.write(reinterpret_cast<const char*>(q.codes.data()),
              static_cast<std::streamsize>(q.codes.size()));
    if (!out) throw std::runtime_error("save_quantized: write failed for " + file.string());
}

QuantizedTensor load_quantized(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("load_quantized: cannot open " + file.string());
    auto read_u64 = [&]() -> std::uint64_t {
        unsigned char b[8];
        in.read(reinterpret_cast<char*>(b), 8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    };
    QuantizedTensor q;
    auto rank = read_u64();
    q.shape.resize(rank);
    for (auto& d : q.shape) d = static_cast<std::int64_t>(read_u64());
    q.block_size = static_cast<std::int64_t>(read_u64());
    q.absmax.resize(read_u64());
    for (auto& a : q.absmax) {
        unsigned char b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        std::uint32_t u = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                          (static_cast<std::uint32_t>(b[2]) << 16) |
                          (static_cast<std::uint32_t>(b[3]) << 24);
        std::memcpy(&a, &u, 4);
    }
    q.codes.resize(read_u64());
    in.read(reinterpret_cast<char*>(q.codes.data()), static_cast<std::streamsize>(q.codes.size()));
    if (!in) throw std::runtime_error("load_quantized: short read in " + file.string());
    return q;
}

}  // namespace sarlv
