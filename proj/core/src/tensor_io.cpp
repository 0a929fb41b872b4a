#include "sarlv/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "sarlv/hash.hpp"

namespace sarlv {

namespace {

std::vector<unsigned char> to_le_f32(const Tensor& t) {
    std::vector<unsigned char> bytes(t.data().size() * 4);
    for (std::size_t i = 0; i < t.data().size(); ++i) {
        float f = static_cast<float>(t.data()[i]);
        std::uint32_t u = std::bit_cast<std::uint32_t>(f);
        bytes[i * 4 + 0] = static_cast<unsigned char>(u & 0xff);
        bytes[i * 4 + 1] = static_cast<unsigned char>((u >> 8) & 0xff);
        bytes[i * 4 + 2] = static_cast<unsigned char>((u >> 16) & 0xff);
        bytes[i * 4 + 3] = static_cast<unsigned char>((u >> 24) & 0xff);
    }
    return bytes;
}

}  // namespace

void save_tensor(const std::filesystem::path& path_stem, const std::string& name,
                 const Tensor& t) {
    auto bytes = to_le_f32(t);
    std::filesystem::path bin = path_stem;
    bin += ".bin";
    std::ofstream out(bin, std::ios::binary);
    if (!out) throw std::runtime_error("save_tensor: cannot open " + bin.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("save_tensor: write failed for " + bin.string());

    nlohmann::json sidecar;
    sidecar["name"] = name;
    sidecar["shape"] = t.shape();
    sidecar["precision"] = precision_name(t.precision());
    std::filesystem::path js = path_stem;
    js += ".json";
    std::ofstream jout(js);
    if (!jout) throw std::runtime_error("save_tensor: cannot open " + js.string());
    jout << sidecar.dump(2) << "\n";
}

Tensor load_tensor(const std::filesystem::path& path_stem, std::string* name_out) {
    std::filesystem::path js = path_stem;
    js += ".json";
    std::ifstream jin(js);
    if (!jin) throw std::runtime_error("load_tensor: cannot open " + js.string());
    nlohmann::json sidecar = nlohmann::json::parse(jin);
    Shape shape = sidecar.at("shape").get<Shape>();
    Precision prec = precision_from_name(sidecar.at("precision").get<std::string>());
    if (name_out) *name_out = sidecar.at("name").get<std::string>();

    std::filesystem::path bin = path_stem;
    bin += ".bin";
    std::ifstream in(bin, std::ios::binary);
    if (!in) throw std::runtime_error("load_tensor: cannot open " + bin.string());
    std::int64_t n = numel(shape);
    std::vector<unsigned char> bytes(static_cast<std::size_t>(n) * 4);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
        throw std::runtime_error("load_tensor: short read in " + bin.string());
    }
    std::vector<double> data(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::uint32_t u = static_cast<std::uint32_t>(bytes[i * 4 + 0]) |
                          (static_cast<std::uint32_t>(bytes[i * 4 + 1]) << 8) |
                          (static_cast<std::uint32_t>(bytes[i * 4 + 2]) << 16) |
                          (static_cast<std::uint32_t>(bytes[i * 4 + 3]) << 24);
        data[i] = static_cast<double>(std::bit_cast<float>(u));
    }
    return Tensor::from_data(std::move(shape), std::move(data), prec);
}

std::uint64_t tensor_blob_hash(const Tensor& t) {
    auto bytes = to_le_f32(t);
    return fnv1a64(bytes.data(), bytes.size());
}

}  // namespace sarlv
