#include "sarlv/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sarlv {

void write_pgm(const std::filesystem::path& file, const GrayImage& image) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("write_pgm: cannot open " + file.string());
    out << "P5\n" << image.width << " " << image.height << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(image.width));
    for (std::int64_t y = 0; y < image.height; ++y) {
        for (std::int64_t x = 0; x < image.width; ++x) {
            double v = std::clamp(image.at(y, x), 0.0, 1.0);
            row[static_cast<std::size_t>(x)] =
                static_cast<unsigned char>(std::lround(v * 255.0));
        }
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw std::runtime_error("write_pgm: write failed for " + file.string());
}

namespace {

int read_pnm_int(std::istream& in) {
    // skips whitespace and # comments per the PNM grammar
    while (true) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int value = 0;
    if (!(in >> value)) throw std::runtime_error("read_pgm: malformed header");
    return value;
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("read_pgm: cannot open " + file.string());
    char magic[2];
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || magic[1] != '5') {
        throw std::runtime_error("read_pgm: not a binary PGM: " + file.string());
    }
    std::int64_t width = read_pnm_int(in);
    std::int64_t height = read_pnm_int(in);
    std::int64_t maxval = read_pnm_int(in);
    if (width < 1 || height < 1 || maxval != 255) {
        throw std::runtime_error("read_pgm: unsupported geometry or maxval in " + file.string());
    }
    in.get();  // single whitespace after maxval
    std::vector<unsigned char> bytes(static_cast<std::size_t>(width * height));
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
        throw std::runtime_error("read_pgm: short pixel data in " + file.string());
    }
    GrayImage img = make_image(height, width);
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        img.pixels[i] = static_cast<double>(bytes[i]) / 255.0;
    }
    return img;
}

}  // namespace sarlv
