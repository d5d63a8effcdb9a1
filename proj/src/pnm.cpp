#include "sml/pnm.hpp"

#include <fstream>

#include "sml/errors.hpp"

namespace sml {

namespace {

void write_pnm(const std::string& path, const char* magic, int h, int w,
               const std::vector<std::uint8_t>& px) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << magic << "\n" << w << " " << h << "\n255\n";
    f.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
    if (!f) throw IoError("write failed: " + path);
}

// Reads one whitespace-delimited header token, skipping '#' comments.
int read_header_int(std::istream& f, const std::string& path) {
    int c = f.peek();
    while (c == '#' || std::isspace(c)) {
        if (c == '#') f.ignore(1 << 20, '\n');
        else f.get();
        c = f.peek();
    }
    int v;
    if (!(f >> v) || v <= 0) throw ParseError("bad header in " + path);
    return v;
}

std::vector<std::uint8_t> read_pnm(const std::string& path, const char* magic, int channels,
                                   int* h, int* w) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    char m0, m1;
    f.get(m0);
    f.get(m1);
    if (!f || m0 != magic[0] || m1 != magic[1])
        throw ParseError("not a " + std::string(magic) + " file: " + path);
    *w = read_header_int(f, path);
    *h = read_header_int(f, path);
    int maxval = read_header_int(f, path);
    if (maxval != 255) throw ParseError("unsupported maxval in " + path);
    f.get(); // single whitespace after maxval
    std::vector<std::uint8_t> px(static_cast<std::size_t>(*h) * *w * channels);
    f.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
    if (f.gcount() != static_cast<std::streamsize>(px.size()))
        throw ParseError("truncated pixel data in " + path);
    return px;
}

} // namespace

void write_ppm(const std::string& path, const RgbImage& img) {
    write_pnm(path, "P6", img.h, img.w, img.px);
}

RgbImage read_ppm(const std::string& path) {
    RgbImage img;
    img.px = read_pnm(path, "P6", 3, &img.h, &img.w);
    return img;
}

void write_pgm(const std::string& path, const GrayImage& img) {
    write_pnm(path, "P5", img.h, img.w, img.px);
}

GrayImage read_pgm(const std::string& path) {
    GrayImage img;
    img.px = read_pnm(path, "P5", 1, &img.h, &img.w);
    return img;
}

} // namespace sml
