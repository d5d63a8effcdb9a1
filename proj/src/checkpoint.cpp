#include "sml/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <limits>

#include "sml/errors.hpp"

namespace sml {

namespace {

constexpr char kMagic[4] = {'S', 'T', 'F', '1'};

void put_u16(std::vector<std::uint8_t>& buf, std::uint16_t v) {
    buf.push_back(static_cast<std::uint8_t>(v));
    buf.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& buf, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(buf, bits);
}

class Reader {
public:
    Reader(const std::vector<std::uint8_t>& buf, std::size_t pos) : buf_(buf), pos_(pos) {}

    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(buf_[pos_] | (buf_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    float f32() {
        std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::string str(std::size_t len) {
        need(len);
        std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), len);
        pos_ += len;
        return s;
    }
    std::size_t pos() const { return pos_; }

private:
    void need(std::size_t n) {
        if (pos_ + n > buf_.size()) throw CheckpointError("truncated checkpoint");
    }
    const std::vector<std::uint8_t>& buf_;
    std::size_t pos_;
};

std::uint32_t payload_crc(const std::uint8_t* data, std::size_t len) {
    return static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(len)));
}

} // namespace

void write_checkpoint(const std::string& path, const CheckpointData& data) {
    std::vector<std::uint8_t> payload;
    put_u32(payload, static_cast<std::uint32_t>(data.size()));
    for (const auto& [name, blob] : data) {
        if (name.size() > std::numeric_limits<std::uint16_t>::max())
            throw ContractError("checkpoint tensor name too long: " + name);
        put_u16(payload, static_cast<std::uint16_t>(name.size()));
        for (char c : name) payload.push_back(static_cast<std::uint8_t>(c));
        put_u32(payload, static_cast<std::uint32_t>(blob.dims.size()));
        std::size_t numel = 1;
        for (std::uint32_t d : blob.dims) {
            put_u32(payload, d);
            numel *= d;
        }
        if (numel != blob.data.size())
            throw ContractError("checkpoint blob '" + name + "' dims do not match data size");
        for (float v : blob.data) put_f32(payload, v);
    }

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint for writing: " + path);
    f.write(kMagic, 4);
    f.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
    std::vector<std::uint8_t> crc_bytes;
    put_u32(crc_bytes, payload_crc(payload.data(), payload.size()));
    f.write(reinterpret_cast<const char*>(crc_bytes.data()), 4);
    if (!f) throw IoError("checkpoint write failed: " + path);
}

CheckpointData read_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint: " + path);
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
    if (buf.size() < 12 || std::memcmp(buf.data(), kMagic, 4) != 0)
        throw CheckpointError("not an STF1 checkpoint: " + path);

    const std::size_t payload_len = buf.size() - 8;
    Reader crc_reader(buf, buf.size() - 4);
    if (crc_reader.u32() != payload_crc(buf.data() + 4, payload_len))
        throw CheckpointError("checkpoint CRC mismatch: " + path);

    Reader r(buf, 4);
    const std::uint32_t count = r.u32();
    CheckpointData data;
    for (std::uint32_t t = 0; t < count; ++t) {
        const std::uint16_t name_len = r.u16();
        std::string name = r.str(name_len);
        CheckpointBlob blob;
        const std::uint32_t rank = r.u32();
        if (rank > 4) throw CheckpointError("checkpoint blob '" + name + "' has rank > 4");
        std::size_t numel = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            blob.dims.push_back(r.u32());
            numel *= blob.dims.back();
        }
        blob.data.resize(numel);
        for (std::size_t i = 0; i < numel; ++i) blob.data[i] = r.f32();
        if (!data.emplace(std::move(name), std::move(blob)).second)
            throw CheckpointError("duplicate tensor name in checkpoint: " + path);
    }
    if (r.pos() != buf.size() - 4) throw CheckpointError("trailing bytes in checkpoint: " + path);
    return data;
}

} // namespace sml
