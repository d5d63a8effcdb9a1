#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace sml {

/// One named tensor in the container: 32-bit reals, row-major.
struct CheckpointBlob {
    std::vector<std::uint32_t> dims;
    std::vector<float> data;
};

/// STF1 container: magic "STF1", u32 LE tensor count; per tensor u16 LE name
/// length, name bytes, u32 LE rank, u32 LE dims, f32 LE data; trailing u32 LE
/// CRC-32 of everything between the magic and the CRC.
using CheckpointData = std::map<std::string, CheckpointBlob>;

void write_checkpoint(const std::string& path, const CheckpointData& data);

/// Throws CheckpointError on bad magic, truncation, or CRC mismatch; IoError
/// when the file cannot be opened.
CheckpointData read_checkpoint(const std::string& path);

} // namespace sml
