#pragma once

#include <map>
#include <string>

#include "wsim/photon_stream.hpp"

// WTTAG001 binary time-tag format, little-endian:
//   8-byte magic "WTTAG001", then 12-byte records
//   { u64 t_ps, u8 channel, u8 flags, u16 pol_centidegrees }.
// A text sidecar (key=value per line) carries the config echo, seed and
// record count.

namespace wsim {

inline constexpr char kTagMagic[8] = {'W', 'T', 'T', 'A', 'G', '0', '0', '1'};
inline constexpr std::size_t kTagRecordSize = 12;

void write_tag_file(const TimeTagStream& stream, const std::string& path);

/// Throws std::runtime_error with a byte-offset diagnostic on malformed input.
TimeTagStream read_tag_file(const std::string& path);

using Metadata = std::map<std::string, std::string>;

Metadata stream_metadata(const TimeTagStream& stream, const StreamConfig& config);
void write_metadata(const Metadata& meta, const std::string& path);
Metadata read_metadata(const std::string& path);

/// Sidecar path convention: "<tag file>.meta".
std::string metadata_path(const std::string& tag_path);

}  // namespace wsim
