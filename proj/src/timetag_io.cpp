#include "wsim/timetag_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace wsim {

namespace {

void put_u16(char* dst, std::uint16_t v) {
  dst[0] = static_cast<char>(v & 0xff);
  dst[1] = static_cast<char>((v >> 8) & 0xff);
}

void put_u64(char* dst, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) dst[i] = static_cast<char>((v >> (8 * i)) & 0xff);
}

std::uint16_t get_u16(const unsigned char* src) {
  return static_cast<std::uint16_t>(src[0] | (src[1] << 8));
}

std::uint64_t get_u64(const unsigned char* src) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | src[i];
  return v;
}

[[noreturn]] void malformed(const std::string& path, std::size_t offset,
                            const std::string& what) {
  throw std::runtime_error(path + ": malformed time-tag file at byte offset " +
                           std::to_string(offset) + ": " + what);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_tag_file(const TimeTagStream& stream, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write(kTagMagic, sizeof kTagMagic);
  char rec[kTagRecordSize];
  for (const TimeTag& tag : stream.tags) {
    put_u64(rec, static_cast<std::uint64_t>(tag.t_ps));
    rec[8] = static_cast<char>(tag.channel);
    rec[9] = static_cast<char>(tag.flags);
    put_u16(rec + 10, tag.pol_centideg);
    f.write(rec, sizeof rec);
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

TimeTagStream read_tag_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw std::runtime_error("cannot open " + path);
  const auto size = static_cast<std::size_t>(f.tellg());
  f.seekg(0);

  char magic[8];
  if (size < sizeof magic || !f.read(magic, sizeof magic))
    malformed(path, 0, "missing 8-byte magic");
  if (std::memcmp(magic, kTagMagic, sizeof magic) != 0)
    malformed(path, 0, "bad magic (expected WTTAG001)");
  const std::size_t payload = size - sizeof magic;
  if (payload % kTagRecordSize != 0)
    malformed(path, size - payload % kTagRecordSize,
              "truncated record (payload not a multiple of 12 bytes)");

  TimeTagStream stream;
  stream.tags.reserve(payload / kTagRecordSize);
  unsigned char rec[kTagRecordSize];
  std::int64_t prev_t = -1;
  int prev_ch = -1;
  for (std::size_t i = 0; i < payload / kTagRecordSize; ++i) {
    const std::size_t offset = sizeof magic + i * kTagRecordSize;
    if (!f.read(reinterpret_cast<char*>(rec), sizeof rec))
      malformed(path, offset, "short read");
    TimeTag tag;
    tag.t_ps = static_cast<std::int64_t>(get_u64(rec));
    tag.channel = rec[8];
    tag.flags = rec[9];
    tag.pol_centideg = get_u16(rec + 10);
    if (tag.channel > 1) malformed(path, offset + 8, "channel id out of range");
    if (tag.t_ps < prev_t || (tag.t_ps == prev_t && tag.channel <= prev_ch))
      malformed(path, offset, "tags not strictly sorted by (t, channel)");
    prev_t = tag.t_ps;
    prev_ch = tag.channel;
    stream.tags.push_back(tag);
  }
  if (!stream.tags.empty())
    stream.duration_s = static_cast<double>(stream.tags.back().t_ps) * 1e-12;
  return stream;
}

Metadata stream_metadata(const TimeTagStream& stream, const StreamConfig& cfg) {
  Metadata m;
  m["format"] = "WTTAG001";
  m["records"] = std::to_string(stream.tags.size());
  m["seed"] = std::to_string(cfg.seed);
  m["duration_s"] = format_double(stream.duration_s);
  m["truncated"] = stream.truncated ? "1" : "0";
  if (stream.truncated) m["bleach_time_s"] = format_double(stream.bleach_time_s);
  m["rate_pump_per_s"] = format_double(cfg.rates.pump);
  m["rate_decay_per_s"] = format_double(cfg.rates.decay);
  m["rate_shelve_per_s"] = format_double(cfg.rates.shelve);
  m["rate_deshelve_per_s"] = format_double(cfg.rates.deshelve);
  m["sigma_per_s_per_uW"] = format_double(cfg.power_model.sigma);
  m["detection_efficiency"] = format_double(cfg.power_model.detection_efficiency);
  m["background_cps"] = format_double(cfg.background_cps);
  m["jitter_sigma_ps"] = format_double(cfg.jitter_sigma_ps);
  m["dead_time_ps"] = std::to_string(cfg.dead_time_ps);
  m["splitter_ratio"] = format_double(cfg.splitter_ratio);
  m["dark_rate_per_s"] = format_double(cfg.dark_rate);
  m["dark_rate_per_s_per_uW"] = format_double(cfg.dark_rate_per_uW);
  m["dark_recovery_per_s"] = format_double(cfg.dark_recovery);
  m["bleach_rate_per_s"] = format_double(cfg.bleach_rate);
  m["bleach_power_threshold_uW"] = format_double(cfg.bleach_power_threshold_uW);
  m["power_uW"] = format_double(cfg.power_uW);
  if (cfg.pol_angle_deg) m["pol_angle_deg"] = format_double(*cfg.pol_angle_deg);
  return m;
}

void write_metadata(const Metadata& meta, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& [key, value] : meta) f << key << "=" << value << "\n";
}

Metadata read_metadata(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  Metadata m;
  std::string line;
  while (std::getline(f, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    m[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return m;
}

std::string metadata_path(const std::string& tag_path) { return tag_path + ".meta"; }

}  // namespace wsim
