#include "failpass/zip.hpp"

#include <zlib.h>

#include <fstream>
#include <optional>
#include <set>

#include "failpass/error.hpp"

namespace failpass::zip {

namespace {

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEndSig = 0x06054b50;

[[noreturn]] void corrupt(const std::string& why) {
  throw Error(ErrorKind::corrupt_archive, "corrupt archive: " + why);
}

struct Reader {
  const std::string& b;
  std::uint16_t u16(std::size_t off) const {
    if (off + 2 > b.size()) corrupt("truncated");
    return static_cast<std::uint16_t>(static_cast<unsigned char>(b[off]) |
                                      static_cast<unsigned char>(b[off + 1]) << 8);
  }
  std::uint32_t u32(std::size_t off) const {
    return static_cast<std::uint32_t>(u16(off)) | static_cast<std::uint32_t>(u16(off + 2)) << 16;
  }
};

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}
void put32(std::string& out, std::uint32_t v) {
  put16(out, static_cast<std::uint16_t>(v & 0xffff));
  put16(out, static_cast<std::uint16_t>(v >> 16));
}

std::uint32_t crc_of(const std::string& data) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size())));
}

std::string inflate_raw(const char* src, std::size_t len, std::size_t expected) {
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) corrupt("inflate init");
  std::string out(expected, '\0');
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(src));
  zs.avail_in = static_cast<uInt>(len);
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  int rc = inflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != expected) corrupt("bad deflate stream");
  return out;
}

std::string deflate_raw(const std::string& data) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, -MAX_WBITS, 8,
                   Z_DEFAULT_STRATEGY) != Z_OK) {
    throw Error(ErrorKind::io, "deflate init failed");
  }
  std::string out(deflateBound(&zs, static_cast<uLong>(data.size())), '\0');
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  int rc = deflate(&zs, Z_FINISH);
  out.resize(zs.total_out);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error(ErrorKind::io, "deflate failed");
  return out;
}

bool safe_name(const std::string& name) {
  if (name.empty() || name.front() == '/' || name.find('\\') != std::string::npos) return false;
  std::size_t start = 0;
  while (start < name.size()) {
    auto end = name.find('/', start);
    if (end == std::string::npos) end = name.size();
    auto part = name.substr(start, end - start);
    if (part == "..") return false;
    start = end + 1;
  }
  return true;
}

}  // namespace

std::vector<Entry> read_archive(const std::string& bytes) {
  Reader r{bytes};
  if (bytes.size() < 22) corrupt("too short");
  // End of central directory: scan backwards over a possible trailing comment.
  std::optional<std::size_t> eocd;
  const std::size_t lowest = bytes.size() > 22 + 0xffff ? bytes.size() - 22 - 0xffff : 0;
  for (std::size_t off = bytes.size() - 22 + 1; off-- > lowest;) {
    if (r.u32(off) == kEndSig) {
      eocd = off;
      break;
    }
  }
  if (!eocd) corrupt("no end-of-central-directory record");
  const std::uint16_t count = r.u16(*eocd + 10);
  const std::uint32_t cd_size = r.u32(*eocd + 12);
  const std::uint32_t cd_offset = r.u32(*eocd + 16);
  if (static_cast<std::uint64_t>(cd_offset) + cd_size > *eocd) corrupt("central directory out of range");

  std::vector<Entry> entries;
  std::size_t off = cd_offset;
  for (std::uint16_t i = 0; i < count; ++i) {
    if (r.u32(off) != kCentralSig) corrupt("bad central directory signature");
    const std::uint16_t flags = r.u16(off + 8);
    const std::uint16_t method = r.u16(off + 10);
    const std::uint32_t crc = r.u32(off + 16);
    const std::uint32_t csize = r.u32(off + 20);
    const std::uint32_t usize = r.u32(off + 24);
    const std::uint16_t name_len = r.u16(off + 28);
    const std::uint16_t extra_len = r.u16(off + 30);
    const std::uint16_t comment_len = r.u16(off + 32);
    const std::uint32_t local_off = r.u32(off + 42);
    if (off + 46 + name_len > bytes.size()) corrupt("truncated entry name");
    std::string name = bytes.substr(off + 46, name_len);
    off += 46 + name_len + extra_len + comment_len;

    if (flags & 0x1) corrupt("encrypted entry '" + name + "'");
    if (!safe_name(name)) corrupt("unsafe entry name '" + name + "'");
    if (r.u32(local_off) != kLocalSig) corrupt("bad local header for '" + name + "'");
    const std::size_t data_off = local_off + 30 + r.u16(local_off + 26) + r.u16(local_off + 28);
    if (data_off + csize > bytes.size()) corrupt("entry data out of range");

    Entry e{std::move(name), {}};
    if (method == 0) {
      if (csize != usize) corrupt("stored entry size mismatch");
      e.data = bytes.substr(data_off, csize);
    } else if (method == 8) {
      e.data = inflate_raw(bytes.data() + data_off, csize, usize);
    } else {
      corrupt("unsupported compression method " + std::to_string(method));
    }
    if (crc_of(e.data) != crc) corrupt("CRC mismatch for '" + e.name + "'");
    entries.push_back(std::move(e));
  }
  return entries;
}

std::string write_archive(const std::vector<Entry>& entries, bool compress) {
  std::string out, central;
  for (const auto& e : entries) {
    const bool deflated = compress && !e.is_directory() && !e.data.empty();
    const std::string payload = deflated ? deflate_raw(e.data) : e.data;
    const std::uint32_t crc = crc_of(e.data);
    const auto local_off = static_cast<std::uint32_t>(out.size());
    const std::uint16_t method = deflated ? 8 : 0;

    put32(out, kLocalSig);
    put16(out, 20);
    put16(out, 0);
    put16(out, method);
    put16(out, 0);  // mod time
    put16(out, 0x21);  // mod date 1980-01-01
    put32(out, crc);
    put32(out, static_cast<std::uint32_t>(payload.size()));
    put32(out, static_cast<std::uint32_t>(e.data.size()));
    put16(out, static_cast<std::uint16_t>(e.name.size()));
    put16(out, 0);
    out += e.name;
    out += payload;

    put32(central, kCentralSig);
    put16(central, 20);
    put16(central, 20);
    put16(central, 0);
    put16(central, method);
    put16(central, 0);
    put16(central, 0x21);
    put32(central, crc);
    put32(central, static_cast<std::uint32_t>(payload.size()));
    put32(central, static_cast<std::uint32_t>(e.data.size()));
    put16(central, static_cast<std::uint16_t>(e.name.size()));
    put16(central, 0);
    put16(central, 0);
    put16(central, 0);
    put16(central, 0);
    put32(central, e.is_directory() ? 0x10 : 0);
    put32(central, local_off);
    central += e.name;
  }
  const auto cd_off = static_cast<std::uint32_t>(out.size());
  out += central;
  put32(out, kEndSig);
  put16(out, 0);
  put16(out, 0);
  put16(out, static_cast<std::uint16_t>(entries.size()));
  put16(out, static_cast<std::uint16_t>(entries.size()));
  put32(out, static_cast<std::uint32_t>(central.size()));
  put32(out, cd_off);
  put16(out, 0);
  return out;
}

std::filesystem::path extract_snapshot(const std::string& bytes,
                                       const std::filesystem::path& dest) {
  namespace fs = std::filesystem;
  const auto entries = read_archive(bytes);
  std::set<std::string> tops;
  bool has_file = false;
  for (const auto& e : entries) {
    const auto slash = e.name.find('/');
    if (slash == std::string::npos) corrupt("entry '" + e.name + "' outside a top-level directory");
    tops.insert(e.name.substr(0, slash));
    has_file = has_file || !e.is_directory();
  }
  if (tops.size() != 1) corrupt("expected exactly one top-level directory");
  if (!has_file) corrupt("snapshot has no files");

  fs::create_directories(dest);
  for (const auto& e : entries) {
    const fs::path target = dest / fs::path(e.name);
    if (e.is_directory()) {
      fs::create_directories(target);
      continue;
    }
    fs::create_directories(target.parent_path());
    std::ofstream f(target, std::ios::binary | std::ios::trunc);
    f.write(e.data.data(), static_cast<std::streamsize>(e.data.size()));
    if (!f) throw Error(ErrorKind::io, "cannot write '" + target.string() + "'");
  }
  return dest / *tops.begin();
}

}  // namespace failpass::zip
