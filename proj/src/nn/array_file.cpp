#include "semileak/nn/array_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "semileak/core/error.hpp"
#include "semileak/core/io.hpp"

namespace semileak::nn {

namespace {

constexpr char kMagic[8] = {'S', 'E', 'M', 'I', 'L', 'E', 'A', 'K'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
std::uint64_t get_le(const std::string& in, std::size_t off, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[off + static_cast<std::size_t>(i)]))
         << (8 * i);
  return v;
}

std::uint64_t fnv1a(const std::string& bytes, std::size_t begin, std::size_t end) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = begin; i < end; ++i) {
    h ^= static_cast<unsigned char>(bytes[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

const NamedArray* ArrayFile::find(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

const NamedArray& ArrayFile::at(const std::string& name) const {
  const auto* a = find(name);
  if (!a) throw DataError("array '" + name + "' missing from file");
  return *a;
}

void write_array_file(const std::filesystem::path& path, const ArrayFile& file) {
  nlohmann::json table = nlohmann::json::array();
  for (const auto& a : file.arrays)
    table.push_back({{"name", a.name}, {"shape", a.shape}, {"count", a.values.size()}});
  const std::string header = nlohmann::json{{"meta", file.meta}, {"arrays", table}}.dump();

  std::string out(kMagic, sizeof(kMagic));
  put_u32(out, kArrayFileVersion);
  put_u64(out, header.size());
  const std::size_t body_begin = out.size();
  out += header;
  for (const auto& a : file.arrays)
    for (float v : a.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  put_u64(out, fnv1a(out, body_begin, out.size()));
  write_text_atomic(path, out);
}

ArrayFile read_array_file(const std::filesystem::path& path) {
  const std::string in = read_text(path);
  const std::string where = " in " + path.string();
  if (in.size() < 20 || std::memcmp(in.data(), kMagic, sizeof(kMagic)) != 0)
    throw DataError("not a semileak array file" + where);
  const auto version = static_cast<std::uint32_t>(get_le(in, 8, 4));
  if (version != kArrayFileVersion)
    throw DataError("array file version " + std::to_string(version) + " unsupported (expected " +
                    std::to_string(kArrayFileVersion) + ")" + where);
  const std::uint64_t header_len = get_le(in, 12, 8);
  const std::size_t body_begin = 20;
  if (in.size() < body_begin + header_len + 8) throw DataError("truncated array file" + where);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in.substr(body_begin, header_len));
  } catch (const nlohmann::json::exception&) {
    throw DataError("corrupt array file header" + where);
  }

  ArrayFile file;
  std::size_t off = body_begin + header_len;
  try {
    file.meta = header.at("meta");
    for (const auto& entry : header.at("arrays")) {
      NamedArray a;
      entry.at("name").get_to(a.name);
      entry.at("shape").get_to(a.shape);
      const auto count = entry.at("count").get<std::size_t>();
      if (off + 4 * count + 8 > in.size()) throw DataError("truncated array data" + where);
      a.values.resize(count);
      for (std::size_t i = 0; i < count; ++i, off += 4)
        a.values[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(in, off, 4)));
      file.arrays.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception&) {
    throw DataError("corrupt array file header" + where);
  }
  if (off + 8 != in.size()) throw DataError("trailing bytes in array file" + where);
  if (get_le(in, off, 8) != fnv1a(in, body_begin, off))
    throw DataError("array file checksum mismatch" + where);
  return file;
}

}  // namespace semileak::nn
