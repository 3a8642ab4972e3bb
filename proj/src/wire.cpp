#include "lgc/wire.hpp"

#include <array>
#include <cstring>

#include "lgc/deflate.hpp"
#include "lgc/errors.hpp"

namespace lgc {

namespace {

constexpr std::array<char, 4> kMagic = {'L', 'G', 'C', '1'};
constexpr std::uint8_t kVersion = 0x01;
constexpr std::size_t kHeaderSize = 4 + 1 + 4 + 2 + 1 + 4 + 4;

const std::array<std::uint32_t, 256>& crc_table() {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t n = 0; n < 256; ++n) {
      std::uint32_t c = n;
      for (int k = 0; k < 8; ++k) {
        c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      }
      t[n] = c;
    }
    return t;
  }();
  return table;
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t pos) {
  return static_cast<std::uint16_t>(b[pos] | (b[pos + 1] << 8));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t pos) {
  return static_cast<std::uint32_t>(b[pos]) | (static_cast<std::uint32_t>(b[pos + 1]) << 8) |
         (static_cast<std::uint32_t>(b[pos + 2]) << 16) |
         (static_cast<std::uint32_t>(b[pos + 3]) << 24);
}

std::vector<std::uint8_t> encode_index_block(const std::vector<std::uint32_t>& indices) {
  std::vector<std::uint8_t> deltas;
  deltas.reserve(indices.size() * 2);
  std::uint32_t last = 0;
  for (std::size_t n = 0; n < indices.size(); ++n) {
    if (n == 0) {
      put_uleb128(deltas, indices[0]);
    } else {
      if (indices[n] <= last) {
        throw FormatError("pack_payload: indices must be strictly increasing");
      }
      put_uleb128(deltas, indices[n] - last - 1);
    }
    last = indices[n];
  }
  return deflate_compress(deltas);
}

std::vector<std::uint32_t> decode_index_block(std::span<const std::uint8_t> block) {
  const std::vector<std::uint8_t> deltas = deflate_decompress(block);
  std::vector<std::uint32_t> indices;
  std::size_t pos = 0;
  while (pos < deltas.size()) {
    const std::uint64_t d = take_uleb128(deltas, pos);
    if (indices.empty()) {
      indices.push_back(static_cast<std::uint32_t>(d));
    } else {
      indices.push_back(indices.back() + 1 + static_cast<std::uint32_t>(d));
    }
  }
  return indices;
}

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> data, std::uint32_t seed) {
  const auto& table = crc_table();
  std::uint32_t c = seed ^ 0xffffffffu;
  for (std::uint8_t byte : data) {
    c = table[(c ^ byte) & 0xffu] ^ (c >> 8);
  }
  return c ^ 0xffffffffu;
}

void put_uleb128(std::vector<std::uint8_t>& out, std::uint64_t value) {
  do {
    std::uint8_t byte = value & 0x7f;
    value >>= 7;
    if (value != 0) byte |= 0x80;
    out.push_back(byte);
  } while (value != 0);
}

std::uint64_t take_uleb128(std::span<const std::uint8_t> data, std::size_t& pos) {
  std::uint64_t value = 0;
  int shift = 0;
  for (;;) {
    if (pos >= data.size()) throw FormatError("uleb128: truncated varint");
    if (shift >= 64) throw FormatError("uleb128: varint too long");
    const std::uint8_t byte = data[pos++];
    value |= static_cast<std::uint64_t>(byte & 0x7f) << shift;
    if ((byte & 0x80) == 0) return value;
    shift += 7;
  }
}

const char* payload_kind_name(PayloadKind kind) {
  switch (kind) {
    case PayloadKind::kTopk: return "TOPK";
    case PayloadKind::kCommon: return "COMMON";
    case PayloadKind::kInnovation: return "INNOVATION";
    case PayloadKind::kDense: return "DENSE";
  }
  return "UNKNOWN";
}

std::vector<std::uint8_t> pack_payload(const CompressedPayload& payload) {
  if (!payload.indices.empty() && !payload.values.empty() &&
      payload.indices.size() != payload.values.size()) {
    throw FormatError("pack_payload: index count must match value count or one must be empty");
  }
  const std::vector<std::uint8_t> index_block = encode_index_block(payload.indices);

  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + payload.values.size() * 4 + index_block.size() + 4);
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  out.push_back(kVersion);
  put_u32(out, payload.iteration);
  put_u16(out, payload.node_id);
  out.push_back(static_cast<std::uint8_t>(payload.kind));
  put_u32(out, static_cast<std::uint32_t>(payload.values.size()));
  put_u32(out, static_cast<std::uint32_t>(index_block.size()));

  const std::size_t body_start = out.size();
  for (float v : payload.values) {
    std::uint32_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(bits));
    put_u32(out, bits);
  }
  out.insert(out.end(), index_block.begin(), index_block.end());
  const std::uint32_t crc = crc32({out.data() + body_start, out.size() - body_start});
  put_u32(out, crc);
  return out;
}

CompressedPayload unpack_payload(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize + 4) {
    throw FormatError("unpack_payload: truncated header");
  }
  if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw FormatError("unpack_payload: bad magic");
  }
  if (bytes[4] != kVersion) {
    throw FormatError("unpack_payload: unsupported version");
  }
  CompressedPayload p;
  p.iteration = get_u32(bytes, 5);
  p.node_id = get_u16(bytes, 9);
  const std::uint8_t kind = bytes[11];
  if (kind > static_cast<std::uint8_t>(PayloadKind::kDense)) {
    throw FormatError("unpack_payload: unknown payload kind");
  }
  p.kind = static_cast<PayloadKind>(kind);
  const std::uint32_t value_count = get_u32(bytes, 12);
  const std::uint32_t index_block_len = get_u32(bytes, 16);

  const std::size_t body_len = static_cast<std::size_t>(value_count) * 4 + index_block_len;
  if (bytes.size() != kHeaderSize + body_len + 4) {
    throw FormatError("unpack_payload: declared lengths do not match buffer size");
  }
  const std::uint32_t stored_crc = get_u32(bytes, kHeaderSize + body_len);
  const std::uint32_t actual_crc = crc32(bytes.subspan(kHeaderSize, body_len));
  if (stored_crc != actual_crc) {
    throw CorruptionError("unpack_payload: CRC mismatch");
  }

  p.values.resize(value_count);
  for (std::uint32_t n = 0; n < value_count; ++n) {
    const std::uint32_t bits = get_u32(bytes, kHeaderSize + static_cast<std::size_t>(n) * 4);
    std::memcpy(&p.values[n], &bits, sizeof(float));
  }
  p.indices = decode_index_block(
      bytes.subspan(kHeaderSize + static_cast<std::size_t>(value_count) * 4, index_block_len));
  if (!p.indices.empty() && !p.values.empty() && p.indices.size() != p.values.size()) {
    throw FormatError("unpack_payload: index/value count mismatch");
  }
  return p;
}

std::size_t packed_payload_size(const CompressedPayload& payload) {
  return kHeaderSize + payload.values.size() * 4 +
         encode_index_block(payload.indices).size() + 4;
}

}  // namespace lgc
