#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lgc {

/// CRC-32 (IEEE reflected polynomial, the zlib/PNG variant).
std::uint32_t crc32(std::span<const std::uint8_t> data, std::uint32_t seed = 0);

void put_uleb128(std::vector<std::uint8_t>& out, std::uint64_t value);
std::uint64_t take_uleb128(std::span<const std::uint8_t> data, std::size_t& pos);

enum class PayloadKind : std::uint8_t {
  kTopk = 0,
  kCommon = 1,
  kInnovation = 2,
  kDense = 3,
};

const char* payload_kind_name(PayloadKind kind);

/// Wire object: header, 32-bit value block, DEFLATE-coded delta index
/// block, trailing CRC-32 of the two blocks.
///
/// Layout (little-endian throughout):
///   magic "LGC1" | version 0x01 | iteration u32 | node_id u16 | kind u8 |
///   value_count u32 | index_block_len u32 | values f32[value_count] |
///   index_block | crc32 u32
///
/// Indices are delta-encoded (first absolute, then gap-1), ULEB128, then
/// DEFLATE per RFC 1951. Sparse kinds carry one index per value or, for
/// index-only broadcasts, indices with value_count == 0.
struct CompressedPayload {
  PayloadKind kind = PayloadKind::kDense;
  std::uint32_t iteration = 0;
  std::uint16_t node_id = 0;
  std::vector<float> values;
  std::vector<std::uint32_t> indices;  // strictly increasing
};

std::vector<std::uint8_t> pack_payload(const CompressedPayload& payload);
CompressedPayload unpack_payload(std::span<const std::uint8_t> bytes);

/// Helpers used by tests and the rate ledger: exact serialized size of a
/// payload without building it twice.
std::size_t packed_payload_size(const CompressedPayload& payload);

}  // namespace lgc
