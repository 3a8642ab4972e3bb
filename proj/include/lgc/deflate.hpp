#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace lgc {

/// Raw DEFLATE (RFC 1951, no zlib wrapper). The encoder emits one
/// fixed-Huffman block with greedy LZ77 matching; an empty input costs
/// exactly two bytes. Output is decodable by any conformant inflater.
std::vector<std::uint8_t> deflate_compress(std::span<const std::uint8_t> input);

/// Full inflater: stored, fixed and dynamic blocks. Throws FormatError on
/// malformed streams. `max_output` guards against runaway expansion.
std::vector<std::uint8_t> deflate_decompress(std::span<const std::uint8_t> input,
                                             std::size_t max_output = std::size_t{1} << 30);

}  // namespace lgc
