#include "lgc/deflate.hpp"

#include <algorithm>
#include <array>
#include <cstring>

#include "lgc/errors.hpp"

namespace lgc {

namespace {

// Length codes 257..285: base value and extra bits (RFC 1951 3.2.5).
constexpr std::array<int, 29> kLenBase = {3,  4,  5,  6,  7,  8,  9,  10, 11, 13,
                                          15, 17, 19, 23, 27, 31, 35, 43, 51, 59,
                                          67, 83, 99, 115, 131, 163, 195, 227, 258};
constexpr std::array<int, 29> kLenExtra = {0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2,
                                           2, 3, 3, 3, 3, 4, 4, 4, 4, 5, 5, 5, 5, 0};

// Distance codes 0..29.
constexpr std::array<int, 30> kDistBase = {1,    2,    3,    4,    5,    7,     9,    13,
                                           17,   25,   33,   49,   65,   97,    129,  193,
                                           257,  385,  513,  769,  1025, 1537,  2049, 3073,
                                           4097, 6145, 8193, 12289, 16385, 24577};
constexpr std::array<int, 30> kDistExtra = {0, 0, 0, 0, 1, 1, 2,  2,  3,  3,  4,  4,  5,  5, 6,
                                            6, 7, 7, 8, 8, 9, 9, 10, 10, 11, 11, 12, 12, 13, 13};

constexpr int kWindowSize = 32768;
constexpr int kMinMatch = 3;
constexpr int kMaxMatch = 258;

//
// ---- bit-level IO -------------------------------------------------------
//

class BitWriter {
 public:
  explicit BitWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  // LSB-first packing per RFC 1951.
  void put_bits(std::uint32_t value, int count) {
    acc_ |= static_cast<std::uint64_t>(value) << filled_;
    filled_ += count;
    while (filled_ >= 8) {
      out_.push_back(static_cast<std::uint8_t>(acc_ & 0xff));
      acc_ >>= 8;
      filled_ -= 8;
    }
  }

  // Huffman codes go most-significant-bit first.
  void put_huffman(std::uint32_t code, int count) {
    std::uint32_t reversed = 0;
    for (int b = 0; b < count; ++b) {
      reversed = (reversed << 1) | ((code >> b) & 1u);
    }
    put_bits(reversed, count);
  }

  void flush() {
    if (filled_ > 0) {
      out_.push_back(static_cast<std::uint8_t>(acc_ & 0xff));
      acc_ = 0;
      filled_ = 0;
    }
  }

 private:
  std::vector<std::uint8_t>& out_;
  std::uint64_t acc_ = 0;
  int filled_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint32_t take(int count) {
    while (filled_ < count) {
      if (pos_ >= in_.size()) {
        throw FormatError("deflate: truncated stream");
      }
      acc_ |= static_cast<std::uint64_t>(in_[pos_++]) << filled_;
      filled_ += 8;
    }
    const std::uint32_t v = static_cast<std::uint32_t>(acc_ & ((1ull << count) - 1));
    acc_ >>= count;
    filled_ -= count;
    return v;
  }

  void align_to_byte() {
    const int drop = filled_ % 8;
    acc_ >>= drop;
    filled_ -= drop;
  }

  std::uint8_t take_byte() {
    if (filled_ >= 8) {
      return static_cast<std::uint8_t>(take(8));
    }
    if (pos_ >= in_.size()) {
      throw FormatError("deflate: truncated stream");
    }
    return in_[pos_++];
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  std::uint64_t acc_ = 0;
  int filled_ = 0;
};

//
// ---- encoder ------------------------------------------------------------
//

void put_fixed_literal(BitWriter& bw, int sym) {
  if (sym < 144) {
    bw.put_huffman(0x30 + sym, 8);
  } else if (sym < 256) {
    bw.put_huffman(0x190 + (sym - 144), 9);
  } else if (sym < 280) {
    bw.put_huffman(sym - 256, 7);
  } else {
    bw.put_huffman(0xc0 + (sym - 280), 8);
  }
}

int length_code(int len) {
  for (int c = 28; c >= 0; --c) {
    if (len >= kLenBase[c]) return c;
  }
  return 0;
}

int dist_code(int dist) {
  for (int c = 29; c >= 0; --c) {
    if (dist >= kDistBase[c]) return c;
  }
  return 0;
}

void put_match(BitWriter& bw, int len, int dist) {
  const int lc = length_code(len);
  put_fixed_literal(bw, 257 + lc);
  bw.put_bits(static_cast<std::uint32_t>(len - kLenBase[lc]), kLenExtra[lc]);
  const int dc = dist_code(dist);
  bw.put_huffman(static_cast<std::uint32_t>(dc), 5);
  bw.put_bits(static_cast<std::uint32_t>(dist - kDistBase[dc]), kDistExtra[dc]);
}

}  // namespace

std::vector<std::uint8_t> deflate_compress(std::span<const std::uint8_t> input) {
  std::vector<std::uint8_t> out;
  out.reserve(input.size() / 2 + 8);
  BitWriter bw(out);
  bw.put_bits(1, 1);  // BFINAL
  bw.put_bits(1, 2);  // BTYPE = fixed Huffman

  // Greedy LZ77 over a 3-byte hash with bounded chain walking.
  constexpr int kHashBits = 15;
  constexpr int kMaxProbes = 64;
  std::vector<std::int32_t> head(1 << kHashBits, -1);
  std::vector<std::int32_t> prev(input.size(), -1);
  auto hash3 = [&](std::size_t p) {
    const std::uint32_t h = static_cast<std::uint32_t>(input[p]) |
                            (static_cast<std::uint32_t>(input[p + 1]) << 8) |
                            (static_cast<std::uint32_t>(input[p + 2]) << 16);
    return (h * 0x9e3779b1u) >> (32 - kHashBits);
  };

  std::size_t pos = 0;
  while (pos < input.size()) {
    int best_len = 0;
    int best_dist = 0;
    if (pos + kMinMatch <= input.size()) {
      const std::uint32_t h = hash3(pos);
      std::int32_t cand = head[h];
      int probes = kMaxProbes;
      const int max_len =
          static_cast<int>(std::min<std::size_t>(kMaxMatch, input.size() - pos));
      while (cand >= 0 && probes-- > 0) {
        const int dist = static_cast<int>(pos) - cand;
        if (dist > kWindowSize) break;
        int len = 0;
        while (len < max_len && input[cand + len] == input[pos + len]) ++len;
        if (len > best_len) {
          best_len = len;
          best_dist = dist;
          if (len == max_len) break;
        }
        cand = prev[cand];
      }
    }
    if (best_len >= kMinMatch) {
      put_match(bw, best_len, best_dist);
      const std::size_t end = pos + best_len;
      while (pos < end) {
        if (pos + kMinMatch <= input.size()) {
          const std::uint32_t h = hash3(pos);
          prev[pos] = head[h];
          head[h] = static_cast<std::int32_t>(pos);
        }
        ++pos;
      }
    } else {
      if (pos + kMinMatch <= input.size()) {
        const std::uint32_t h = hash3(pos);
        prev[pos] = head[h];
        head[h] = static_cast<std::int32_t>(pos);
      }
      put_fixed_literal(bw, input[pos]);
      ++pos;
    }
  }
  put_fixed_literal(bw, 256);  // end of block
  bw.flush();
  return out;
}

//
// ---- decoder ------------------------------------------------------------
//

namespace {

// Canonical Huffman decoding from code-length arrays (the scheme RFC 1951
// defines in 3.2.2).
struct HuffmanTable {
  std::array<int, 16> count{};   // number of codes per bit length
  std::vector<int> symbols;      // symbols ordered by (length, symbol)

  void build(std::span<const int> lengths) {
    count.fill(0);
    for (int len : lengths) {
      if (len < 0 || len > 15) throw FormatError("deflate: invalid code length");
      ++count[len];
    }
    if (count[0] == static_cast<int>(lengths.size())) {
      symbols.clear();
      return;  // table unused
    }
    // reject over-subscribed code sets
    int left = 1;
    for (int len = 1; len <= 15; ++len) {
      left <<= 1;
      left -= count[len];
      if (left < 0) throw FormatError("deflate: over-subscribed code set");
    }
    std::array<int, 16> offsets{};
    for (int len = 1; len < 15; ++len) {
      offsets[len + 1] = offsets[len] + count[len];
    }
    symbols.assign(lengths.size(), 0);
    for (std::size_t sym = 0; sym < lengths.size(); ++sym) {
      if (lengths[sym] != 0) {
        symbols[offsets[lengths[sym]]++] = static_cast<int>(sym);
      }
    }
  }

  int decode(BitReader& br) const {
    int code = 0;
    int first = 0;
    int index = 0;
    for (int len = 1; len <= 15; ++len) {
      code |= static_cast<int>(br.take(1));
      const int n = count[len];
      if (code - first < n) {
        return symbols[index + (code - first)];
      }
      index += n;
      first = (first + n) << 1;
      code <<= 1;
    }
    throw FormatError("deflate: invalid Huffman code");
  }
};

const HuffmanTable& fixed_literal_table() {
  static const HuffmanTable table = [] {
    std::array<int, 288> lengths;
    for (int s = 0; s < 144; ++s) lengths[s] = 8;
    for (int s = 144; s < 256; ++s) lengths[s] = 9;
    for (int s = 256; s < 280; ++s) lengths[s] = 7;
    for (int s = 280; s < 288; ++s) lengths[s] = 8;
    HuffmanTable t;
    t.build(lengths);
    return t;
  }();
  return table;
}

const HuffmanTable& fixed_distance_table() {
  static const HuffmanTable table = [] {
    std::array<int, 30> lengths;
    lengths.fill(5);
    HuffmanTable t;
    t.build(lengths);
    return t;
  }();
  return table;
}

void inflate_block(BitReader& br, const HuffmanTable& lit, const HuffmanTable& dist,
                   std::vector<std::uint8_t>& out, std::size_t max_output) {
  for (;;) {
    const int sym = lit.decode(br);
    if (sym < 256) {
      if (out.size() >= max_output) throw FormatError("deflate: output limit exceeded");
      out.push_back(static_cast<std::uint8_t>(sym));
    } else if (sym == 256) {
      return;
    } else {
      if (sym > 285) throw FormatError("deflate: invalid length symbol");
      const int lc = sym - 257;
      const int len = kLenBase[lc] + static_cast<int>(br.take(kLenExtra[lc]));
      const int dsym = dist.decode(br);
      if (dsym > 29) throw FormatError("deflate: invalid distance symbol");
      const int d = kDistBase[dsym] + static_cast<int>(br.take(kDistExtra[dsym]));
      if (static_cast<std::size_t>(d) > out.size()) {
        throw FormatError("deflate: distance reaches before stream start");
      }
      if (out.size() + len > max_output) throw FormatError("deflate: output limit exceeded");
      std::size_t from = out.size() - d;
      for (int n = 0; n < len; ++n) {
        out.push_back(out[from + n]);  // overlapping copies are intended
      }
    }
  }
}

}  // namespace

std::vector<std::uint8_t> deflate_decompress(std::span<const std::uint8_t> input,
                                             std::size_t max_output) {
  BitReader br(input);
  std::vector<std::uint8_t> out;
  bool final_block = false;
  while (!final_block) {
    final_block = br.take(1) != 0;
    const std::uint32_t btype = br.take(2);
    if (btype == 0) {  // stored
      br.align_to_byte();
      const std::uint32_t len = br.take_byte() | (br.take_byte() << 8);
      const std::uint32_t nlen = br.take_byte() | (br.take_byte() << 8);
      if ((len ^ 0xffffu) != nlen) throw FormatError("deflate: stored block LEN/NLEN mismatch");
      if (out.size() + len > max_output) throw FormatError("deflate: output limit exceeded");
      for (std::uint32_t n = 0; n < len; ++n) out.push_back(br.take_byte());
    } else if (btype == 1) {  // fixed Huffman
      inflate_block(br, fixed_literal_table(), fixed_distance_table(), out, max_output);
    } else if (btype == 2) {  // dynamic Huffman
      const int hlit = static_cast<int>(br.take(5)) + 257;
      const int hdist = static_cast<int>(br.take(5)) + 1;
      const int hclen = static_cast<int>(br.take(4)) + 4;
      static constexpr std::array<int, 19> kOrder = {16, 17, 18, 0, 8,  7, 9,  6, 10, 5,
                                                     11, 4,  12, 3, 13, 2, 14, 1, 15};
      std::array<int, 19> cl_lengths{};
      for (int n = 0; n < hclen; ++n) {
        cl_lengths[kOrder[n]] = static_cast<int>(br.take(3));
      }
      HuffmanTable cl_table;
      cl_table.build(cl_lengths);

      std::vector<int> lengths;
      lengths.reserve(hlit + hdist);
      while (static_cast<int>(lengths.size()) < hlit + hdist) {
        const int sym = cl_table.decode(br);
        if (sym < 16) {
          lengths.push_back(sym);
        } else if (sym == 16) {
          if (lengths.empty()) throw FormatError("deflate: repeat with no previous length");
          const int count = 3 + static_cast<int>(br.take(2));
          lengths.insert(lengths.end(), count, lengths.back());
        } else if (sym == 17) {
          const int count = 3 + static_cast<int>(br.take(3));
          lengths.insert(lengths.end(), count, 0);
        } else {
          const int count = 11 + static_cast<int>(br.take(7));
          lengths.insert(lengths.end(), count, 0);
        }
      }
      if (static_cast<int>(lengths.size()) != hlit + hdist) {
        throw FormatError("deflate: code length overrun");
      }
      HuffmanTable lit_table;
      lit_table.build({lengths.data(), static_cast<std::size_t>(hlit)});
      HuffmanTable dist_table;
      dist_table.build({lengths.data() + hlit, static_cast<std::size_t>(hdist)});
      inflate_block(br, lit_table, dist_table, out, max_output);
    } else {
      throw FormatError("deflate: reserved block type");
    }
  }
  return out;
}

}  // namespace lgc
