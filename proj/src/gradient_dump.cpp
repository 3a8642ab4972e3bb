#include "lgc/gradient_dump.hpp"

#include <cstring>

#include "lgc/errors.hpp"

namespace lgc {

namespace {

constexpr char kMagic[4] = {'L', 'G', 'C', 'D'};
constexpr std::uint8_t kVersion = 0x01;

void put_u16(std::ostream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  out.write(b, 2);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

std::uint16_t get_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  if (!in) throw FormatError("gradient dump: truncated");
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw FormatError("gradient dump: truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_gradient_dump(std::ostream& out, const GradientDump& dump) {
  out.write(kMagic, 4);
  out.put(static_cast<char>(kVersion));
  put_u16(out, dump.num_nodes);
  put_u16(out, dump.num_layers);
  for (const auto& r : dump.records) {
    put_u32(out, r.layer_id);
    put_u32(out, static_cast<std::uint32_t>(r.values.size()));
    static_assert(sizeof(float) == 4);
    out.write(reinterpret_cast<const char*>(r.values.data()),
              static_cast<std::streamsize>(r.values.size() * 4));
  }
}

GradientDump read_gradient_dump(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("gradient dump: bad magic");
  }
  const int version = in.get();
  if (version != kVersion) {
    throw FormatError("gradient dump: unsupported version");
  }
  GradientDump dump;
  dump.num_nodes = get_u16(in);
  dump.num_layers = get_u16(in);
  if (dump.num_nodes == 0 || dump.num_layers == 0) {
    throw FormatError("gradient dump: zero node or layer count");
  }
  while (true) {
    in.peek();
    if (in.eof()) break;
    GradientDump::Record r;
    r.layer_id = get_u32(in);
    const std::uint32_t len = get_u32(in);
    r.values.resize(len);
    in.read(reinterpret_cast<char*>(r.values.data()), static_cast<std::streamsize>(len) * 4);
    if (!in) throw FormatError("gradient dump: truncated record");
    dump.records.push_back(std::move(r));
  }
  const std::size_t per_iter =
      static_cast<std::size_t>(dump.num_nodes) * static_cast<std::size_t>(dump.num_layers);
  if (dump.records.empty()) {
    throw FormatError("gradient dump: no iterations");
  }
  if (dump.records.size() % per_iter != 0) {
    throw FormatError("gradient dump: record count is not a whole number of iterations");
  }
  return dump;
}

std::vector<LayerPairSeries> dump_pair_series(const GradientDump& dump, std::uint16_t node_a,
                                              std::uint16_t node_b) {
  if (node_a >= dump.num_nodes || node_b >= dump.num_nodes) {
    throw ConfigError("dump_pair_series: node id out of range");
  }
  std::vector<LayerPairSeries> series(dump.num_layers);
  const std::size_t iters = dump.iterations();
  for (std::uint16_t l = 0; l < dump.num_layers; ++l) {
    series[l].layer_id = static_cast<int>(dump.at(0, 0, l).layer_id);
    series[l].node_a.reserve(iters);
    series[l].node_b.reserve(iters);
  }
  for (std::size_t it = 0; it < iters; ++it) {
    for (std::uint16_t l = 0; l < dump.num_layers; ++l) {
      const auto& ra = dump.at(it, node_a, l);
      const auto& rb = dump.at(it, node_b, l);
      series[l].node_a.emplace_back(ra.values.begin(), ra.values.end());
      series[l].node_b.emplace_back(rb.values.begin(), rb.values.end());
    }
  }
  return series;
}

}  // namespace lgc
