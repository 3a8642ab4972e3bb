#include "lgc/signal.hpp"

#include <algorithm>
#include <cstring>

namespace lgc {

ChannelSignal concat_channels(const ChannelSignal& a, const ChannelSignal& b) {
  if (a.length != b.length) {
    throw ShapeError("concat_channels: length mismatch");
  }
  ChannelSignal out(a.channels + b.channels, a.length);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
  return out;
}

ChannelSignal center_trim(const ChannelSignal& x, int count) {
  if (count > x.length) {
    throw ShapeError("center_trim: requested length exceeds signal length");
  }
  const int start = (x.length - count) / 2;
  ChannelSignal out(x.channels, count);
  for (int c = 0; c < x.channels; ++c) {
    const double* src = x.channel(c) + start;
    std::copy(src, src + count, out.channel(c));
  }
  return out;
}

ChannelSignal center_trim_backward(const ChannelSignal& grad, int original_length) {
  const int start = (original_length - grad.length) / 2;
  ChannelSignal out(grad.channels, original_length);
  for (int c = 0; c < grad.channels; ++c) {
    std::copy(grad.channel(c), grad.channel(c) + grad.length, out.channel(c) + start);
  }
  return out;
}

}  // namespace lgc
