#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "lgc/errors.hpp"

namespace lgc {

/// A 1D multi-channel signal, channel-major: value (c, t) lives at
/// data[c * length + t]. This is the only tensor type the numeric core
/// knows about.
struct ChannelSignal {
  int channels = 0;
  int length = 0;
  std::vector<double> data;

  ChannelSignal() = default;
  ChannelSignal(int channels_, int length_)
      : channels(channels_),
        length(length_),
        data(static_cast<std::size_t>(channels_) * length_, 0.0) {}

  static ChannelSignal from(int channels, int length, std::vector<double> values) {
    ChannelSignal s;
    s.channels = channels;
    s.length = length;
    s.data = std::move(values);
    if (s.data.size() != static_cast<std::size_t>(channels) * length) {
      throw ShapeError("signal data size does not match channels*length");
    }
    return s;
  }

  double& at(int c, int t) { return data[static_cast<std::size_t>(c) * length + t]; }
  double at(int c, int t) const { return data[static_cast<std::size_t>(c) * length + t]; }

  const double* channel(int c) const { return data.data() + static_cast<std::size_t>(c) * length; }
  double* channel(int c) { return data.data() + static_cast<std::size_t>(c) * length; }

  bool same_shape(const ChannelSignal& o) const {
    return channels == o.channels && length == o.length;
  }

  bool all_finite() const {
    for (double v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
};

/// Stack two signals of equal length along the channel axis.
ChannelSignal concat_channels(const ChannelSignal& a, const ChannelSignal& b);

/// Keep `count` positions starting at floor((length-count)/2), all channels.
ChannelSignal center_trim(const ChannelSignal& x, int count);

/// Adjoint of center_trim: scatter grad back into a zero signal of the
/// original length.
ChannelSignal center_trim_backward(const ChannelSignal& grad, int original_length);

}  // namespace lgc
