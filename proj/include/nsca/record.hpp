#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "nsca/error.hpp"
#include "nsca/matrix.hpp"

namespace nsca {

/// Multichannel time series: n channels × T samples, stored channel-major so
/// each channel is a contiguous span.
class Record {
 public:
  Record() = default;

  Record(std::size_t channels, std::size_t length, double sample_rate_hz = 1.0)
      : n_(channels), t_(length), fs_(sample_rate_hz), samples_(channels * length, 0.0) {
    if (channels == 0 || length == 0) throw Error(ErrorCode::BadInput, "record needs n >= 1 and T >= 1");
    if (!(sample_rate_hz > 0.0)) throw Error(ErrorCode::BadInput, "sample rate must be positive");
    names_.reserve(channels);
    for (std::size_t c = 0; c < channels; ++c) names_.push_back("ch" + std::to_string(c + 1));
  }

  /// Builds from per-channel series; every entry must be finite.
  static Record from_channels(const std::vector<Vector>& channels, double sample_rate_hz = 1.0) {
    if (channels.empty()) throw Error(ErrorCode::BadInput, "no channels");
    Record r(channels.size(), channels.front().size(), sample_rate_hz);
    for (std::size_t c = 0; c < channels.size(); ++c) {
      if (channels[c].size() != r.t_) throw Error(ErrorCode::ShapeMismatch, "channels differ in length");
      auto dst = r.channel(c);
      std::copy(channels[c].begin(), channels[c].end(), dst.begin());
    }
    r.check_finite();
    return r;
  }

  std::size_t channels() const noexcept { return n_; }
  std::size_t length() const noexcept { return t_; }
  double sample_rate_hz() const noexcept { return fs_; }
  const std::vector<std::string>& channel_names() const noexcept { return names_; }
  void set_channel_names(std::vector<std::string> names) {
    if (names.size() != n_) throw Error(ErrorCode::ShapeMismatch, "channel name count");
    names_ = std::move(names);
  }

  double& at(std::size_t c, std::size_t k) { return samples_[c * t_ + k]; }
  double at(std::size_t c, std::size_t k) const { return samples_[c * t_ + k]; }

  std::span<double> channel(std::size_t c) { return {samples_.data() + c * t_, t_}; }
  std::span<const double> channel(std::size_t c) const { return {samples_.data() + c * t_, t_}; }

  Vector sample(std::size_t k) const {
    Vector x(n_);
    for (std::size_t c = 0; c < n_; ++c) x[c] = at(c, k);
    return x;
  }

  void check_finite() const {
    for (std::size_t c = 0; c < n_; ++c)
      for (std::size_t k = 0; k < t_; ++k)
        if (!std::isfinite(at(c, k)))
          throw Error(ErrorCode::BadInput, "non-finite sample at channel " + std::to_string(c) + ", k=" +
                                               std::to_string(k));
  }

  friend bool operator==(const Record& a, const Record& b) {
    return a.n_ == b.n_ && a.t_ == b.t_ && a.samples_ == b.samples_;
  }

 private:
  std::size_t n_ = 0;
  std::size_t t_ = 0;
  double fs_ = 1.0;
  std::vector<double> samples_;
  std::vector<std::string> names_;
};

/// Per-sample scalar nonstationarity index. Entries before `valid_from` are
/// warm-up: zero by convention so every index aligns with the record.
struct IndexSeries {
  Vector values;
  std::size_t valid_from = 0;
  std::string name;
  /// Windows where the detector fell back to a default value (e.g. singular
  /// Toeplitz systems in AR tracking).
  std::size_t fallback_count = 0;

  std::size_t size() const noexcept { return values.size(); }
  std::span<const double> valid() const { return std::span<const double>(values).subspan(valid_from); }
};

}  // namespace nsca
