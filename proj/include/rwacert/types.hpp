#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rwacert {

// Spin rate [rad/s] and friction torque [mNm] channels, sample k at index k.
struct TimeSeries {
  std::vector<double> omega;
  std::vector<double> friction;

  std::size_t size() const noexcept { return omega.size(); }
  bool empty() const noexcept { return omega.empty(); }

  // Throws InvalidArgument on channel length mismatch or non-finite samples.
  void validate() const;

  bool operator==(const TimeSeries&) const = default;
};

enum class AnomalyKind { Nominal, A, B, C, D };

// Nominal carries urgency 0; every anomaly carries urgency 1..3.
struct Status {
  AnomalyKind kind = AnomalyKind::Nominal;
  int urgency = 0;

  static Status nominal() { return {}; }
  static Status make(AnomalyKind kind, int urgency);

  // "N", "A1" .. "D3".
  static Status parse(std::string_view text);
  std::string str() const;

  // Row/column order of the 13x13 confusion matrix: N, A1..A3, B1..B3, C1..C3, D1..D3.
  std::size_t index() const noexcept;
  static Status from_index(std::size_t index);

  bool is_anomaly() const noexcept { return kind != AnomalyKind::Nominal; }
  bool operator==(const Status&) const = default;
};

inline constexpr std::size_t kStatusCount = 13;

char kind_letter(AnomalyKind kind) noexcept;

// Relative-frequency histogram over M bins; `edges` has M+1 strictly
// increasing entries. `count` is the number of raw values binned.
struct Histogram {
  std::vector<double> bins;
  std::vector<double> edges;
  std::size_t count = 0;

  std::size_t size() const noexcept { return bins.size(); }
  bool operator==(const Histogram&) const = default;
};

}  // namespace rwacert
