#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "sdtp/core.hpp"
#include "sdtp/packet.hpp"

namespace sdtp {

// Expected interarrival time at a retransmission node:
//   expected = max(send_interval, a * sample + b * send_interval)
// with a = 0.875, b = 0.375. The estimate never drops below the sending
// interval.
class InterarrivalEstimator {
 public:
  static constexpr double kA = 0.875;
  static constexpr double kB = 0.375;

  explicit InterarrivalEstimator(double send_interval_ms)
      : send_interval_ms_(send_interval_ms), expected_ms_(send_interval_ms) {}

  void update(double sample_ms) {
    last_sample_ms_ = sample_ms;
    expected_ms_ = std::max(send_interval_ms_,
                            kA * sample_ms + kB * send_interval_ms_);
  }

  double send_interval_ms() const { return send_interval_ms_; }
  double last_sample_ms() const { return last_sample_ms_; }
  double expected_ms() const { return expected_ms_; }

 private:
  double send_interval_ms_;
  double last_sample_ms_ = 0.0;
  double expected_ms_;
};

// Largest n with inter_time >= n * expected. The caller fires one
// timeout-triggered retransmission per newly reached multiple.
inline std::uint32_t interarrival_timeout_multiples(double inter_time_ms,
                                                    double expected_ms) {
  if (expected_ms <= 0.0 || inter_time_ms <= 0.0) return 0;
  // Tolerate half-microsecond rounding from integral simulated time.
  double n = std::floor(inter_time_ms / expected_ms + 1e-9);
  return n < 0 ? 0u : static_cast<std::uint32_t>(n);
}

// Retransmission-timeout estimator over retransmission RTT samples:
//   rtt'     = (1 - xi)    * rtt + xi    * sample
//   dev'     = (1 - delta) * dev + delta * |sample - rtt|   (old rtt)
//   thresh'  = rtt' + phi * dev'
// First sample: rtt = sample, dev = 0 (initial conditions rtt(0) = first
// sample, dev(0) = 0).
class RtoEstimator {
 public:
  static constexpr double kXi = 0.125;
  static constexpr double kDelta = 0.25;
  static constexpr double kPhi = 4.0;

  void update(double sample_ms) {
    if (!initialized_) {
      rtt_ms_ = sample_ms;
      dev_ms_ = 0.0;
      initialized_ = true;
    } else {
      dev_ms_ = (1.0 - kDelta) * dev_ms_ + kDelta * std::abs(sample_ms - rtt_ms_);
      rtt_ms_ = (1.0 - kXi) * rtt_ms_ + kXi * sample_ms;
    }
    threshold_ms_ = rtt_ms_ + kPhi * dev_ms_;
  }

  bool initialized() const { return initialized_; }
  double rtt_ms() const { return rtt_ms_; }
  double dev_ms() const { return dev_ms_; }
  double threshold_ms() const { return threshold_ms_; }

 private:
  bool initialized_ = false;
  double rtt_ms_ = 0.0;
  double dev_ms_ = 0.0;
  double threshold_ms_ = 0.0;
};

// Additional packet disorder length advertised in an RI packet when a
// retransmission is requested: ceil(rt_rtt / expected_interarrival) plus one
// for counter-triggered requests (zero for timeout-triggered ones).
// Thresholds count whole packets, so the ratio is rounded up.
inline std::uint32_t compute_addl(double rt_rtt_ms, double expected_interarrival_ms,
                                  RrTrigger trigger) {
  double ratio = rt_rtt_ms / expected_interarrival_ms;
  double a = trigger == RrTrigger::Counter ? 1.0 : 0.0;
  double v = std::ceil(ratio - 1e-9) + a;
  return v < 0 ? 0u : static_cast<std::uint32_t>(v);
}

// Segment-level disorder-length estimator: EWMA of resolved out-of-order
// lengths and of their absolute deviation, using the same weights as the
// retransmission-timeout estimator. New expected-list entries start from
// max(1, ceil(avg + 4 * dev)).
class SegmentDisorderEstimator {
 public:
  static constexpr double kXi = 0.125;
  static constexpr double kDelta = 0.25;
  static constexpr double kPhi = 4.0;

  void observe(std::uint32_t inter_cnt) {
    double x = static_cast<double>(inter_cnt);
    if (!has_sample_) {
      avg_ = x;
      dev_ = 0.0;
      has_sample_ = true;
    } else {
      dev_ = (1.0 - kDelta) * dev_ + kDelta * std::abs(x - avg_);
      avg_ = (1.0 - kXi) * avg_ + kXi * x;
    }
  }

  bool has_sample() const { return has_sample_; }
  double avg() const { return avg_; }
  double dev() const { return dev_; }

  std::uint32_t threshold() const {
    if (!has_sample_) return 1;
    double v = std::ceil(avg_ + kPhi * dev_ - 1e-9);
    return v < 1.0 ? 1u : static_cast<std::uint32_t>(v);
  }

 private:
  bool has_sample_ = false;
  double avg_ = 0.0;
  double dev_ = 0.0;
};

}  // namespace sdtp
