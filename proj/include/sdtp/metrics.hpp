#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sdtp/core.hpp"

namespace sdtp {

// Line-oriented event log: "<time_us> <event> <fields>", one event per line,
// fixed-width time so traces sort and diff cleanly.
class TraceLog {
 public:
  void log(SimTime t, const std::string& event, const std::string& fields) {
    buf_ += strf("%012lld %s", static_cast<long long>(t), event.c_str());
    if (!fields.empty()) {
      buf_ += ' ';
      buf_ += fields;
    }
    buf_ += '\n';
  }

  const std::string& text() const { return buf_; }

 private:
  std::string buf_;
};

// Structured note emitted by a sans-IO state machine; the simulation stamps
// it with time and writes it to the trace.
struct TraceNote {
  std::string event;
  std::string fields;
};

// Fate of one application packet (by sequence number).
struct PacketRecord {
  SimTime first_sent = kNoTime;
  SimTime delivered = kNoTime;  // in-order delivery at the receiving host
  std::uint32_t retx = 0;       // retransmission copies emitted for this seq
  std::uint32_t deliveries = 0;
};

struct NodeCounters {
  std::uint64_t forwarded = 0;
  std::uint64_t cached = 0;
  std::uint64_t evicted = 0;  // overflow evictions == cached-packet losses
  std::uint64_t released = 0;
  std::uint64_t rr_sent = 0;
  std::uint64_t rr_served = 0;
  std::uint64_t rr_forwarded = 0;
  std::uint64_t rr_suppressed = 0;
  std::uint64_t rr_absorbed = 0;
  std::uint64_t rd_sent = 0;
  std::uint64_t ri_sent = 0;
  std::uint64_t cn_sent = 0;
  std::uint64_t unrecoverable = 0;
  std::uint64_t dup_dropped = 0;
};

// Conservation ledger over data-packet copies. Every copy that enters the
// network is eventually delivered, lost on a link, dropped as a duplicate, or
// still buffered/in flight when the run ends.
struct Ledger {
  std::uint64_t copies_sent = 0;
  std::uint64_t delivered_app = 0;
  std::uint64_t lost_on_link = 0;
  std::uint64_t dup_dropped = 0;
  std::uint64_t in_flight_end = 0;
  std::uint64_t buffered_end = 0;

  bool balanced() const {
    return copies_sent == delivered_app + lost_on_link + dup_dropped +
                              in_flight_end + buffered_end;
  }
};

struct Metrics {
  std::string scenario_id;
  std::string protocol;
  double loss_rate = 0.0;
  double control_delay_ms = 0.0;
  std::uint64_t seed = 0;

  double conn_delay_ms = -1.0;  // -1 = connection never established
  double mean_e2e_ms = 0.0;
  double jitter_ms = 0.0;
  std::uint64_t retx_count = 0;
  std::uint64_t undelivered = 0;

  std::vector<PacketRecord> packets;
  std::map<std::string, NodeCounters> node_counters;
  Ledger ledger;
  std::uint64_t control_packet_outs = 0;   // edge-to-edge control traversals
  std::uint64_t e2e_handshake_msgs = 0;    // TCP baseline handshake messages
  std::uint64_t unrecoverable_total = 0;

  static std::string csv_header() {
    return "scenario_id,protocol,loss_rate,control_delay_ms,seed,conn_delay_ms,"
           "mean_e2e_ms,jitter_ms,retx_count,undelivered";
  }

  std::string csv_row() const {
    return strf("%s,%s,%.6f,%.3f,%llu,%.6f,%.6f,%.6f,%llu,%llu",
                scenario_id.c_str(), protocol.c_str(), loss_rate,
                control_delay_ms, static_cast<unsigned long long>(seed),
                conn_delay_ms, mean_e2e_ms, jitter_ms,
                static_cast<unsigned long long>(retx_count),
                static_cast<unsigned long long>(undelivered));
  }
};

// Mean and population standard deviation of per-packet delays (ms); packets
// never delivered are excluded (they show up in `undelivered`).
inline void finalize_delay_stats(Metrics& m) {
  double sum = 0.0;
  std::uint64_t n = 0;
  for (const auto& p : m.packets) {
    if (p.delivered == kNoTime) continue;
    sum += ms_from_us(p.delivered - p.first_sent);
    ++n;
  }
  if (n == 0) {
    m.mean_e2e_ms = 0.0;
    m.jitter_ms = 0.0;
    return;
  }
  double mean = sum / static_cast<double>(n);
  double var = 0.0;
  for (const auto& p : m.packets) {
    if (p.delivered == kNoTime) continue;
    double d = ms_from_us(p.delivered - p.first_sent) - mean;
    var += d * d;
  }
  m.mean_e2e_ms = mean;
  m.jitter_ms = std::sqrt(var / static_cast<double>(n));
}

}  // namespace sdtp
