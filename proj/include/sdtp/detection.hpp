#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "sdtp/core.hpp"
#include "sdtp/estimators.hpp"
#include "sdtp/packet.hpp"

namespace sdtp {

// One run [left, right) of sequentially received sequence numbers.
struct ContentWindow {
  SeqNo left = 0;
  SeqNo right = 0;

  bool operator==(const ContentWindow&) const = default;
};

// One gap awaiting packets. Bounded entries cover [start_seq, end_seq);
// an open entry (end_seq == kSeqInfinity) tracks a stalled stream top and
// locates packets via (start_seq, start_num).
struct ExpectedEntry {
  std::uint32_t num = 0;
  SeqNo start_seq = 0;
  SeqNo end_seq = 0;
  std::uint32_t start_num = 0;
  std::uint32_t inter_cnt = 0;
  std::uint32_t cnt_thres = 1;
  std::int64_t wait_len = 1;  // cnt_thres - inter_cnt
  std::uint32_t rt_cnt = 0;
  RrTrigger rt_type = RrTrigger::None;
  SimTime rr_sent_at = kNoTime;

  bool open() const { return end_seq == kSeqInfinity; }
};

// A retransmission the detector wants issued. For trigger T the wire range is
// open (end_seq == kSeqInfinity) and (start_seq, start_num) locate one packet.
struct RrRequest {
  RrTrigger trigger = RrTrigger::None;
  std::uint32_t entry_num = 0;
  SeqNo start_seq = 0;
  SeqNo end_seq = 0;
  std::uint32_t start_num = 0;
};

struct DetectionOutcome {
  bool accepted = false;
  bool duplicate = false;
  std::vector<std::pair<SeqNo, SeqNo>> new_gaps;
  std::vector<RrRequest> triggers;  // counter-triggered (type C)
};

struct DetectorConfig {
  double send_interval_ms = 15.0;
  // Expected number of packets in the flow (distributed by the controller at
  // placement-install time). 0 = unknown: the stream top is always considered
  // live.
  std::uint64_t flow_length = 0;
};

// Per-connection receiver-side loss detection at a retransmission node:
// content window list, expected packet list, and the interarrival /
// retransmission-timeout / segment-disorder estimators. Pure state machine;
// the owner drives it from packet arrivals and timer expiries and is
// responsible for actually emitting RR/RI packets.
class LossDetector {
 public:
  explicit LossDetector(DetectorConfig cfg)
      : cfg_(cfg), interarrival_(cfg.send_interval_ms) {}

  DetectionOutcome on_packet(SeqNo seq, SimTime now) {
    DetectionOutcome out;
    if (last_arrival_ != kNoTime) {
      interarrival_.update(ms_from_us(now - last_arrival_));
    }
    last_arrival_ = now;
    fired_multiples_ = 0;

    if (in_windows(seq)) {
      ++duplicates_;
      out.duplicate = true;
      return out;
    }
    out.accepted = true;

    SeqNo old_right = highest_right();
    if (seq >= old_right) {
      ExpectedEntry* tail = open_tail();
      if (tail) {
        require(tail->start_seq == old_right, "open entry not at stream top");
        if (seq == tail->start_seq) {
          erase_entry_num(tail->num);
        } else {
          tail->end_seq = seq;
          tail->cnt_thres += consume_pending_ri(tail->start_seq, seq);
          tail->wait_len = static_cast<std::int64_t>(tail->cnt_thres) -
                           tail->inter_cnt;
          out.new_gaps.emplace_back(tail->start_seq, seq);
        }
      } else if (seq > old_right) {
        ExpectedEntry e;
        e.num = next_entry_num_++;
        e.start_seq = old_right;
        e.end_seq = seq;
        e.cnt_thres = segment_.threshold() + consume_pending_ri(old_right, seq);
        e.wait_len = e.cnt_thres;
        entries_.push_back(e);
        out.new_gaps.emplace_back(old_right, seq);
      }
    } else {
      fill_entry_at(seq);
    }

    insert_window(seq);

    for (auto& e : entries_) {
      if (e.start_seq < seq) {
        ++e.inter_cnt;
        e.wait_len = static_cast<std::int64_t>(e.cnt_thres) - e.inter_cnt;
      }
    }
    for (auto& e : entries_) {
      if (!e.open() && e.rt_cnt == 0 && e.inter_cnt > e.cnt_thres) {
        out.triggers.push_back(
            {RrTrigger::Counter, e.num, e.start_seq, e.end_seq, e.start_num});
      }
    }
    return out;
  }

  // Spec rule: among entries not yet retransmitted, pick the smallest
  // wait_len; ties break toward the smallest start_seq.
  static std::optional<RrRequest> select_timeout_victim(
      const std::vector<ExpectedEntry>& entries) {
    const ExpectedEntry* best = nullptr;
    for (const auto& e : entries) {
      if (e.rt_cnt != 0) continue;
      if (!best || e.wait_len < best->wait_len ||
          (e.wait_len == best->wait_len && e.start_seq < best->start_seq)) {
        best = &e;
      }
    }
    if (!best) return std::nullopt;
    return RrRequest{RrTrigger::ArrivalTimeout, best->num, best->start_seq,
                     kSeqInfinity, best->start_num};
  }

  // Interarrival timeout fired (one call per newly reached multiple of the
  // expected interarrival time). May create an open entry at the stream top
  // when nothing else is eligible and more packets are expected.
  std::optional<RrRequest> on_interarrival_timeout(SimTime /*now*/) {
    ++fired_multiples_;
    auto victim = select_timeout_victim(entries_);
    if (victim) return victim;
    if (!expecting_more()) return std::nullopt;
    if (open_tail()) return std::nullopt;  // top already requested
    ExpectedEntry e;
    e.num = next_entry_num_++;
    e.start_seq = highest_right();
    e.end_seq = kSeqInfinity;
    e.cnt_thres = segment_.threshold() +
                  consume_pending_ri(e.start_seq, kSeqInfinity);
    e.wait_len = e.cnt_thres;
    entries_.push_back(e);
    return RrRequest{RrTrigger::ArrivalTimeout, e.num, e.start_seq,
                     kSeqInfinity, e.start_num};
  }

  // Retransmission timeout for one entry: build the type-R re-request, or
  // nothing if the entry has been resolved meanwhile.
  std::optional<RrRequest> on_retrans_timeout(std::uint32_t entry_num) {
    ExpectedEntry* e = find_entry(entry_num);
    if (!e) return std::nullopt;
    return make_retrans_request(*e);
  }

  // Bookkeeping once the owner has emitted an RR for an entry.
  void record_rr_sent(std::uint32_t entry_num, RrTrigger trigger, SimTime now) {
    ExpectedEntry* e = find_entry(entry_num);
    require(e != nullptr, "record_rr_sent: unknown entry");
    ++e->rt_cnt;
    e->rt_type = trigger;
    e->rr_sent_at = now;
    if (trigger == RrTrigger::ArrivalTimeout) ++e->start_num;
  }

  // Raise the disorder threshold for the packets named by an upstream RI.
  // Silently ignored when the named packets were already received; remembered
  // when the gap has not been observed yet.
  void apply_ri(const OptionalBlock& ri) {
    SeqNo lo = ri.start_seq;
    SeqNo hi = ri.end_seq;  // may be kSeqInfinity
    std::uint32_t addl = ri.aux;
    bool tail_covered = false;
    for (auto& e : entries_) {
      bool overlap = e.start_seq < hi && (e.open() || lo < e.end_seq);
      if (overlap) {
        e.cnt_thres += addl;
        e.wait_len = static_cast<std::int64_t>(e.cnt_thres) - e.inter_cnt;
        if (e.open()) tail_covered = true;
      }
    }
    SeqNo uncovered_lo = std::max(lo, highest_right());
    if (!tail_covered && uncovered_lo < hi) {
      pending_ri_.push_back({uncovered_lo, hi, addl});
    }
  }

  const std::vector<ContentWindow>& windows() const { return windows_; }
  const std::vector<ExpectedEntry>& entries() const { return entries_; }
  InterarrivalEstimator& interarrival() { return interarrival_; }
  const InterarrivalEstimator& interarrival() const { return interarrival_; }
  RtoEstimator& rto() { return rto_; }
  const RtoEstimator& rto() const { return rto_; }
  SegmentDisorderEstimator& segment() { return segment_; }
  const SegmentDisorderEstimator& segment() const { return segment_; }

  std::uint64_t duplicates() const { return duplicates_; }
  SimTime last_arrival() const { return last_arrival_; }
  std::uint32_t fired_multiples() const { return fired_multiples_; }

  SeqNo highest_right() const {
    return windows_.empty() ? 0 : windows_.back().right;
  }

  ExpectedEntry* find_entry(std::uint32_t num) {
    for (auto& e : entries_)
      if (e.num == num) return &e;
    return nullptr;
  }

  RrRequest make_retrans_request(const ExpectedEntry& e) const {
    SeqNo end = e.open() ? e.start_seq + std::max<std::uint32_t>(1, e.start_num)
                         : e.end_seq;
    return RrRequest{RrTrigger::RetransTimeout, e.num, e.start_seq, end,
                     e.start_num};
  }

  bool expecting_more() const {
    return cfg_.flow_length == 0 || highest_right() < cfg_.flow_length;
  }

  // True once every packet of the flow has been received.
  bool complete() const {
    return cfg_.flow_length > 0 && entries_.empty() && !windows_.empty() &&
           windows_.back().right >= cfg_.flow_length && windows_.size() == 1;
  }

  // When the next interarrival timeout is due, given the current estimate.
  SimTime next_timeout_due() const {
    require(last_arrival_ != kNoTime, "timer before first arrival");
    double step = interarrival_.expected_ms();
    return last_arrival_ + us_from_ms(step * (fired_multiples_ + 1));
  }

  const DetectorConfig& config() const { return cfg_; }

  void dump(std::ostream& os) const {
    os << "windows:";
    for (const auto& w : windows_) os << " [" << w.left << "," << w.right << ")";
    os << "\nentries:";
    for (const auto& e : entries_) {
      os << " {num=" << e.num << " start=" << e.start_seq << " end=";
      if (e.open())
        os << "inf";
      else
        os << e.end_seq;
      os << " start_num=" << e.start_num << " inter=" << e.inter_cnt
         << " thres=" << e.cnt_thres << " wait=" << e.wait_len
         << " rt_cnt=" << e.rt_cnt << " rt_type=" << trigger_name(e.rt_type)
         << "}";
    }
    os << "\ninterarrival expected_ms=" << interarrival_.expected_ms()
       << " rto_threshold_ms="
       << (rto_.initialized() ? rto_.threshold_ms() : -1.0) << "\n";
  }

  // Structural invariants, checked by tests after every event: windows
  // sorted/disjoint/merged, entries sorted and disjoint from windows, the
  // bounded parts partitioning [0, highest_right) exactly, and wait_len
  // consistency.
  void check_invariants() const {
    SeqNo cursor = 0;
    for (size_t i = 0; i < windows_.size(); ++i) {
      require(windows_[i].left < windows_[i].right, "window left < right");
      if (i > 0)
        require(windows_[i - 1].right < windows_[i].left,
                "windows disjoint and merged");
    }
    std::vector<std::pair<SeqNo, SeqNo>> pieces;
    for (const auto& w : windows_) pieces.emplace_back(w.left, w.right);
    for (const auto& e : entries_) {
      require(e.wait_len == static_cast<std::int64_t>(e.cnt_thres) -
                                static_cast<std::int64_t>(e.inter_cnt),
              "wait_len == cnt_thres - inter_cnt");
      require((e.rr_sent_at != kNoTime) == (e.rt_cnt >= 1),
              "rt timer active iff rt_cnt >= 1");
      if (e.open()) {
        require(e.start_seq == highest_right(), "open entry at stream top");
        continue;
      }
      require(e.start_seq < e.end_seq, "entry start < end");
      pieces.emplace_back(e.start_seq, e.end_seq);
    }
    std::sort(pieces.begin(), pieces.end());
    for (const auto& [lo, hi] : pieces) {
      require(lo == cursor, "windows+entries partition the received span");
      cursor = hi;
    }
    require(cursor == highest_right(), "partition reaches the right edge");
    for (size_t i = 1; i < entries_.size(); ++i)
      if (!entries_[i].open() && !entries_[i - 1].open())
        require(entries_[i - 1].start_seq < entries_[i].start_seq,
                "entries sorted by start_seq");
  }

 private:
  struct PendingRi {
    SeqNo lo;
    SeqNo hi;
    std::uint32_t addl;
  };

  bool in_windows(SeqNo seq) const {
    for (const auto& w : windows_)
      if (seq >= w.left && seq < w.right) return true;
    return false;
  }

  ExpectedEntry* open_tail() {
    if (!entries_.empty() && entries_.back().open()) return &entries_.back();
    return nullptr;
  }

  void erase_entry_num(std::uint32_t num) {
    entries_.erase(std::remove_if(entries_.begin(), entries_.end(),
                                  [&](const ExpectedEntry& e) {
                                    return e.num == num;
                                  }),
                   entries_.end());
  }

  // Arrival of seq inside some bounded entry: shrink or split it; a fully
  // received entry is removed and, when it was never retransmitted, its final
  // inter_cnt feeds the segment-level disorder estimator.
  void fill_entry_at(SeqNo seq) {
    for (size_t i = 0; i < entries_.size(); ++i) {
      ExpectedEntry& e = entries_[i];
      if (e.open() || seq < e.start_seq || seq >= e.end_seq) continue;
      if (e.start_seq == seq && e.end_seq == seq + 1) {
        if (e.rt_cnt == 0) segment_.observe(e.inter_cnt);
        entries_.erase(entries_.begin() + i);
      } else if (e.start_seq == seq) {
        e.start_seq = seq + 1;
      } else if (e.end_seq == seq + 1) {
        e.end_seq = seq;
      } else {
        ExpectedEntry right = e;
        right.num = next_entry_num_++;
        right.start_seq = seq + 1;
        e.end_seq = seq;
        entries_.insert(entries_.begin() + i + 1, right);
      }
      return;
    }
    require(false, "arrival below right edge must hit an entry");
  }

  void insert_window(SeqNo seq) {
    size_t j = 0;
    while (j < windows_.size() && windows_[j].left <= seq) ++j;
    bool left_adj = j > 0 && windows_[j - 1].right == seq;
    bool right_adj = j < windows_.size() && windows_[j].left == seq + 1;
    if (left_adj && right_adj) {
      windows_[j - 1].right = windows_[j].right;
      windows_.erase(windows_.begin() + j);
    } else if (left_adj) {
      windows_[j - 1].right = seq + 1;
    } else if (right_adj) {
      windows_[j].left = seq;
    } else {
      windows_.insert(windows_.begin() + j, ContentWindow{seq, seq + 1});
    }
  }

  std::uint32_t consume_pending_ri(SeqNo lo, SeqNo hi) {
    std::uint32_t sum = 0;
    for (auto it = pending_ri_.begin(); it != pending_ri_.end();) {
      if (it->lo < hi && lo < it->hi) {
        sum += it->addl;
        it = pending_ri_.erase(it);
      } else if (it->hi <= highest_right()) {
        it = pending_ri_.erase(it);  // stale: already received
      } else {
        ++it;
      }
    }
    return sum;
  }

  DetectorConfig cfg_;
  std::vector<ContentWindow> windows_;
  std::vector<ExpectedEntry> entries_;
  std::vector<PendingRi> pending_ri_;
  InterarrivalEstimator interarrival_;
  RtoEstimator rto_;
  SegmentDisorderEstimator segment_;
  SimTime last_arrival_ = kNoTime;
  std::uint32_t fired_multiples_ = 0;
  std::uint32_t next_entry_num_ = 0;
  std::uint64_t duplicates_ = 0;
};

}  // namespace sdtp
