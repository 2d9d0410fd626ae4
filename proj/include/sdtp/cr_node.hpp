#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sdtp/core.hpp"
#include "sdtp/detection.hpp"
#include "sdtp/estimators.hpp"
#include "sdtp/metrics.hpp"
#include "sdtp/packet.hpp"

namespace sdtp {

// Per-connection caching buffer: a copy of every forwarded data packet, keyed
// by sequence number, plus the cumulative release floor. Overflow evicts the
// lowest sequence number and counts as a cached-packet loss.
class CachingBuffer {
 public:
  explicit CachingBuffer(std::uint64_t capacity) : capacity_(capacity) {}

  struct InsertResult {
    bool inserted = false;
    std::optional<SeqNo> evicted;
  };

  InsertResult insert(const SdtpPacket& pkt) {
    InsertResult r;
    SeqNo seq = pkt.header.seq;
    if (static_cast<std::int64_t>(seq) <= floor_) return r;  // already released
    entries_[seq] = pkt;
    r.inserted = true;
    if (capacity_ > 0 && entries_.size() > capacity_) {
      r.evicted = entries_.begin()->first;
      entries_.erase(entries_.begin());
      ++evictions_;
    }
    return r;
  }

  bool contains(SeqNo seq) const { return entries_.count(seq) > 0; }

  const SdtpPacket* get(SeqNo seq) const {
    auto it = entries_.find(seq);
    return it == entries_.end() ? nullptr : &it->second;
  }

  // Highest S such that every sequence in (floor, S] is cached here; nothing
  // to advertise when the run above the floor is empty.
  std::optional<SeqNo> release_point() const {
    std::int64_t s = floor_ + 1;
    auto it = entries_.find(static_cast<SeqNo>(s));
    if (it == entries_.end()) return std::nullopt;
    while (it != entries_.end() && it->first == static_cast<SeqNo>(s)) {
      ++s;
      ++it;
    }
    return static_cast<SeqNo>(s - 1);
  }

  size_t release_upto(SeqNo s) {
    size_t n = 0;
    auto it = entries_.begin();
    while (it != entries_.end() && it->first <= s) {
      it = entries_.erase(it);
      ++n;
    }
    floor_ = std::max(floor_, static_cast<std::int64_t>(s));
    return n;
  }

  size_t size() const { return entries_.size(); }
  std::int64_t floor() const { return floor_; }
  std::uint64_t evictions() const { return evictions_; }
  const std::map<SeqNo, SdtpPacket>& entries() const { return entries_; }

 private:
  std::map<SeqNo, SdtpPacket> entries_;
  std::int64_t floor_ = -1;
  std::uint64_t capacity_;
  std::uint64_t evictions_ = 0;
};

struct CrNodeConfig {
  std::string node_name;
  std::uint32_t conn_id = 1;
  std::uint32_t slice_id = 1;
  bool caching = false;
  bool retrans = false;
  bool sending_edge = false;
  bool receiving_edge = false;
  std::uint64_t cache_capacity = 0;
  double send_interval_ms = 15.0;
  std::uint64_t flow_length = 0;
  double cn_period_ms = 150.0;
  double initial_rt_rtt_ms = 10.0;
  double rt_timer_slack_ms = 5.0;
  double rr_suppression_ms = 50.0;
  std::uint32_t max_rt_attempts = 8;
};

enum class EmitDir : std::uint8_t { Down, Up, Host };

struct NodeEmit {
  EmitDir dir;
  SdtpPacket pkt;
};

enum class NodeTimerKind : std::uint8_t { Interarrival, Retrans, CnPeriod };

struct NodeTimerReq {
  NodeTimerKind kind;
  SimTime at;
  std::uint64_t a = 0;  // Retrans: entry num; others: generation
  std::uint64_t b = 0;  // Retrans: generation
};

struct NodeActions {
  std::vector<NodeEmit> emits;
  std::vector<NodeTimerReq> timers;
  std::vector<TraceNote> notes;
  std::vector<SeqNo> retransmitted;  // RD copies emitted (metrics)
  std::uint64_t dup_drops = 0;       // data copies dropped as duplicates
};

inline std::uint32_t ts_of(SimTime now) {
  return static_cast<std::uint32_t>(static_cast<std::uint64_t>(now));
}

// Behavior of one in-path switch for one connection: plain forwarding,
// caching (cache + CN release + RD answering) and retransmission (loss
// detection + RR/RI emission + RD absorption), depending on the installed
// roles. Sans-IO: every handler returns the packets to emit and the timers to
// arm; the simulation owns delivery and time.
class SdtpNodeConn {
 public:
  explicit SdtpNodeConn(CrNodeConfig cfg)
      : cfg_(std::move(cfg)), cache_(cfg_.cache_capacity) {
    if (cfg_.retrans) {
      det_.emplace(DetectorConfig{cfg_.send_interval_ms, cfg_.flow_length});
    }
  }

  NodeActions on_packet(const SdtpPacket& pkt, SimTime now) {
    switch (pkt.header.kind) {
      case PacketKind::Data: return on_data(pkt, now);
      case PacketKind::Rd: return on_rd(pkt, now);
      case PacketKind::Rr: return on_rr(pkt, now);
      case PacketKind::Ri: return on_ri(pkt, now);
      case PacketKind::Cn: return on_cn(pkt, now);
      default:
        require(false, "switch cannot process SYN/SYN-ACK in the data plane");
    }
    return {};
  }

  NodeActions on_data(const SdtpPacket& pkt, SimTime now) {
    NodeActions act;
    ++counters_.forwarded;
    cache_insert(act, pkt, now);
    bool dup = false;
    if (det_) dup = run_detection(act, pkt.header.seq, now);
    if (cfg_.receiving_edge) {
      reorder_deliver(act, pkt, now);
    } else {
      (void)dup;  // intermediate nodes forward duplicates as well
      act.emits.push_back({EmitDir::Down, pkt});
    }
    return act;
  }

  NodeActions on_rd(const SdtpPacket& pkt, SimTime now) {
    NodeActions act;
    require(pkt.header.optional.has_value(), "RD without optional block");
    if (!cfg_.retrans || !det_) {
      // Caching node en route: keep a copy of the data, pass the RD on.
      ++counters_.forwarded;
      cache_insert(act, as_data(pkt, pkt.header.timestamp), now);
      act.emits.push_back({EmitDir::Down, pkt});
      return act;
    }
    // This node is the requester: sample the retransmission RTT from the
    // timestamp echo, feed the arrival to detection, then forward as data.
    std::uint32_t echo = pkt.header.optional->aux;
    std::uint32_t rtt_us = ts_of(now) - echo;  // modular
    det_->rto().update(static_cast<double>(rtt_us) / 1000.0);
    act.notes.push_back(
        {"rd_consume", strf("conn=%u seq=%u rtt_us=%u", cfg_.conn_id,
                            pkt.header.seq, rtt_us)});

    auto out = det_->on_packet(pkt.header.seq, now);
    if (out.duplicate) {
      ++counters_.dup_dropped;
      ++act.dup_drops;
      act.notes.push_back({"dup_drop", strf("conn=%u seq=%u where=%s",
                                            cfg_.conn_id, pkt.header.seq,
                                            cfg_.node_name.c_str())});
      arm_interarrival(act);
      return act;
    }
    process_outcome(act, out, now);
    if (det_->find_entry(pkt.header.optional->num)) {
      arm_rt_timer(act, pkt.header.optional->num, now);  // progress: re-arm
    }
    SdtpPacket data = as_data(pkt, ts_of(now));
    ++counters_.forwarded;
    cache_insert(act, data, now);
    if (cfg_.receiving_edge) {
      reorder_deliver(act, data, now);
    } else {
      act.emits.push_back({EmitDir::Down, data});
    }
    return act;
  }

  NodeActions on_rr(const SdtpPacket& pkt, SimTime now) {
    NodeActions act;
    require(pkt.header.optional.has_value(), "RR without optional block");
    if (!cfg_.caching) {
      ++counters_.forwarded;
      act.emits.push_back({EmitDir::Up, pkt});
      return act;
    }
    const OptionalBlock& ob = *pkt.header.optional;
    std::vector<SeqNo> requested;
    if (pkt.header.trigger == RrTrigger::ArrivalTimeout) {
      requested.push_back(ob.start_seq + ob.start_num);
    } else {
      for (SeqNo s = ob.start_seq; s < ob.end_seq; ++s) requested.push_back(s);
    }

    bool served_any = false;
    std::vector<SeqNo> missing;
    for (SeqNo s : requested) {
      if (suppressed(s, pkt.header.trigger, now)) {
        ++counters_.rr_suppressed;
        act.notes.push_back({"rr_suppress", strf("conn=%u seq=%u where=%s",
                                                 cfg_.conn_id, s,
                                                 cfg_.node_name.c_str())});
        continue;
      }
      if (const SdtpPacket* cached = cache_.get(s)) {
        SdtpPacket rd;
        rd.header.kind = PacketKind::Rd;
        rd.header.trigger = pkt.header.trigger;
        rd.header.conn_id = cfg_.conn_id;
        rd.header.slice_id = cfg_.slice_id;
        rd.header.seq = s;
        rd.header.timestamp = ts_of(now);
        rd.header.optional = ob;  // echoes num/locator/request timestamp
        rd.payload = cached->payload;
        rd.header.payload_len = cached->header.payload_len;
        act.emits.push_back({EmitDir::Down, rd});
        act.retransmitted.push_back(s);
        ++counters_.rd_sent;
        mark_served(s, pkt.header.trigger, now);
        served_any = true;
      } else if (own_recovery_pending(s)) {
        ++counters_.rr_absorbed;
        act.notes.push_back({"rr_absorb", strf("conn=%u seq=%u where=%s",
                                               cfg_.conn_id, s,
                                               cfg_.node_name.c_str())});
      } else {
        missing.push_back(s);
      }
    }
    if (served_any) ++counters_.rr_served;

    if (!missing.empty()) {
      if (walk_top()) {
        counters_.unrecoverable += missing.size();
        for (SeqNo s : missing)
          act.notes.push_back({"rr_unrecoverable",
                               strf("conn=%u seq=%u where=%s", cfg_.conn_id, s,
                                    cfg_.node_name.c_str())});
      } else if (pkt.header.trigger == RrTrigger::ArrivalTimeout) {
        ++counters_.rr_forwarded;
        act.emits.push_back({EmitDir::Up, pkt});
      } else {
        // One narrowed request per contiguous missing run.
        size_t i = 0;
        while (i < missing.size()) {
          size_t j = i;
          while (j + 1 < missing.size() && missing[j + 1] == missing[j] + 1) ++j;
          SdtpPacket fwd = pkt;
          fwd.header.optional->start_seq = missing[i];
          fwd.header.optional->end_seq = missing[j] + 1;
          act.emits.push_back({EmitDir::Up, fwd});
          ++counters_.rr_forwarded;
          i = j + 1;
        }
      }
    }
    return act;
  }

  NodeActions on_ri(const SdtpPacket& pkt, SimTime now) {
    NodeActions act;
    require(pkt.header.optional.has_value(), "RI without optional block");
    (void)now;
    if (!cfg_.retrans || !det_) {
      ++counters_.forwarded;
      act.emits.push_back({EmitDir::Down, pkt});
      return act;
    }
    det_->apply_ri(*pkt.header.optional);
    act.notes.push_back(
        {"ri_apply", strf("conn=%u start=%u end=%u addl=%u where=%s",
                          cfg_.conn_id, pkt.header.optional->start_seq,
                          pkt.header.optional->end_seq, pkt.header.optional->aux,
                          cfg_.node_name.c_str())});
    if (!cfg_.receiving_edge) {
      act.emits.push_back({EmitDir::Down, pkt});  // following retrans nodes
    }
    return act;
  }

  NodeActions on_cn(const SdtpPacket& pkt, SimTime now) {
    NodeActions act;
    require(pkt.header.optional.has_value(), "CN without optional block");
    if (!cfg_.caching) {
      ++counters_.forwarded;
      act.emits.push_back({EmitDir::Up, pkt});
      return act;
    }
    SeqNo upto = pkt.header.optional->aux;
    size_t n = cache_.release_upto(upto);
    counters_.released += n;
    act.notes.push_back({"cn_release",
                         strf("conn=%u upto=%u released=%zu where=%s",
                              cfg_.conn_id, upto, n, cfg_.node_name.c_str())});
    arm_cn(act, now);  // propagate the release point further upstream
    return act;
  }

  NodeActions on_timer(NodeTimerKind kind, std::uint64_t a, std::uint64_t b,
                       SimTime now) {
    NodeActions act;
    switch (kind) {
      case NodeTimerKind::Interarrival: {
        if (!det_ || a != ia_gen_) return act;  // superseded
        auto req = det_->on_interarrival_timeout(now);
        if (req) {
          act.notes.push_back({"trigger_t", strf("conn=%u start=%u start_num=%u",
                                                 cfg_.conn_id, req->start_seq,
                                                 req->start_num)});
          emit_rr(act, *req, now);
        }
        arm_interarrival(act);
        break;
      }
      case NodeTimerKind::Retrans: {
        auto num = static_cast<std::uint32_t>(a);
        auto it = rt_timers_.find(num);
        if (it == rt_timers_.end() || it->second != b) return act;
        if (!det_ || !det_->find_entry(num)) {
          rt_timers_.erase(num);
          return act;
        }
        ExpectedEntry* e = det_->find_entry(num);
        if (e->rt_cnt >= cfg_.max_rt_attempts) {
          rt_timers_.erase(num);
          ++counters_.unrecoverable;
          act.notes.push_back({"rr_abandoned",
                               strf("conn=%u start=%u where=%s", cfg_.conn_id,
                                    e->start_seq, cfg_.node_name.c_str())});
          return act;
        }
        auto req = det_->on_retrans_timeout(num);
        if (req) {
          act.notes.push_back({"trigger_r", strf("conn=%u start=%u end=%u",
                                                 cfg_.conn_id, req->start_seq,
                                                 req->end_seq)});
          emit_rr(act, *req, now);
        }
        break;
      }
      case NodeTimerKind::CnPeriod: {
        if (a != cn_gen_) return act;
        cn_armed_ = false;
        maybe_emit_cn(act, now);
        break;
      }
    }
    return act;
  }

  const CrNodeConfig& config() const { return cfg_; }
  const CachingBuffer& cache() const { return cache_; }
  LossDetector* detector() { return det_ ? &*det_ : nullptr; }
  const NodeCounters& counters() const { return counters_; }
  NodeCounters& counters() { return counters_; }
  size_t reorder_backlog() const { return reorder_.size(); }
  SeqNo next_host_seq() const { return next_host_; }

 private:
  static SdtpPacket as_data(const SdtpPacket& rd, std::uint32_t ts) {
    SdtpPacket data = rd;
    data.header.kind = PacketKind::Data;
    data.header.trigger = RrTrigger::None;
    data.header.optional.reset();
    data.header.timestamp = ts;
    return data;
  }

  bool walk_top() const { return cfg_.retrans || cfg_.sending_edge; }

  bool own_recovery_pending(SeqNo s) {
    if (!det_) return false;
    for (const auto& e : det_->entries()) {
      if (e.rt_cnt == 0) continue;
      bool covered = e.open() ? s >= e.start_seq
                              : s >= e.start_seq && s < e.end_seq;
      if (covered) return true;
    }
    return false;
  }

  bool suppressed(SeqNo s, RrTrigger t, SimTime now) const {
    auto it = last_served_.find({s, static_cast<std::uint8_t>(t)});
    if (it == last_served_.end()) return false;
    return now - it->second < us_from_ms(cfg_.rr_suppression_ms);
  }

  void mark_served(SeqNo s, RrTrigger t, SimTime now) {
    last_served_[{s, static_cast<std::uint8_t>(t)}] = now;
  }

  double rt_rtt_estimate_ms() const {
    return det_ && det_->rto().initialized() ? det_->rto().rtt_ms()
                                             : cfg_.initial_rt_rtt_ms;
  }

  double rt_threshold_ms() const {
    return det_ && det_->rto().initialized()
               ? det_->rto().threshold_ms()
               : RtoEstimator::kPhi * cfg_.initial_rt_rtt_ms;
  }

  void cache_insert(NodeActions& act, const SdtpPacket& pkt, SimTime now) {
    if (!cfg_.caching) return;
    auto r = cache_.insert(pkt);
    if (r.inserted) ++counters_.cached;
    if (r.evicted) {
      ++counters_.evicted;
      act.notes.push_back({"cache_evict",
                           strf("conn=%u seq=%u where=%s", cfg_.conn_id,
                                *r.evicted, cfg_.node_name.c_str())});
    }
    arm_cn(act, now);
  }

  bool run_detection(NodeActions& act, SeqNo seq, SimTime now) {
    auto out = det_->on_packet(seq, now);
    if (out.duplicate) {
      arm_interarrival(act);
      return true;
    }
    process_outcome(act, out, now);
    return false;
  }

  void process_outcome(NodeActions& act, const DetectionOutcome& out,
                       SimTime now) {
    for (const auto& [lo, hi] : out.new_gaps) {
      act.notes.push_back({"detect_gap", strf("conn=%u start=%u end=%u where=%s",
                                              cfg_.conn_id, lo, hi,
                                              cfg_.node_name.c_str())});
    }
    for (const auto& trig : out.triggers) {
      act.notes.push_back({"trigger_c", strf("conn=%u start=%u end=%u",
                                             cfg_.conn_id, trig.start_seq,
                                             trig.end_seq)});
      emit_rr(act, trig, now);
    }
    reconcile_rt_timers(act, now);
    arm_interarrival(act);
  }

  void emit_rr(NodeActions& act, const RrRequest& req, SimTime now) {
    SdtpPacket rr;
    rr.header.kind = PacketKind::Rr;
    rr.header.trigger = req.trigger;
    rr.header.conn_id = cfg_.conn_id;
    rr.header.slice_id = cfg_.slice_id;
    rr.header.seq = 0;
    rr.header.timestamp = ts_of(now);
    rr.header.optional =
        OptionalBlock{req.entry_num, req.start_seq, req.end_seq, req.start_num,
                      ts_of(now)};
    act.emits.push_back({EmitDir::Up, rr});
    ++counters_.rr_sent;
    act.notes.push_back(
        {"rr_send", strf("conn=%u trig=%s start=%u end=%u start_num=%u from=%s",
                         cfg_.conn_id, trigger_name(req.trigger), req.start_seq,
                         req.end_seq, req.start_num, cfg_.node_name.c_str())});

    // Counter-triggered requests advertise the extra disorder downstream.
    if (req.trigger == RrTrigger::Counter && !cfg_.receiving_edge) {
      std::uint32_t addl = compute_addl(
          rt_rtt_estimate_ms(), det_->interarrival().expected_ms(), req.trigger);
      SdtpPacket ri;
      ri.header.kind = PacketKind::Ri;
      ri.header.conn_id = cfg_.conn_id;
      ri.header.slice_id = cfg_.slice_id;
      ri.header.timestamp = ts_of(now);
      ri.header.optional = OptionalBlock{req.entry_num, req.start_seq,
                                         req.end_seq, req.start_num, addl};
      act.emits.push_back({EmitDir::Down, ri});
      ++counters_.ri_sent;
      act.notes.push_back({"ri_send", strf("conn=%u start=%u end=%u addl=%u",
                                           cfg_.conn_id, req.start_seq,
                                           req.end_seq, addl)});
    }

    det_->record_rr_sent(req.entry_num, req.trigger, now);
    arm_rt_timer(act, req.entry_num, now);
  }

  void arm_rt_timer(NodeActions& act, std::uint32_t entry_num, SimTime now) {
    std::uint64_t gen = ++timer_gen_;
    rt_timers_[entry_num] = gen;
    SimTime due =
        now + us_from_ms(rt_threshold_ms() + cfg_.rt_timer_slack_ms);
    act.timers.push_back({NodeTimerKind::Retrans, due, entry_num, gen});
  }

  void reconcile_rt_timers(NodeActions& act, SimTime now) {
    for (const auto& e : det_->entries()) {
      if (e.rt_cnt >= 1 && !rt_timers_.count(e.num)) {
        arm_rt_timer(act, e.num, now);
      }
    }
    for (auto it = rt_timers_.begin(); it != rt_timers_.end();) {
      if (!det_->find_entry(static_cast<std::uint32_t>(it->first))) {
        it = rt_timers_.erase(it);
      } else {
        ++it;
      }
    }
  }

  void arm_interarrival(NodeActions& act) {
    if (!det_ || det_->last_arrival() == kNoTime) return;
    if (det_->complete()) return;
    std::uint64_t gen = ++timer_gen_;
    ia_gen_ = gen;
    act.timers.push_back(
        {NodeTimerKind::Interarrival, det_->next_timeout_due(), gen, 0});
  }

  // Cumulative release point to advertise: the contiguous run of cached
  // sequences above the floor, or the bare floor once those packets are
  // already released here (the receiving edge releases on host delivery).
  std::optional<SeqNo> cn_advertise_point() const {
    auto rp = cache_.release_point();
    if (rp) return rp;
    if (cache_.floor() >= 0) return static_cast<SeqNo>(cache_.floor());
    return std::nullopt;
  }

  void arm_cn(NodeActions& act, SimTime now) {
    if (cfg_.sending_edge) return;  // no caching node upstream
    if (cn_armed_) return;
    bool floor_unannounced =
        cache_.floor() >= 0 && cache_.floor() > last_cn_advertised_;
    if (cache_.size() == 0 && !floor_unannounced) return;
    std::uint64_t gen = ++timer_gen_;
    cn_gen_ = gen;
    cn_armed_ = true;
    act.timers.push_back(
        {NodeTimerKind::CnPeriod, now + us_from_ms(cfg_.cn_period_ms), gen, 0});
  }

  void maybe_emit_cn(NodeActions& act, SimTime now) {
    auto rp = cn_advertise_point();
    if (rp && static_cast<std::int64_t>(*rp) > last_cn_advertised_) {
      SdtpPacket cn;
      cn.header.kind = PacketKind::Cn;
      cn.header.conn_id = cfg_.conn_id;
      cn.header.slice_id = cfg_.slice_id;
      cn.header.timestamp = ts_of(now);
      cn.header.optional = OptionalBlock{0, 0, *rp, 0, *rp};
      act.emits.push_back({EmitDir::Up, cn});
      ++counters_.cn_sent;
      last_cn_advertised_ = static_cast<std::int64_t>(*rp);
      act.notes.push_back({"cn_send", strf("conn=%u upto=%u from=%s",
                                           cfg_.conn_id, *rp,
                                           cfg_.node_name.c_str())});
    }
    arm_cn(act, now);
  }

  void reorder_deliver(NodeActions& act, const SdtpPacket& data, SimTime now) {
    (void)now;
    SeqNo s = data.header.seq;
    if (s < next_host_ || reorder_.count(s)) {
      ++counters_.dup_dropped;
      ++act.dup_drops;
      act.notes.push_back({"dup_drop", strf("conn=%u seq=%u where=%s",
                                            cfg_.conn_id, s,
                                            cfg_.node_name.c_str())});
      return;
    }
    reorder_[s] = data;
    while (reorder_.count(next_host_)) {
      act.emits.push_back({EmitDir::Host, reorder_[next_host_]});
      cache_.release_upto(next_host_);
      reorder_.erase(next_host_);
      ++next_host_;
    }
  }

  CrNodeConfig cfg_;
  CachingBuffer cache_;
  std::optional<LossDetector> det_;
  std::map<SeqNo, SdtpPacket> reorder_;
  SeqNo next_host_ = 0;
  std::map<std::pair<SeqNo, std::uint8_t>, SimTime> last_served_;
  std::map<std::uint32_t, std::uint64_t> rt_timers_;
  std::uint64_t timer_gen_ = 0;
  std::uint64_t ia_gen_ = 0;
  std::uint64_t cn_gen_ = 0;
  bool cn_armed_ = false;
  std::int64_t last_cn_advertised_ = -1;
  NodeCounters counters_;
};

}  // namespace sdtp
