#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "sdtp/core.hpp"
#include "sdtp/estimators.hpp"
#include "sdtp/metrics.hpp"

namespace sdtp {

// Conventional host-side segment model: used on host-edge links in SDTP runs
// and end-to-end by the TCP baseline.
struct TcpPkt {
  enum class Kind : std::uint8_t { Syn, SynAck, Ack, Data } kind = Kind::Data;
  std::uint32_t conn = 1;
  SeqNo seq = 0;     // data sequence
  SeqNo ack_no = 0;  // cumulative: next expected sequence

  const char* kind_name() const {
    switch (kind) {
      case Kind::Syn: return "SYN";
      case Kind::SynAck: return "SYN-ACK";
      case Kind::Ack: return "ACK";
      case Kind::Data: return "DATA";
    }
    return "?";
  }
};

enum class HostTimerKind : std::uint8_t { SynRetry, SynAckRetry, Rto, Pace };

struct HostTimerReq {
  HostTimerKind kind;
  SimTime at;
  std::uint64_t gen = 0;
};

struct HostActions {
  std::vector<TcpPkt> emits;
  std::vector<HostTimerReq> timers;
  std::vector<TraceNote> notes;
  std::vector<SeqNo> retransmits;              // data copies re-sent
  std::vector<SeqNo> sends;                    // first-time data sends
  std::vector<std::pair<SeqNo, SimTime>> deliveries;  // in-order app handoff
  std::uint64_t dup_drops = 0;
};

struct HostConfig {
  std::uint32_t conn = 1;
  std::uint64_t packet_count = 100;
  double send_interval_ms = 15.0;
  double retry_ms = 1000.0;  // handshake retry, doubling
  std::uint32_t retry_attempts = 3;
  double min_rto_ms = 200.0;
  double initial_rto_ms = 1000.0;
};

// Open-loop sending host for SDTP: two-way-handshake client plus a fixed
// send-interval packet source. Loss recovery is entirely in-path, so there is
// no feedback channel.
class SdtpSenderHost {
 public:
  explicit SdtpSenderHost(HostConfig cfg) : cfg_(cfg) {}

  HostActions start(SimTime now) {
    HostActions act;
    syn_first_sent_ = now;
    send_syn(act, now);
    return act;
  }

  HostActions on_packet(const TcpPkt& pkt, SimTime now) {
    HostActions act;
    if (pkt.kind != TcpPkt::Kind::SynAck) return act;
    if (established_) {
      act.emits.push_back(ack_pkt());  // duplicate SYN-ACK: re-acknowledge
      return act;
    }
    established_ = true;
    established_at_ = now;
    act.emits.push_back(ack_pkt());
    act.notes.push_back({"host_established", strf("conn=%u host=sender", cfg_.conn)});
    arm_pace(act, now + us_from_ms(cfg_.send_interval_ms));
    return act;
  }

  HostActions on_timer(HostTimerKind kind, std::uint64_t gen, SimTime now) {
    HostActions act;
    if (kind == HostTimerKind::SynRetry) {
      if (gen != syn_gen_ || established_ || failed_) return act;
      if (attempts_ >= cfg_.retry_attempts) {
        failed_ = true;
        act.notes.push_back({"conn_failed", strf("conn=%u", cfg_.conn)});
        return act;
      }
      send_syn(act, now);
    } else if (kind == HostTimerKind::Pace) {
      if (gen != pace_gen_) return act;
      if (next_seq_ < cfg_.packet_count) {
        TcpPkt d;
        d.kind = TcpPkt::Kind::Data;
        d.conn = cfg_.conn;
        d.seq = static_cast<SeqNo>(next_seq_);
        act.emits.push_back(d);
        act.sends.push_back(d.seq);
        ++next_seq_;
        if (next_seq_ < cfg_.packet_count)
          arm_pace(act, now + us_from_ms(cfg_.send_interval_ms));
      }
    }
    return act;
  }

  bool established() const { return established_; }
  bool failed() const { return failed_; }
  SimTime syn_first_sent() const { return syn_first_sent_; }
  SimTime established_at() const { return established_at_; }

 private:
  TcpPkt ack_pkt() const {
    TcpPkt a;
    a.kind = TcpPkt::Kind::Ack;
    a.conn = cfg_.conn;
    return a;
  }

  void send_syn(HostActions& act, SimTime now) {
    TcpPkt syn;
    syn.kind = TcpPkt::Kind::Syn;
    syn.conn = cfg_.conn;
    act.emits.push_back(syn);
    ++attempts_;
    double backoff = cfg_.retry_ms;
    for (std::uint32_t i = 1; i < attempts_; ++i) backoff *= 2.0;
    act.timers.push_back(
        {HostTimerKind::SynRetry, now + us_from_ms(backoff), ++syn_gen_});
  }

  void arm_pace(HostActions& act, SimTime at) {
    act.timers.push_back({HostTimerKind::Pace, at, ++pace_gen_});
  }

  HostConfig cfg_;
  bool established_ = false;
  bool failed_ = false;
  std::uint32_t attempts_ = 0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t syn_gen_ = 0;
  std::uint64_t pace_gen_ = 0;
  SimTime syn_first_sent_ = kNoTime;
  SimTime established_at_ = kNoTime;
};

// Receiving host for SDTP: answers the SYN, waits for the (edge-synthesized)
// ACK, and consumes strictly in-order data.
class SdtpReceiverHost {
 public:
  explicit SdtpReceiverHost(HostConfig cfg) : cfg_(cfg) {}

  HostActions on_packet(const TcpPkt& pkt, SimTime now) {
    HostActions act;
    switch (pkt.kind) {
      case TcpPkt::Kind::Syn:
        send_synack(act, now);
        break;
      case TcpPkt::Kind::Ack:
        if (conn_done_at_ == kNoTime) {
          conn_done_at_ = now;
          act.notes.push_back(
              {"host_established", strf("conn=%u host=receiver", cfg_.conn)});
        }
        ++synack_gen_;  // cancel retries
        break;
      case TcpPkt::Kind::Data: {
        if (conn_done_at_ == kNoTime) conn_done_at_ = now;
        require(pkt.seq == expect_,
                "receiving host observed out-of-order delivery");
        ++expect_;
        act.deliveries.emplace_back(pkt.seq, now);
        break;
      }
      default:
        break;
    }
    return act;
  }

  HostActions on_timer(HostTimerKind kind, std::uint64_t gen, SimTime now) {
    HostActions act;
    if (kind != HostTimerKind::SynAckRetry || gen != synack_gen_) return act;
    if (conn_done_at_ != kNoTime || attempts_ >= cfg_.retry_attempts) return act;
    send_synack(act, now);
    return act;
  }

  SimTime conn_done_at() const { return conn_done_at_; }
  SeqNo next_expected() const { return expect_; }

 private:
  void send_synack(HostActions& act, SimTime now) {
    TcpPkt sa;
    sa.kind = TcpPkt::Kind::SynAck;
    sa.conn = cfg_.conn;
    act.emits.push_back(sa);
    ++attempts_;
    double backoff = cfg_.retry_ms;
    for (std::uint32_t i = 1; i < attempts_; ++i) backoff *= 2.0;
    act.timers.push_back(
        {HostTimerKind::SynAckRetry, now + us_from_ms(backoff), ++synack_gen_});
  }

  HostConfig cfg_;
  SeqNo expect_ = 0;
  std::uint32_t attempts_ = 0;
  std::uint64_t synack_gen_ = 0;
  SimTime conn_done_at_ = kNoTime;
};

// Simplified TCP baseline sender: fixed (pacing-limited) window, cumulative
// ACKs, fast retransmit on three duplicate ACKs with NewReno-style partial-ACK
// retransmission, and a retransmission timer driven by the same
// exponentially-weighted RTT estimator applied end to end (with a minimum RTO
// floor and exponential backoff).
class TcpSenderHost {
 public:
  explicit TcpSenderHost(HostConfig cfg)
      : cfg_(cfg), send_time_(cfg.packet_count, kNoTime),
        retransmitted_(cfg.packet_count, false) {}

  HostActions start(SimTime now) {
    HostActions act;
    syn_first_sent_ = now;
    send_syn(act, now);
    return act;
  }

  HostActions on_packet(const TcpPkt& pkt, SimTime now) {
    HostActions act;
    if (pkt.kind == TcpPkt::Kind::SynAck) {
      act.emits.push_back(TcpPkt{TcpPkt::Kind::Ack, cfg_.conn, 0, 0});
      if (!established_) {
        established_ = true;
        act.notes.push_back(
            {"host_established", strf("conn=%u host=sender", cfg_.conn)});
        arm_pace(act, now + us_from_ms(cfg_.send_interval_ms));
      }
      return act;
    }
    if (pkt.kind != TcpPkt::Kind::Ack) return act;
    on_ack(act, pkt.ack_no, now);
    return act;
  }

  HostActions on_timer(HostTimerKind kind, std::uint64_t gen, SimTime now) {
    HostActions act;
    switch (kind) {
      case HostTimerKind::SynRetry:
        if (gen != syn_gen_ || established_ || failed_) return act;
        if (attempts_ >= cfg_.retry_attempts) {
          failed_ = true;
          act.notes.push_back({"conn_failed", strf("conn=%u", cfg_.conn)});
          return act;
        }
        send_syn(act, now);
        break;
      case HostTimerKind::Pace:
        if (gen != pace_gen_) return act;
        if (next_new_ < cfg_.packet_count) {
          send_data(act, static_cast<SeqNo>(next_new_), now, false);
          ++next_new_;
          if (next_new_ < cfg_.packet_count)
            arm_pace(act, now + us_from_ms(cfg_.send_interval_ms));
          if (!rto_armed_) arm_rto(act, now);
        }
        break;
      case HostTimerKind::Rto:
        if (gen != rto_gen_ || !rto_armed_) return act;
        rto_armed_ = false;
        if (snd_una_ < next_new_) {
          act.notes.push_back(
              {"tcp_rto", strf("conn=%u seq=%u", cfg_.conn,
                               static_cast<SeqNo>(snd_una_))});
          send_data(act, static_cast<SeqNo>(snd_una_), now, true);
          backoff_ *= 2.0;
          in_recovery_ = false;
          dupacks_ = 0;
          arm_rto(act, now);
        }
        break;
      default:
        break;
    }
    return act;
  }

  bool established() const { return established_; }
  bool failed() const { return failed_; }
  SimTime syn_first_sent() const { return syn_first_sent_; }
  std::uint64_t retx_count() const { return retx_count_; }

 private:
  void on_ack(HostActions& act, SeqNo ack_no, SimTime now) {
    if (ack_no > snd_una_) {
      SeqNo newest = ack_no - 1;
      if (newest < send_time_.size() && !retransmitted_[newest] &&
          send_time_[newest] != kNoTime) {
        rto_est_.update(ms_from_us(now - send_time_[newest]));
      }
      snd_una_ = ack_no;
      dupacks_ = 0;
      backoff_ = 1.0;
      if (in_recovery_) {
        if (ack_no >= recover_point_) {
          in_recovery_ = false;
        } else if (snd_una_ < next_new_) {
          // Partial ACK: the next hole is known lost; retransmit it now.
          act.notes.push_back(
              {"tcp_partial_ack_retx",
               strf("conn=%u seq=%u", cfg_.conn, static_cast<SeqNo>(snd_una_))});
          send_data(act, static_cast<SeqNo>(snd_una_), now, true);
        }
      }
      if (snd_una_ < next_new_) {
        arm_rto(act, now);
      } else {
        rto_armed_ = false;
        ++rto_gen_;
      }
    } else if (ack_no == snd_una_ && snd_una_ < next_new_) {
      ++dupacks_;
      if (dupacks_ == 3 && !in_recovery_) {
        in_recovery_ = true;
        recover_point_ = static_cast<SeqNo>(next_new_);
        act.notes.push_back(
            {"tcp_fast_retx",
             strf("conn=%u seq=%u", cfg_.conn, static_cast<SeqNo>(snd_una_))});
        send_data(act, static_cast<SeqNo>(snd_una_), now, true);
        arm_rto(act, now);
      }
    }
  }

  void send_syn(HostActions& act, SimTime now) {
    act.emits.push_back(TcpPkt{TcpPkt::Kind::Syn, cfg_.conn, 0, 0});
    ++attempts_;
    double backoff = cfg_.retry_ms;
    for (std::uint32_t i = 1; i < attempts_; ++i) backoff *= 2.0;
    act.timers.push_back(
        {HostTimerKind::SynRetry, now + us_from_ms(backoff), ++syn_gen_});
  }

  void send_data(HostActions& act, SeqNo seq, SimTime now, bool retx) {
    TcpPkt d;
    d.kind = TcpPkt::Kind::Data;
    d.conn = cfg_.conn;
    d.seq = seq;
    act.emits.push_back(d);
    if (retx) {
      retransmitted_[seq] = true;
      act.retransmits.push_back(seq);
      ++retx_count_;
    } else {
      send_time_[seq] = now;
      act.sends.push_back(seq);
    }
  }

  void arm_pace(HostActions& act, SimTime at) {
    act.timers.push_back({HostTimerKind::Pace, at, ++pace_gen_});
  }

  double rto_ms() const {
    double base = rto_est_.initialized() ? rto_est_.threshold_ms()
                                         : cfg_.initial_rto_ms;
    return std::max(cfg_.min_rto_ms, base) * backoff_;
  }

  void arm_rto(HostActions& act, SimTime now) {
    rto_armed_ = true;
    act.timers.push_back(
        {HostTimerKind::Rto, now + us_from_ms(rto_ms()), ++rto_gen_});
  }

  HostConfig cfg_;
  bool established_ = false;
  bool failed_ = false;
  std::uint32_t attempts_ = 0;
  std::uint64_t next_new_ = 0;
  SeqNo snd_una_ = 0;
  std::uint32_t dupacks_ = 0;
  bool in_recovery_ = false;
  SeqNo recover_point_ = 0;
  double backoff_ = 1.0;
  RtoEstimator rto_est_;
  std::vector<SimTime> send_time_;
  std::vector<bool> retransmitted_;
  std::uint64_t retx_count_ = 0;
  std::uint64_t syn_gen_ = 0, pace_gen_ = 0, rto_gen_ = 0;
  bool rto_armed_ = false;
  SimTime syn_first_sent_ = kNoTime;
};

// TCP baseline receiver: cumulative ACK per arrival, in-order handoff to the
// application (head-of-line blocking shows up in the delay series).
class TcpReceiverHost {
 public:
  explicit TcpReceiverHost(HostConfig cfg) : cfg_(cfg) {}

  HostActions on_packet(const TcpPkt& pkt, SimTime now) {
    HostActions act;
    switch (pkt.kind) {
      case TcpPkt::Kind::Syn:
        send_synack(act, now);
        break;
      case TcpPkt::Kind::Ack:
        if (conn_done_at_ == kNoTime) {
          conn_done_at_ = now;
          act.notes.push_back(
              {"host_established", strf("conn=%u host=receiver", cfg_.conn)});
        }
        ++synack_gen_;
        break;
      case TcpPkt::Kind::Data: {
        if (conn_done_at_ == kNoTime) conn_done_at_ = now;
        if (pkt.seq < expect_ || buffer_.count(pkt.seq)) {
          ++act.dup_drops;
        } else {
          buffer_.insert(pkt.seq);
          while (buffer_.count(expect_)) {
            act.deliveries.emplace_back(expect_, now);
            buffer_.erase(expect_);
            ++expect_;
          }
        }
        TcpPkt ack;
        ack.kind = TcpPkt::Kind::Ack;
        ack.conn = cfg_.conn;
        ack.ack_no = expect_;
        act.emits.push_back(ack);
        break;
      }
      default:
        break;
    }
    return act;
  }

  HostActions on_timer(HostTimerKind kind, std::uint64_t gen, SimTime now) {
    HostActions act;
    if (kind != HostTimerKind::SynAckRetry || gen != synack_gen_) return act;
    if (conn_done_at_ != kNoTime || attempts_ >= cfg_.retry_attempts) return act;
    send_synack(act, now);
    return act;
  }

  SimTime conn_done_at() const { return conn_done_at_; }
  size_t buffered() const { return buffer_.size(); }

 private:
  void send_synack(HostActions& act, SimTime now) {
    act.emits.push_back(TcpPkt{TcpPkt::Kind::SynAck, cfg_.conn, 0, 0});
    ++attempts_;
    double backoff = cfg_.retry_ms;
    for (std::uint32_t i = 1; i < attempts_; ++i) backoff *= 2.0;
    act.timers.push_back(
        {HostTimerKind::SynAckRetry, now + us_from_ms(backoff), ++synack_gen_});
  }

  HostConfig cfg_;
  SeqNo expect_ = 0;
  std::set<SeqNo> buffer_;
  std::uint32_t attempts_ = 0;
  std::uint64_t synack_gen_ = 0;
  SimTime conn_done_at_ = kNoTime;
};

}  // namespace sdtp
