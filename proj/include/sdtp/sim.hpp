#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "sdtp/control_plane.hpp"
#include "sdtp/cr_node.hpp"
#include "sdtp/event_queue.hpp"
#include "sdtp/hosts.hpp"
#include "sdtp/metrics.hpp"
#include "sdtp/packet.hpp"
#include "sdtp/scenario.hpp"

namespace sdtp {

// What travels on a link: SDTP packets between switches, conventional host
// segments on host-edge links (and end to end for the TCP baseline).
using SimPacket = std::variant<SdtpPacket, TcpPkt>;

struct RunResult {
  std::string trace;
  Metrics metrics;
};

// Deterministic single-run simulation. One instance = one (scenario,
// protocol, seed) run; the trace and metrics are reproducible byte for byte.
class Simulation {
 public:
  Simulation(Scenario scn, Protocol proto, std::uint64_t seed)
      : scn_(std::move(scn)), proto_(proto), seed_(seed) {
    build_topology();
    apply_loss_decomposition();
    build_connections();
    if (proto_ == Protocol::Sdtp) build_controller();
  }

  RunResult run() {
    for (auto& [id, c] : conns_) {
      std::uint32_t conn_id = id;
      q_.schedule(0, EventKind::HostSend, [this, conn_id] {
        auto& c = conns_.at(conn_id);
        if (proto_ == Protocol::Sdtp) {
          apply_host_actions(c, true, c.ssend->start(now_));
        } else {
          tcp_install_route(c);
          apply_host_actions(c, true, c.tsend->start(now_));
        }
      });
    }

    SimTime horizon = scn_.horizon_us();
    while (!q_.empty() && q_.next_time() <= horizon) {
      auto ev = q_.pop();
      now_ = ev.at;
      ev.fn();
      if (after_event) after_event(*this);
    }

    finalize_metrics();
    return RunResult{trace_.text(), metrics_};
  }

  // Introspection for tests.
  std::function<void(Simulation&)> after_event;

  const SdtpNodeConn* switch_state(std::uint32_t conn,
                                   const std::string& node) const {
    auto cit = conns_.find(conn);
    if (cit == conns_.end()) return nullptr;
    auto nit = node_ix_.find(node);
    if (nit == node_ix_.end()) return nullptr;
    auto sit = cit->second.switches.find(nit->second);
    return sit == cit->second.switches.end() ? nullptr : &sit->second;
  }

  const PlacementPlan* plan(std::uint32_t conn) const {
    auto it = conns_.find(conn);
    return it != conns_.end() && it->second.has_plan ? &it->second.plan
                                                     : nullptr;
  }

  std::uint64_t in_flight_data() const { return in_flight_data_; }
  SimTime now() const { return now_; }

  const std::vector<PacketRecord>& records(std::uint32_t conn) const {
    return conns_.at(conn).records;
  }

 private:
  struct LinkRt {
    LinkSpec spec;
    std::uint32_t a_ix = 0, b_ix = 0;
    double loss = 0.0;
    SimTime delay_us = 0;
    std::mt19937_64 rng_ab, rng_ba;
    struct Forced {
      SeqNo seq;
      std::uint32_t remaining;
    };
    std::vector<Forced> forced;
  };

  struct NodeRt {
    std::string name;
    bool is_host = false;
  };

  struct ConnRt {
    ConnectionSpec spec;
    std::uint32_t src_ix = 0, dst_ix = 0;
    std::uint32_t edge_a_ix = 0, edge_b_ix = 0;
    std::optional<SdtpSenderHost> ssend;
    std::optional<SdtpReceiverHost> srecv;
    std::optional<TcpSenderHost> tsend;
    std::optional<TcpReceiverHost> trecv;
    std::vector<std::string> full_path;         // host .. host
    std::map<std::uint32_t, size_t> pos;        // node ix -> path position
    std::map<std::uint32_t, SdtpNodeConn> switches;
    bool installed = false;
    PlacementPlan plan;
    bool has_plan = false;
    std::vector<PacketRecord> records;
  };

  // ---- construction ----------------------------------------------------

  void build_topology() {
    for (const auto& n : scn_.nodes) {
      node_ix_[n.name] = static_cast<std::uint32_t>(nodes_.size());
      nodes_.push_back({n.name, n.is_host});
    }
    for (const auto& l : scn_.links) {
      LinkRt rt;
      rt.spec = l;
      rt.a_ix = node_ix_.at(l.a);
      rt.b_ix = node_ix_.at(l.b);
      rt.loss = l.loss;
      rt.delay_us = us_from_ms(l.delay_ms);
      rt.rng_ab.seed(stream_seed(seed_, l.name() + ":ab"));
      rt.rng_ba.seed(stream_seed(seed_, l.name() + ":ba"));
      for (const auto& f : scn_.forced_losses) {
        if (f.link == l.name()) rt.forced.push_back({f.seq, f.count});
      }
      size_t ix = links_.size();
      links_.push_back(std::move(rt));
      link_by_pair_[{links_[ix].a_ix, links_[ix].b_ix}] = ix;
      link_by_pair_[{links_[ix].b_ix, links_[ix].a_ix}] = ix;
    }
  }

  std::uint32_t host_edge(std::uint32_t host_ix) const {
    std::optional<std::uint32_t> edge;
    for (const auto& l : links_) {
      if (l.a_ix == host_ix) {
        require(!edge, "host must attach to exactly one link");
        edge = l.b_ix;
      } else if (l.b_ix == host_ix) {
        require(!edge, "host must attach to exactly one link");
        edge = l.a_ix;
      }
    }
    require(edge.has_value(), "host has no link");
    require(!nodes_[*edge].is_host, "host attaches to a switch");
    return *edge;
  }

  // Switch-graph path for a connection (pinned path minus hosts, or BFS).
  std::optional<std::vector<std::string>> switch_path(
      const ConnectionSpec& cs) const {
    if (!cs.path.empty()) {
      return std::vector<std::string>{cs.path.begin() + 1, cs.path.end() - 1};
    }
    LinkStatusTable table = make_table();
    return table.find_or_deploy_path(
        nodes_[host_edge(node_ix_.at(cs.src))].name,
        nodes_[host_edge(node_ix_.at(cs.dst))].name);
  }

  LinkStatusTable make_table() const {
    LinkStatusTable table;
    for (const auto& l : links_) {
      if (nodes_[l.a_ix].is_host || nodes_[l.b_ix].is_host) continue;
      table.add_link(LinkStatus{l.spec.a, l.spec.b, true,
                                ms_from_us(l.delay_us), l.loss});
    }
    return table;
  }

  // Spread a target end-to-end loss rate evenly over the core links of the
  // (single) connection's path: per-link q with 1-(1-q)^L = target.
  void apply_loss_decomposition() {
    if (!scn_.e2e_loss_rate.has_value()) return;
    const auto& cs = scn_.connections.front();
    auto sw_path = switch_path(cs);
    require(sw_path.has_value(), "e2e decomposition needs a reachable path");
    size_t core_links = sw_path->size() - 1;
    require(core_links >= 1, "e2e decomposition needs at least one core link");
    double q = 1.0 - std::pow(1.0 - *scn_.e2e_loss_rate,
                              1.0 / static_cast<double>(core_links));
    for (size_t i = 0; i + 1 < sw_path->size(); ++i) {
      auto it = link_by_pair_.find(
          {node_ix_.at((*sw_path)[i]), node_ix_.at((*sw_path)[i + 1])});
      require(it != link_by_pair_.end(), "path hop without link");
      links_[it->second].loss = q;
    }
  }

  void build_connections() {
    for (const auto& cs : scn_.connections) {
      ConnRt c;
      c.spec = cs;
      c.src_ix = node_ix_.at(cs.src);
      c.dst_ix = node_ix_.at(cs.dst);
      c.edge_a_ix = host_edge(c.src_ix);
      c.edge_b_ix = host_edge(c.dst_ix);
      c.records.assign(scn_.packet_count, PacketRecord{});
      HostConfig hc;
      hc.conn = cs.id;
      hc.packet_count = scn_.packet_count;
      hc.send_interval_ms = scn_.send_interval_ms;
      hc.retry_ms = scn_.host_retry_ms;
      hc.retry_attempts = scn_.host_retry_attempts;
      hc.min_rto_ms = scn_.tcp_min_rto_ms;
      if (proto_ == Protocol::Sdtp) {
        c.ssend.emplace(hc);
        c.srecv.emplace(hc);
      } else {
        c.tsend.emplace(hc);
        c.trecv.emplace(hc);
      }
      conns_.emplace(cs.id, std::move(c));
    }
  }

  void build_controller() {
    ControllerConfig cc;
    cc.placement_k = scn_.placement_k;
    cc.placement_loss_threshold = scn_.placement_loss_threshold;
    ctrl_.emplace(make_table(), cc);
    for (auto& [id, c] : conns_) {
      std::vector<std::string> pinned;
      if (!c.spec.path.empty()) {
        pinned.assign(c.spec.path.begin() + 1, c.spec.path.end() - 1);
      }
      ctrl_->register_connection(id, c.spec.src, nodes_[c.edge_a_ix].name,
                                 c.spec.dst, nodes_[c.edge_b_ix].name, pinned);
    }
  }

  // For TCP baseline runs the route is static from the start of the run.
  void tcp_install_route(ConnRt& c) {
    if (!c.full_path.empty()) return;
    auto sw = switch_path(c.spec);
    if (!sw) return;  // unreachable: switches drop and the handshake times out
    c.full_path.push_back(c.spec.src);
    for (auto& n : *sw) c.full_path.push_back(n);
    c.full_path.push_back(c.spec.dst);
    for (size_t i = 0; i < c.full_path.size(); ++i)
      c.pos[node_ix_.at(c.full_path[i])] = i;
  }

  // ---- link layer --------------------------------------------------------

  static bool is_data_copy(const SimPacket& pkt, SeqNo* seq_out = nullptr) {
    if (std::holds_alternative<SdtpPacket>(pkt)) {
      const auto& p = std::get<SdtpPacket>(pkt);
      if (p.header.kind == PacketKind::Data || p.header.kind == PacketKind::Rd) {
        if (seq_out) *seq_out = p.header.seq;
        return true;
      }
      return false;
    }
    const auto& t = std::get<TcpPkt>(pkt);
    if (t.kind == TcpPkt::Kind::Data) {
      if (seq_out) *seq_out = t.seq;
      return true;
    }
    return false;
  }

  std::string packet_desc(const SimPacket& pkt) const {
    if (std::holds_alternative<SdtpPacket>(pkt)) {
      const auto& p = std::get<SdtpPacket>(pkt);
      return strf("proto=sdtp kind=%s conn=%u seq=%u", kind_name(p.header.kind),
                  p.header.conn_id, p.header.seq);
    }
    const auto& t = std::get<TcpPkt>(pkt);
    return strf("proto=host kind=%s conn=%u seq=%u ack=%u", t.kind_name(),
                t.conn, t.seq, t.ack_no);
  }

  void send_on_link(std::uint32_t from, std::uint32_t to, SimPacket pkt) {
    auto it = link_by_pair_.find({from, to});
    require(it != link_by_pair_.end(), "no link between adjacent nodes");
    LinkRt& l = links_[it->second];
    SeqNo seq = 0;
    bool data = is_data_copy(pkt, &seq);

    for (auto& f : l.forced) {
      if (data && f.remaining > 0 && f.seq == seq) {
        --f.remaining;
        trace_.log(now_, "forced_drop",
                   strf("link=%s %s", l.spec.name().c_str(),
                        packet_desc(pkt).c_str()));
        ledger_add_loss(data);
        return;
      }
    }
    auto& rng = from == l.a_ix ? l.rng_ab : l.rng_ba;
    if (bernoulli(rng, l.loss)) {
      trace_.log(now_, "link_drop",
                 strf("link=%s %s", l.spec.name().c_str(),
                      packet_desc(pkt).c_str()));
      ledger_add_loss(data);
      return;
    }

    SimTime proc = nodes_[from].is_host ? 0 : us_from_ms(scn_.hop_processing_ms);
    SimTime at = now_ + proc + l.delay_us;
    if (data) ++in_flight_data_;
    q_.schedule(at, EventKind::LinkDeliver, [this, to, from, pkt, data] {
      if (data) --in_flight_data_;
      deliver(to, pkt, from);
    });
  }

  void ledger_add_loss(bool data) {
    if (data)
      ++ledger_.lost_on_link;
    else
      ++lost_control_;
  }

  // ---- delivery dispatch -------------------------------------------------

  void deliver(std::uint32_t node, const SimPacket& pkt, std::uint32_t from) {
    if (nodes_[node].is_host) {
      require(std::holds_alternative<TcpPkt>(pkt),
              "host links carry host segments");
      deliver_to_host(node, std::get<TcpPkt>(pkt));
      return;
    }
    if (proto_ == Protocol::Tcp) {
      require(std::holds_alternative<TcpPkt>(pkt),
              "baseline runs carry host segments only");
      forward_tcp(node, std::get<TcpPkt>(pkt), from);
      return;
    }
    if (std::holds_alternative<TcpPkt>(pkt)) {
      edge_host_side(node, std::get<TcpPkt>(pkt));
      return;
    }
    const auto& sp = std::get<SdtpPacket>(pkt);
    ConnRt& c = conns_.at(sp.header.conn_id);
    require(c.installed, "data-plane packet before flow installation");
    auto sit = c.switches.find(node);
    require(sit != c.switches.end(), "packet at switch without flow entry");
    apply_node_actions(c, node, sit->second.on_packet(sp, now_));
  }

  void deliver_to_host(std::uint32_t host, const TcpPkt& pkt) {
    ConnRt& c = conns_.at(pkt.conn);
    bool sender_side = host == c.src_ix;
    if (proto_ == Protocol::Sdtp) {
      auto act = sender_side ? c.ssend->on_packet(pkt, now_)
                             : c.srecv->on_packet(pkt, now_);
      apply_host_actions(c, sender_side, act);
    } else {
      auto act = sender_side ? c.tsend->on_packet(pkt, now_)
                             : c.trecv->on_packet(pkt, now_);
      apply_host_actions(c, sender_side, act);
    }
  }

  // TCP baseline switches only forward, out the far side of the entry port.
  void forward_tcp(std::uint32_t node, const TcpPkt& pkt, std::uint32_t from) {
    ConnRt& c = conns_.at(pkt.conn);
    if (c.full_path.empty() || !c.pos.count(node) || !c.pos.count(from)) {
      trace_.log(now_, "no_route",
                 strf("node=%s %s", nodes_[node].name.c_str(),
                      packet_desc(SimPacket{pkt}).c_str()));
      if (pkt.kind == TcpPkt::Kind::Data) ++ledger_.lost_on_link;
      return;
    }
    size_t pos = c.pos.at(node);
    size_t next = c.pos.at(from) < pos ? pos + 1 : pos - 1;
    send_on_link(node, node_ix_.at(c.full_path[next]), pkt);
  }

  // SDTP edge behavior on the host-facing side: handshake encapsulation, the
  // synthetic ACK patch, host-ACK absorption, and data conversion.
  void edge_host_side(std::uint32_t node, const TcpPkt& pkt) {
    ConnRt& c = conns_.at(pkt.conn);
    if (node == c.edge_a_ix) {
      switch (pkt.kind) {
        case TcpPkt::Kind::Syn: {
          SdtpPacket syn;
          syn.header.kind = PacketKind::Syn;
          syn.header.conn_id = pkt.conn;
          syn.header.slice_id = c.spec.slice;
          syn.header.timestamp = ts_of(now_);
          packet_in(c, nodes_[node].name, syn);
          break;
        }
        case TcpPkt::Kind::Ack:
          // Step-5 patch: the sending edge absorbs the host's handshake ACK.
          trace_.log(now_, "host_ack_dropped",
                     strf("conn=%u edge=%s", pkt.conn, nodes_[node].name.c_str()));
          break;
        case TcpPkt::Kind::Data: {
          require(c.installed, "host data before flow installation");
          SdtpPacket data;
          data.header.kind = PacketKind::Data;
          data.header.conn_id = pkt.conn;
          data.header.slice_id = c.spec.slice;
          data.header.seq = pkt.seq;
          data.header.timestamp = ts_of(now_);
          auto sit = c.switches.find(node);
          require(sit != c.switches.end(), "sending edge not installed");
          apply_node_actions(c, node, sit->second.on_packet(data, now_));
          break;
        }
        default:
          require(false, "unexpected host segment at sending edge");
      }
      return;
    }
    require(node == c.edge_b_ix, "host segment at non-edge switch");
    require(pkt.kind == TcpPkt::Kind::SynAck,
            "receiving edge expects only SYN-ACK from its host");
    // Step-5 patch: tell host B the establishment is done with a synthesized
    // ACK, then push the SYN-ACK into the control plane.
    trace_.log(now_, "synthetic_ack",
               strf("conn=%u edge=%s", pkt.conn, nodes_[node].name.c_str()));
    send_on_link(node, c.dst_ix, TcpPkt{TcpPkt::Kind::Ack, pkt.conn, 0, 0});
    SdtpPacket sa;
    sa.header.kind = PacketKind::SynAck;
    sa.header.conn_id = pkt.conn;
    sa.header.slice_id = c.spec.slice;
    sa.header.timestamp = ts_of(now_);
    packet_in(c, nodes_[node].name, sa);
  }

  // ---- control plane -----------------------------------------------------

  void packet_in(ConnRt& c, const std::string& edge, const SdtpPacket& pkt) {
    trace_.log(now_, "packet_in",
               strf("conn=%u kind=%s edge=%s", pkt.header.conn_id,
                    kind_name(pkt.header.kind), edge.c_str()));
    auto out = ctrl_->handle_packet_in(pkt, edge, now_);
    if (out.path_failure) {
      trace_.log(now_, "path_failure", strf("conn=%u", pkt.header.conn_id));
      return;
    }
    SimTime at = now_ + us_from_ms(scn_.control_delay_ms);
    std::uint32_t conn_id = c.spec.id;
    if (out.install) {
      PlacementPlan plan = *out.install;
      q_.schedule(at, EventKind::ControlDeliver, [this, conn_id, plan] {
        do_install(conns_.at(conn_id), plan);
      });
    }
    if (out.has_packet_out) {
      ++metrics_.control_packet_outs;
      std::string edge_name = out.packet_out_edge;
      SdtpPacket po = out.packet_out;
      q_.schedule(at, EventKind::ControlDeliver, [this, conn_id, edge_name, po] {
        packet_out_arrive(conns_.at(conn_id), edge_name, po);
      });
    }
  }

  void packet_out_arrive(ConnRt& c, const std::string& edge,
                         const SdtpPacket& pkt) {
    trace_.log(now_, "packet_out",
               strf("conn=%u kind=%s edge=%s", pkt.header.conn_id,
                    kind_name(pkt.header.kind), edge.c_str()));
    std::uint32_t edge_ix = node_ix_.at(edge);
    if (pkt.header.kind == PacketKind::Syn) {
      require(edge_ix == c.edge_b_ix, "SYN packet-out must reach peer edge");
      send_on_link(edge_ix, c.dst_ix, TcpPkt{TcpPkt::Kind::Syn, c.spec.id, 0, 0});
    } else {
      require(edge_ix == c.edge_a_ix, "SYN-ACK packet-out must reach peer edge");
      send_on_link(edge_ix, c.src_ix,
                   TcpPkt{TcpPkt::Kind::SynAck, c.spec.id, 0, 0});
    }
  }

  void do_install(ConnRt& c, const PlacementPlan& plan) {
    if (!c.installed) {
      c.full_path.clear();
      c.full_path.push_back(c.spec.src);
      for (const auto& n : plan.path) c.full_path.push_back(n);
      c.full_path.push_back(c.spec.dst);
      c.pos.clear();
      for (size_t i = 0; i < c.full_path.size(); ++i)
        c.pos[node_ix_.at(c.full_path[i])] = i;
    }
    for (const auto& name : plan.path) {
      std::uint32_t ix = node_ix_.at(name);
      if (c.switches.count(ix)) continue;  // re-install is idempotent
      const NodeRole& role = plan.roles.at(name);
      CrNodeConfig nc;
      nc.node_name = name;
      nc.conn_id = c.spec.id;
      nc.slice_id = c.spec.slice;
      nc.caching = role.caching;
      nc.retrans = role.retrans;
      nc.sending_edge = role.sending_edge;
      nc.receiving_edge = role.receiving_edge;
      nc.cache_capacity = scn_.cache_capacity;
      nc.send_interval_ms = scn_.send_interval_ms;
      nc.flow_length = scn_.packet_count;
      nc.cn_period_ms = scn_.cn_period_ms;
      nc.initial_rt_rtt_ms = scn_.initial_rt_rtt_ms;
      nc.rt_timer_slack_ms = scn_.rt_timer_slack_ms;
      nc.rr_suppression_ms = scn_.rr_suppression_ms;
      nc.max_rt_attempts = scn_.max_rt_attempts;
      c.switches.emplace(ix, SdtpNodeConn(nc));
      trace_.log(now_, "install",
                 strf("conn=%u node=%s caching=%d retrans=%d", c.spec.id,
                      name.c_str(), role.caching ? 1 : 0, role.retrans ? 1 : 0));
    }
    if (!c.has_plan) {
      c.plan = plan;
      c.has_plan = true;
    }
    c.installed = true;
  }

  // ---- action application ------------------------------------------------

  void apply_node_actions(ConnRt& c, std::uint32_t node_ix, NodeActions act) {
    for (const auto& n : act.notes) trace_.log(now_, n.event, n.fields);
    for (SeqNo s : act.retransmitted) {
      if (s < c.records.size()) ++c.records[s].retx;
      ++ledger_.copies_sent;
    }
    ledger_.dup_dropped += act.dup_drops;

    size_t pos = c.pos.at(node_ix);
    for (const auto& e : act.emits) {
      switch (e.dir) {
        case EmitDir::Down: {
          require(pos + 1 < c.full_path.size() - 1,
                  "downstream emission cannot target the host");
          send_on_link(node_ix, node_ix_.at(c.full_path[pos + 1]), e.pkt);
          break;
        }
        case EmitDir::Up: {
          require(pos >= 2, "upstream emission cannot target the host");
          send_on_link(node_ix, node_ix_.at(c.full_path[pos - 1]), e.pkt);
          break;
        }
        case EmitDir::Host: {
          require(pos + 2 == c.full_path.size(),
                  "host delivery only from the receiving edge");
          TcpPkt d;
          d.kind = TcpPkt::Kind::Data;
          d.conn = c.spec.id;
          d.seq = e.pkt.header.seq;
          send_on_link(node_ix, c.dst_ix, d);
          break;
        }
      }
    }
    std::uint32_t conn_id = c.spec.id;
    for (const auto& t : act.timers) {
      q_.schedule(t.at, EventKind::TimerFire,
                  [this, conn_id, node_ix, kind = t.kind, a = t.a, b = t.b] {
                    ConnRt& cc = conns_.at(conn_id);
                    auto it = cc.switches.find(node_ix);
                    if (it == cc.switches.end()) return;
                    apply_node_actions(cc, node_ix,
                                       it->second.on_timer(kind, a, b, now_));
                  });
    }
  }

  void apply_host_actions(ConnRt& c, bool sender_side, HostActions act) {
    for (const auto& n : act.notes) trace_.log(now_, n.event, n.fields);
    for (SeqNo s : act.sends) {
      if (s < c.records.size()) c.records[s].first_sent = now_;
      ++ledger_.copies_sent;
    }
    for (SeqNo s : act.retransmits) {
      if (s < c.records.size()) ++c.records[s].retx;
      ++ledger_.copies_sent;
    }
    for (const auto& [seq, t] : act.deliveries) {
      if (seq < c.records.size()) {
        if (c.records[seq].delivered == kNoTime) c.records[seq].delivered = t;
        ++c.records[seq].deliveries;
      }
      ++ledger_.delivered_app;
      trace_.log(t, "host_deliver",
                 strf("conn=%u seq=%u host=%s", c.spec.id, seq,
                      nodes_[sender_side ? c.src_ix : c.dst_ix].name.c_str()));
    }
    ledger_.dup_dropped += act.dup_drops;

    std::uint32_t host_ix = sender_side ? c.src_ix : c.dst_ix;
    std::uint32_t edge_ix = sender_side ? c.edge_a_ix : c.edge_b_ix;
    for (const auto& pkt : act.emits) {
      trace_.log(now_, "host_send",
                 strf("host=%s %s", nodes_[host_ix].name.c_str(),
                      packet_desc(SimPacket{pkt}).c_str()));
      if (pkt.kind != TcpPkt::Kind::Data) ++handshake_msgs_;
      send_on_link(host_ix, edge_ix, pkt);
    }
    std::uint32_t conn_id = c.spec.id;
    for (const auto& t : act.timers) {
      q_.schedule(t.at, EventKind::TimerFire,
                  [this, conn_id, sender_side, kind = t.kind, gen = t.gen] {
                    ConnRt& cc = conns_.at(conn_id);
                    HostActions a2;
                    if (proto_ == Protocol::Sdtp) {
                      a2 = sender_side ? cc.ssend->on_timer(kind, gen, now_)
                                       : cc.srecv->on_timer(kind, gen, now_);
                    } else {
                      a2 = sender_side ? cc.tsend->on_timer(kind, gen, now_)
                                       : cc.trecv->on_timer(kind, gen, now_);
                    }
                    apply_host_actions(cc, sender_side, a2);
                  });
    }
  }

  // ---- finalization --------------------------------------------------------

  void finalize_metrics() {
    metrics_.scenario_id = scn_.id;
    metrics_.protocol = protocol_name(proto_);
    metrics_.seed = seed_;
    metrics_.control_delay_ms = scn_.control_delay_ms;
    metrics_.loss_rate = effective_loss_rate();

    const ConnRt& c = conns_.begin()->second;
    metrics_.packets = c.records;
    std::uint64_t delivered = 0;
    for (const auto& r : c.records) {
      if (r.delivered != kNoTime) ++delivered;
      metrics_.retx_count += r.retx;
    }
    metrics_.undelivered = scn_.packet_count - delivered;
    finalize_delay_stats(metrics_);

    if (proto_ == Protocol::Sdtp) {
      SimTime a_ready = c.ssend->established_at();
      SimTime b_ready = c.srecv->conn_done_at();
      if (a_ready != kNoTime && b_ready != kNoTime) {
        metrics_.conn_delay_ms =
            ms_from_us(std::max(a_ready, b_ready) - c.ssend->syn_first_sent());
      }
    } else {
      SimTime done = c.trecv->conn_done_at();
      if (done != kNoTime) {
        metrics_.conn_delay_ms = ms_from_us(done - c.tsend->syn_first_sent());
      }
    }

    std::uint64_t buffered = 0;
    for (const auto& [id, cc] : conns_) {
      for (const auto& [ix, sw] : cc.switches) {
        auto& agg = metrics_.node_counters[nodes_[ix].name];
        const NodeCounters& nc = sw.counters();
        agg.forwarded += nc.forwarded;
        agg.cached += nc.cached;
        agg.evicted += nc.evicted;
        agg.released += nc.released;
        agg.rr_sent += nc.rr_sent;
        agg.rr_served += nc.rr_served;
        agg.rr_forwarded += nc.rr_forwarded;
        agg.rr_suppressed += nc.rr_suppressed;
        agg.rr_absorbed += nc.rr_absorbed;
        agg.rd_sent += nc.rd_sent;
        agg.ri_sent += nc.ri_sent;
        agg.cn_sent += nc.cn_sent;
        agg.unrecoverable += nc.unrecoverable;
        agg.dup_dropped += nc.dup_dropped;
        metrics_.unrecoverable_total += nc.unrecoverable;
        buffered += sw.reorder_backlog();
      }
      if (proto_ == Protocol::Tcp) buffered += cc.trecv->buffered();
    }
    ledger_.buffered_end = buffered;
    ledger_.in_flight_end = in_flight_data_;
    metrics_.ledger = ledger_;
    metrics_.e2e_handshake_msgs = handshake_msgs_;

    if (proto_ == Protocol::Sdtp && c.has_plan) {
      std::string summary;
      for (size_t i = 0; i < c.plan.segments.size(); ++i) {
        const auto& s = c.plan.segments[i];
        summary += strf("seg%zu rt=%s loss=%.6f caches=", i,
                        s.retrans_node.c_str(), s.loss_prob);
        for (size_t j = 0; j < s.caching_nodes.size(); ++j) {
          if (j) summary += '+';
          summary += s.caching_nodes[j];
        }
        summary += ' ';
      }
      trace_.log(now_, "placement", summary);
    }
    trace_.log(now_, "run_end",
               strf("sent=%llu delivered=%llu lost=%llu dup=%llu inflight=%llu "
                    "buffered=%llu lost_control=%llu",
                    (unsigned long long)ledger_.copies_sent,
                    (unsigned long long)ledger_.delivered_app,
                    (unsigned long long)ledger_.lost_on_link,
                    (unsigned long long)ledger_.dup_dropped,
                    (unsigned long long)ledger_.in_flight_end,
                    (unsigned long long)ledger_.buffered_end,
                    (unsigned long long)lost_control_));
  }

  double effective_loss_rate() const {
    if (scn_.e2e_loss_rate) return *scn_.e2e_loss_rate;
    // Product over the core links of the first connection's path.
    auto sw = switch_path(scn_.connections.front());
    if (!sw) return 0.0;
    double keep = 1.0;
    for (size_t i = 0; i + 1 < sw->size(); ++i) {
      auto it = link_by_pair_.find(
          {node_ix_.at((*sw)[i]), node_ix_.at((*sw)[i + 1])});
      if (it != link_by_pair_.end()) keep *= 1.0 - links_[it->second].loss;
    }
    return 1.0 - keep;
  }

  Scenario scn_;
  Protocol proto_;
  std::uint64_t seed_;

  std::vector<NodeRt> nodes_;
  std::map<std::string, std::uint32_t> node_ix_;
  std::vector<LinkRt> links_;
  std::map<std::pair<std::uint32_t, std::uint32_t>, size_t> link_by_pair_;
  std::map<std::uint32_t, ConnRt> conns_;
  std::optional<Controller> ctrl_;

  EventQueue q_;
  TraceLog trace_;
  SimTime now_ = 0;
  Metrics metrics_;
  Ledger ledger_;
  std::uint64_t lost_control_ = 0;
  std::uint64_t in_flight_data_ = 0;
  std::uint64_t handshake_msgs_ = 0;
};

inline RunResult run_one(const Scenario& scn, Protocol proto,
                         std::uint64_t seed) {
  Simulation sim(scn, proto, seed);
  return sim.run();
}

// Per-connection establishment delay (ms), -1 when never established.
inline double measure_connection_delay(const RunResult& r) {
  return r.metrics.conn_delay_ms;
}

// Per-packet delay series (ms) in sequence order; undelivered packets are
// skipped. Mean and jitter are in the metrics.
inline std::vector<std::pair<SeqNo, double>> measure_e2e_delay(
    const RunResult& r) {
  std::vector<std::pair<SeqNo, double>> out;
  for (size_t s = 0; s < r.metrics.packets.size(); ++s) {
    const auto& p = r.metrics.packets[s];
    if (p.delivered == kNoTime) continue;
    out.emplace_back(static_cast<SeqNo>(s), ms_from_us(p.delivered - p.first_sent));
  }
  return out;
}

}  // namespace sdtp
