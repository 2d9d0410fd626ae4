#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sdtp/core.hpp"
#include "sdtp/packet.hpp"
#include "sdtp/placement.hpp"

namespace sdtp {

// Controller-side view of one physical link.
struct LinkStatus {
  std::string a;
  std::string b;
  bool up = true;
  double delay_ms = 0.0;
  double loss = 0.0;
};

// Local link-status table plus cached edge-to-edge paths. Paths are computed
// over up links by hop-count BFS with deterministic neighbor order.
class LinkStatusTable {
 public:
  void add_switch(const std::string& name) {
    if (!adjacency_.count(name)) {
      order_.push_back(name);
      adjacency_[name] = {};
    }
  }

  void add_link(const LinkStatus& l) {
    links_.push_back(l);
    add_switch(l.a);
    add_switch(l.b);
    adjacency_[l.a].push_back(l.b);
    adjacency_[l.b].push_back(l.a);
  }

  void set_link_up(const std::string& a, const std::string& b, bool up) {
    for (auto& l : links_) {
      if ((l.a == a && l.b == b) || (l.a == b && l.b == a)) l.up = up;
    }
    paths_.clear();  // invalidate cached paths
  }

  const LinkStatus* find(const std::string& a, const std::string& b) const {
    for (const auto& l : links_)
      if ((l.a == a && l.b == b) || (l.a == b && l.b == a)) return &l;
    return nullptr;
  }

  bool link_up(const std::string& a, const std::string& b) const {
    const LinkStatus* l = find(a, b);
    return l && l->up;
  }

  // Cached path if present and still valid, else a freshly deployed one.
  std::optional<std::vector<std::string>> find_or_deploy_path(
      const std::string& from, const std::string& to) {
    auto key = std::make_pair(from, to);
    auto it = paths_.find(key);
    if (it != paths_.end()) {
      bool ok = true;
      for (size_t i = 0; i + 1 < it->second.size(); ++i)
        ok = ok && link_up(it->second[i], it->second[i + 1]);
      if (ok) return it->second;
      paths_.erase(it);
    }
    auto path = bfs(from, to);
    if (path) paths_[key] = *path;
    return path;
  }

  bool has_cached_path(const std::string& from, const std::string& to) const {
    return paths_.count({from, to}) > 0;
  }

  std::vector<double> path_losses(const std::vector<std::string>& path) const {
    std::vector<double> out;
    for (size_t i = 0; i + 1 < path.size(); ++i) {
      const LinkStatus* l = find(path[i], path[i + 1]);
      out.push_back(l ? l->loss : 0.0);
    }
    return out;
  }

  std::vector<double> path_delays(const std::vector<std::string>& path) const {
    std::vector<double> out;
    for (size_t i = 0; i + 1 < path.size(); ++i) {
      const LinkStatus* l = find(path[i], path[i + 1]);
      out.push_back(l ? l->delay_ms : 0.0);
    }
    return out;
  }

 private:
  std::optional<std::vector<std::string>> bfs(const std::string& from,
                                              const std::string& to) const {
    if (!adjacency_.count(from) || !adjacency_.count(to)) return std::nullopt;
    std::map<std::string, std::string> parent;
    std::deque<std::string> frontier{from};
    parent[from] = from;
    while (!frontier.empty()) {
      std::string cur = frontier.front();
      frontier.pop_front();
      if (cur == to) break;
      for (const auto& next : adjacency_.at(cur)) {
        if (parent.count(next) || !link_up(cur, next)) continue;
        parent[next] = cur;
        frontier.push_back(next);
      }
    }
    if (!parent.count(to)) return std::nullopt;
    std::vector<std::string> path;
    for (std::string cur = to; cur != from; cur = parent[cur])
      path.push_back(cur);
    path.push_back(from);
    std::reverse(path.begin(), path.end());
    return path;
  }

  std::vector<LinkStatus> links_;
  std::map<std::string, std::vector<std::string>> adjacency_;
  std::vector<std::string> order_;
  std::map<std::pair<std::string, std::string>, std::vector<std::string>> paths_;
};

enum class ConnState { SynSeen, Established, Failed };

struct ConnectionRecord {
  std::uint32_t conn_id = 0;
  std::string host_a;
  std::string host_b;
  std::string edge_a;
  std::string edge_b;
  ConnState state = ConnState::SynSeen;
  std::vector<std::string> path_forward;  // edge_a .. edge_b (switches)
  std::vector<std::string> path_reverse;
  std::uint64_t packet_outs = 0;
};

// Per-switch function activation for one connection.
struct NodeRole {
  bool caching = false;
  bool retrans = false;
  bool sending_edge = false;
  bool receiving_edge = false;
};

struct PlacementPlan {
  std::vector<std::string> path;  // switches, sending edge .. receiving edge
  std::vector<std::string> caching_nodes;
  std::vector<CrSegment> segments;
  std::map<std::string, NodeRole> roles;
};

// Effects of processing one packet-in. The simulation applies packet-outs and
// installs after the configured control delay.
struct ControlOutcome {
  bool path_failure = false;
  std::string packet_out_edge;
  SdtpPacket packet_out;
  bool has_packet_out = false;
  std::optional<PlacementPlan> install;  // on first SYN
  ConnState state_after = ConnState::SynSeen;
};

struct ControllerConfig {
  std::uint32_t placement_k = 1;
  double placement_loss_threshold = 0.01;
};

// Logically centralized controller: two-way handshake mediation and
// caching/retransmission placement, driven by edge packet-ins.
class Controller {
 public:
  Controller(LinkStatusTable table, ControllerConfig cfg)
      : table_(std::move(table)), cfg_(cfg) {}

  void register_connection(std::uint32_t conn_id, const std::string& host_a,
                           const std::string& edge_a, const std::string& host_b,
                           const std::string& edge_b,
                           std::vector<std::string> pinned_path = {}) {
    ConnectionRecord rec;
    rec.conn_id = conn_id;
    rec.host_a = host_a;
    rec.host_b = host_b;
    rec.edge_a = edge_a;
    rec.edge_b = edge_b;
    conns_[conn_id] = rec;
    if (!pinned_path.empty()) pinned_paths_[conn_id] = std::move(pinned_path);
  }

  ControlOutcome handle_packet_in(const SdtpPacket& pkt,
                                  const std::string& from_edge, SimTime now) {
    (void)now;
    require(pkt.header.kind == PacketKind::Syn ||
                pkt.header.kind == PacketKind::SynAck,
            "packet-in must carry SYN or SYN-ACK");
    auto it = conns_.find(pkt.header.conn_id);
    require(it != conns_.end(), "packet-in for unregistered connection");
    ConnectionRecord& rec = it->second;

    ControlOutcome out;
    if (pkt.header.kind == PacketKind::Syn) {
      require(from_edge == rec.edge_a, "SYN packet-in from wrong edge");
      auto path = resolve_path(rec.conn_id, rec.edge_a, rec.edge_b);
      if (!path) {
        rec.state = ConnState::Failed;
        out.path_failure = true;
        out.state_after = rec.state;
        return out;
      }
      bool first_syn = rec.path_forward.empty();
      rec.path_forward = *path;
      rec.path_reverse = *path;
      std::reverse(rec.path_reverse.begin(), rec.path_reverse.end());
      if (rec.state != ConnState::Established) rec.state = ConnState::SynSeen;
      if (first_syn) out.install = build_placement(rec.path_forward);
      out.packet_out_edge = rec.edge_b;
      out.packet_out = pkt;
      out.has_packet_out = true;
      ++rec.packet_outs;
    } else {
      require(from_edge == rec.edge_b, "SYN-ACK packet-in from wrong edge");
      // Reverse reachability: every forward link must be up in reverse.
      bool ok = !rec.path_forward.empty();
      for (size_t i = 0; ok && i + 1 < rec.path_reverse.size(); ++i)
        ok = table_.link_up(rec.path_reverse[i], rec.path_reverse[i + 1]);
      if (!ok) {
        rec.state = ConnState::Failed;
        out.path_failure = true;
        out.state_after = rec.state;
        return out;
      }
      rec.state = ConnState::Established;
      out.packet_out_edge = rec.edge_a;
      out.packet_out = pkt;
      out.has_packet_out = true;
      ++rec.packet_outs;
    }
    out.state_after = rec.state;
    return out;
  }

  // EP-policy placement for a switch path, from the controller's link table.
  PlacementPlan build_placement(const std::vector<std::string>& path) const {
    PathSpec spec;
    spec.nodes = path;
    spec.link_loss = table_.path_losses(path);
    spec.link_delay_ms = table_.path_delays(path);

    PlacementPlan plan;
    plan.path = path;
    plan.caching_nodes =
        select_caching_nodes(spec, cfg_.placement_loss_threshold);
    plan.segments = partition_ep(spec, plan.caching_nodes, cfg_.placement_k);
    for (const auto& n : path) plan.roles[n] = NodeRole{};
    for (const auto& n : plan.caching_nodes) plan.roles[n].caching = true;
    for (const auto& seg : plan.segments) plan.roles[seg.retrans_node].retrans = true;
    plan.roles[path.front()].sending_edge = true;
    plan.roles[path.front()].caching = true;
    plan.roles[path.back()].receiving_edge = true;
    plan.roles[path.back()].caching = true;
    plan.roles[path.back()].retrans = true;
    return plan;
  }

  const ConnectionRecord* connection(std::uint32_t id) const {
    auto it = conns_.find(id);
    return it == conns_.end() ? nullptr : &it->second;
  }

  LinkStatusTable& table() { return table_; }

 private:
  std::optional<std::vector<std::string>> resolve_path(std::uint32_t conn_id,
                                                       const std::string& a,
                                                       const std::string& b) {
    auto pin = pinned_paths_.find(conn_id);
    if (pin != pinned_paths_.end()) {
      for (size_t i = 0; i + 1 < pin->second.size(); ++i)
        if (!table_.link_up(pin->second[i], pin->second[i + 1]))
          return std::nullopt;
      return pin->second;
    }
    return table_.find_or_deploy_path(a, b);
  }

  LinkStatusTable table_;
  ControllerConfig cfg_;
  std::map<std::uint32_t, ConnectionRecord> conns_;
  std::map<std::uint32_t, std::vector<std::string>> pinned_paths_;
};

}  // namespace sdtp
