#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdtp/core.hpp"

namespace sdtp {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Protocol { Sdtp, Tcp };

inline const char* protocol_name(Protocol p) {
  return p == Protocol::Sdtp ? "sdtp" : "tcp";
}

struct NodeSpec {
  std::string name;
  bool is_host = false;
};

struct LinkSpec {
  std::string a;
  std::string b;
  double delay_ms = 0.0;
  double loss = 0.0;

  std::string name() const { return a + "-" + b; }
};

struct ConnectionSpec {
  std::uint32_t id = 1;
  std::uint32_t slice = 1;
  std::string src;
  std::string dst;
  std::vector<std::string> path;  // optional; empty = controller computes
};

struct ForcedLoss {
  std::string link;  // "a-b"
  SeqNo seq = 0;
  std::uint32_t count = 1;
};

struct Scenario {
  std::string id = "scenario";
  std::uint64_t seed = 1;
  std::vector<std::string> protocols;  // "sdtp", "tcp"
  std::vector<NodeSpec> nodes;
  std::vector<LinkSpec> links;
  std::vector<ConnectionSpec> connections;

  std::uint64_t packet_count = 100;
  double send_interval_ms = 15.0;

  std::uint32_t placement_k = 1;
  double placement_loss_threshold = 0.01;

  double control_delay_ms = 10.0;
  double cn_period_ms = 150.0;
  std::uint64_t cache_capacity = 0;  // packets; 0 = unlimited
  std::optional<double> e2e_loss_rate;
  std::vector<ForcedLoss> forced_losses;

  double hop_processing_ms = 0.0;
  double host_retry_ms = 1000.0;
  std::uint32_t host_retry_attempts = 3;
  double initial_rt_rtt_ms = 10.0;
  double rt_timer_slack_ms = 5.0;
  double rr_suppression_ms = 50.0;
  std::uint32_t max_rt_attempts = 8;
  double tcp_min_rto_ms = 200.0;
  double horizon_ms = 0.0;  // 0 = auto

  nlohmann::json source;  // canonical json, kept for manifests/variants

  const NodeSpec* find_node(const std::string& name) const {
    for (const auto& n : nodes)
      if (n.name == name) return &n;
    return nullptr;
  }

  const LinkSpec* find_link(const std::string& a, const std::string& b) const {
    for (const auto& l : links)
      if ((l.a == a && l.b == b) || (l.a == b && l.b == a)) return &l;
    return nullptr;
  }

  // Effective horizon for the event loop.
  SimTime horizon_us() const {
    double ms = horizon_ms > 0.0
                    ? horizon_ms
                    : std::max(60000.0, static_cast<double>(packet_count) *
                                                send_interval_ms * 10.0);
    return us_from_ms(ms);
  }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj,
                                const std::set<std::string>& allowed,
                                const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key()))
      throw ScenarioError("unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
T get_or(const nlohmann::json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ScenarioError(std::string("bad value type for '") + key + "'");
  }
}

}  // namespace detail

// Strict scenario parser: unknown keys are errors so that typos cannot turn
// into silent defaults across a sweep.
inline Scenario scenario_from_json(const nlohmann::json& j) {
  using nlohmann::json;
  if (!j.is_object()) throw ScenarioError("scenario must be a JSON object");
  detail::reject_unknown_keys(
      j,
      {"id", "seed", "protocol", "topology", "connections", "traffic",
       "placement", "control_delay_ms", "cn_period_ms", "cache_capacity",
       "e2e_loss_rate", "forced_losses", "hop_processing_ms", "host_retry_ms",
       "host_retry_attempts", "initial_rt_rtt_ms", "rt_timer_slack_ms",
       "rr_suppression_ms", "max_rt_attempts", "tcp_min_rto_ms", "horizon_ms"},
      "scenario");

  Scenario s;
  s.source = j;
  s.id = detail::get_or<std::string>(j, "id", "scenario");
  s.seed = detail::get_or<std::uint64_t>(j, "seed", 1);

  std::string proto = detail::get_or<std::string>(j, "protocol", "sdtp");
  if (proto == "both") {
    s.protocols = {"sdtp", "tcp"};
  } else if (proto == "sdtp" || proto == "tcp") {
    s.protocols = {proto};
  } else {
    throw ScenarioError("protocol must be sdtp, tcp or both");
  }

  if (!j.contains("topology")) throw ScenarioError("missing topology");
  const auto& topo = j.at("topology");
  detail::reject_unknown_keys(topo, {"nodes", "links"}, "topology");
  if (!topo.contains("nodes") || !topo.contains("links"))
    throw ScenarioError("topology requires nodes and links");
  for (const auto& jn : topo.at("nodes")) {
    detail::reject_unknown_keys(jn, {"name", "kind"}, "topology.nodes[]");
    NodeSpec n;
    n.name = jn.at("name").get<std::string>();
    std::string kind = detail::get_or<std::string>(jn, "kind", "switch");
    if (kind != "host" && kind != "switch")
      throw ScenarioError("node kind must be host or switch: " + n.name);
    n.is_host = kind == "host";
    if (s.find_node(n.name)) throw ScenarioError("duplicate node " + n.name);
    s.nodes.push_back(n);
  }
  for (const auto& jl : topo.at("links")) {
    detail::reject_unknown_keys(jl, {"a", "b", "delay_ms", "loss"},
                                "topology.links[]");
    LinkSpec l;
    l.a = jl.at("a").get<std::string>();
    l.b = jl.at("b").get<std::string>();
    l.delay_ms = detail::get_or<double>(jl, "delay_ms", 1.0);
    l.loss = detail::get_or<double>(jl, "loss", 0.0);
    if (!s.find_node(l.a) || !s.find_node(l.b))
      throw ScenarioError("link references unknown node: " + l.name());
    if (l.loss < 0.0 || l.loss > 1.0)
      throw ScenarioError("link loss outside [0,1]: " + l.name());
    if (l.delay_ms < 0.0)
      throw ScenarioError("negative link delay: " + l.name());
    s.links.push_back(l);
  }

  if (!j.contains("connections") || j.at("connections").empty())
    throw ScenarioError("at least one connection required");
  for (const auto& jc : j.at("connections")) {
    detail::reject_unknown_keys(jc, {"id", "slice", "src", "dst", "path"},
                                "connections[]");
    ConnectionSpec c;
    c.id = detail::get_or<std::uint32_t>(jc, "id", 1);
    c.slice = detail::get_or<std::uint32_t>(jc, "slice", c.id);
    c.src = jc.at("src").get<std::string>();
    c.dst = jc.at("dst").get<std::string>();
    for (const auto& n : {c.src, c.dst}) {
      const NodeSpec* ns = s.find_node(n);
      if (!ns || !ns->is_host)
        throw ScenarioError("connection endpoint must be a host: " + n);
    }
    if (jc.contains("path")) {
      for (const auto& p : jc.at("path")) {
        std::string name = p.get<std::string>();
        if (!s.find_node(name))
          throw ScenarioError("path references unknown node: " + name);
        c.path.push_back(name);
      }
      if (c.path.size() < 3 || c.path.front() != c.src || c.path.back() != c.dst)
        throw ScenarioError("path must run host src .. dst");
      for (size_t i = 0; i + 1 < c.path.size(); ++i)
        if (!s.find_link(c.path[i], c.path[i + 1]))
          throw ScenarioError("path hop has no link: " + c.path[i] + "-" +
                              c.path[i + 1]);
    }
    s.connections.push_back(c);
  }

  if (j.contains("traffic")) {
    const auto& jt = j.at("traffic");
    detail::reject_unknown_keys(jt, {"packet_count", "send_interval_ms"},
                                "traffic");
    s.packet_count = detail::get_or<std::uint64_t>(jt, "packet_count", 100);
    s.send_interval_ms = detail::get_or<double>(jt, "send_interval_ms", 15.0);
  }
  if (s.packet_count < 1) throw ScenarioError("packet_count must be >= 1");
  if (s.send_interval_ms <= 0.0)
    throw ScenarioError("send_interval_ms must be > 0");

  if (j.contains("placement")) {
    const auto& jp = j.at("placement");
    detail::reject_unknown_keys(jp, {"k", "loss_threshold"}, "placement");
    s.placement_k = detail::get_or<std::uint32_t>(jp, "k", 1);
    s.placement_loss_threshold =
        detail::get_or<double>(jp, "loss_threshold", 0.01);
  }
  if (s.placement_k < 1) throw ScenarioError("placement.k must be >= 1");

  s.control_delay_ms = detail::get_or<double>(j, "control_delay_ms", 10.0);
  s.cn_period_ms = detail::get_or<double>(j, "cn_period_ms", 150.0);
  s.cache_capacity = detail::get_or<std::uint64_t>(j, "cache_capacity", 0);
  if (j.contains("e2e_loss_rate")) {
    double r = j.at("e2e_loss_rate").get<double>();
    if (r < 0.0 || r >= 1.0) throw ScenarioError("e2e_loss_rate outside [0,1)");
    if (s.connections.size() != 1)
      throw ScenarioError("e2e_loss_rate requires exactly one connection");
    s.e2e_loss_rate = r;
  }
  if (j.contains("forced_losses")) {
    for (const auto& jf : j.at("forced_losses")) {
      detail::reject_unknown_keys(jf, {"link", "seq", "count"},
                                  "forced_losses[]");
      ForcedLoss f;
      f.link = jf.at("link").get<std::string>();
      f.seq = jf.at("seq").get<SeqNo>();
      f.count = detail::get_or<std::uint32_t>(jf, "count", 1);
      s.forced_losses.push_back(f);
    }
  }

  s.hop_processing_ms = detail::get_or<double>(j, "hop_processing_ms", 0.0);
  s.host_retry_ms = detail::get_or<double>(j, "host_retry_ms", 1000.0);
  s.host_retry_attempts =
      detail::get_or<std::uint32_t>(j, "host_retry_attempts", 3);
  s.initial_rt_rtt_ms = detail::get_or<double>(j, "initial_rt_rtt_ms", 10.0);
  s.rt_timer_slack_ms = detail::get_or<double>(j, "rt_timer_slack_ms", 5.0);
  s.rr_suppression_ms = detail::get_or<double>(j, "rr_suppression_ms", 50.0);
  s.max_rt_attempts = detail::get_or<std::uint32_t>(j, "max_rt_attempts", 8);
  s.tcp_min_rto_ms = detail::get_or<double>(j, "tcp_min_rto_ms", 200.0);
  s.horizon_ms = detail::get_or<double>(j, "horizon_ms", 0.0);
  return s;
}

inline Scenario scenario_from_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(std::string("scenario is not valid JSON: ") + e.what());
  }
  return scenario_from_json(j);
}

// Stable hash of the canonical scenario json (for run manifests).
inline std::string scenario_hash(const Scenario& s) {
  return strf("%016llx", static_cast<unsigned long long>(
                             fnv1a64(s.source.dump())));
}

}  // namespace sdtp
