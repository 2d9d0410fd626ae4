#include <catch2/catch_amalgamated.hpp>

#include "sdtp/control_plane.hpp"

using namespace sdtp;

namespace {

LinkStatusTable line_table() {
  LinkStatusTable t;
  t.add_link({"e1", "s2", true, 5.0, 0.01});
  t.add_link({"s2", "s3", true, 5.0, 0.01});
  t.add_link({"s3", "s4", true, 5.0, 0.01});
  t.add_link({"s4", "e5", true, 5.0, 0.01});
  return t;
}

Controller line_controller(std::uint32_t k = 2) {
  ControllerConfig cfg;
  cfg.placement_k = k;
  cfg.placement_loss_threshold = 0.0;
  Controller ctrl(line_table(), cfg);
  ctrl.register_connection(1, "A", "e1", "B", "e5");
  return ctrl;
}

SdtpPacket syn_pkt(PacketKind kind) {
  SdtpPacket p;
  p.header.kind = kind;
  p.header.conn_id = 1;
  return p;
}

}  // namespace

TEST_CASE("SYN with a reachable path yields packet-out at the peer edge") {
  auto ctrl = line_controller();
  auto out = ctrl.handle_packet_in(syn_pkt(PacketKind::Syn), "e1", 0);
  REQUIRE(!out.path_failure);
  REQUIRE(out.has_packet_out);
  REQUIRE(out.packet_out_edge == "e5");
  REQUIRE(out.install.has_value());
  REQUIRE(out.state_after == ConnState::SynSeen);
  REQUIRE(ctrl.connection(1)->path_forward ==
          std::vector<std::string>{"e1", "s2", "s3", "s4", "e5"});
}

TEST_CASE("SYN then SYN-ACK drives the record to ESTABLISHED") {
  auto ctrl = line_controller();
  ctrl.handle_packet_in(syn_pkt(PacketKind::Syn), "e1", 0);
  auto out = ctrl.handle_packet_in(syn_pkt(PacketKind::SynAck), "e5", 1000);
  REQUIRE(!out.path_failure);
  REQUIRE(out.has_packet_out);
  REQUIRE(out.packet_out_edge == "e1");
  REQUIRE(!out.install.has_value());  // placement installs once
  REQUIRE(out.state_after == ConnState::Established);
  REQUIRE(ctrl.connection(1)->packet_outs == 2);
}

TEST_CASE("no reachable path fails the connection") {
  LinkStatusTable t = line_table();
  t.set_link_up("s3", "s4", false);
  ControllerConfig cfg;
  cfg.placement_k = 1;
  Controller ctrl(std::move(t), cfg);
  ctrl.register_connection(1, "A", "e1", "B", "e5");
  auto out = ctrl.handle_packet_in(syn_pkt(PacketKind::Syn), "e1", 0);
  REQUIRE(out.path_failure);
  REQUIRE(!out.has_packet_out);
  REQUIRE(ctrl.connection(1)->state == ConnState::Failed);
}

TEST_CASE("reverse reachability is checked on SYN-ACK") {
  auto ctrl = line_controller();
  ctrl.handle_packet_in(syn_pkt(PacketKind::Syn), "e1", 0);
  ctrl.table().set_link_up("s2", "s3", false);
  auto out = ctrl.handle_packet_in(syn_pkt(PacketKind::SynAck), "e5", 1000);
  REQUIRE(out.path_failure);
  REQUIRE(ctrl.connection(1)->state == ConnState::Failed);
}

TEST_CASE("retried SYN reuses the cached path without reinstalling") {
  auto ctrl = line_controller();
  auto first = ctrl.handle_packet_in(syn_pkt(PacketKind::Syn), "e1", 0);
  REQUIRE(first.install.has_value());
  auto again = ctrl.handle_packet_in(syn_pkt(PacketKind::Syn), "e1", 1000000);
  REQUIRE(again.has_packet_out);
  REQUIRE(!again.install.has_value());
}

TEST_CASE("placement plan activates edges per the base policy") {
  auto ctrl = line_controller(2);
  auto plan =
      ctrl.build_placement({"e1", "s2", "s3", "s4", "e5"});
  REQUIRE(plan.roles.at("e1").caching);
  REQUIRE(plan.roles.at("e1").sending_edge);
  REQUIRE(!plan.roles.at("e1").retrans);
  REQUIRE(plan.roles.at("e5").caching);
  REQUIRE(plan.roles.at("e5").retrans);
  REQUIRE(plan.roles.at("e5").receiving_edge);
  REQUIRE(plan.segments.size() == 2);
  // Equal link losses: the interior boundary splits the four links 2+2.
  REQUIRE(plan.segments[0].retrans_node == "s3");
  // Build twice: identical plan (idempotent re-install).
  auto plan2 = ctrl.build_placement({"e1", "s2", "s3", "s4", "e5"});
  REQUIRE(plan2.segments[0].retrans_node == plan.segments[0].retrans_node);
  REQUIRE(plan2.caching_nodes == plan.caching_nodes);
}

TEST_CASE("k=1 places retransmission only at the receiving edge") {
  auto ctrl = line_controller(1);
  auto plan = ctrl.build_placement({"e1", "s2", "s3", "s4", "e5"});
  REQUIRE(plan.segments.size() == 1);
  REQUIRE(plan.segments[0].retrans_node == "e5");
  for (const char* n : {"e1", "s2", "s3", "s4"})
    REQUIRE(!plan.roles.at(n).retrans);
}

TEST_CASE("BFS path deployment caches the path") {
  LinkStatusTable t = line_table();
  REQUIRE(!t.has_cached_path("e1", "e5"));
  auto p = t.find_or_deploy_path("e1", "e5");
  REQUIRE(p.has_value());
  REQUIRE(t.has_cached_path("e1", "e5"));
}
