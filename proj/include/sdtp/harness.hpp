#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sdtp/scenario.hpp"
#include "sdtp/sim.hpp"

namespace sdtp {

inline constexpr const char* kArtifactVersion = "0.1.0";

// The built-in evaluation topology: two hosts, five switches in line,
// 20 ms host links, 5 ms core links, one connection sending every 15 ms.
inline nlohmann::json fig6_json() {
  using nlohmann::json;
  return json{
      {"id", "fig6"},
      {"protocol", "both"},
      {"seed", 1},
      {"topology",
       {{"nodes",
         json::array({json{{"name", "A"}, {"kind", "host"}},
                      json{{"name", "B"}, {"kind", "host"}},
                      json{{"name", "e1"}, {"kind", "switch"}},
                      json{{"name", "s2"}, {"kind", "switch"}},
                      json{{"name", "s3"}, {"kind", "switch"}},
                      json{{"name", "s4"}, {"kind", "switch"}},
                      json{{"name", "e5"}, {"kind", "switch"}}})},
        {"links",
         json::array(
             {json{{"a", "A"}, {"b", "e1"}, {"delay_ms", 20.0}, {"loss", 0.0}},
              json{{"a", "e1"}, {"b", "s2"}, {"delay_ms", 5.0}, {"loss", 0.0}},
              json{{"a", "s2"}, {"b", "s3"}, {"delay_ms", 5.0}, {"loss", 0.0}},
              json{{"a", "s3"}, {"b", "s4"}, {"delay_ms", 5.0}, {"loss", 0.0}},
              json{{"a", "s4"}, {"b", "e5"}, {"delay_ms", 5.0}, {"loss", 0.0}},
              json{{"a", "e5"}, {"b", "B"}, {"delay_ms", 20.0}, {"loss", 0.0}}})}}},
      {"connections",
       json::array({json{{"id", 1}, {"src", "A"}, {"dst", "B"}}})},
      {"traffic", {{"packet_count", 1000}, {"send_interval_ms", 15.0}}},
      {"placement", {{"k", 2}, {"loss_threshold", 0.0}}},
      {"control_delay_ms", 10.0},
      {"cn_period_ms", 150.0}};
}

inline Scenario fig6_scenario() { return scenario_from_json(fig6_json()); }

// Re-parse the base scenario with a patch applied to its canonical json;
// strict parsing re-validates the result.
inline Scenario scenario_variant(
    const Scenario& base, const std::function<void(nlohmann::json&)>& patch) {
  nlohmann::json j = base.source;
  patch(j);
  return scenario_from_json(j);
}

inline Protocol protocol_from_name(const std::string& name) {
  if (name == "sdtp") return Protocol::Sdtp;
  if (name == "tcp") return Protocol::Tcp;
  throw ScenarioError("unknown protocol name: " + name);
}

struct SweepResult {
  std::vector<Metrics> rows;
  std::string raw_csv;
  std::string agg_csv;
};

namespace detail {

struct Agg {
  std::vector<double> conn, mean_e2e, jitter, retx, undelivered;
};

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / static_cast<double>(v.size()))};
}

}  // namespace detail

// One run per (value, repetition, protocol); raw rows plus per-(value,
// protocol) mean/stdev aggregation, recomputable from the raw rows.
inline SweepResult sweep(const Scenario& base, const std::string& axis,
                         const std::vector<double>& values,
                         std::uint32_t repetitions) {
  if (values.empty()) throw ScenarioError("sweep requires at least one value");
  if (repetitions < 1) throw ScenarioError("sweep requires at least one rep");
  if (axis != "loss_rate" && axis != "control_delay_ms" && axis != "seed")
    throw ScenarioError("unknown sweep axis: " + axis);

  SweepResult out;
  out.raw_csv = "axis,value," + Metrics::csv_header() + "\n";
  std::map<std::pair<std::string, std::string>, detail::Agg> agg;  // (value, proto)

  for (double value : values) {
    for (std::uint32_t rep = 0; rep < repetitions; ++rep) {
      Scenario var = scenario_variant(base, [&](nlohmann::json& j) {
        if (axis == "loss_rate") {
          j["e2e_loss_rate"] = value;
        } else if (axis == "control_delay_ms") {
          j["control_delay_ms"] = value;
        } else {
          j["seed"] = static_cast<std::uint64_t>(value);
        }
      });
      std::uint64_t seed =
          axis == "seed" ? static_cast<std::uint64_t>(value) + rep
                         : var.seed + rep;
      for (const auto& pname : var.protocols) {
        auto res = run_one(var, protocol_from_name(pname), seed);
        const Metrics& m = res.metrics;
        out.raw_csv += strf("%s,%.6f,", axis.c_str(), value) + m.csv_row() + "\n";
        auto& a = agg[{strf("%.6f", value), pname}];
        a.conn.push_back(m.conn_delay_ms);
        a.mean_e2e.push_back(m.mean_e2e_ms);
        a.jitter.push_back(m.jitter_ms);
        a.retx.push_back(static_cast<double>(m.retx_count));
        a.undelivered.push_back(static_cast<double>(m.undelivered));
        out.rows.push_back(m);
      }
    }
  }

  out.agg_csv =
      "axis,value,protocol,n,conn_delay_ms_mean,conn_delay_ms_std,"
      "mean_e2e_ms_mean,mean_e2e_ms_std,jitter_ms_mean,jitter_ms_std,"
      "retx_count_mean,retx_count_std,undelivered_mean,undelivered_std\n";
  for (const auto& [key, a] : agg) {
    auto [cm, cs] = detail::mean_std(a.conn);
    auto [em, es] = detail::mean_std(a.mean_e2e);
    auto [jm, js] = detail::mean_std(a.jitter);
    auto [rm, rs] = detail::mean_std(a.retx);
    auto [um, us] = detail::mean_std(a.undelivered);
    out.agg_csv += strf("%s,%s,%s,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,"
                        "%.6f,%.6f\n",
                        axis.c_str(), key.first.c_str(), key.second.c_str(),
                        a.conn.size(), cm, cs, em, es, jm, js, rm, rs, um, us);
  }
  return out;
}

// ---- figure-data reproduction ---------------------------------------------

inline std::vector<double> fig_loss_rates() {
  return {0.0, 0.01, 0.02, 0.03, 0.04, 0.05};
}

// Connection establishment delay vs loss rate: TCP, SDTP at 10 ms control
// delay, SDTP at 65 ms. Seed-averaged.
inline std::string fig5_csv(std::uint32_t seeds = 10) {
  Scenario base = fig6_scenario();
  std::string csv = "loss_rate,series,conn_delay_ms_mean,conn_delay_ms_std,n\n";
  struct Series {
    const char* name;
    Protocol proto;
    double control_delay;
  };
  const Series series[] = {{"tcp", Protocol::Tcp, 10.0},
                           {"sdtp_cd10", Protocol::Sdtp, 10.0},
                           {"sdtp_cd65", Protocol::Sdtp, 65.0}};
  for (double loss : fig_loss_rates()) {
    for (const auto& s : series) {
      std::vector<double> delays;
      for (std::uint32_t rep = 0; rep < seeds; ++rep) {
        Scenario var = scenario_variant(base, [&](nlohmann::json& j) {
          j["traffic"]["packet_count"] = 1;  // establishment-only runs
          j["control_delay_ms"] = s.control_delay;
          if (loss > 0.0) j["e2e_loss_rate"] = loss;
        });
        auto res = run_one(var, s.proto, base.seed + rep);
        delays.push_back(res.metrics.conn_delay_ms);
      }
      auto [m, sd] = detail::mean_std(delays);
      csv += strf("%.6f,%s,%.6f,%.6f,%u\n", loss, s.name, m, sd, seeds);
    }
  }
  return csv;
}

// Average E2E packet delay and jitter vs loss rate, both protocols.
inline std::string fig7_csv(std::uint32_t seeds = 10) {
  Scenario base = fig6_scenario();
  std::string csv =
      "loss_rate,protocol,mean_e2e_ms_mean,mean_e2e_ms_std,jitter_ms_mean,"
      "jitter_ms_std,n\n";
  for (double loss : fig_loss_rates()) {
    for (Protocol proto : {Protocol::Sdtp, Protocol::Tcp}) {
      std::vector<double> means, jitters;
      for (std::uint32_t rep = 0; rep < seeds; ++rep) {
        Scenario var = scenario_variant(base, [&](nlohmann::json& j) {
          if (loss > 0.0) j["e2e_loss_rate"] = loss;
        });
        auto res = run_one(var, proto, base.seed + rep);
        means.push_back(res.metrics.mean_e2e_ms);
        jitters.push_back(res.metrics.jitter_ms);
      }
      auto [mm, ms] = detail::mean_std(means);
      auto [jm, js] = detail::mean_std(jitters);
      csv += strf("%.6f,%s,%.6f,%.6f,%.6f,%.6f,%u\n", loss,
                  protocol_name(proto), mm, ms, jm, js, seeds);
    }
  }
  return csv;
}

// Per-packet delay for one thousand continuous packets, per loss rate.
inline std::string fig8_csv(std::uint64_t seed = 1) {
  Scenario base = fig6_scenario();
  std::string csv = "loss_rate,protocol,seq,delay_ms\n";
  for (double loss : fig_loss_rates()) {
    for (Protocol proto : {Protocol::Sdtp, Protocol::Tcp}) {
      Scenario var = scenario_variant(base, [&](nlohmann::json& j) {
        j["traffic"]["packet_count"] = 1000;
        if (loss > 0.0) j["e2e_loss_rate"] = loss;
      });
      auto res = run_one(var, proto, seed);
      for (const auto& [seq, delay] : measure_e2e_delay(res)) {
        csv += strf("%.6f,%s,%u,%.6f\n", loss, protocol_name(proto), seq, delay);
      }
    }
  }
  return csv;
}

// Manifest describing a CLI run well enough to reproduce it byte for byte.
inline std::string run_manifest(const Scenario& scn,
                                const std::vector<std::string>& outputs,
                                const std::string& command) {
  nlohmann::json m;
  m["artifact_version"] = kArtifactVersion;
  m["scenario_id"] = scn.id;
  m["scenario_hash"] = scenario_hash(scn);
  m["seed"] = scn.seed;
  m["command"] = command;
  m["scenario"] = scn.source;
  m["outputs"] = outputs;
  return m.dump(2) + "\n";
}

}  // namespace sdtp
