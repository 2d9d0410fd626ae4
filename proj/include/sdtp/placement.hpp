#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdtp/core.hpp"

namespace sdtp {

// A core-network path from sending edge to receiving edge. link i connects
// nodes[i] -> nodes[i+1]. Host-edge links are outside the placement problem.
struct PathSpec {
  std::vector<std::string> nodes;
  std::vector<double> link_loss;
  std::vector<double> link_delay_ms;

  void validate() const {
    if (nodes.size() < 2) throw std::invalid_argument("path needs >= 2 nodes");
    if (link_loss.size() != nodes.size() - 1)
      throw std::invalid_argument("link_loss size must be nodes - 1");
    for (double p : link_loss)
      if (p < 0.0 || p > 1.0)
        throw std::invalid_argument("loss probability outside [0,1]");
  }
};

// One caching-retransmission segment: the retransmission node plus the
// caching nodes reaching back to (and including) the nearest upstream
// retransmission node or sending edge. caching_nodes are in path order.
struct CrSegment {
  std::string retrans_node;
  std::vector<std::string> caching_nodes;
  std::vector<std::size_t> member_links;
  double loss_prob = 0.0;
};

class PlacementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caching goes to the sending edge, to the upstream endpoint of every link
// whose loss probability reaches the threshold, and to the receiving edge
// (which always runs both functions). Returned in path order.
inline std::vector<std::string> select_caching_nodes(const PathSpec& path,
                                                     double loss_threshold) {
  path.validate();
  std::vector<bool> mark(path.nodes.size(), false);
  mark.front() = true;
  mark.back() = true;
  for (size_t i = 0; i < path.link_loss.size(); ++i) {
    if (path.link_loss[i] >= loss_threshold) mark[i] = true;
  }
  std::vector<std::string> out;
  for (size_t i = 0; i < mark.size(); ++i)
    if (mark[i]) out.push_back(path.nodes[i]);
  return out;
}

inline double segment_loss(const std::vector<double>& link_loss, size_t first,
                           size_t last_exclusive) {
  double survive = 1.0;
  for (size_t i = first; i < last_exclusive; ++i) survive *= 1.0 - link_loss[i];
  return 1.0 - survive;
}

namespace detail {

inline double ep_objective(const std::vector<double>& losses) {
  double mean = 0.0;
  for (double v : losses) mean += v;
  mean /= static_cast<double>(losses.size());
  double worst = 0.0;
  for (double v : losses) worst = std::max(worst, std::abs(v - mean));
  return worst;
}

}  // namespace detail

// Equalized-loss-probability partition: choose k-1 interior retransmission
// nodes among the caching nodes (receiving edge is always the final one) so
// that the maximum deviation of per-segment loss probability from the mean is
// minimized. Paths are short, so exhaustive enumeration of combinations is
// exact and cheap.
inline std::vector<CrSegment> partition_ep(
    const PathSpec& path, const std::vector<std::string>& caching_nodes,
    std::uint32_t k) {
  path.validate();
  if (k < 1) throw PlacementError("k must be >= 1");

  auto node_pos = [&](const std::string& name) -> size_t {
    for (size_t i = 0; i < path.nodes.size(); ++i)
      if (path.nodes[i] == name) return i;
    throw PlacementError("caching node not on path: " + name);
  };

  std::vector<size_t> caching_pos;
  for (const auto& n : caching_nodes) caching_pos.push_back(node_pos(n));
  std::sort(caching_pos.begin(), caching_pos.end());

  // Interior candidates: caching nodes that are neither edge.
  std::vector<size_t> candidates;
  for (size_t p : caching_pos)
    if (p != 0 && p != path.nodes.size() - 1) candidates.push_back(p);

  if (candidates.size() + 1 < k)
    throw PlacementError("InfeasiblePartition: not enough caching nodes for k");

  size_t choose = k - 1;
  std::vector<size_t> best_pick;
  double best_obj = 0.0;
  bool have_best = false;

  std::vector<size_t> pick(choose);
  // Enumerate combinations in lexicographic order; first optimum wins, which
  // keeps the result deterministic.
  auto evaluate = [&]() {
    std::vector<size_t> bounds = pick;  // interior boundaries, ascending
    bounds.push_back(path.nodes.size() - 1);
    std::vector<double> losses;
    size_t prev = 0;
    for (size_t b : bounds) {
      losses.push_back(segment_loss(path.link_loss, prev, b));
      prev = b;
    }
    double obj = detail::ep_objective(losses);
    if (!have_best || obj < best_obj) {
      have_best = true;
      best_obj = obj;
      best_pick = pick;
    }
  };

  if (choose == 0) {
    evaluate();
  } else {
    std::vector<size_t> idx(choose);
    for (size_t i = 0; i < choose; ++i) idx[i] = i;
    bool more = true;
    while (more) {
      for (size_t i = 0; i < choose; ++i) pick[i] = candidates[idx[i]];
      evaluate();
      more = false;
      for (size_t i = choose; i-- > 0;) {
        if (idx[i] < i + candidates.size() - choose) {
          ++idx[i];
          for (size_t j = i + 1; j < choose; ++j) idx[j] = idx[j - 1] + 1;
          more = true;
          break;
        }
      }
    }
  }

  std::vector<size_t> bounds = best_pick;
  bounds.push_back(path.nodes.size() - 1);

  std::vector<CrSegment> segments;
  size_t prev = 0;
  for (size_t b : bounds) {
    CrSegment seg;
    seg.retrans_node = path.nodes[b];
    for (size_t p : caching_pos)
      if (p >= prev && p < b) seg.caching_nodes.push_back(path.nodes[p]);
    for (size_t l = prev; l < b; ++l) seg.member_links.push_back(l);
    seg.loss_prob = segment_loss(path.link_loss, prev, b);
    segments.push_back(std::move(seg));
    prev = b;
  }
  return segments;
}

// Objective value of a partition (max |loss - mean|), for oracle comparison.
inline double partition_objective(const std::vector<CrSegment>& segments) {
  std::vector<double> losses;
  for (const auto& s : segments) losses.push_back(s.loss_prob);
  return detail::ep_objective(losses);
}

}  // namespace sdtp
