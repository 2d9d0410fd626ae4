#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "sdtp/placement.hpp"

using namespace sdtp;

namespace {

PathSpec make_path(std::vector<double> losses) {
  PathSpec p;
  for (size_t i = 0; i <= losses.size(); ++i) p.nodes.push_back("n" + std::to_string(i));
  p.link_loss = std::move(losses);
  p.link_delay_ms.assign(p.link_loss.size(), 5.0);
  return p;
}

// Exhaustive oracle over all interior boundary subsets, written with plain
// loops and bitmasks, independent of the library's enumeration.
double oracle_best_objective(const std::vector<double>& loss,
                             const std::vector<size_t>& candidates,
                             std::uint32_t k) {
  size_t m = candidates.size();
  double best = 1e300;
  for (std::uint64_t mask = 0; mask < (1ull << m); ++mask) {
    if (static_cast<std::uint32_t>(__builtin_popcountll(mask)) != k - 1) continue;
    std::vector<size_t> bounds;
    for (size_t i = 0; i < m; ++i)
      if (mask & (1ull << i)) bounds.push_back(candidates[i]);
    bounds.push_back(loss.size());
    double mean = 0;
    std::vector<double> seg;
    size_t prev = 0;
    for (size_t b : bounds) {
      double keep = 1.0;
      for (size_t l = prev; l < b; ++l) keep *= 1.0 - loss[l];
      seg.push_back(1.0 - keep);
      prev = b;
    }
    for (double v : seg) mean += v;
    mean /= static_cast<double>(seg.size());
    double worst = 0;
    for (double v : seg) worst = std::max(worst, std::abs(v - mean));
    best = std::min(best, worst);
  }
  return best;
}

}  // namespace

TEST_CASE("caching node selection") {
  SECTION("no risky links leaves only the edges") {
    auto p = make_path({0.0, 0.0, 0.0});
    auto nodes = select_caching_nodes(p, 0.01);
    REQUIRE(nodes == std::vector<std::string>{"n0", "n3"});
  }
  SECTION("upstream endpoints of risky links are added") {
    auto p = make_path({0.02, 0.0, 0.03});
    auto nodes = select_caching_nodes(p, 0.01);
    REQUIRE(nodes == std::vector<std::string>{"n0", "n2", "n3"});
  }
  SECTION("zero threshold marks every upstream node") {
    auto p = make_path({0.0, 0.0, 0.0});
    auto nodes = select_caching_nodes(p, 0.0);
    REQUIRE(nodes == std::vector<std::string>{"n0", "n1", "n2", "n3"});
  }
}

TEST_CASE("k=1 yields a single segment spanning the path") {
  auto p = make_path({0.01, 0.02, 0.03});
  auto segs = partition_ep(p, select_caching_nodes(p, 0.0), 1);
  REQUIRE(segs.size() == 1);
  REQUIRE(segs[0].retrans_node == "n3");
  REQUIRE(segs[0].member_links == std::vector<size_t>{0, 1, 2});
  REQUIRE(segs[0].caching_nodes.front() == "n0");
}

TEST_CASE("four equal links with k=2 split 2+2") {
  auto p = make_path({0.02, 0.02, 0.02, 0.02});
  auto segs = partition_ep(p, select_caching_nodes(p, 0.0), 2);
  REQUIRE(segs.size() == 2);
  REQUIRE(segs[0].member_links == std::vector<size_t>{0, 1});
  REQUIRE(segs[1].member_links == std::vector<size_t>{2, 3});
  REQUIRE(segs[0].retrans_node == "n2");
}

TEST_CASE("asymmetric losses split where segment losses equalize") {
  auto p = make_path({0.04, 0.01, 0.01, 0.04});
  auto segs = partition_ep(p, select_caching_nodes(p, 0.0), 2);
  REQUIRE(segs.size() == 2);
  double expect = 1.0 - 0.96 * 0.99;
  REQUIRE(segs[0].loss_prob == Catch::Approx(expect));
  REQUIRE(segs[1].loss_prob == Catch::Approx(expect));
}

TEST_CASE("segment chaining: each interior retrans node caches for the next") {
  auto p = make_path({0.02, 0.02, 0.02, 0.02, 0.02, 0.02});
  auto segs = partition_ep(p, select_caching_nodes(p, 0.0), 3);
  REQUIRE(segs.size() == 3);
  for (size_t i = 1; i < segs.size(); ++i) {
    const auto& prev_rt = segs[i - 1].retrans_node;
    const auto& caches = segs[i].caching_nodes;
    REQUIRE(std::find(caches.begin(), caches.end(), prev_rt) != caches.end());
  }
  // Segments reconstruct the path exactly once.
  std::vector<size_t> all_links;
  for (const auto& s : segs)
    all_links.insert(all_links.end(), s.member_links.begin(), s.member_links.end());
  std::vector<size_t> expect(p.link_loss.size());
  std::iota(expect.begin(), expect.end(), 0);
  REQUIRE(all_links == expect);
}

TEST_CASE("infeasible partitions are rejected") {
  auto p = make_path({0.0, 0.0});
  // Only the edges cache: no interior candidates, so k=2 cannot be met.
  REQUIRE_THROWS_AS(partition_ep(p, select_caching_nodes(p, 0.5), 2),
                    PlacementError);
}

TEST_CASE("matches the exhaustive oracle on 100 random loss vectors") {
  std::mt19937_64 rng(2024);
  for (int rep = 0; rep < 100; ++rep) {
    size_t links = 2 + rng() % 9;  // up to 10 links
    std::vector<double> loss(links);
    for (auto& v : loss) v = static_cast<double>(rng() % 800) / 10000.0;
    auto p = make_path(loss);
    auto caching = select_caching_nodes(p, 0.0);
    std::vector<size_t> candidates;
    for (size_t i = 1; i + 1 < p.nodes.size(); ++i) candidates.push_back(i);
    std::uint32_t max_k = static_cast<std::uint32_t>(candidates.size()) + 1;
    for (std::uint32_t k = 1; k <= max_k; ++k) {
      auto segs = partition_ep(p, caching, k);
      REQUIRE(segs.size() == k);
      double got = partition_objective(segs);
      double want = oracle_best_objective(loss, candidates, k);
      REQUIRE(got == Catch::Approx(want).margin(1e-12));
    }
  }
}
