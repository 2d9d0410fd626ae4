#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "sdtp/estimators.hpp"

using namespace sdtp;

namespace {

// Straight-line reference evaluations, kept independent of the library code:
// plain transcriptions of the update formulas in long double.

long double ref_interarrival(long double interval, long double sample) {
  long double v = 0.875L * sample + 0.375L * interval;
  return v > interval ? v : interval;
}

struct RefRto {
  long double rtt = 0, dev = 0, th = 0;
  bool init = false;
  void update(long double s) {
    if (!init) {
      rtt = s;
      dev = 0;
      init = true;
    } else {
      dev = 0.75L * dev + 0.25L * fabsl(s - rtt);
      rtt = 0.875L * rtt + 0.125L * s;
    }
    th = rtt + 4.0L * dev;
  }
};

long double ref_addl(long double r, long double i, bool counter) {
  return ceill(r / i) + (counter ? 1.0L : 0.0L);
}

bool close(double a, long double b) {
  long double scale = fabsl(b) > 1 ? fabsl(b) : 1.0L;
  return fabsl((long double)a - b) / scale <= 1e-9L;
}

}  // namespace

TEST_CASE("expected interarrival worked examples") {
  InterarrivalEstimator est(15.0);
  REQUIRE(est.expected_ms() == 15.0);
  est.update(15.0);
  REQUIRE(est.expected_ms() == 18.75);  // max(15, 0.875*15 + 0.375*15)
  est.update(0.0);
  REQUIRE(est.expected_ms() == 15.0);  // clamped to the sending interval

  InterarrivalEstimator est2(10.0);
  est2.update(40.0);
  REQUIRE(est2.expected_ms() == 38.75);
}

TEST_CASE("interarrival timeout multiples") {
  REQUIRE(interarrival_timeout_multiples(18.75, 18.75) == 1);
  REQUIRE(interarrival_timeout_multiples(10.0, 18.75) == 0);
  REQUIRE(interarrival_timeout_multiples(60.0, 18.75) == 3);
  REQUIRE(interarrival_timeout_multiples(0.0, 18.75) == 0);
}

TEST_CASE("retransmission timeout worked examples") {
  RtoEstimator est;
  est.update(30.0);
  REQUIRE(est.rtt_ms() == 30.0);
  REQUIRE(est.dev_ms() == 0.0);
  REQUIRE(est.threshold_ms() == 30.0);
  est.update(50.0);
  REQUIRE(est.rtt_ms() == 32.5);   // 0.875*30 + 0.125*50
  REQUIRE(est.dev_ms() == 5.0);    // 0.75*0 + 0.25*|50-30|
  REQUIRE(est.threshold_ms() == 52.5);
}

TEST_CASE("retransmission timeout converges on constant samples") {
  RtoEstimator est;
  for (int i = 0; i < 200; ++i) est.update(25.0);
  REQUIRE(est.rtt_ms() == Catch::Approx(25.0).margin(1e-12));
  REQUIRE(est.dev_ms() == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(est.threshold_ms() == Catch::Approx(25.0).margin(1e-12));
}

TEST_CASE("threshold never drops below the smoothed rtt") {
  std::mt19937_64 rng(3);
  RtoEstimator est;
  for (int i = 0; i < 1000; ++i) {
    est.update(5.0 + static_cast<double>(rng() % 1000) / 10.0);
    REQUIRE(est.threshold_ms() >= est.rtt_ms());
  }
}

TEST_CASE("estimators match the reference on 1000 random inputs") {
  std::mt19937_64 rng(17);
  auto rnd = [&](double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng() % 1000000) / 1000000.0);
  };

  for (int i = 0; i < 1000; ++i) {
    double interval = rnd(1.0, 50.0);
    double sample = rnd(0.0, 200.0);
    InterarrivalEstimator est(interval);
    est.update(sample);
    REQUIRE(close(est.expected_ms(), ref_interarrival(interval, sample)));
  }

  RtoEstimator est;
  RefRto ref;
  for (int i = 0; i < 1000; ++i) {
    double s = rnd(1.0, 300.0);
    est.update(s);
    ref.update(s);
    REQUIRE(close(est.rtt_ms(), ref.rtt));
    REQUIRE(close(est.dev_ms(), ref.dev));
    REQUIRE(close(est.threshold_ms(), ref.th));
  }

  for (int i = 0; i < 1000; ++i) {
    double r = rnd(0.0, 400.0);
    double iv = rnd(1.0, 60.0);
    bool counter = rng() % 2 == 0;
    auto got = compute_addl(r, iv, counter ? RrTrigger::Counter
                                           : RrTrigger::ArrivalTimeout);
    REQUIRE(static_cast<long double>(got) == ref_addl(r, iv, counter));
  }
}

TEST_CASE("additional disorder length worked examples") {
  REQUIRE(compute_addl(40.0, 20.0, RrTrigger::Counter) == 3);
  REQUIRE(compute_addl(0.0, 20.0, RrTrigger::ArrivalTimeout) == 0);
  REQUIRE(compute_addl(30.0, 18.75, RrTrigger::Counter) == 3);  // ceil(1.6)+1
}

TEST_CASE("segment disorder estimator") {
  SECTION("single sample of 1 keeps the threshold at 1") {
    SegmentDisorderEstimator est;
    REQUIRE(est.threshold() == 1);
    est.observe(1);
    REQUIRE(est.threshold() == 1);
  }
  SECTION("constant observations converge to that value") {
    SegmentDisorderEstimator est;
    for (int i = 0; i < 100; ++i) est.observe(2);
    REQUIRE(est.threshold() == 2);
  }
  SECTION("alternating 1,5 inflates the threshold beyond 5") {
    SegmentDisorderEstimator est;
    for (int i = 0; i < 100; ++i) est.observe(i % 2 == 0 ? 1 : 5);
    REQUIRE(est.threshold() > 5);
    // Cross-check against an independent EWMA transcription.
    long double avg = 0, dev = 0;
    bool init = false;
    for (int i = 0; i < 100; ++i) {
      long double x = i % 2 == 0 ? 1 : 5;
      if (!init) {
        avg = x;
        init = true;
      } else {
        dev = 0.75L * dev + 0.25L * fabsl(x - avg);
        avg = 0.875L * avg + 0.125L * x;
      }
    }
    REQUIRE(est.threshold() == static_cast<std::uint32_t>(ceill(avg + 4 * dev - 1e-9L)));
  }
}
