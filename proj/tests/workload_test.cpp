#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

#include "iopathtune/params.hpp"
#include "iopathtune/workload.hpp"

using namespace iopathtune;

namespace {

constexpr std::uint64_t MiB = 1 << 20;
constexpr std::uint64_t GiB = 1ull << 30;

WorkloadSpec spec(Pattern p, Op op, std::uint64_t size, std::uint32_t streams = 1) {
  WorkloadSpec w;
  w.pattern = p;
  w.op = op;
  w.request_size = size;
  w.streams = streams;
  return w;
}

std::vector<IoRequest> take(StreamGenerator& g, int n) {
  std::vector<IoRequest> out;
  for (int i = 0; i < n; ++i) out.push_back(g.next());
  return out;
}

}  // namespace

TEST_CASE("table workloads map onto specs") {
  const WorkloadSpec five = spec(Pattern::Random, Op::Write, MiB, 5);
  const auto streams = build_workload(five, 42);
  CHECK(streams.size() == 5);

  WorkloadSpec whole = spec(Pattern::Sequential, Op::ReadWrite, 16 * MiB);
  whole.whole_file = GiB;
  StreamGenerator g(whole, 1);
  const auto reqs = take(g, 128);
  for (int i = 0; i < 64; ++i) {
    CHECK_FALSE(reqs[i].is_read);
    CHECK(reqs[i].offset == static_cast<std::uint64_t>(i) * 16 * MiB);
  }
  for (int i = 64; i < 128; ++i) {
    CHECK(reqs[i].is_read);
    CHECK(reqs[i].offset == static_cast<std::uint64_t>(i - 64) * 16 * MiB);
  }
  CHECK_FALSE(g.peek().is_read);
  CHECK(g.peek().offset == 0);
}

TEST_CASE("same spec and seed give the same requests") {
  const WorkloadSpec w = spec(Pattern::Random, Op::ReadWrite, 8192, 3);
  auto a = build_workload(w, 99);
  auto b = build_workload(w, 99);
  auto c = build_workload(w, 100);
  bool differs = false;
  for (std::size_t s = 0; s < a.size(); ++s) {
    const auto ra = take(a[s], 500), rb = take(b[s], 500), rc = take(c[s], 500);
    CHECK(ra == rb);
    differs = differs || ra != rc;
  }
  CHECK(differs);
  // streams of one workload are not copies of each other
  auto d = build_workload(w, 99);
  CHECK(take(d[0], 50) != take(d[1], 50));
}

TEST_CASE("peek shows the next request") {
  StreamGenerator g(spec(Pattern::Random, Op::Write, MiB), 5);
  for (int i = 0; i < 20; ++i) {
    const IoRequest seen = g.peek();
    CHECK(g.next() == seen);
  }
}

TEST_CASE("readwrite alternates per stream") {
  StreamGenerator g(spec(Pattern::Random, Op::ReadWrite, MiB), 3);
  const auto r = take(g, 10);
  for (int i = 0; i < 10; ++i) CHECK(r[i].is_read == (i % 2 == 1));
  StreamGenerator rd(spec(Pattern::Sequential, Op::Read, MiB), 3);
  for (const auto& q : take(rd, 10)) CHECK(q.is_read);
}

TEST_CASE("sequential streams never overlap") {
  for (std::uint64_t size : {std::uint64_t{8192}, MiB, 16 * MiB}) {
    WorkloadSpec w = spec(Pattern::Sequential, Op::ReadWrite, size);
    w.extent_bytes = 4 * size;  // smaller than what is generated below
    StreamGenerator g(w, 1);
    std::uint64_t end = 0;
    for (const auto& r : take(g, 1000)) {
      CHECK(r.offset >= end);
      end = r.offset + r.size;
    }
  }
}

TEST_CASE("random offsets are aligned and uniform over the extent") {
  WorkloadSpec w = spec(Pattern::Random, Op::Write, MiB);
  w.extent_bytes = GiB;
  StreamGenerator g(w, 2024);
  constexpr int kBins = 16, kDraws = 16000;
  std::vector<int> bins(kBins);
  for (const auto& r : take(g, kDraws)) {
    REQUIRE(r.offset % MiB == 0);
    REQUIRE(r.offset + r.size <= GiB);
    bins[r.offset * kBins / GiB] += 1;
  }
  const double expected = static_cast<double>(kDraws) / kBins;
  double chi2 = 0;
  for (int b : bins) chi2 += (b - expected) * (b - expected) / expected;
  // 15 degrees of freedom, p = 0.001
  CHECK(chi2 < 37.70);
}

TEST_CASE("rate window never exceeds its limit in any one-second window") {
  std::mt19937_64 rng(3);
  for (double limit : {1e6, 5e7, 1.5e9}) {
    RateWindow rw(limit);
    std::vector<std::pair<std::int64_t, std::uint64_t>> admitted;
    std::int64_t t = 0;
    for (int i = 0; i < 20000; ++i) {
      t += static_cast<std::int64_t>(rng() % 20'000'000);
      const std::uint64_t bytes = 1 + rng() % static_cast<std::uint64_t>(limit / 4);
      if (rw.admit(t, bytes)) admitted.emplace_back(t, bytes);
    }
    REQUIRE(admitted.size() > 100);
    std::size_t lo = 0;
    std::uint64_t sum = 0;
    for (std::size_t j = 0; j < admitted.size(); ++j) {
      sum += admitted[j].second;
      while (admitted[lo].first <= admitted[j].first - 1'000'000'000) sum -= admitted[lo++].second;
      REQUIRE(static_cast<double>(sum) <= limit);
    }
  }
  RateWindow open(std::nullopt);
  CHECK(open.unbounded());
  CHECK(open.admit(0, ~0ull));
  RateWindow shut(0.0);
  CHECK_FALSE(shut.admit(0, 1));
}

TEST_CASE("active_spec boundaries") {
  PhaseSchedule s;
  s.phases = {{0, spec(Pattern::Sequential, Op::Write, MiB)}, {300, spec(Pattern::Random, Op::Write, MiB)}};
  CHECK(active_spec(s, 0).pattern == Pattern::Sequential);
  CHECK(active_spec(s, 299.99).pattern == Pattern::Sequential);
  CHECK(active_spec(s, 300).pattern == Pattern::Random);
  CHECK(active_spec(s, 1e9).pattern == Pattern::Random);

  PhaseSchedule six;
  for (int i = 0; i < 7; ++i) six.phases.push_back({300.0 * i, spec(Pattern::Random, Op::Write, MiB << (i % 3))});
  CHECK_NOTHROW(six.validate());
  CHECK(six.phases.size() == 7);
  CHECK(six.phase_index(2099.99) == 6);
  CHECK(six.phases.back().start_s + 300 == 2100);
}

TEST_CASE("schedule and spec validation") {
  PhaseSchedule s;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.phases = {{1, spec(Pattern::Sequential, Op::Write, MiB)}};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.phases = {{0, spec(Pattern::Sequential, Op::Write, MiB)}, {0, spec(Pattern::Sequential, Op::Write, MiB)}};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.phases = {{0, spec(Pattern::Sequential, Op::Write, 0)}};
  try {
    s.validate();
    FAIL("zero request size accepted");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "schedule[0].workload.request_size");
  }
  WorkloadSpec w = spec(Pattern::Random, Op::Write, MiB);
  w.streams = 0;
  CHECK_THROWS_AS(w.validate(), ConfigError);
  w.streams = 1;
  w.rate_limit = -1;
  CHECK_THROWS_AS(w.validate(), ConfigError);
  w.rate_limit = 0;
  CHECK(w.is_null());
  CHECK_THROWS_AS(pattern_from_string("strided"), ConfigError);
  CHECK(op_from_string("readwrite") == Op::ReadWrite);
}

TEST_CASE("stream seeds separate clients, phases and streams") {
  std::map<std::uint64_t, int> seen;
  for (std::size_t c = 0; c < 5; ++c)
    for (std::size_t p = 0; p < 7; ++p)
      for (std::size_t s = 0; s < 5; ++s) seen[stream_seed(1, c, p, s)] += 1;
  CHECK(seen.size() == 5 * 7 * 5);
  CHECK(stream_seed(1, 2, 3, 4) == stream_seed(1, 2, 3, 4));
  CHECK(stream_seed(1, 2, 3, 4) != stream_seed(2, 2, 3, 4));
}
