#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "mftg/rng.hpp"

using namespace mftg;

TEST_SUITE("rng") {

TEST_CASE("streams are pure functions of their coordinates") {
  NoiseArchitecture arch(42);
  Stream a = arch.stream(StreamKind::kIdiosyncratic, 1, 2, 3, 4);
  Stream b = arch.stream(StreamKind::kIdiosyncratic, 1, 2, 3, 4);
  for (int k = 0; k < 8; ++k) CHECK(a.next_u64() == b.next_u64());

  // changing any single coordinate moves the stream
  Stream base = arch.stream(StreamKind::kIdiosyncratic, 1, 2, 3, 4);
  const std::uint64_t first = base.next_u64();
  CHECK(arch.stream(StreamKind::kTeamRandomization, 1, 2, 3, 4).next_u64() != first);
  CHECK(arch.stream(StreamKind::kIdiosyncratic, 0, 2, 3, 4).next_u64() != first);
  CHECK(arch.stream(StreamKind::kIdiosyncratic, 1, 0, 3, 4).next_u64() != first);
  CHECK(arch.stream(StreamKind::kIdiosyncratic, 1, 2, 0, 4).next_u64() != first);
  CHECK(arch.stream(StreamKind::kIdiosyncratic, 1, 2, 3, 0).next_u64() != first);
  CHECK(NoiseArchitecture(43).stream(StreamKind::kIdiosyncratic, 1, 2, 3, 4).next_u64() !=
        first);
}

TEST_CASE("uniform output looks uniform") {
  Stream s(1);
  const int n = 100000;
  double sum = 0.0, prev = 0.0, cross = 0.0, sq = 0.0;
  double lo = 1.0, hi = 0.0;
  for (int k = 0; k < n; ++k) {
    const double u = s.next_uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
    sq += u * u;
    if (k > 0) cross += prev * u;
    prev = u;
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  const double mean = sum / n;
  // se of the mean for U[0,1) is 1/sqrt(12 n)
  CHECK(std::abs(mean - 0.5) <= 4.0 / std::sqrt(12.0 * n));
  const double var = sq / n - mean * mean;
  const double rho = (cross / (n - 1) - mean * mean) / var;
  CHECK(std::abs(rho) < 0.02);
  CHECK(lo < 0.001);
  CHECK(hi > 0.999);
}

TEST_CASE("exponential output has unit mean") {
  Stream s(7);
  const int n = 100000;
  double sum = 0.0;
  for (int k = 0; k < n; ++k) {
    const double e = s.next_exponential();
    CHECK(e >= 0.0);
    sum += e;
  }
  CHECK(std::abs(sum / n - 1.0) <= 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("distinct kinds decorrelate") {
  NoiseArchitecture arch(9);
  Stream a = arch.stream(StreamKind::kIndividualRandomization, 0, 0, 0, 0);
  Stream b = arch.stream(StreamKind::kInitialState, 0, 0, 0, 0);
  const int n = 50000;
  double sa = 0, sb = 0, sab = 0, sa2 = 0, sb2 = 0;
  for (int k = 0; k < n; ++k) {
    const double x = a.next_uniform();
    const double y = b.next_uniform();
    sa += x;
    sb += y;
    sab += x * y;
    sa2 += x * x;
    sb2 += y * y;
  }
  const double ma = sa / n, mb = sb / n;
  const double cov = sab / n - ma * mb;
  const double rho =
      cov / std::sqrt((sa2 / n - ma * ma) * (sb2 / n - mb * mb));
  CHECK(std::abs(rho) < 0.02);
}

}  // TEST_SUITE
