#pragma once

#include <cstdint>

namespace mftg {

// 64-bit avalanche finalizer (splitmix64). Fixed forever: every stream in the
// project derives from it, so changing it silently changes all experiments.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

// Counter-based uniform generator: state walks the golden-gamma sequence and
// each output is the avalanche of the counter, so draws are independent of
// call interleaving elsewhere.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  // Uniform on [0,1) with 53 random bits.
  double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Unit exponential via inverse CDF; never returns +inf since u < 1.
  double next_exponential();

 private:
  std::uint64_t state_;
};

// One stream per role in the probabilistic setup: per-agent noise, per-team
// common noise, global common noise, action randomizations at agent and team
// level, and initial-state sampling.
enum class StreamKind : std::uint64_t {
  kIdiosyncratic = 1,
  kTeamCommon = 2,
  kGlobalCommon = 3,
  kIndividualRandomization = 4,
  kTeamRandomization = 5,
  kInitialState = 6,
};

// Derives a dedicated Stream for every (kind, team, agent, time, replication)
// tuple from one master seed. Stateless; the same tuple always yields the
// same stream on every platform.
class NoiseArchitecture {
 public:
  explicit NoiseArchitecture(std::uint64_t master_seed) : master_(master_seed) {}

  std::uint64_t master_seed() const { return master_; }

  Stream stream(StreamKind kind, int team, int agent, std::int64_t time,
                std::uint64_t replication) const {
    // Absorb each field through a full avalanche round; +1 keeps the zero
    // values of adjacent fields from colliding.
    std::uint64_t h = mix64(master_ ^ 0x6a09e667f3bcc908ULL);
    h = mix64(h + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(kind) + 1));
    h = mix64(h + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(team) + 1));
    h = mix64(h + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(agent) + 1));
    h = mix64(h + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(time) + 1));
    h = mix64(h + 0x9e3779b97f4a7c15ULL * (replication + 1));
    return Stream(h);
  }

 private:
  std::uint64_t master_;
};

}  // namespace mftg
