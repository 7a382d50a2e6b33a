#pragma once

#include <cmath>
#include <complex>
#include <cstdint>

namespace rmsmtc {

// Counter-based generator: every draw is a pure function of
// (seed, stream, a, b, counter), so per-user and per-subcarrier draws do not
// depend on evaluation order.
class CounterRng {
 public:
  enum Stream : std::uint64_t {
    kUserPosition = 1,
    kTnRelayNlos = 2,
    kRelayRmsNlos = 3,
    kInitPhase = 4,
    kRandomPhase = 5,
    kSdrGaussian = 6,
  };

  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t word(std::uint64_t stream, std::uint64_t a, std::uint64_t b,
                     std::uint64_t ctr) const {
    std::uint64_t h = mix(seed_ + 0x632be59bd9b4e019ULL * (stream + 1));
    h = mix(h ^ (a + 0x9e3779b97f4a7c15ULL));
    h = mix(h ^ (b + 0xd1b54a32d192ed03ULL));
    h = mix(h ^ (ctr + 0x8cb92ba72f3d8dd7ULL));
    return h;
  }

  // uniform in [0, 1)
  double uniform(std::uint64_t stream, std::uint64_t a, std::uint64_t b,
                 std::uint64_t ctr) const {
    return static_cast<double>(word(stream, a, b, ctr) >> 11) * 0x1.0p-53;
  }

  // uniform in (0, 1]
  double uniform_pos(std::uint64_t stream, std::uint64_t a, std::uint64_t b,
                     std::uint64_t ctr) const {
    return static_cast<double>((word(stream, a, b, ctr) >> 11) + 1) * 0x1.0p-53;
  }

  // circularly symmetric complex normal, E|z|^2 = 1
  std::complex<double> complex_normal(std::uint64_t stream, std::uint64_t a,
                                      std::uint64_t b) const {
    const double u1 = uniform_pos(stream, a, b, 0);
    const double u2 = uniform(stream, a, b, 1);
    const double r = std::sqrt(-std::log(u1));
    const double phi = 2.0 * M_PI * u2;
    return {r * std::cos(phi), r * std::sin(phi)};
  }

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t seed_;
};

}  // namespace rmsmtc
