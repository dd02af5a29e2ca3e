#include "specmc/error.hpp"
#include "specmc/rng.hpp"

namespace specmc {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::format: return "format error";
    case Errc::parse: return "parse error";
    case Errc::endpoint: return "endpoint error";
    case Errc::too_short: return "input too short";
    case Errc::singular: return "singular spectrum";
    case Errc::domain: return "domain error";
    case Errc::shape: return "shape error";
    case Errc::truncation: return "truncation error";
    case Errc::conditioning: return "numerical conditioning error";
    case Errc::partition: return "partition error";
    case Errc::stencil: return "stencil error";
    case Errc::empty_sample: return "empty sample";
    case Errc::degenerate: return "degenerate input";
    case Errc::convergence: return "convergence error";
    case Errc::initialization: return "initialization error";
    case Errc::config: return "config error";
  }
  return "error";
}

std::uint64_t split_seed(std::uint64_t seed, Stream stream, std::uint64_t index) noexcept {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(seed);
  h = mix(h ^ static_cast<std::uint64_t>(stream));
  return mix(h ^ index);
}

}  // namespace specmc
