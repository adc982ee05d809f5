#include "qportfolio/random_stream.hpp"

#include <array>
#include <cmath>

#include "qportfolio/errors.hpp"

namespace qportfolio {
namespace {

constexpr std::uint64_t kCounterGamma = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kStreamGamma = 0xD1B54A32D192ED03ULL;
// Words reserved per variate; a ziggurat draw needs one word 98.8% of the time.
constexpr std::uint64_t kWordsPerVariate = 64;

constexpr int kLayers = 128;
constexpr double kTailStart = 3.442619855899;
constexpr double kLayerArea = 9.91256303526217e-3;

struct ZigguratTables {
  std::array<double, kLayers + 1> x{};
  std::array<double, kLayers> ratio{};

  ZigguratTables() {
    double f = std::exp(-0.5 * kTailStart * kTailStart);
    x[0] = kLayerArea / f;
    x[1] = kTailStart;
    x[kLayers] = 0.0;
    for (int i = 2; i < kLayers; ++i) {
      x[i] = std::sqrt(-2.0 * std::log(kLayerArea / x[i - 1] + f));
      f = std::exp(-0.5 * x[i] * x[i]);
    }
    for (int i = 0; i < kLayers; ++i) ratio[i] = x[i + 1] / x[i];
  }
};

// Built during static initialisation; nothing draws variates before main.
const ZigguratTables kTables;

// (0, 1) from the top 53 bits.
inline double open_unit(std::uint64_t w) noexcept { return (static_cast<double>(w >> 11) + 0.5) * 0x1.0p-53; }

}  // namespace

RandomStream::RandomStream(std::uint64_t master_seed, std::uint64_t stream_id) noexcept
    : master_seed_(master_seed),
      stream_id_(stream_id),
      key_(mix64(mix64(master_seed) + (stream_id + 1) * kStreamGamma)) {}

double RandomStream::normal_for(std::uint64_t k) const noexcept {
  const auto& t = kTables;
  const std::uint64_t base = key_ + k * kWordsPerVariate * kCounterGamma;
  std::uint64_t j = 0;
  auto word = [&]() noexcept {
    // past the reserved block the counter moves to a salted sequence so it never overlaps variate k+1
    const std::uint64_t w = j < kWordsPerVariate ? mix64(base + j * kCounterGamma)
                                                 : mix64(mix64(base ^ 0xA0761D6478BD642FULL) + j * kCounterGamma);
    ++j;
    return w;
  };
  for (;;) {
    const std::uint64_t w = word();
    const unsigned layer = static_cast<unsigned>(w & 0x7F);
    const double u = (static_cast<double>(w >> 11) + 0.5) * 0x1.0p-52 - 1.0;
    if (std::abs(u) < t.ratio[layer]) return u * t.x[layer];
    if (layer == 0) {
      double x = 0.0;
      double y = 0.0;
      do {
        x = std::log(open_unit(word())) / kTailStart;
        y = std::log(open_unit(word()));
      } while (-2.0 * y < x * x);
      return u < 0.0 ? x - kTailStart : kTailStart - x;
    }
    const double x = u * t.x[layer];
    const double f0 = std::exp(-0.5 * (t.x[layer] * t.x[layer] - x * x));
    const double f1 = std::exp(-0.5 * (t.x[layer + 1] * t.x[layer + 1] - x * x));
    if (f1 + open_unit(word()) * (f0 - f1) < 1.0) return x;
  }
}

std::vector<double> wiener_increments(RandomStream& stream, std::size_t n, double dt) {
  if (!(dt > 0.0)) throw DomainError("wiener_increments: dt must be > 0");
  std::vector<double> out(n);
  const double scale = std::sqrt(dt);
  for (auto& v : out) v = scale * stream.next_normal();
  return out;
}

}  // namespace qportfolio
