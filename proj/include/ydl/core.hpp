#pragma once

#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ydl {

enum class Statistics { U, RU };

const char* to_string(Statistics s);
Statistics parse_statistics(std::string_view text);

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct TruncationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SingularityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvariantError : std::logic_error {
  using std::logic_error::logic_error;
};

// shape constants of the two limit curves
inline constexpr double kAlpha = std::numbers::pi / (std::numbers::sqrt2 * std::numbers::sqrt3);
inline constexpr double kBeta = std::numbers::pi / (2.0 * std::numbers::sqrt3);

inline double shape_constant(Statistics s) { return s == Statistics::U ? kAlpha : kBeta; }

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);
// stream seed for task `index` under master seed; independent of scheduling
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

// uniform on [0,1) with 53 random bits
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// YDL_THREADS overrides hardware_concurrency
unsigned default_threads();

// Runs body(chunk) for chunk = 0..chunks-1 on up to `threads` workers.
// Work assignment to chunks is fixed, so results never depend on threads.
void parallel_chunks(std::size_t chunks, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace ydl
