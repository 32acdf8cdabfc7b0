#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ydl/core.hpp"
#include "ydl/ensembles.hpp"

namespace gen {

inline int int_in(ydl::Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

inline double real_in(ydl::Rng& rng, double lo, double hi) { return lo + (hi - lo) * ydl::uniform01(rng); }

// random partition: nonincreasing parts, up to `max_len` of them, each <= max_part
inline ydl::YoungDiagram partition(ydl::Rng& rng, int max_len, int max_part) {
  ydl::YoungDiagram p;
  int len = int_in(rng, 0, max_len);
  int cap = max_part;
  for (int i = 0; i < len && cap > 0; ++i) {
    cap = int_in(rng, 1, cap);
    p.columns.push_back(cap);
  }
  return p;
}

// random strict partition: distinct parts
inline ydl::YoungDiagram strict_partition(ydl::Rng& rng, int max_len, int max_part) {
  ydl::YoungDiagram p;
  int len = int_in(rng, 0, max_len);
  int cap = max_part;
  for (int i = 0; i < len && cap > 0; ++i) {
    cap = int_in(rng, 1, cap);
    p.columns.push_back(cap);
    --cap;
  }
  return p;
}

inline ydl::YoungDiagram diagram(ydl::Rng& rng, ydl::Statistics s, int max_len, int max_part) {
  return s == ydl::Statistics::U ? partition(rng, max_len, max_part) : strict_partition(rng, max_len, max_part);
}

// smooth bump with random centre and width
struct Bump {
  double centre, width, height;
  double operator()(double u) const { return height * std::exp(-(u - centre) * (u - centre) / (width * width)); }
};
inline Bump bump(ydl::Rng& rng, double lo, double hi) {
  return {real_in(rng, lo, hi), real_in(rng, 0.3, 1.5), real_in(rng, 0.5, 2.0)};
}

}  // namespace gen
