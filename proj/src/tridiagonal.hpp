#pragma once

#include <stdexcept>
#include <vector>

namespace ydl::detail {

// Solves lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i] in place (rhs -> x).
// lower[0] and upper[n-1] are ignored.
inline void solve_tridiagonal(const std::vector<double>& lower, const std::vector<double>& diag,
                              const std::vector<double>& upper, std::vector<double>& rhs, std::vector<double>& scratch) {
  const std::size_t n = diag.size();
  scratch.resize(n);
  double b = diag[0];
  if (b == 0.0) throw std::runtime_error("singular tridiagonal system");
  rhs[0] /= b;
  for (std::size_t i = 1; i < n; ++i) {
    scratch[i] = upper[i - 1] / b;
    b = diag[i] - lower[i] * scratch[i];
    if (b == 0.0) throw std::runtime_error("singular tridiagonal system");
    rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / b;
  }
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= scratch[i + 1] * rhs[i + 1];
}

}  // namespace ydl::detail
