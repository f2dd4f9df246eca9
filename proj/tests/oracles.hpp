// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <vector>

// Independent brute-force references used only by tests. These must not
// share code with the implementation paths they check.

namespace oracle {

// O(N^2) DFT straight from the definition.
inline std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& x) {
  size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double a = -2.0 * M_PI * static_cast<double>(k * i % n) / static_cast<double>(n);
      acc += x[i] * std::complex<double>(std::cos(a), std::sin(a));
    }
    out[k] = acc;
  }
  return out;
}

// Scalar-loop LSTM recurrence; gate order i,f,g,o; wx [4H][D], wh [4H][H].
inline std::vector<std::vector<double>> scalar_lstm(
    const std::vector<std::vector<double>>& x, const std::vector<std::vector<double>>& wx,
    const std::vector<std::vector<double>>& wh, const std::vector<double>& b, bool reverse) {
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  size_t steps = x.size();
  size_t h_size = wh[0].size();
  std::vector<std::vector<double>> out(steps, std::vector<double>(h_size, 0.0));
  std::vector<double> h(h_size, 0.0), c(h_size, 0.0);
  for (size_t s = 0; s < steps; ++s) {
    size_t t = reverse ? steps - 1 - s : s;
    std::vector<double> gates(4 * h_size, 0.0);
    for (size_t j = 0; j < 4 * h_size; ++j) {
      double acc = b[j];
      for (size_t d = 0; d < x[t].size(); ++d) acc += wx[j][d] * x[t][d];
      for (size_t p = 0; p < h_size; ++p) acc += wh[j][p] * h[p];
      gates[j] = acc;
    }
    for (size_t j = 0; j < h_size; ++j) {
      double ig = sig(gates[j]);
      double fg = sig(gates[h_size + j]);
      double gg = std::tanh(gates[2 * h_size + j]);
      double og = sig(gates[3 * h_size + j]);
      c[j] = fg * c[j] + ig * gg;
      h[j] = og * std::tanh(c[j]);
      out[t][j] = h[j];
    }
  }
  return out;
}

// Full-table edit-distance DP with explicit backtrace counts.
// Preference on cost ties: substitution/match, then insertion, then deletion.
struct EditCounts {
  long sub = 0, del = 0, ins = 0;
};

inline EditCounts quadratic_wer_dp(const std::vector<std::string>& ref,
                                   const std::vector<std::string>& hyp) {
  size_t n = ref.size(), m = hyp.size();
  std::vector<std::vector<long>> cost(n + 1, std::vector<long>(m + 1, 0));
  for (size_t i = 0; i <= n; ++i) cost[i][0] = static_cast<long>(i);
  for (size_t j = 0; j <= m; ++j) cost[0][j] = static_cast<long>(j);
  for (size_t i = 1; i <= n; ++i)
    for (size_t j = 1; j <= m; ++j) {
      long diag = cost[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      long ins = cost[i][j - 1] + 1;
      long del = cost[i - 1][j] + 1;
      cost[i][j] = std::min({diag, ins, del});
    }
  EditCounts counts;
  size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        cost[i][j] == cost[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++counts.sub;
      --i;
      --j;
    } else if (j > 0 && cost[i][j] == cost[i][j - 1] + 1) {
      ++counts.ins;
      --j;
    } else {
      ++counts.del;
      --i;
    }
  }
  return counts;
}

}  // namespace oracle
