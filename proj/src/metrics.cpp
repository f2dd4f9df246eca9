// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "msep/metrics.hpp"

#include <cmath>
#include <sstream>

#include "msep/errors.hpp"
#include "msep/kernels.hpp"

namespace msep {

namespace {

constexpr double kDiagReg = 1e-10;

// Levinson recursion for symmetric positive definite Toeplitz systems.
// Returns false on numerical breakdown so the caller can fall back to
// a dense factorization.
bool solve_toeplitz_levinson(const std::vector<double>& r, const std::vector<double>& b,
                             std::vector<double>& x) {
  size_t n = r.size();
  if (r[0] <= 0) return false;
  x.assign(n, 0.0);
  x[0] = b[0] / r[0];
  if (n == 1) return true;

  std::vector<double> y(n, 0.0), tmp(n, 0.0);
  double beta = 1.0;
  double alpha = -r[1] / r[0];
  y[0] = alpha;

  for (size_t k = 0; k + 1 < n; ++k) {
    beta *= (1.0 - alpha * alpha);
    if (!(beta > 1e-300)) return false;

    double mu = b[k + 1] / r[0];
    for (size_t i = 0; i <= k; ++i) mu -= (r[k + 1 - i] / r[0]) * x[i];
    mu /= beta;
    for (size_t i = 0; i <= k; ++i) tmp[i] = x[i] + mu * y[k - i];
    for (size_t i = 0; i <= k; ++i) x[i] = tmp[i];
    x[k + 1] = mu;

    if (k + 2 < n) {
      alpha = -r[k + 2] / r[0];
      for (size_t i = 0; i <= k; ++i) alpha -= (r[k + 1 - i] / r[0]) * y[i];
      alpha /= beta;
      if (!std::isfinite(alpha) || std::abs(alpha) >= 1.0) return false;
      for (size_t i = 0; i <= k; ++i) tmp[i] = y[i] + alpha * y[k - i];
      for (size_t i = 0; i <= k; ++i) y[i] = tmp[i];
      y[k + 1] = alpha;
    }
  }
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

// Dense LDL^T on the explicit Toeplitz matrix; slow path only.
bool solve_toeplitz_dense(const std::vector<double>& r, const std::vector<double>& b,
                          std::vector<double>& x) {
  size_t n = r.size();
  std::vector<double> a(n * n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) a[i * n + j] = r[i > j ? i - j : j - i];

  // in-place Cholesky
  for (size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (d <= 0) return false;
    d = std::sqrt(d);
    a[j * n + j] = d;
    for (size_t i = j + 1; i < n; ++i) {
      double v = a[i * n + j];
      for (size_t k = 0; k < j; ++k) v -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = v / d;
    }
  }
  x = b;
  for (size_t i = 0; i < n; ++i) {
    for (size_t k = 0; k < i; ++k) x[i] -= a[i * n + k] * x[k];
    x[i] /= a[i * n + i];
  }
  for (size_t ii = n; ii > 0; --ii) {
    size_t i = ii - 1;
    for (size_t k = i + 1; k < n; ++k) x[i] -= a[k * n + i] * x[k];
    x[i] /= a[i * n + i];
  }
  return true;
}

double clamp_db(double num, double den) {
  if (den <= 0.0) return num > 0.0 ? kSdrClampDb : -kSdrClampDb;
  if (num <= 0.0) return -kSdrClampDb;
  double db = 10.0 * std::log10(num / den);
  return std::min(std::max(db, -kSdrClampDb), kSdrClampDb);
}

}  // namespace

double sdr_bsseval(std::span<const double> estimate, std::span<const double> reference,
                   int filter_taps) {
  if (filter_taps < 1) throw ValidationError("sdr: filter_taps must be positive");
  long len = static_cast<long>(estimate.size());
  if (len != static_cast<long>(reference.size()))
    throw ValidationError("sdr: estimate and reference lengths differ (" + std::to_string(len) +
                          " vs " + std::to_string(reference.size()) + ")");
  if (len < 4L * filter_taps)
    throw ValidationError("sdr: signals must be at least 4*filter_taps samples (" +
                          std::to_string(4L * filter_taps) + "), got " + std::to_string(len));
  double ref_energy = 0;
  for (double v : reference) ref_energy += v * v;
  if (std::sqrt(ref_energy) < 1e-12) throw ValidationError("sdr: silent reference");

  const int taps = filter_taps;
  std::vector<double> r(taps), c(taps);
#pragma omp parallel for schedule(static)
  for (int tau = 0; tau < taps; ++tau) {
    double acc = 0;
    for (long t = 0; t + tau < len; ++t) acc += reference[t] * reference[t + tau];
    r[tau] = acc;
    double cc = 0;
    for (long v = 0; v + tau < len; ++v) cc += estimate[v + tau] * reference[v];
    c[tau] = cc;
  }
  r[0] += kDiagReg;

  std::vector<double> h;
  if (!solve_toeplitz_levinson(r, c, h)) {
    if (!solve_toeplitz_dense(r, c, h)) throw NumericalError("sdr: projection solve failed");
  }

  // s_target = h * reference over the zero-padded support
  long full = len + taps - 1;
  auto filtered = [&](long t) {
    double s = 0;
    int i0 = static_cast<int>(std::max(0L, t - len + 1));
    int i1 = static_cast<int>(std::min<long>(taps - 1, t));
    for (int i = i0; i <= i1; ++i) s += h[i] * reference[t - i];
    return s;
  };
  double target_energy = kernels::chunked_reduce<double>(full, [&](long t) {
    double s = filtered(t);
    return s * s;
  });
  double residual_energy = kernels::chunked_reduce<double>(full, [&](long t) {
    double s = filtered(t);
    double e = t < len ? estimate[t] : 0.0;
    return (e - s) * (e - s);
  });
  return clamp_db(target_energy, residual_energy);
}

double si_sdr(std::span<const double> estimate, std::span<const double> reference) {
  long len = static_cast<long>(estimate.size());
  if (len != static_cast<long>(reference.size()))
    throw ValidationError("si_sdr: estimate and reference lengths differ");
  double dot = 0, rr = 0;
  for (long i = 0; i < len; ++i) {
    dot += estimate[i] * reference[i];
    rr += reference[i] * reference[i];
  }
  if (std::sqrt(rr) < 1e-12) throw ValidationError("si_sdr: silent reference");
  double alpha = dot / rr;
  double num = 0, den = 0;
  for (long i = 0; i < len; ++i) {
    double s = alpha * reference[i];
    num += s * s;
    den += (estimate[i] - s) * (estimate[i] - s);
  }
  return clamp_db(num, den);
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string w;
  while (ss >> w) out.push_back(w);
  return out;
}

WerCounts wer(const std::vector<std::string>& reference_words,
              const std::vector<std::string>& hypothesis_words) {
  if (reference_words.empty())
    throw ValidationError("wer: reference transcript is empty (N must be > 0)");
  size_t n = reference_words.size(), m = hypothesis_words.size();

  struct Cell {
    long cost, sub, del, ins;
  };
  std::vector<Cell> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = {static_cast<long>(j), 0, 0, static_cast<long>(j)};

  for (size_t i = 1; i <= n; ++i) {
    cur[0] = {static_cast<long>(i), 0, static_cast<long>(i), 0};
    for (size_t j = 1; j <= m; ++j) {
      bool match = reference_words[i - 1] == hypothesis_words[j - 1];
      Cell diag = prev[j - 1];
      diag.cost += match ? 0 : 1;
      if (!match) diag.sub += 1;
      Cell ins = cur[j - 1];
      ins.cost += 1;
      ins.ins += 1;
      Cell del = prev[j];
      del.cost += 1;
      del.del += 1;
      // tie preference: substitution/match, then insertion, then deletion
      Cell best = diag;
      if (ins.cost < best.cost) best = ins;
      if (del.cost < best.cost) best = del;
      cur[j] = best;
    }
    std::swap(prev, cur);
  }

  WerCounts out;
  out.substitutions = prev[m].sub;
  out.deletions = prev[m].del;
  out.insertions = prev[m].ins;
  out.ref_words = static_cast<long>(n);
  out.wer = static_cast<double>(out.substitutions + out.deletions + out.insertions) / n;
  return out;
}

}  // namespace msep
