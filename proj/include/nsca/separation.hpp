#pragma once

// Nonstationary component analysis: separation driven by class-conditional
// covariances. Two classes use a generalized eigendecomposition against the
// total covariance; more classes use approximate joint diagonalization.

#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nsca/detectors.hpp"
#include "nsca/error.hpp"
#include "nsca/linalg.hpp"
#include "nsca/matrix.hpp"
#include "nsca/partition.hpp"
#include "nsca/record.hpp"

namespace nsca {

struct SeparationDiagnostics {
  /// Weighted off-diagonal mass of the diagonalized set under W.
  double residual = 0.0;
  /// max |WᵀC_xW − I| (meaningful when whitening by C_x).
  double whitening_error = 0.0;
  double total_condition = 0.0;
  /// Generalized eigenvalues (two-class) in the declared order.
  Vector eigenvalues;
  int sweeps = 0;
  double reg_eps = 0.0;
};

/// Round-one output of a two-round targeted separation.
struct RoundOne {
  Matrix demixer;
  Record sources;
  double residual = 0.0;
  std::size_t target = 0;
  Partition mask;
};

struct SeparationResult {
  Matrix demixer;               // W; column i is w_i, y_k = Wᵀx_k
  std::vector<Vector> spectra;  // per class, diag(WᵀC_iW)
  SortOrder order = SortOrder::Descending;
  Record sources;
  std::vector<double> class_weights;
  SeparationDiagnostics diagnostics;
  std::optional<RoundOne> round1;
};

/// y_k = Wᵀx_k; channel i of the output is w_iᵀx.
inline Record apply_separation(const Matrix& w, const Record& record) {
  const std::size_t n = record.channels();
  if (w.rows() != n || w.cols() != n) throw Error(ErrorCode::ShapeMismatch, "demixer must be n x n");
  Record out(n, record.length(), record.sample_rate_hz());
  for (std::size_t i = 0; i < n; ++i) {
    auto dst = out.channel(i);
    for (std::size_t c = 0; c < n; ++c) {
      const double wc = w(c, i);
      if (wc == 0.0) continue;
      const auto src = record.channel(c);
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += wc * src[k];
    }
  }
  return out;
}

/// Per-class eigenvalue ratios d_j = Λ_j ⊘ Σ_{i≠j} weight_i·Λ_i and the
/// component that best separates each class from the rest.
struct ClassComponentMap {
  std::vector<Vector> ratios;
  std::vector<std::size_t> best_component;
  /// False when two classes share their best component.
  bool one_to_one = true;
};

inline constexpr double kRatioFloor = 1e-12;

inline ClassComponentMap eigenratio_map(std::span<const Vector> spectra, std::span<const double> weights) {
  if (spectra.size() < 2 || weights.size() != spectra.size())
    throw Error(ErrorCode::ShapeMismatch, "eigenratio_map needs >= 2 spectra and matching weights");
  const std::size_t n = spectra.front().size();
  ClassComponentMap map;
  for (std::size_t j = 0; j < spectra.size(); ++j) {
    Vector d(n);
    for (std::size_t c = 0; c < n; ++c) {
      double den = 0.0;
      for (std::size_t i = 0; i < spectra.size(); ++i)
        if (i != j) den += weights[i] * spectra[i][c];
      d[c] = spectra[j][c] / std::max(den, kRatioFloor);
    }
    map.best_component.push_back(
        static_cast<std::size_t>(std::distance(d.begin(), std::max_element(d.begin(), d.end()))));
    map.ratios.push_back(std::move(d));
  }
  auto sorted = map.best_component;
  std::sort(sorted.begin(), sorted.end());
  map.one_to_one = std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
  return map;
}

namespace detail {

inline std::vector<Vector> spectra_of(const Matrix& w, std::span<const SymMatrix> set) {
  std::vector<Vector> out;
  for (const auto& c : set) out.push_back(congruence(w, c).diag());
  return out;
}

inline double whitening_error(const Matrix& w, const SymMatrix& cx) {
  const Matrix d = congruence(w, cx).matrix() - Matrix::identity(cx.dim());
  return d.max_abs();
}

inline Matrix permute_columns(const Matrix& w, std::span<const std::size_t> perm) {
  Matrix out(w.rows(), w.cols());
  for (std::size_t j = 0; j < perm.size(); ++j)
    for (std::size_t i = 0; i < w.rows(); ++i) out(i, j) = w(i, perm[j]);
  return out;
}

template <class F>
auto with_auto_regularization(double reg_eps, bool auto_reg, F&& run) {
  try {
    return run(reg_eps);
  } catch (const Error& e) {
    if (!auto_reg || reg_eps > 0.0 || e.code() != ErrorCode::NotPositiveDefinite) throw;
    return run(1e-10);
  }
}

}  // namespace detail

/// Two-class separation: W from the GEVD of (C_1, C_x) in descending order,
/// so WᵀC_xW = I and w_1 maximizes wᵀC_1w / wᵀC_xw. The first source carries
/// the most class-1 (nonstationary) energy relative to its total energy.
///
/// `reg_eps` adds reg_eps·trace(C_x)/n·I to C_x. With `auto_reg`, a
/// NotPositiveDefinite failure at reg_eps = 0 is retried once with 1e-10.
inline SeparationResult nsca_two_class(const Record& record, const Partition& mask, double reg_eps = 0.0,
                                       bool auto_reg = false) {
  if (mask.classes != 2) throw Error(ErrorCode::BadClass, "two-class separation needs a K = 2 mask");
  const CovarianceSet cov = class_covariances(record, mask, WeightRule::Cardinality);
  return detail::with_auto_regularization(reg_eps, auto_reg, [&](double eps) {
    const EigPair e = gevd(cov.class_cov[1], cov.total_cov, SortOrder::Descending, eps);
    SeparationResult res;
    res.demixer = e.vectors;
    res.order = SortOrder::Descending;
    res.spectra = detail::spectra_of(res.demixer, cov.class_cov);
    res.class_weights = cov.weights;
    res.sources = apply_separation(res.demixer, record);
    const std::vector<SymMatrix> pair{cov.class_cov[1], regularized(cov.total_cov, eps)};
    const std::vector<double> ones{1.0, 1.0};
    res.diagnostics.residual = off_diag_residual(res.demixer, pair, ones);
    res.diagnostics.whitening_error = detail::whitening_error(res.demixer, pair[1]);
    res.diagnostics.total_condition = condition_number(cov.total_cov);
    res.diagnostics.eigenvalues = e.values;
    res.diagnostics.reg_eps = eps;
    return res;
  });
}

/// Multi-class separation by approximate joint diagonalization of the class
/// covariances.
///
/// include_total = false: hard whitening by C_x, then AJD of {C_i} weighted
/// by the class weights (sources come out exactly decorrelated).
/// include_total = true: no whitening beyond a scalar (trace(C_x)/n·I); C_x
/// joins the set with the mean class weight. This leaves W orthogonal up to
/// scale and trades decorrelation for the n(n−1)/2 freed degrees of freedom.
///
/// Components are ordered by descending eigenvalue ratio of the last class.
inline SeparationResult nsca_multi_class(const Record& record, const Partition& part, bool include_total = false,
                                         WeightRule rule = WeightRule::Cardinality, const AjdOptions& opts = {}) {
  const CovarianceSet cov = class_covariances(record, part, rule);
  const std::size_t n = record.channels();
  std::vector<SymMatrix> set = cov.class_cov;
  std::vector<double> weights = cov.weights;
  SymMatrix whitener = cov.total_cov;
  if (include_total) {
    const double mean_w = std::accumulate(weights.begin(), weights.end(), 0.0) / static_cast<double>(weights.size());
    set.push_back(cov.total_cov);
    weights.push_back(mean_w);
    whitener = (cov.total_cov.trace() / static_cast<double>(n)) * SymMatrix::identity(n);
  }
  const AjdResult r = ajd(set, weights, whitener, opts);

  const auto raw_spectra = detail::spectra_of(r.demixer, cov.class_cov);
  const ClassComponentMap map = eigenratio_map(raw_spectra, cov.weights);
  const auto perm = detail::sort_permutation(map.ratios.back(), SortOrder::Descending);

  SeparationResult res;
  res.demixer = detail::permute_columns(r.demixer, perm);
  res.order = SortOrder::Descending;
  res.spectra = detail::spectra_of(res.demixer, cov.class_cov);
  res.class_weights = cov.weights;
  res.sources = apply_separation(res.demixer, record);
  res.diagnostics.residual = r.residual;
  res.diagnostics.sweeps = r.sweeps;
  res.diagnostics.whitening_error = detail::whitening_error(res.demixer, cov.total_cov);
  res.diagnostics.total_condition = condition_number(cov.total_cov);
  return res;
}

/// Symmetrized lagged covariances ½(C(τ) + C(τ)ᵀ) with
/// C(τ) = 1/(T−τ)·Σ_k (x_{k+τ} − m)(x_k − m)ᵀ.
inline std::vector<SymMatrix> lagged_covariances(const Record& record, std::span<const std::size_t> lags) {
  const std::size_t n = record.channels();
  const std::size_t t = record.length();
  Vector mean(n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    for (double v : record.channel(c)) mean[c] += v;
    mean[c] /= static_cast<double>(t);
  }
  std::vector<SymMatrix> out;
  for (std::size_t lag : lags) {
    if (lag == 0 || lag >= t) throw Error(ErrorCode::BadInput, "lags must satisfy 1 <= lag < T");
    Matrix c(n, n);
    for (std::size_t a = 0; a < n; ++a) {
      const auto xa = record.channel(a);
      for (std::size_t b = 0; b < n; ++b) {
        const auto xb = record.channel(b);
        double s = 0.0;
        for (std::size_t k = 0; k + lag < t; ++k) s += (xa[k + lag] - mean[a]) * (xb[k] - mean[b]);
        c(a, b) = s / static_cast<double>(t - lag);
      }
    }
    out.emplace_back(c);
  }
  return out;
}

/// Second-order blind separation: AJD of symmetrized lagged covariances
/// after whitening by C_x. Components ordered by descending first-lag
/// autocovariance (smoothest first).
inline SeparationResult second_order_separation(const Record& record, std::span<const std::size_t> lags,
                                                const AjdOptions& opts = {}) {
  if (lags.empty()) throw Error(ErrorCode::BadInput, "need at least one lag");
  const std::size_t t = record.length();
  const std::size_t n = record.channels();
  if (t < n + 2) throw ClassTooSmallError(0, t, n + 2);
  Matrix total(n, n);
  {
    Vector mean(n, 0.0);
    for (std::size_t c = 0; c < n; ++c) {
      for (double v : record.channel(c)) mean[c] += v;
      mean[c] /= static_cast<double>(t);
    }
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a; b < n; ++b) {
        double s = 0.0;
        const auto xa = record.channel(a);
        const auto xb = record.channel(b);
        for (std::size_t k = 0; k < t; ++k) s += (xa[k] - mean[a]) * (xb[k] - mean[b]);
        total(a, b) = total(b, a) = s / static_cast<double>(t - 1);
      }
  }
  const SymMatrix cx(total);
  const auto set = lagged_covariances(record, lags);
  const std::vector<double> weights(set.size(), 1.0);
  const AjdResult r = ajd(set, weights, cx, opts);

  const auto lag_spectra = detail::spectra_of(r.demixer, set);
  const auto perm = detail::sort_permutation(lag_spectra.front(), SortOrder::Descending);
  SeparationResult res;
  res.demixer = detail::permute_columns(r.demixer, perm);
  res.order = SortOrder::Descending;
  res.spectra = detail::spectra_of(res.demixer, set);
  res.sources = apply_separation(res.demixer, record);
  res.diagnostics.residual = r.residual;
  res.diagnostics.sweeps = r.sweeps;
  res.diagnostics.whitening_error = detail::whitening_error(res.demixer, cx);
  res.diagnostics.total_condition = condition_number(cx);
  return res;
}

struct TargetedOptions {
  double theta_rel = 0.5;
  std::size_t envelope_window = 101;
  double reg_eps = 0.0;
  AjdOptions ajd;
};

/// Two-round targeted separation. Round one separates all components by
/// second-order AJD; round two refines `target` as a one-vs-rest problem:
/// samples where the target's energy envelope reaches theta_rel of its peak
/// form class 1, and the record is separated by two-class NSCA with that mask.
inline SeparationResult two_round_targeted(const Record& record, std::span<const std::size_t> lags,
                                           std::size_t target, const TargetedOptions& opts = {}) {
  if (target >= record.channels())
    throw Error(ErrorCode::BadComponent, "target component " + std::to_string(target) + " out of range");
  const SeparationResult r1 = second_order_separation(record, lags, opts.ajd);
  const std::size_t window = std::min(opts.envelope_window, record.length() % 2 ? record.length()
                                                                                 : record.length() - 1);
  const IndexSeries env = energy_envelope(r1.sources.channel(target), window);
  Partition mask = threshold_mask(env, opts.theta_rel);
  SeparationResult r2 = nsca_two_class(record, mask, opts.reg_eps);
  r2.round1 = RoundOne{r1.demixer, r1.sources, r1.diagnostics.residual, target, std::move(mask)};
  return r2;
}

}  // namespace nsca
