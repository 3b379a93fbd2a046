#pragma once

// Nonstationarity detectors. Every detector maps a record (or one scalar
// series of it) to an IndexSeries aligned sample-for-sample with the input.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "nsca/error.hpp"
#include "nsca/linalg.hpp"
#include "nsca/matrix.hpp"
#include "nsca/record.hpp"

namespace nsca {

/// Gaussian fit of a scalar series, used as the global reference CDF.
struct FittedCdf {
  double mean = 0.0;
  double std = 1.0;

  double cdf(double x) const { return 0.5 * std::erfc(-(x - mean) / (std * std::numbers::sqrt2)); }
  /// 1 − cdf(x), evaluated directly so the upper tail keeps full precision.
  double sf(double x) const { return 0.5 * std::erfc((x - mean) / (std * std::numbers::sqrt2)); }
};

inline FittedCdf fit_gaussian_cdf(std::span<const double> series) {
  if (series.size() < 2) throw Error(ErrorCode::DegenerateSeries, "need at least two samples");
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(series.size());
  double ss = 0.0;
  for (double v : series) ss += (v - mean) * (v - mean);
  const double var = ss / static_cast<double>(series.size() - 1);
  if (var < 1e-24) throw Error(ErrorCode::DegenerateSeries, "variance below 1e-24");
  return {mean, std::sqrt(var)};
}

inline constexpr double kCdfClamp = 1e-12;

/// Anderson–Darling statistic of each trailing window of length p against
/// the fitted CDF:
///   A² = −p − (1/p)·Σ_{i=1..p} (2i−1)·ln[F(z_i)·(1 − F(z_{p+1−i}))]
/// with z the ascending-sorted window. F is clamped to [1e-12, 1 − 1e-12].
inline IndexSeries anderson_darling_index(std::span<const double> series, std::size_t p, const FittedCdf& cdf) {
  const std::size_t t = series.size();
  if (p < 1 || p > t) throw Error(ErrorCode::InvalidWindow, "AD window must satisfy 1 <= p <= T");
  IndexSeries out{Vector(t, 0.0), p - 1, "anderson_darling"};
  std::vector<double> z(p);
  const double pd = static_cast<double>(p);
  auto clamp = [](double f) { return std::clamp(f, kCdfClamp, 1.0 - kCdfClamp); };
  for (std::size_t k = p - 1; k < t; ++k) {
    std::copy(series.begin() + static_cast<std::ptrdiff_t>(k + 1 - p),
              series.begin() + static_cast<std::ptrdiff_t>(k + 1), z.begin());
    std::sort(z.begin(), z.end());
    double s = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      const double lo = clamp(cdf.cdf(z[i]));
      const double hi = clamp(cdf.sf(z[p - 1 - i]));
      s += (2.0 * static_cast<double>(i) + 1.0) * (std::log(lo) + std::log(hi));
    }
    out.values[k] = -pd - s / pd;
  }
  return out;
}

/// Centered moving mean of x²; windows are truncated at the edges.
inline IndexSeries energy_envelope(std::span<const double> series, std::size_t window) {
  const std::size_t t = series.size();
  if (window < 1 || window % 2 == 0 || window > t)
    throw Error(ErrorCode::InvalidWindow, "envelope window must be odd and <= T");
  const std::size_t half = window / 2;
  IndexSeries out{Vector(t, 0.0), 0, "energy_envelope"};
  for (std::size_t k = 0; k < t; ++k) {
    const std::size_t lo = k >= half ? k - half : 0;
    const std::size_t hi = std::min(t - 1, k + half);
    double s = 0.0;
    for (std::size_t i = lo; i <= hi; ++i) s += series[i] * series[i];
    out.values[k] = s / static_cast<double>(hi - lo + 1);
  }
  return out;
}

/// |sample cumulant| of the trailing window: order 1 mean, 2 variance,
/// 3 third central moment, 4 the excess-kurtosis numerator m₄ − 3m₂².
/// Central moments use the 1/w normalization.
inline IndexSeries cumulant_tracking(std::span<const double> series, std::size_t window, int order) {
  const std::size_t t = series.size();
  if (order < 1 || order > 4) throw Error(ErrorCode::InvalidWindow, "cumulant order must be 1..4");
  if (window < 1 || window > t || (order >= 3 && window < 8))
    throw Error(ErrorCode::InvalidWindow, "cumulant window out of range");
  IndexSeries out{Vector(t, 0.0), window - 1, "cumulant" + std::to_string(order)};
  const double w = static_cast<double>(window);
  for (std::size_t k = window - 1; k < t; ++k) {
    const auto win = series.subspan(k + 1 - window, window);
    double mean = 0.0;
    for (double v : win) mean += v;
    mean /= w;
    if (order == 1) {
      out.values[k] = std::abs(mean);
      continue;
    }
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : win) {
      const double c = v - mean;
      const double c2 = c * c;
      m2 += c2;
      m3 += c2 * c;
      m4 += c2 * c2;
    }
    m2 /= w;
    m3 /= w;
    m4 /= w;
    switch (order) {
      case 2: out.values[k] = m2; break;
      case 3: out.values[k] = std::abs(m3); break;
      default: out.values[k] = std::abs(m4 - 3.0 * m2 * m2); break;
    }
  }
  return out;
}

enum class EasiNonlinearity { Cubic, Tanh };

/// EASI serial update W ← W − λ·H(y)·W with y = W·x and
/// H(y) = yyᵀ − I + g(y)yᵀ − y·g(y)ᵀ, starting from W = I. The index is
/// ‖H(y_k)‖_F. Samples must be pre-scaled by the caller (roughly unit variance).
inline IndexSeries easi_index(const Record& record, double step, EasiNonlinearity g = EasiNonlinearity::Cubic) {
  const std::size_t n = record.channels();
  const std::size_t t = record.length();
  if (n < 2) throw Error(ErrorCode::BadInput, "EASI needs at least two channels");
  if (!(step > 0.0)) throw Error(ErrorCode::BadInput, "EASI step must be positive");
  IndexSeries out{Vector(t, 0.0), 0, "easi"};
  Matrix w = Matrix::identity(n);
  Matrix h(n, n);
  Vector x(n), gy(n);
  for (std::size_t k = 0; k < t; ++k) {
    for (std::size_t c = 0; c < n; ++c) x[c] = record.at(c, k);
    const Vector y = w * x;
    for (std::size_t i = 0; i < n; ++i) gy[i] = g == EasiNonlinearity::Cubic ? y[i] * y[i] * y[i] : std::tanh(y[i]);
    double frob = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double v = y[i] * y[j] - (i == j ? 1.0 : 0.0) + gy[i] * y[j] - y[i] * gy[j];
        h(i, j) = v;
        frob += v * v;
      }
    out.values[k] = std::sqrt(frob);
    w -= (h * w) *= step;
    for (double v : w.data())
      if (!(std::abs(v) <= 1e6))
        throw Error(ErrorCode::Diverged, "EASI demixer exceeded 1e6 at k=" + std::to_string(k) + "; reduce the step");
  }
  return out;
}

namespace detail {

/// Levinson–Durbin on autocorrelations r[0..q]; coefficients a with
/// x_t ≈ Σ a_i x_{t−i}. Returns false when the Toeplitz system is singular.
inline bool levinson_durbin(std::span<const double> r, std::span<double> a) {
  const std::size_t q = a.size();
  std::fill(a.begin(), a.end(), 0.0);
  double err = r[0];
  if (!(err > 0.0)) return false;
  std::vector<double> prev(q, 0.0);
  for (std::size_t m = 0; m < q; ++m) {
    double acc = r[m + 1];
    for (std::size_t i = 0; i < m; ++i) acc -= a[i] * r[m - i];
    const double kappa = acc / err;
    std::copy(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(m), prev.begin());
    a[m] = kappa;
    for (std::size_t i = 0; i < m; ++i) a[i] = prev[i] - kappa * prev[m - 1 - i];
    err *= (1.0 - kappa * kappa);
    if (!(err > 1e-14 * r[0])) return false;
  }
  return true;
}

}  // namespace detail

/// Tracks Yule–Walker AR(q) coefficients over trailing windows of length w;
/// the index is ‖a_k − a_{k−hop}‖₂ with hop = max(1, w/4). Windows whose
/// autocorrelation system is singular contribute a zero coefficient vector
/// and are counted in `fallback_count`.
inline IndexSeries ar_tracking(std::span<const double> series, std::size_t window, std::size_t ar_order) {
  const std::size_t t = series.size();
  if (ar_order < 1 || window < 4 * ar_order || window > t)
    throw Error(ErrorCode::InvalidWindow, "AR tracking needs q >= 1 and 4q <= w <= T");
  const std::size_t hop = std::max<std::size_t>(1, window / 4);
  IndexSeries out{Vector(t, 0.0), window - 1 + hop, "ar"};
  if (out.valid_from >= t) throw Error(ErrorCode::InvalidWindow, "AR window plus hop exceeds T");

  std::vector<Vector> coeffs(t);
  Vector c(window), r(ar_order + 1);
  const double w = static_cast<double>(window);
  for (std::size_t k = window - 1; k < t; ++k) {
    const auto win = series.subspan(k + 1 - window, window);
    double mean = 0.0;
    for (double v : win) mean += v;
    mean /= w;
    for (std::size_t i = 0; i < window; ++i) c[i] = win[i] - mean;
    for (std::size_t lag = 0; lag <= ar_order; ++lag) {
      double s = 0.0;
      for (std::size_t i = lag; i < window; ++i) s += c[i] * c[i - lag];
      r[lag] = s / w;
    }
    Vector a(ar_order, 0.0);
    const bool ok = r[0] > 1e-20 * (mean * mean) && r[0] > 1e-300 && detail::levinson_durbin(r, a);
    if (!ok) {
      std::fill(a.begin(), a.end(), 0.0);
      ++out.fallback_count;
    }
    coeffs[k] = std::move(a);
  }
  for (std::size_t k = out.valid_from; k < t; ++k) {
    double d = 0.0;
    for (std::size_t i = 0; i < ar_order; ++i) {
      const double diff = coeffs[k][i] - coeffs[k - hop][i];
      d += diff * diff;
    }
    out.values[k] = std::sqrt(d);
  }
  return out;
}

/// Linear time-invariant state-space model:
///   s_{k+1} = F s_k + w_k,  x_k = H s_k + v_k,  w ~ N(0, Q), v ~ N(0, R).
struct StateSpaceModel {
  Matrix transition;   // F, state_dim × state_dim
  Matrix observation;  // H, obs_dim × state_dim
  SymMatrix process_noise_cov;  // Q
  SymMatrix obs_noise_cov;      // R
  Vector init_state;
  SymMatrix init_cov;

  std::size_t state_dim() const { return transition.rows(); }
  std::size_t obs_dim() const { return observation.rows(); }

  void validate() const {
    const std::size_t s = state_dim();
    const std::size_t m = obs_dim();
    if (s == 0 || m == 0 || !transition.square() || observation.cols() != s || process_noise_cov.dim() != s ||
        obs_noise_cov.dim() != m || init_state.size() != s || init_cov.dim() != s)
      throw Error(ErrorCode::ModelMismatch, "state-space model dimensions are inconsistent");
  }
};

/// Per-step outputs of the Kalman recursion.
struct KalmanTrace {
  /// e_k = i_kᵀ S_k⁻¹ i_k; ≈ χ²(obs_dim), white, when the model matches.
  Vector normalized_energy;
  /// Raw innovations i_k, one row per sample.
  std::vector<Vector> innovations;
  /// Observation-noise floor added to R (0 when R was already definite).
  double obs_noise_floor = 0.0;
};

/// Standard predict/update Kalman recursion on the record (Joseph-form
/// covariance update). A singular R is floored to εI with
/// ε = 1e-12·(trace(H P₀ Hᵀ) + trace(R))/obs_dim before the run.
inline KalmanTrace kalman_innovations(const Record& record, const StateSpaceModel& model) {
  model.validate();
  const std::size_t m = model.obs_dim();
  const std::size_t s = model.state_dim();
  if (record.channels() != m) throw Error(ErrorCode::ModelMismatch, "record channels != model obs_dim");

  const Matrix& f = model.transition;
  const Matrix& h = model.observation;
  const Matrix ft = f.transpose();
  const Matrix ht = h.transpose();
  Matrix r = model.obs_noise_cov.matrix();
  KalmanTrace trace;
  try {
    (void)cholesky(model.obs_noise_cov);
  } catch (const Error&) {
    const double scale = (h * model.init_cov.matrix() * ht).trace() + r.trace();
    double eps = 1e-12 * scale / static_cast<double>(m);
    if (!(eps > 0.0)) eps = 1e-12;
    for (std::size_t i = 0; i < m; ++i) r(i, i) += eps;
    trace.obs_noise_floor = eps;
  }

  Vector xs = model.init_state;
  Matrix p = model.init_cov.matrix();
  const Matrix& q = model.process_noise_cov.matrix();
  const Matrix eye = Matrix::identity(s);
  trace.normalized_energy.resize(record.length());
  trace.innovations.reserve(record.length());
  Vector z(m);
  for (std::size_t k = 0; k < record.length(); ++k) {
    for (std::size_t c = 0; c < m; ++c) z[c] = record.at(c, k);
    const Vector pred = h * xs;
    Vector innov(m);
    for (std::size_t c = 0; c < m; ++c) innov[c] = z[c] - pred[c];
    const SymMatrix sk(h * p * ht + r);
    const Matrix l = cholesky(sk);
    const Matrix linv = lower_inverse(l);
    const Vector u = linv * innov;
    trace.normalized_energy[k] = dot(u, u);
    const Matrix sinv = linv.transpose() * linv;
    const Matrix gain = p * ht * sinv;
    const Vector corr = gain * innov;
    for (std::size_t i = 0; i < s; ++i) xs[i] += corr[i];
    const Matrix ikh = eye - gain * h;
    p = ikh * p * ikh.transpose() + gain * r * gain.transpose();
    xs = f * xs;
    p = SymMatrix(f * p * ft + q).matrix();
    trace.innovations.push_back(std::move(innov));
  }
  return trace;
}

/// Lag-ℓ sample autocorrelation of a window (0 for a constant window).
inline double autocorrelation(std::span<const double> e, std::size_t lag) {
  const std::size_t w = e.size();
  if (lag >= w) return 0.0;
  double mean = 0.0;
  for (double v : e) mean += v;
  mean /= static_cast<double>(w);
  double den = 0.0, num = 0.0;
  for (std::size_t i = 0; i < w; ++i) den += (e[i] - mean) * (e[i] - mean);
  for (std::size_t i = 0; i + lag < w; ++i) num += (e[i] - mean) * (e[i + lag] - mean);
  return den > 0.0 ? num / den : 0.0;
}

/// Innovation whiteness index: over each trailing window of length w, the
/// mean normalized innovation energy (≈ obs_dim when white) plus the
/// absolute lag-1 autocorrelation of that energy.
inline IndexSeries whiteness_index(std::span<const double> energy, std::size_t window) {
  const std::size_t t = energy.size();
  if (window < 2 || window > t) throw Error(ErrorCode::InvalidWindow, "whiteness window must satisfy 2 <= w <= T");
  IndexSeries out{Vector(t, 0.0), window - 1, "innovation"};
  for (std::size_t k = window - 1; k < t; ++k) {
    const auto win = energy.subspan(k + 1 - window, window);
    double mean = 0.0;
    for (double v : win) mean += v;
    mean /= static_cast<double>(window);
    out.values[k] = mean + std::abs(autocorrelation(win, 1));
  }
  return out;
}

inline IndexSeries kalman_innovation_index(const Record& record, const StateSpaceModel& model, std::size_t window) {
  const KalmanTrace trace = kalman_innovations(record, model);
  return whiteness_index(trace.normalized_energy, window);
}

inline IndexSeries reference_trigger_index(const Record& record, std::size_t ref_channel, std::size_t window) {
  if (ref_channel >= record.channels())
    throw Error(ErrorCode::BadChannel, "reference channel " + std::to_string(ref_channel) + " out of range");
  IndexSeries out = energy_envelope(record.channel(ref_channel), window);
  out.name = "reference";
  return out;
}

/// Divides by the max |value| over the valid range; a zero series stays zero.
inline IndexSeries normalize_index(const IndexSeries& idx) {
  IndexSeries out = idx;
  double mx = 0.0;
  for (double v : idx.valid()) mx = std::max(mx, std::abs(v));
  if (mx == 0.0) return out;
  for (double& v : out.values) v /= mx;
  return out;
}

/// Scalar random walk observed in white noise (state and observation scalar).
inline StateSpaceModel random_walk_model(double process_var, double obs_var, double init_state = 0.0,
                                         double init_var = 1.0) {
  return {Matrix{{1.0}}, Matrix{{1.0}}, SymMatrix{{process_var}}, SymMatrix{{obs_var}}, Vector{init_state},
          SymMatrix{{init_var}}};
}

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Per-channel local linear trend model (state [level, slope] per channel).
/// Observation noise is estimated robustly from the median absolute
/// deviation of first differences; level/slope process noise are the given
/// fractions of it. Smooth components are predicted well, so the innovations
/// carry the rough (white-ish) part of the signal.
inline StateSpaceModel smooth_trend_model(const Record& record, double level_ratio = 1e-3, double slope_ratio = 1e-4) {
  const std::size_t n = record.channels();
  const std::size_t t = record.length();
  if (t < 3) throw Error(ErrorCode::BadInput, "trend model needs at least 3 samples");
  Matrix f(2 * n, 2 * n), h(n, 2 * n), q(2 * n, 2 * n), r(n, n), p0(2 * n, 2 * n);
  Vector s0(2 * n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    const auto x = record.channel(c);
    std::vector<double> d(t - 1);
    for (std::size_t k = 1; k < t; ++k) d[k - 1] = x[k] - x[k - 1];
    const double med = detail::median(d);
    for (double& v : d) v = std::abs(v - med);
    const double sigma_d = 1.482602218505602 * detail::median(d);
    double rc = 0.5 * sigma_d * sigma_d;
    if (!(rc > 0.0)) rc = 1e-12;
    const std::size_t a = 2 * c;
    f(a, a) = 1.0;
    f(a, a + 1) = 1.0;
    f(a + 1, a + 1) = 1.0;
    h(c, a) = 1.0;
    q(a, a) = level_ratio * rc;
    q(a + 1, a + 1) = slope_ratio * rc;
    r(c, c) = rc;
    p0(a, a) = 10.0 * rc;
    p0(a + 1, a + 1) = 10.0 * rc;
    s0[a] = x[0];
  }
  return {f, h, SymMatrix(q), SymMatrix(r), s0, SymMatrix(p0)};
}

}  // namespace nsca
