#pragma once

// Synthetic mixtures with ground truth, and the metrics used to score
// detectors and separators against it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "nsca/detectors.hpp"
#include "nsca/error.hpp"
#include "nsca/linalg.hpp"
#include "nsca/matrix.hpp"
#include "nsca/partition.hpp"
#include "nsca/random.hpp"
#include "nsca/record.hpp"

namespace nsca {

/// Quasi-periodic pulse train: Gaussian kernels of standard deviation
/// width_s at beat times whose intervals are jittered uniformly by
/// ±jitter_pct percent. Isolated pulses peak at `amplitude`; overlapping
/// kernels superpose.
inline Vector gen_ecg_like(double rate_hz, double sample_rate_hz, std::size_t length, double width_s,
                           double amplitude, double jitter_pct, std::uint64_t seed) {
  if (!(rate_hz > 0.0) || !(sample_rate_hz > 0.0) || !(width_s > 0.0) || !(jitter_pct >= 0.0 && jitter_pct < 100.0))
    throw Error(ErrorCode::BadSpec, "ecg_like needs positive rate, sample rate and width, jitter in [0, 100)");
  if (rate_hz * static_cast<double>(length) / sample_rate_hz < 2.0)
    throw Error(ErrorCode::BadSpec, "ecg_like needs at least two beats in the record");
  Rng rng(seed, 0);
  const double interval = sample_rate_hz / rate_hz;
  const double sigma = width_s * sample_rate_hz;
  const double reach = 8.0 * sigma;
  Vector out(length, 0.0);
  double pos = 0.5 * interval;
  while (pos < static_cast<double>(length) + reach) {
    const auto lo = static_cast<std::ptrdiff_t>(std::max(0.0, std::ceil(pos - reach)));
    const auto hi = static_cast<std::ptrdiff_t>(std::min(static_cast<double>(length) - 1.0, std::floor(pos + reach)));
    for (std::ptrdiff_t k = lo; k <= hi; ++k) {
      const double d = (static_cast<double>(k) - pos) / sigma;
      out[static_cast<std::size_t>(k)] += amplitude * std::exp(-0.5 * d * d);
    }
    const double u = jitter_pct > 0.0 ? rng.uniform(-1.0, 1.0) : 0.0;
    pos += interval * (1.0 + 0.01 * jitter_pct * u);
  }
  return out;
}

struct SourceSpec {
  enum class Kind { Gaussian, Ar1, EcgLike };
  Kind kind = Kind::Gaussian;
  double ar_coeff = 0.0;
  double rate_hz = 1.0;
  double width_s = 0.02;
  double amplitude = 1.0;
  double jitter_pct = 5.0;

  static SourceSpec gaussian(double amplitude = 1.0) { return {Kind::Gaussian, 0.0, 1.0, 0.02, amplitude, 0.0}; }
  static SourceSpec ar1(double a, double amplitude = 1.0) { return {Kind::Ar1, a, 1.0, 0.02, amplitude, 0.0}; }
  static SourceSpec ecg_like(double rate_hz, double width_s, double amplitude = 1.0, double jitter_pct = 5.0) {
    return {Kind::EcgLike, 0.0, rate_hz, width_s, amplitude, jitter_pct};
  }
};

struct BurstSpec {
  std::size_t count = 5;
  std::size_t min_len = 200;
  std::size_t max_len = 500;
  double amplitude = 1.0;
};

struct MixtureOptions {
  double sample_rate_hz = 500.0;
  /// Index of the source gated to the burst windows; npos selects the last.
  std::size_t burst_source = static_cast<std::size_t>(-1);
  /// Test hook: use A = I instead of a random mixing matrix.
  bool identity_mixing = false;
  double min_abs_det = 1e-6;
  /// Reorder the mixing rows so channel 0 carries the burst source with the
  /// largest weight, like a lead placed close to the fetal heart.
  bool reference_lead = false;
};

struct GroundTruth {
  Record sources;
  Matrix mixing;
  Partition burst_mask;
  std::uint64_t seed = 0;
  std::size_t burst_source = 0;
};

struct Mixture {
  Record record;
  GroundTruth truth;
};

namespace detail {

inline Vector gen_source(const SourceSpec& spec, std::size_t length, double fs, std::uint64_t seed) {
  Vector s(length);
  switch (spec.kind) {
    case SourceSpec::Kind::Gaussian: {
      Rng rng(seed, 0);
      for (double& v : s) v = spec.amplitude * rng.normal();
      break;
    }
    case SourceSpec::Kind::Ar1: {
      if (!(std::abs(spec.ar_coeff) < 1.0)) throw Error(ErrorCode::BadSpec, "ar1 coefficient must satisfy |a| < 1");
      Rng rng(seed, 0);
      const double innov = std::sqrt(1.0 - spec.ar_coeff * spec.ar_coeff);
      double prev = rng.normal();
      for (double& v : s) {
        v = spec.amplitude * prev;
        prev = spec.ar_coeff * prev + innov * rng.normal();
      }
      break;
    }
    case SourceSpec::Kind::EcgLike:
      s = gen_ecg_like(spec.rate_hz, fs, length, spec.width_s, spec.amplitude, spec.jitter_pct, seed);
      break;
  }
  return s;
}

/// Non-overlapping windows with lengths uniform in [min_len, max_len]; the
/// leftover samples are spread as random gaps.
inline std::vector<int> burst_labels(std::size_t length, const BurstSpec& burst, Rng& rng) {
  if (burst.count == 0 || burst.min_len == 0 || burst.min_len > burst.max_len)
    throw Error(ErrorCode::BadSpec, "burst needs count >= 1 and 1 <= min_len <= max_len");
  if (burst.count * burst.max_len >= length) throw Error(ErrorCode::BadSpec, "burst windows do not fit in T");
  std::vector<std::size_t> lens(burst.count);
  std::size_t used = 0;
  for (auto& l : lens) {
    l = static_cast<std::size_t>(rng.integer(static_cast<std::int64_t>(burst.min_len),
                                             static_cast<std::int64_t>(burst.max_len)));
    used += l;
  }
  const std::size_t slack = length - used;
  std::vector<std::size_t> offsets(burst.count);
  for (auto& o : offsets) o = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(slack)));
  std::sort(offsets.begin(), offsets.end());
  std::vector<int> labels(length, 0);
  std::size_t before = 0;
  for (std::size_t i = 0; i < burst.count; ++i) {
    const std::size_t start = offsets[i] + before;
    std::fill(labels.begin() + static_cast<std::ptrdiff_t>(start),
              labels.begin() + static_cast<std::ptrdiff_t>(start + lens[i]), 1);
    before += lens[i];
  }
  return labels;
}

inline Matrix random_mixing(std::size_t n, double min_abs_det, Rng& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      double ss = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double mag = rng.uniform(0.2, 1.0);
        a(i, j) = rng.uniform() < 0.5 ? -mag : mag;
        ss += a(i, j) * a(i, j);
      }
      const double inv = 1.0 / std::sqrt(ss);
      for (std::size_t j = 0; j < n; ++j) a(i, j) *= inv;
    }
    if (std::abs(determinant(a)) >= min_abs_det) return a;
  }
  throw Error(ErrorCode::BadSpec, "could not draw a mixing matrix above the determinant floor");
}

}  // namespace detail

/// Generates x_k = A·s_k. Source `burst_source` is its waveform times the
/// burst amplitude inside the burst windows and exactly zero elsewhere. The
/// mixing matrix has unit-norm rows with entries of magnitude in [0.2, 1]
/// (before normalization) and random signs, resampled until
/// |det A| ≥ min_abs_det. All draws derive from `seed`.
inline Mixture gen_mixture(std::size_t n, std::size_t length, const BurstSpec& burst,
                           std::span<const SourceSpec> sources, std::uint64_t seed, const MixtureOptions& opts = {}) {
  if (n == 0 || sources.size() != n) throw Error(ErrorCode::BadSpec, "need exactly one source spec per channel");
  const std::size_t burst_src = opts.burst_source == static_cast<std::size_t>(-1) ? n - 1 : opts.burst_source;
  if (burst_src >= n) throw Error(ErrorCode::BadSpec, "burst source index out of range");
  if (!(burst.amplitude >= 0.0)) throw Error(ErrorCode::BadSpec, "burst amplitude must be >= 0");

  Rng window_rng(seed, 1);
  Rng mixing_rng(seed, 2);
  Partition mask{detail::burst_labels(length, burst, window_rng), 2};

  Record s(n, length, opts.sample_rate_hz);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector v = detail::gen_source(sources[i], length, opts.sample_rate_hz, splitmix64(seed ^ (100 + i)));
    auto dst = s.channel(i);
    if (i == burst_src)
      for (std::size_t k = 0; k < length; ++k) dst[k] = mask.labels[k] ? burst.amplitude * v[k] : 0.0;
    else
      std::copy(v.begin(), v.end(), dst.begin());
  }
  Matrix a = opts.identity_mixing ? Matrix::identity(n) : detail::random_mixing(n, opts.min_abs_det, mixing_rng);
  if (opts.reference_lead) {
    std::size_t lead = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (std::abs(a(i, burst_src)) > std::abs(a(lead, burst_src))) lead = i;
    for (std::size_t j = 0; j < n; ++j) std::swap(a(0, j), a(lead, j));
  }

  Record x(n, length, opts.sample_rate_hz);
  for (std::size_t i = 0; i < n; ++i) {
    auto dst = x.channel(i);
    for (std::size_t j = 0; j < n; ++j) {
      const double aij = a(i, j);
      const auto src = s.channel(j);
      for (std::size_t k = 0; k < length; ++k) dst[k] += aij * src[k];
    }
  }
  return {std::move(x), GroundTruth{std::move(s), a, std::move(mask), seed, burst_src}};
}

/// The synthetic fetal-ECG-style scenario: a maternal pulse train, a slow
/// baseline wander, coloured sensor noise, and a fetal-like burst source
/// (white, active only inside short burst windows). Channel 0 is the
/// reference lead.
struct FecgScenario {
  std::vector<SourceSpec> sources;
  BurstSpec burst;
  MixtureOptions options;
};

inline FecgScenario fecg_scenario(std::size_t n = 5) {
  if (n < 2) throw Error(ErrorCode::BadSpec, "fECG scenario needs n >= 2");
  FecgScenario sc;
  sc.sources.push_back(SourceSpec::ecg_like(1.2, 0.02, 2.0, 5.0));
  if (n > 2) sc.sources.push_back(SourceSpec::ar1(0.95, 0.3));
  while (sc.sources.size() + 1 < n) sc.sources.push_back(SourceSpec::ar1(0.95, 0.5));
  sc.sources.push_back(SourceSpec::gaussian(1.0));
  sc.burst = BurstSpec{10, 80, 200, 6.0};
  sc.options.reference_lead = true;
  return sc;
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::ShapeMismatch, "correlation of unequal lengths");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

struct MaskScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  /// |corr(y_i, s_j)|, estimates in rows and true sources in columns.
  Matrix abs_corr;
  /// For each true source j, the estimate index matched to it.
  std::vector<std::size_t> match;
  /// abs_corr(match[j], j).
  Vector matched_corr;
  std::optional<MaskScores> mask;
  std::optional<double> index_auc;
};

/// Greedy best-match: repeatedly take the largest remaining |corr| (ties go
/// to the lowest estimate index, then the lowest source index).
inline EvalReport eval_separation(const Record& est, const Record& truth_sources) {
  if (est.channels() != truth_sources.channels() || est.length() != truth_sources.length())
    throw Error(ErrorCode::ShapeMismatch, "estimate and truth shapes differ");
  const std::size_t n = est.channels();
  EvalReport rep;
  rep.abs_corr = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      rep.abs_corr(i, j) = std::min(1.0, std::abs(pearson(est.channel(i), truth_sources.channel(j))));
  rep.match.assign(n, 0);
  rep.matched_corr.assign(n, 0.0);
  std::vector<bool> used_est(n, false), used_src(n, false);
  for (std::size_t round = 0; round < n; ++round) {
    double best = -1.0;
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (used_est[i]) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (used_src[j]) continue;
        if (rep.abs_corr(i, j) > best) {
          best = rep.abs_corr(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    used_est[bi] = used_src[bj] = true;
    rep.match[bj] = bi;
    rep.matched_corr[bj] = best;
  }
  return rep;
}

inline EvalReport eval_separation(const Record& est, const GroundTruth& truth) {
  return eval_separation(est, truth.sources);
}

/// Precision/recall/F1 with label 1 as positive; an empty denominator scores 0.
inline MaskScores eval_mask(const Partition& est, const Partition& truth) {
  if (est.size() != truth.size()) throw Error(ErrorCode::ShapeMismatch, "mask lengths differ");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t k = 0; k < est.size(); ++k) {
    const bool e = est.labels[k] == 1;
    const bool t = truth.labels[k] == 1;
    tp += e && t;
    fp += e && !t;
    fn += !e && t;
  }
  MaskScores s;
  s.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  s.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

/// Rank-based (Mann–Whitney) AUC of `values` separating label 1 from label 0;
/// tied values share their mean rank, i.e. count ½.
inline double auc(std::span<const double> values, std::span<const int> labels) {
  if (values.size() != labels.size()) throw Error(ErrorCode::ShapeMismatch, "index/labels lengths differ");
  const std::size_t t = values.size();
  std::vector<std::size_t> order(t);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  double pos_rank_sum = 0.0;
  std::size_t npos = 0;
  for (std::size_t i = 0; i < t;) {
    std::size_t j = i;
    while (j < t && values[order[j]] == values[order[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t r = i; r < j; ++r)
      if (labels[order[r]] == 1) {
        pos_rank_sum += mean_rank;
        ++npos;
      }
    i = j;
  }
  const std::size_t nneg = t - npos;
  if (npos == 0 || nneg == 0) throw Error(ErrorCode::DegenerateTruth, "AUC needs both labels present");
  const double np = static_cast<double>(npos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(nneg));
}

inline double eval_index_auc(const IndexSeries& idx, const Partition& truth) {
  return auc(idx.values, truth.labels);
}

}  // namespace nsca
