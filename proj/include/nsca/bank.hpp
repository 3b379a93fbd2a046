#pragma once

#include <string>
#include <vector>

#include "nsca/detectors.hpp"
#include "nsca/linalg.hpp"
#include "nsca/record.hpp"

namespace nsca {

/// Parameters for running several detectors over one record. Scalar
/// detectors read the reference channel.
struct BankConfig {
  std::vector<std::string> detectors{"anderson_darling", "envelope", "cumulant", "easi", "ar", "innovation"};
  std::size_t reference_channel = 0;
  std::size_t ad_window = 32;
  std::size_t envelope_window = 101;
  std::size_t cumulant_window = 128;
  int cumulant_order = 2;
  std::size_t ar_window = 64;
  std::size_t ar_order = 1;
  std::size_t whiteness_window = 32;
  double easi_step = 2e-4;
  EasiNonlinearity easi_nonlinearity = EasiNonlinearity::Tanh;
  double trend_level_ratio = 1e-3;
  double trend_slope_ratio = 1e-4;
};

inline const std::vector<std::string>& known_detectors() {
  static const std::vector<std::string> names{"anderson_darling", "envelope", "cumulant", "easi", "ar", "innovation"};
  return names;
}

/// Each channel shifted to zero mean and scaled to unit variance (constant
/// channels are only centered).
inline Record standardized(const Record& record) {
  Record out = record;
  for (std::size_t c = 0; c < out.channels(); ++c) {
    auto x = out.channel(c);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    const double sd = x.size() > 1 ? std::sqrt(ss / static_cast<double>(x.size() - 1)) : 0.0;
    for (double& v : x) v = sd > 0.0 ? (v - mean) / sd : v - mean;
  }
  return out;
}

/// Centered and whitened by the inverse Cholesky factor of the total
/// covariance, so the sample covariance of the result is the identity.
inline Record whitened(const Record& record) {
  const std::size_t n = record.channels();
  const std::size_t t = record.length();
  if (t < 2) throw Error(ErrorCode::BadInput, "whitening needs at least two samples");
  Vector mean(n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    for (double v : record.channel(c)) mean[c] += v;
    mean[c] /= static_cast<double>(t);
  }
  Matrix cov(n, n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a; b < n; ++b) {
      double s = 0.0;
      for (std::size_t k = 0; k < t; ++k) s += (record.at(a, k) - mean[a]) * (record.at(b, k) - mean[b]);
      cov(a, b) = cov(b, a) = s / static_cast<double>(t - 1);
    }
  const Matrix linv = lower_inverse(cholesky(SymMatrix(cov)));
  Record out(n, t, record.sample_rate_hz());
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b <= a; ++b) {
      const double l = linv(a, b);
      for (std::size_t k = 0; k < t; ++k) out.at(a, k) += l * (record.at(b, k) - mean[b]);
    }
  return out;
}

inline IndexSeries run_detector(const Record& record, const std::string& name, const BankConfig& cfg) {
  if (cfg.reference_channel >= record.channels())
    throw Error(ErrorCode::BadChannel, "reference channel " + std::to_string(cfg.reference_channel) + " out of range");
  const auto ref = record.channel(cfg.reference_channel);
  IndexSeries idx;
  if (name == "anderson_darling") {
    idx = anderson_darling_index(ref, cfg.ad_window, fit_gaussian_cdf(ref));
  } else if (name == "envelope") {
    idx = reference_trigger_index(record, cfg.reference_channel, cfg.envelope_window);
  } else if (name == "cumulant") {
    idx = cumulant_tracking(ref, cfg.cumulant_window, cfg.cumulant_order);
  } else if (name == "easi") {
    idx = easi_index(whitened(record), cfg.easi_step, cfg.easi_nonlinearity);
  } else if (name == "ar") {
    idx = ar_tracking(ref, cfg.ar_window, cfg.ar_order);
  } else if (name == "innovation") {
    idx = kalman_innovation_index(record, smooth_trend_model(record, cfg.trend_level_ratio, cfg.trend_slope_ratio),
                                  cfg.whiteness_window);
  } else {
    throw Error(ErrorCode::BadInput, "unknown detector '" + name + "'");
  }
  idx.name = name;
  return idx;
}

inline std::vector<IndexSeries> run_detector_bank(const Record& record, const BankConfig& cfg) {
  std::vector<IndexSeries> out;
  out.reserve(cfg.detectors.size());
  for (const auto& name : cfg.detectors) out.push_back(run_detector(record, name, cfg));
  return out;
}

}  // namespace nsca
