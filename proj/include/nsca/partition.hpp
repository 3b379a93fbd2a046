#pragma once

// Hypothesis-test partitions of the sample axis and class-conditional
// second-order statistics.

#include <algorithm>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "nsca/error.hpp"
#include "nsca/matrix.hpp"
#include "nsca/record.hpp"

namespace nsca {

/// Assignment of every sample to one of K classes. For K = 2 (a mask),
/// label 1 marks the nonstationary samples and label 0 the background.
struct Partition {
  std::vector<int> labels;
  int classes = 2;

  std::size_t size() const noexcept { return labels.size(); }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(static_cast<std::size_t>(classes), 0);
    for (int l : labels) ++counts[static_cast<std::size_t>(l)];
    return counts;
  }

  static Partition from_labels(std::vector<int> labels, int classes) {
    if (classes < 2) throw Error(ErrorCode::BadClass, "a partition needs at least two classes");
    for (int l : labels)
      if (l < 0 || l >= classes) throw Error(ErrorCode::BadClass, "label " + std::to_string(l) + " out of range");
    return {std::move(labels), classes};
  }

  friend bool operator==(const Partition&, const Partition&) = default;
};

namespace detail {

inline void require_both_classes(const Partition& p) {
  const auto counts = p.class_counts();
  for (std::size_t i = 0; i < counts.size(); ++i)
    if (counts[i] == 0) throw Error(ErrorCode::EmptyClass, "class " + std::to_string(i) + " is empty");
}

}  // namespace detail

/// Label 1 where idx ≥ theta_rel·max(idx) over the valid range. Runs of
/// label 1 shorter than `min_event_len` are erased; warm-up samples stay 0.
inline Partition threshold_mask(const IndexSeries& idx, double theta_rel, std::size_t min_event_len = 1) {
  if (!(theta_rel > 0.0 && theta_rel <= 1.0)) throw Error(ErrorCode::BadInput, "theta_rel must lie in (0, 1]");
  if (min_event_len < 1) throw Error(ErrorCode::BadInput, "min_event_len must be >= 1");
  const auto valid = idx.valid();
  if (valid.empty()) throw Error(ErrorCode::BadInput, "index has no valid samples");
  const double peak = *std::max_element(valid.begin(), valid.end());
  const double level = theta_rel * peak;

  Partition part{std::vector<int>(idx.size(), 0), 2};
  for (std::size_t k = idx.valid_from; k < idx.size(); ++k) part.labels[k] = idx.values[k] >= level ? 1 : 0;

  if (min_event_len > 1) {
    std::size_t k = 0;
    while (k < part.size()) {
      if (part.labels[k] == 0) {
        ++k;
        continue;
      }
      std::size_t end = k;
      while (end < part.size() && part.labels[end] == 1) ++end;
      if (end - k < min_event_len) std::fill(part.labels.begin() + static_cast<std::ptrdiff_t>(k),
                                             part.labels.begin() + static_cast<std::ptrdiff_t>(end), 0);
      k = end;
    }
  }
  detail::require_both_classes(part);
  return part;
}

/// K-class partition by empirical quantiles of the valid range. The j-th
/// boundary is the order statistic at rank ceil(j·N/K); a value equal to a
/// boundary falls in the lower bin. Warm-up samples go to class 0.
inline Partition quantile_partition(const IndexSeries& idx, int classes) {
  if (classes < 2) throw Error(ErrorCode::BadClass, "K must be >= 2");
  const auto valid = idx.valid();
  std::vector<double> sorted(valid.begin(), valid.end());
  std::sort(sorted.begin(), sorted.end());
  const auto distinct = static_cast<std::size_t>(std::distance(sorted.begin(), std::unique(sorted.begin(), sorted.end())));
  if (distinct < static_cast<std::size_t>(classes))
    throw Error(ErrorCode::DegenerateIndex, "fewer distinct index values than classes");
  sorted.assign(valid.begin(), valid.end());
  std::sort(sorted.begin(), sorted.end());

  const std::size_t nvalid = sorted.size();
  std::vector<double> bounds;
  for (int j = 1; j < classes; ++j) {
    const std::size_t rank = (static_cast<std::size_t>(j) * nvalid + static_cast<std::size_t>(classes) - 1) /
                             static_cast<std::size_t>(classes);
    bounds.push_back(sorted[std::max<std::size_t>(rank, 1) - 1]);
  }
  Partition part{std::vector<int>(idx.size(), 0), classes};
  for (std::size_t k = idx.valid_from; k < idx.size(); ++k) {
    const double v = idx.values[k];
    part.labels[k] = static_cast<int>(std::lower_bound(bounds.begin(), bounds.end(), v) - bounds.begin());
  }
  return part;
}

enum class WeightRule { Cardinality, Uniform };

/// Class-conditional covariances C_i with means m_i and weights, plus the
/// total covariance C_x and mean m_x. Denominators are N − 1 throughout.
struct CovarianceSet {
  std::vector<SymMatrix> class_cov;
  std::vector<Vector> class_mean;
  std::vector<double> weights;
  std::vector<std::size_t> counts;
  SymMatrix total_cov;
  Vector total_mean;

  std::size_t classes() const noexcept { return class_cov.size(); }
  std::size_t dim() const noexcept { return total_cov.dim(); }
};

inline CovarianceSet class_covariances(const Record& record, const Partition& part,
                                       WeightRule rule = WeightRule::Cardinality) {
  const std::size_t n = record.channels();
  const std::size_t t = record.length();
  if (part.size() != t) throw Error(ErrorCode::ShapeMismatch, "partition length != record length");
  const auto k_classes = static_cast<std::size_t>(part.classes);
  const auto counts = part.class_counts();
  for (std::size_t i = 0; i < k_classes; ++i)
    if (counts[i] < n + 1) throw ClassTooSmallError(static_cast<int>(i), counts[i], n + 1);

  CovarianceSet out;
  out.counts = counts;
  std::vector<Vector> mean(k_classes, Vector(n, 0.0));
  Vector total_mean(n, 0.0);
  for (std::size_t k = 0; k < t; ++k) {
    const auto lab = static_cast<std::size_t>(part.labels[k]);
    for (std::size_t c = 0; c < n; ++c) {
      mean[lab][c] += record.at(c, k);
      total_mean[c] += record.at(c, k);
    }
  }
  for (std::size_t i = 0; i < k_classes; ++i)
    for (double& v : mean[i]) v /= static_cast<double>(counts[i]);
  for (double& v : total_mean) v /= static_cast<double>(t);

  std::vector<Matrix> acc(k_classes, Matrix(n, n));
  Matrix total(n, n);
  Vector d(n), dt(n);
  for (std::size_t k = 0; k < t; ++k) {
    const auto lab = static_cast<std::size_t>(part.labels[k]);
    for (std::size_t c = 0; c < n; ++c) {
      d[c] = record.at(c, k) - mean[lab][c];
      dt[c] = record.at(c, k) - total_mean[c];
    }
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a; b < n; ++b) {
        acc[lab](a, b) += d[a] * d[b];
        total(a, b) += dt[a] * dt[b];
      }
  }
  auto finish = [n](Matrix& m, std::size_t count) {
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a; b < n; ++b) {
        m(a, b) /= static_cast<double>(count - 1);
        m(b, a) = m(a, b);
      }
    return SymMatrix(m);
  };
  for (std::size_t i = 0; i < k_classes; ++i) {
    out.class_cov.push_back(finish(acc[i], counts[i]));
    out.weights.push_back(rule == WeightRule::Cardinality
                              ? static_cast<double>(counts[i]) / static_cast<double>(t)
                              : 1.0 / static_cast<double>(k_classes));
  }
  out.class_mean = std::move(mean);
  out.total_cov = finish(total, t);
  out.total_mean = std::move(total_mean);
  return out;
}

/// Σ_{i≠j} weight_i·C_i, the null-hypothesis covariance of a one-vs-rest test.
inline SymMatrix pooled_complement(const CovarianceSet& cov, std::size_t j) {
  if (cov.classes() < 2) throw Error(ErrorCode::BadClass, "need at least two classes");
  if (j >= cov.classes()) throw Error(ErrorCode::BadClass, "class " + std::to_string(j) + " out of range");
  Matrix sum(cov.dim(), cov.dim());
  for (std::size_t i = 0; i < cov.classes(); ++i)
    if (i != j) sum += cov.class_cov[i].matrix() * cov.weights[i];
  return SymMatrix(sum);
}

}  // namespace nsca
