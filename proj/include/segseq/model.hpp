#pragma once

#include <string>
#include <vector>

#include "segseq/types.hpp"

namespace segseq {

/// ln(lambda) - lambda * l, the exponential log-density of a segment length.
double length_log_prior(double length, double lambda);

/// Sum of length_log_prior over the segments of `seg`.
double segmentation_log_prior(const Segmentation& seg, const Sequence& seq, double lambda);

struct LogPrior {
  double value = 0.0;
  // Derivative of the underlying normal term w.r.t. ln(value).
  double dlog = 0.0;
};

/// Log-normal log-density at `value` (including the -ln value term) and the
/// gradient of the normal part with respect to ln(value).
LogPrior lognormal_log_prior(double value, double mu, double sigma);

/// Log-density of ln(value) under N(mu, sigma^2). This is the prior the
/// optimizer sees, since parameters are optimized in log space.
double log_space_prior(double value, const LogNormalPrior& prior);

struct Violation {
  std::string seq_id;
  std::size_t index = 0;
  std::string kind;

  std::string to_string() const;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::string to_string() const;
};

ValidationReport validate_dataset(const Dataset& data);

/// Z-scores all y values with the pooled mean and standard deviation.
Dataset standardize(const Dataset& data);

}  // namespace segseq
