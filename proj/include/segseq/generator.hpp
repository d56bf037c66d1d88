#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "segseq/gibbs.hpp"
#include "segseq/types.hpp"

namespace segseq {

struct SequenceSpec {
  std::string id;
  // Time span in x-units; the grid is 0, dt, ..., covering round(horizon / dt) points.
  double horizon = 0.0;
};

struct FixedSegments {
  std::vector<std::size_t> starts;
  std::vector<std::size_t> labels;
};

struct GeneratorSpec {
  std::uint64_t seed = 0;
  double dt = 0.1;
  double beta = 0.001;
  std::vector<KernelParams> kernels;
  std::vector<SequenceSpec> sequences;
  // Random segmentation: lengths ~ Exp(lambda), labels ~ Cat(pi). When pi is
  // absent it is drawn once from Dir(alpha0) (uniform when neither is set).
  double lambda = 0.25;
  std::optional<std::vector<double>> pi;
  std::optional<double> alpha0;
  // Fixed segmentation, one entry per sequence; overrides the random mode.
  std::optional<std::vector<FixedSegments>> fixed;

  void validate() const;
};

struct GroundTruth {
  std::string seq_id;
  std::vector<std::size_t> boundaries;
  std::vector<std::size_t> labels;
};

struct GeneratedData {
  Dataset data;
  std::vector<GroundTruth> truth;
  std::vector<KernelParams> kernels;
  double beta = 0.0;
};

/// Evenly spaced grid for one sequence.
std::vector<double> make_grid(double horizon, double dt);

/// Draws segmentations from the prior (or takes the fixed ones), labels, and
/// independent GP draws per segment. Sequence d uses the stream seed + d.
GeneratedData sample_dataset(const GeneratorSpec& spec);

/// sample_dataset with an explicit segmentation per sequence.
GeneratedData fixed_segmentation_dataset(const GeneratorSpec& spec, const std::vector<FixedSegments>& segments);

/// Draws y ~ N(0, K_theta(xs, xs) + beta I).
std::vector<double> sample_gp(std::span<const double> xs, const KernelParams& params, double beta, Rng& rng);

}  // namespace segseq
