#pragma once

#include <string>
#include <vector>

#include "segseq/trainer.hpp"

namespace segseq {

/// Per-timestep label: majority over samples of the label of the segment
/// covering that timestep; ties go to the lowest kernel index.
std::vector<std::size_t> timestep_labels(const SequenceReport& seq, std::size_t num_kernels);

/// One symbol per non-overlapping window of `window` timesteps (the last
/// window may be short), chosen by majority vote with ties to the lowest index.
std::vector<std::size_t> window_labels(const std::vector<std::size_t>& per_step, std::size_t window,
                                       std::size_t num_kernels);

std::vector<std::size_t> cluster_labels(const SequenceReport& seq, std::size_t num_kernels, std::size_t window);

/// Symbols 0-9 then a-z; supports up to 36 kernels.
std::string encode_labels(const std::vector<std::size_t>& labels);
std::vector<std::size_t> decode_labels(const std::string& text);

std::string cluster_string(const SequenceReport& seq, std::size_t num_kernels, std::size_t window);

/// Normalized histogram of the symbols over M kernels.
std::vector<double> frequency_vector(const std::vector<std::size_t>& labels, std::size_t num_kernels);

}  // namespace segseq
