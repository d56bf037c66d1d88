#include "segseq/features.hpp"

#include <algorithm>
#include <stdexcept>

namespace segseq {
namespace {

constexpr std::string_view kAlphabet = "0123456789abcdefghijklmnopqrstuvwxyz";

std::size_t majority(const std::vector<std::size_t>& votes) {
  // max_element returns the first maximum, i.e. the lowest index on ties.
  return static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

}  // namespace

std::vector<std::size_t> timestep_labels(const SequenceReport& seq, std::size_t num_kernels) {
  if (seq.num_points == 0) throw std::invalid_argument("sequence '" + seq.seq_id + "' has no points");
  if (seq.samples.empty()) throw std::invalid_argument("sequence '" + seq.seq_id + "' has no segmentation samples");
  std::vector<std::size_t> votes(seq.num_points * num_kernels, 0);
  for (const auto& sample : seq.samples) {
    if (sample.starts.size() != sample.labels.size() || sample.starts.empty() || sample.starts.front() != 0) {
      throw std::invalid_argument("malformed segmentation sample for '" + seq.seq_id + "'");
    }
    for (std::size_t k = 0; k < sample.starts.size(); ++k) {
      const std::size_t start = sample.starts[k];
      const std::size_t end = k + 1 < sample.starts.size() ? sample.starts[k + 1] : seq.num_points;
      const std::size_t label = sample.labels[k];
      if (label >= num_kernels) throw std::invalid_argument("label out of range for '" + seq.seq_id + "'");
      if (end > seq.num_points || start >= end) {
        throw std::invalid_argument("segment out of range for '" + seq.seq_id + "'");
      }
      for (std::size_t t = start; t < end; ++t) ++votes[t * num_kernels + label];
    }
  }
  std::vector<std::size_t> out(seq.num_points);
  std::vector<std::size_t> row(num_kernels);
  for (std::size_t t = 0; t < seq.num_points; ++t) {
    std::copy_n(votes.begin() + static_cast<std::ptrdiff_t>(t * num_kernels), num_kernels, row.begin());
    out[t] = majority(row);
  }
  return out;
}

std::vector<std::size_t> window_labels(const std::vector<std::size_t>& per_step, std::size_t window,
                                       std::size_t num_kernels) {
  if (window == 0) throw std::invalid_argument("window must be at least 1");
  if (per_step.empty()) throw std::invalid_argument("no labels to summarize");
  std::vector<std::size_t> out;
  for (std::size_t begin = 0; begin < per_step.size(); begin += window) {
    std::vector<std::size_t> votes(num_kernels, 0);
    const std::size_t end = std::min(per_step.size(), begin + window);
    for (std::size_t t = begin; t < end; ++t) {
      if (per_step[t] >= num_kernels) throw std::invalid_argument("label out of range");
      ++votes[per_step[t]];
    }
    out.push_back(majority(votes));
  }
  return out;
}

std::vector<std::size_t> cluster_labels(const SequenceReport& seq, std::size_t num_kernels, std::size_t window) {
  return window_labels(timestep_labels(seq, num_kernels), window, num_kernels);
}

std::string encode_labels(const std::vector<std::size_t>& labels) {
  std::string out;
  out.reserve(labels.size());
  for (std::size_t l : labels) {
    if (l >= kAlphabet.size()) throw std::invalid_argument("labels beyond 36 kernels cannot be encoded");
    out.push_back(kAlphabet[l]);
  }
  return out;
}

std::vector<std::size_t> decode_labels(const std::string& text) {
  std::vector<std::size_t> out;
  for (char ch : text) {
    const auto pos = kAlphabet.find(ch);
    if (pos == std::string_view::npos) throw std::invalid_argument(std::string("unknown label symbol '") + ch + "'");
    out.push_back(pos);
  }
  return out;
}

std::string cluster_string(const SequenceReport& seq, std::size_t num_kernels, std::size_t window) {
  return encode_labels(cluster_labels(seq, num_kernels, window));
}

std::vector<double> frequency_vector(const std::vector<std::size_t>& labels, std::size_t num_kernels) {
  if (labels.empty()) throw std::invalid_argument("frequency_vector needs at least one symbol");
  std::vector<double> freq(num_kernels, 0.0);
  for (std::size_t l : labels) {
    if (l >= num_kernels) throw std::invalid_argument("label out of range");
    freq[l] += 1.0;
  }
  for (double& f : freq) f /= static_cast<double>(labels.size());
  return freq;
}

}  // namespace segseq
