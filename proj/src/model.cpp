#include "segseq/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace segseq {

Segmentation::Segmentation(std::string seq_id, std::vector<std::uint8_t> c)
    : seq_id_(std::move(seq_id)), c_(std::move(c)) {
  if (c_.empty()) throw std::invalid_argument("segmentation of an empty sequence");
  if (c_[0] != 1) throw std::invalid_argument("segmentation must start with c[0] == 1");
  for (auto v : c_) {
    if (v > 1) throw std::invalid_argument("split indicators must be 0 or 1");
  }
}

Segmentation Segmentation::from_starts(std::string seq_id, std::size_t n, const std::vector<std::size_t>& starts) {
  std::vector<std::uint8_t> c(n, 0);
  if (starts.empty() || starts.front() != 0) throw std::invalid_argument("segment starts must begin at 0");
  for (std::size_t k = 0; k < starts.size(); ++k) {
    if (starts[k] >= n) throw std::invalid_argument("segment start out of range");
    if (k > 0 && starts[k] <= starts[k - 1]) throw std::invalid_argument("segment starts must be increasing");
    c[starts[k]] = 1;
  }
  return Segmentation(std::move(seq_id), std::move(c));
}

Segmentation Segmentation::single(std::string seq_id, std::size_t n) {
  return from_starts(std::move(seq_id), n, {0});
}

std::size_t Segmentation::num_segments() const {
  return static_cast<std::size_t>(std::count(c_.begin(), c_.end(), std::uint8_t{1}));
}

std::vector<std::size_t> Segmentation::starts() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < c_.size(); ++i) {
    if (c_[i]) out.push_back(i);
  }
  return out;
}

std::vector<SegmentRange> Segmentation::segments() const {
  std::vector<SegmentRange> out;
  const auto s = starts();
  out.reserve(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) {
    out.push_back({s[k], k + 1 < s.size() ? s[k + 1] : c_.size()});
  }
  return out;
}

std::vector<double> Segmentation::lengths(const Sequence& seq) const {
  if (seq.size() != c_.size()) throw std::invalid_argument("segmentation does not match sequence " + seq.id);
  const double trailing = median_spacing(seq.x);
  std::vector<double> out;
  for (const auto& r : segments()) out.push_back(segment_length(seq.x, r.start, r.end, trailing));
  return out;
}

double median_spacing(const std::vector<double>& x) {
  if (x.size() < 2) return 1.0;
  std::vector<double> dx(x.size() - 1);
  for (std::size_t i = 0; i + 1 < x.size(); ++i) dx[i] = x[i + 1] - x[i];
  const std::size_t mid = dx.size() / 2;
  std::nth_element(dx.begin(), dx.begin() + static_cast<std::ptrdiff_t>(mid), dx.end());
  if (dx.size() % 2 == 1) return dx[mid];
  const double upper = dx[mid];
  const double lower = *std::max_element(dx.begin(), dx.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double segment_length(const std::vector<double>& x, std::size_t start, std::size_t end, double trailing) {
  if (end < x.size()) return x[end] - x[start];
  return x.back() - x[start] + trailing;
}

void Hyperparams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be positive");
  };
  positive(lambda, "lambda");
  positive(alpha0, "alpha0");
  if (num_kernels < 1) throw std::invalid_argument("M must be at least 1");
  positive(lognormal_amp.sigma, "lognormal_amp.sigma");
  positive(lognormal_ls.sigma, "lognormal_ls.sigma");
  positive(lognormal_noise.sigma, "lognormal_noise.sigma");
  if (!std::isfinite(lognormal_amp.mu)) throw std::invalid_argument("lognormal_amp.mu must be finite");
  if (!std::isfinite(lognormal_ls.mu)) throw std::invalid_argument("lognormal_ls.mu must be finite");
  if (!std::isfinite(lognormal_noise.mu)) throw std::invalid_argument("lognormal_noise.mu must be finite");
  if (gibbs.num_samples < 1) throw std::invalid_argument("gibbs.num_samples must be at least 1");
  if (gibbs.thinning < 1) throw std::invalid_argument("gibbs.thinning must be at least 1");
  if (mstep.max_iters < 1) throw std::invalid_argument("mstep.max_iters must be at least 1");
  positive(mstep.step_size, "mstep.step_size");
  if (!(mstep.grad_tol >= 0.0)) throw std::invalid_argument("mstep.grad_tol must be non-negative");
  if (!(mstep.rel_tol >= 0.0)) throw std::invalid_argument("mstep.rel_tol must be non-negative");
  if (outer.max_rounds < 1) throw std::invalid_argument("outer.max_rounds must be at least 1");
  if (!(outer.elbo_rel_tol >= 0.0)) throw std::invalid_argument("outer.elbo_rel_tol must be non-negative");
  if (outer.vem_cycles < 1) throw std::invalid_argument("outer.vem_cycles must be at least 1");
  if (!(active_threshold >= 0.0 && active_threshold < 1.0)) {
    throw std::invalid_argument("active_threshold must lie in [0, 1)");
  }
}

std::vector<double> ModelState::expected_pi() const {
  double total = 0.0;
  for (double a : alpha) total += a;
  std::vector<double> out(alpha.size());
  for (std::size_t m = 0; m < alpha.size(); ++m) out[m] = alpha[m] / total;
  return out;
}

std::vector<double> ModelState::log_expected_pi() const {
  auto out = expected_pi();
  for (double& v : out) v = std::log(v);
  return out;
}

std::size_t ModelState::active_kernels(double threshold) const {
  std::size_t n = 0;
  for (double p : expected_pi()) n += p > threshold ? 1 : 0;
  return n;
}

double length_log_prior(double length, double lambda) {
  if (!(length > 0.0)) throw std::invalid_argument("segment length must be positive");
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  return std::log(lambda) - lambda * length;
}

double segmentation_log_prior(const Segmentation& seg, const Sequence& seq, double lambda) {
  double total = 0.0;
  for (double l : seg.lengths(seq)) total += length_log_prior(l, lambda);
  return total;
}

LogPrior lognormal_log_prior(double value, double mu, double sigma) {
  if (!(value > 0.0)) throw std::invalid_argument("log-normal prior needs a positive value");
  if (!(sigma > 0.0)) throw std::invalid_argument("log-normal prior needs a positive sigma");
  const double u = std::log(value);
  const double z = (u - mu) / sigma;
  LogPrior out;
  out.value = -u - std::log(sigma * std::sqrt(2.0 * std::numbers::pi)) - 0.5 * z * z;
  out.dlog = -(u - mu) / (sigma * sigma);
  return out;
}

double log_space_prior(double value, const LogNormalPrior& prior) {
  return lognormal_log_prior(value, prior.mu, prior.sigma).value + std::log(value);
}

std::string Violation::to_string() const {
  std::ostringstream os;
  os << "sequence '" << seq_id << "' index " << index << ": " << kind;
  return os.str();
}

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (std::size_t k = 0; k < violations.size(); ++k) {
    if (k) os << '\n';
    os << violations[k].to_string();
  }
  return os.str();
}

ValidationReport validate_dataset(const Dataset& data) {
  ValidationReport report;
  std::unordered_set<std::string> seen;
  for (const auto& seq : data) {
    auto add = [&](std::size_t i, std::string kind) { report.violations.push_back({seq.id, i, std::move(kind)}); };
    if (!seen.insert(seq.id).second) add(0, "duplicate sequence id");
    if (seq.x.size() != seq.y.size()) {
      add(0, "x and y lengths differ (" + std::to_string(seq.x.size()) + " vs " + std::to_string(seq.y.size()) + ")");
    }
    if (seq.x.empty()) add(0, "empty sequence");
    for (std::size_t i = 0; i < seq.x.size(); ++i) {
      if (!std::isfinite(seq.x[i])) {
        add(i, "non-finite timestamp");
      } else if (i > 0 && std::isfinite(seq.x[i - 1])) {
        if (seq.x[i] == seq.x[i - 1]) {
          add(i, "duplicate timestamp");
        } else if (seq.x[i] < seq.x[i - 1]) {
          add(i, "timestamps not increasing");
        }
      }
    }
    for (std::size_t i = 0; i < seq.y.size(); ++i) {
      if (!std::isfinite(seq.y[i])) add(i, "non-finite value");
    }
  }
  return report;
}

Dataset standardize(const Dataset& data) {
  double sum = 0.0;
  double sq = 0.0;
  std::size_t n = 0;
  for (const auto& seq : data) {
    for (double v : seq.y) {
      sum += v;
      ++n;
    }
  }
  if (n == 0) return data;
  const double mean = sum / static_cast<double>(n);
  for (const auto& seq : data) {
    for (double v : seq.y) sq += (v - mean) * (v - mean);
  }
  const double sd = n > 1 ? std::sqrt(sq / static_cast<double>(n - 1)) : 1.0;
  Dataset out = data;
  for (auto& seq : out) {
    for (double& v : seq.y) v = sd > 0.0 ? (v - mean) / sd : 0.0;
  }
  return out;
}

}  // namespace segseq
