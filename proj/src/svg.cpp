#include "segseq/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "segseq/features.hpp"

namespace segseq {
namespace {

constexpr double kWidth = 900.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 50.0;
constexpr double kRight = 20.0;
constexpr double kTop = 30.0;
constexpr double kDataHeight = 220.0;
constexpr double kGap = 30.0;
constexpr double kProbHeight = 110.0;

constexpr std::array<const char*, 10> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape(const std::string& text) {
  std::string out;
  for (char ch : text) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace

std::string render_segmentation_svg(const Sequence& seq, const SequenceReport& report, std::size_t num_kernels) {
  if (seq.size() != report.num_points) throw std::invalid_argument("report does not match sequence '" + seq.id + "'");
  const std::size_t n = seq.size();
  const double x0 = seq.x.front();
  const double x1 = n > 1 ? seq.x.back() : x0 + 1.0;
  double ylo = *std::min_element(seq.y.begin(), seq.y.end());
  double yhi = *std::max_element(seq.y.begin(), seq.y.end());
  if (yhi - ylo < 1e-12) {
    ylo -= 1.0;
    yhi += 1.0;
  }
  const double plot_w = kWidth - kLeft - kRight;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * plot_w; };
  auto py = [&](double y) { return kTop + (1.0 - (y - ylo) / (yhi - ylo)) * kDataHeight; };
  const double prob_top = kTop + kDataHeight + kGap;
  auto pp = [&](double p) { return prob_top + (1.0 - p) * kProbHeight; };

  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  os << "  <title>" << escape(seq.id) << "</title>\n";
  os << "  <rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";

  // Label bands.
  if (!report.samples.empty()) {
    const auto labels = timestep_labels(report, num_kernels);
    os << "  <g id=\"labels\" fill-opacity=\"0.18\">\n";
    std::size_t start = 0;
    for (std::size_t t = 1; t <= n; ++t) {
      if (t < n && labels[t] == labels[start]) continue;
      const double left = px(seq.x[start]);
      const double right = t < n ? px(seq.x[t]) : kLeft + plot_w;
      os << "    <rect x=\"" << left << "\" y=\"" << kTop << "\" width=\"" << std::max(right - left, 0.5)
         << "\" height=\"" << kDataHeight << "\" fill=\"" << kPalette[labels[start] % kPalette.size()]
         << "\"><title>kernel " << labels[start] << "</title></rect>\n";
      start = t;
    }
    os << "  </g>\n";
  }

  os << "  <polyline id=\"data\" fill=\"none\" stroke=\"black\" stroke-width=\"1\" points=\"";
  for (std::size_t i = 0; i < n; ++i) os << (i ? " " : "") << px(seq.x[i]) << ',' << py(seq.y[i]);
  os << "\"/>\n";

  os << "  <rect x=\"" << kLeft << "\" y=\"" << prob_top << "\" width=\"" << plot_w << "\" height=\"" << kProbHeight
     << "\" fill=\"none\" stroke=\"#999999\"/>\n";
  os << "  <polyline id=\"split-probability\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < report.marginal_split_prob.size() && i + 1 < n; ++i) {
    os << (i ? " " : "") << px(seq.x[i + 1]) << ',' << pp(report.marginal_split_prob[i]);
  }
  os << "\"/>\n";

  os << "  <g font-family=\"sans-serif\" font-size=\"12\" fill=\"#333333\">\n";
  os << "    <text x=\"" << kLeft << "\" y=\"" << kTop - 10 << "\">" << escape(seq.id) << "</text>\n";
  os << "    <text x=\"" << kLeft - 5 << "\" y=\"" << pp(1.0) + 4 << "\" text-anchor=\"end\">1</text>\n";
  os << "    <text x=\"" << kLeft - 5 << "\" y=\"" << pp(0.0) + 4 << "\" text-anchor=\"end\">0</text>\n";
  os << "    <text x=\"" << kLeft << "\" y=\"" << prob_top - 6 << "\">P(split)</text>\n";
  os << "  </g>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace segseq
