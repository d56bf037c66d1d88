#pragma once

#include <string>

#include "segseq/trainer.hpp"
#include "segseq/types.hpp"

namespace segseq {

/// Two-panel SVG 1.1 document: the data trace over bands coloured by the
/// per-timestep MAP kernel label, and the split-probability curve below.
std::string render_segmentation_svg(const Sequence& seq, const SequenceReport& report, std::size_t num_kernels);

}  // namespace segseq
