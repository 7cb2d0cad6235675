#pragma once

#include "bsdiag/numeric.hpp"

#include <optional>
#include <string>

namespace bsdiag::app {

struct IndexPlot {
    std::string title;
    std::string y_label;
    Vector values;                      // plotted against 1..n
    std::optional<double> reference;    // dashed horizontal line
    std::string reference_label;
};

/// Self-contained static SVG document: one circle per value.
std::string render_index_plot(const IndexPlot& plot);

}  // namespace bsdiag::app
