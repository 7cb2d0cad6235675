#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace bsdiag::app {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string render_index_plot(const IndexPlot& plot) {
    const std::size_t n = plot.values.size();
    double lo = 0.0;
    double hi = 0.0;
    for (double v : plot.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (plot.reference) hi = std::max(hi, *plot.reference);
    if (hi - lo <= 0.0) hi = lo + 1.0;
    const double pad = 0.05 * (hi - lo);
    hi += pad;
    if (lo < 0.0) lo -= pad;

    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    auto sx = [&](double i) { return kLeft + (n > 1 ? (i - 1.0) / static_cast<double>(n - 1) : 0.5) * plot_w; };
    auto sy = [&](double v) { return kTop + (hi - v) / (hi - lo) * plot_h; };

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << num(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"15\">" << escape(plot.title) << "</text>\n";

    // axes
    svg << "<g stroke=\"black\" stroke-width=\"1\">\n"
        << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop + plot_h) << "\" x2=\"" << num(kLeft + plot_w)
        << "\" y2=\"" << num(kTop + plot_h) << "\"/>\n"
        << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(kLeft) << "\" y2=\""
        << num(kTop + plot_h) << "\"/>\n"
        << "</g>\n";

    svg << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
    for (int k = 0; k <= 4; ++k) {
        const double v = lo + (hi - lo) * k / 4.0;
        svg << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(sy(v) + 4) << "\" text-anchor=\"end\">"
            << tick_label(v) << "</text>\n";
    }
    const std::size_t step = std::max<std::size_t>(1, (n + 9) / 10);
    for (std::size_t i = 1; i <= n; i += step)
        svg << "<text x=\"" << num(sx(static_cast<double>(i))) << "\" y=\"" << num(kTop + plot_h + 16)
            << "\" text-anchor=\"middle\">" << i << "</text>\n";
    svg << "<text x=\"" << num(kLeft + plot_w / 2) << "\" y=\"" << num(kHeight - 10)
        << "\" text-anchor=\"middle\">index</text>\n"
        << "<text x=\"16\" y=\"" << num(kTop + plot_h / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << num(kTop + plot_h / 2) << ")\">" << escape(plot.y_label) << "</text>\n"
        << "</g>\n";

    if (plot.reference) {
        const double y = sy(*plot.reference);
        svg << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(y) << "\" x2=\"" << num(kLeft + plot_w) << "\" y2=\""
            << num(y) << "\" stroke=\"firebrick\" stroke-dasharray=\"6 4\"/>\n";
        if (!plot.reference_label.empty())
            svg << "<text x=\"" << num(kLeft + plot_w - 4) << "\" y=\"" << num(y - 5)
                << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"firebrick\">"
                << escape(plot.reference_label) << "</text>\n";
    }

    svg << "<g fill=\"steelblue\">\n";
    for (std::size_t i = 0; i < n; ++i)
        svg << "<circle cx=\"" << num(sx(static_cast<double>(i + 1))) << "\" cy=\"" << num(sy(plot.values[i]))
            << "\" r=\"3\"><title>" << i + 1 << ": " << tick_label(plot.values[i]) << "</title></circle>\n";
    svg << "</g>\n</svg>\n";
    return svg.str();
}

}  // namespace bsdiag::app
