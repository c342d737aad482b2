#include <cmath>
#include <string>

#include "spherecal/cli.hpp"
#include "spherecal/io.hpp"

namespace spherecal {

namespace {

// Plot geometry: a square calibration panel with a histogram strip below.
constexpr double kPanel = 420.0;
constexpr double kMarginLeft = 60.0;
constexpr double kMarginTop = 30.0;
constexpr double kHistHeight = 90.0;
constexpr double kHistGap = 40.0;
constexpr double kWidth = kMarginLeft + kPanel + 30.0;
constexpr double kHeight = kMarginTop + kPanel + kHistGap + kHistHeight + 50.0;

std::string num(double v) { return format_fixed(v, 2); }

double x_px(double frac) { return kMarginLeft + frac * kPanel; }
double y_px(double frac) { return kMarginTop + (1.0 - frac) * kPanel; }

void rect(std::string& s, double x, double y, double w, double h, const std::string& style) {
    s += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"" +
         num(h) + "\" " + style + "/>\n";
}

void line(std::string& s, double x1, double y1, double x2, double y2, const std::string& style) {
    s += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" +
         num(y2) + "\" " + style + "/>\n";
}

void text(std::string& s, double x, double y, const std::string& t, const std::string& extra = "") {
    s += "<text x=\"" + num(x) + "\" y=\"" + num(y) +
         "\" font-family=\"sans-serif\" font-size=\"12\" " + extra + ">" + t + "</text>\n";
}

}  // namespace

std::string reliability_svg(const CalibrationReport& report) {
    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
         num(kHeight) + "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\">\n";
    rect(s, 0, 0, kWidth, kHeight, "fill=\"white\"");
    rect(s, x_px(0), y_px(1), kPanel, kPanel, "fill=\"none\" stroke=\"#888\"");

    std::size_t total = 0;
    std::size_t max_count = 1;
    for (const auto& b : report.bins) {
        total += b.count;
        max_count = std::max(max_count, b.count);
    }

    const double bw = 1.0 / report.n_bins;
    for (const auto& b : report.bins) {
        if (b.count == 0) continue;
        const double x0 = x_px(b.lower) + 1.0;
        const double w = bw * kPanel - 2.0;
        // gap between accuracy and mean confidence, shaded
        const double lo = std::min(b.accuracy, b.mean_confidence);
        const double hi = std::max(b.accuracy, b.mean_confidence);
        if (hi > lo)
            rect(s, x0, y_px(hi), w, (hi - lo) * kPanel,
                 "fill=\"#d62728\" fill-opacity=\"0.35\"");
        rect(s, x0, y_px(b.accuracy), w, b.accuracy * kPanel,
             "fill=\"#1f77b4\" fill-opacity=\"0.8\"");
    }
    line(s, x_px(0), y_px(0), x_px(1), y_px(1),
         "stroke=\"#333\" stroke-dasharray=\"6,4\" stroke-width=\"1.5\"");

    for (int tick = 0; tick <= 5; ++tick) {
        const double f = tick / 5.0;
        line(s, x_px(f), y_px(0), x_px(f), y_px(0) + 5, "stroke=\"#555\"");
        text(s, x_px(f) - 8, y_px(0) + 20, format_fixed(f, 1));
        line(s, x_px(0) - 5, y_px(f), x_px(0), y_px(f), "stroke=\"#555\"");
        text(s, x_px(0) - 38, y_px(f) + 4, format_fixed(f, 1));
    }
    text(s, x_px(0.5) - 40, y_px(0) + 38, "confidence");
    text(s, 12, y_px(0.5), "accuracy", "transform=\"rotate(-90 12 " + num(y_px(0.5)) + ")\"");
    text(s, x_px(0) + 6, y_px(1) - 8,
         "ECE " + format_fixed(report.ece * 100.0, 2) + "%  |  acc " +
             format_fixed(report.accuracy * 100.0, 2) + "%  |  n=" + std::to_string(total));

    // confidence histogram strip
    const double hist_top = kMarginTop + kPanel + kHistGap;
    for (const auto& b : report.bins) {
        if (b.count == 0) continue;
        const double h = kHistHeight * static_cast<double>(b.count) /
                         static_cast<double>(max_count);
        rect(s, x_px(b.lower) + 1.0, hist_top + (kHistHeight - h), bw * kPanel - 2.0, h,
             "fill=\"#7f7f7f\"");
    }
    line(s, x_px(0), hist_top + kHistHeight, x_px(1), hist_top + kHistHeight,
         "stroke=\"#555\"");
    text(s, x_px(0), hist_top + kHistHeight + 18, "confidence histogram");

    s += "</svg>\n";
    return s;
}

}  // namespace spherecal
