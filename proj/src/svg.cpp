#include "sgl/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>

#include "sgl/errors.hpp"

namespace sgl {

namespace {

constexpr double kLogFloor = 1e-12;

const char* kPalette[] = {"#1f6fb2", "#d1495b", "#3e8e5a", "#8d6cab",
                          "#c88a2e", "#4ab0a6", "#74655a", "#aa3377"};

struct Axis {
    double lo = 0.0;
    double hi = 1.0;
    bool log = false;

    double project(double v, double px_lo, double px_hi) const {
        double t = log ? (std::log10(v) - std::log10(lo)) / (std::log10(hi) - std::log10(lo))
                       : (v - lo) / (hi - lo);
        return px_lo + t * (px_hi - px_lo);
    }

    std::vector<double> ticks() const {
        std::vector<double> out;
        if (log) {
            const int e_lo = static_cast<int>(std::floor(std::log10(lo)));
            const int e_hi = static_cast<int>(std::ceil(std::log10(hi)));
            int step = std::max(1, (e_hi - e_lo) / 6);
            for (int e = e_lo; e <= e_hi; e += step) out.push_back(std::pow(10.0, e));
        } else {
            const double span = hi - lo;
            const double raw = span / 6.0;
            const double mag = std::pow(10.0, std::floor(std::log10(raw)));
            double step = mag;
            if (raw / mag > 5.0) step = 5.0 * mag;
            else if (raw / mag > 2.0) step = 2.0 * mag;
            const double first = std::ceil(lo / step) * step;
            for (double v = first; v <= hi + 1e-12 * span; v += step) out.push_back(v);
        }
        return out;
    }
};

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

}  // namespace

void emit_plot(const CsvTable& table, const std::string& x_column,
               const std::vector<std::string>& y_columns, const std::string& out_path,
               const PlotOptions& options) {
    if (y_columns.empty()) throw ConfigError("emit_plot needs at least one y column");
    const std::vector<double> xs_raw = table.column_values(x_column);
    if (xs_raw.empty()) throw ConfigError("emit_plot: empty table");

    std::vector<std::vector<double>> ys;
    ys.reserve(y_columns.size());
    for (const auto& name : y_columns) ys.push_back(table.column_values(name));

    bool clamped = false;
    auto sanitize = [&](double v, bool log_axis) {
        if (log_axis && v < kLogFloor) {
            clamped = true;
            return kLogFloor;
        }
        return v;
    };

    std::vector<double> xs(xs_raw.size());
    for (std::size_t i = 0; i < xs_raw.size(); ++i) xs[i] = sanitize(xs_raw[i], options.log_x);
    for (auto& col : ys) {
        for (auto& v : col) v = sanitize(v, options.log_y);
    }
    if (clamped) {
        std::cerr << "emit_plot: values clamped to " << kLogFloor << " on a log axis ("
                  << out_path << ")\n";
    }

    Axis ax{*std::min_element(xs.begin(), xs.end()), *std::max_element(xs.begin(), xs.end()),
            options.log_x};
    double y_lo = std::numeric_limits<double>::infinity();
    double y_hi = -std::numeric_limits<double>::infinity();
    for (const auto& col : ys) {
        for (double v : col) {
            y_lo = std::min(y_lo, v);
            y_hi = std::max(y_hi, v);
        }
    }
    if (!(y_hi > y_lo)) y_hi = y_lo + 1.0;
    if (!(ax.hi > ax.lo)) ax.hi = ax.lo + 1.0;
    Axis ay{y_lo, y_hi, options.log_y};
    if (!ay.log) {
        const double pad = 0.05 * (ay.hi - ay.lo);
        ay.lo -= pad;
        ay.hi += pad;
    }

    const double W = options.width, H = options.height;
    const double mL = 72, mR = 20, mT = options.title.empty() ? 18 : 36, mB = 46;
    auto px = [&](double v) { return ax.project(v, mL, W - mR); };
    auto py = [&](double v) { return ay.project(v, H - mB, mT); };

    std::ofstream out(out_path);
    if (!out) throw ConfigError("cannot open SVG for writing: " + out_path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
        << "' viewBox='0 0 " << W << " " << H << "'>\n";
    out << "<rect width='100%' height='100%' fill='white'/>\n";
    if (!options.title.empty()) {
        out << "<text x='" << W / 2 << "' y='20' text-anchor='middle' font-size='14' "
            << "font-family='sans-serif'>" << options.title << "</text>\n";
    }
    // Frame.
    out << "<rect x='" << mL << "' y='" << mT << "' width='" << W - mL - mR << "' height='"
        << H - mT - mB << "' fill='none' stroke='#333'/>\n";
    for (double t : ax.ticks()) {
        if (t < ax.lo || t > ax.hi) continue;
        const double x = px(t);
        out << "<line x1='" << x << "' y1='" << H - mB << "' x2='" << x << "' y2='" << H - mB + 5
            << "' stroke='#333'/>\n";
        out << "<text x='" << x << "' y='" << H - mB + 18
            << "' text-anchor='middle' font-size='11' font-family='sans-serif'>" << tick_label(t)
            << "</text>\n";
    }
    for (double t : ay.ticks()) {
        if (t < ay.lo || t > ay.hi) continue;
        const double y = py(t);
        out << "<line x1='" << mL - 5 << "' y1='" << y << "' x2='" << mL << "' y2='" << y
            << "' stroke='#333'/>\n";
        out << "<text x='" << mL - 8 << "' y='" << y + 4
            << "' text-anchor='end' font-size='11' font-family='sans-serif'>" << tick_label(t)
            << "</text>\n";
    }
    for (std::size_t c = 0; c < ys.size(); ++c) {
        out << "<polyline fill='none' stroke='" << kPalette[c % 8] << "' stroke-width='1.5' points='";
        for (std::size_t i = 0; i < xs.size(); ++i) {
            out << px(xs[i]) << ',' << py(ys[c][i]) << ' ';
        }
        out << "'/>\n";
        const double ly = mT + 16 + 16 * static_cast<double>(c);
        out << "<line x1='" << W - mR - 120 << "' y1='" << ly << "' x2='" << W - mR - 96 << "' y2='"
            << ly << "' stroke='" << kPalette[c % 8] << "' stroke-width='2'/>\n";
        out << "<text x='" << W - mR - 90 << "' y='" << ly + 4
            << "' font-size='11' font-family='sans-serif'>" << y_columns[c] << "</text>\n";
    }
    out << "</svg>\n";
}

void emit_plot_from_csv(const std::string& csv_path, const std::string& x_column,
                        const std::vector<std::string>& y_columns, const std::string& out_path,
                        const PlotOptions& options) {
    emit_plot(read_csv(csv_path), x_column, y_columns, out_path, options);
}

}  // namespace sgl
