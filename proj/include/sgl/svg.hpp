#pragma once

#include <string>
#include <vector>

#include "sgl/csv.hpp"

namespace sgl {

struct PlotOptions {
    bool log_x = false;
    bool log_y = false;
    std::string title;
    int width = 720;
    int height = 480;
};

// Minimal static line chart: axes, ticks, legend, one polyline per y column.
// Values clamped at 1e-12 on log axes (with a warning to stderr).
void emit_plot(const CsvTable& table, const std::string& x_column,
               const std::vector<std::string>& y_columns, const std::string& out_path,
               const PlotOptions& options = {});

void emit_plot_from_csv(const std::string& csv_path, const std::string& x_column,
                        const std::vector<std::string>& y_columns, const std::string& out_path,
                        const PlotOptions& options = {});

}  // namespace sgl
