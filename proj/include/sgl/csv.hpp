#pragma once

#include <string>
#include <vector>

namespace sgl {

// Column-oriented CSV with a header row and 10-significant-digit formatting,
// the interchange format for every emitted table.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    int column(const std::string& name) const;  // throws on a missing name
    std::vector<double> column_values(const std::string& name) const;
};

std::string format_number(double v);

void write_csv(const CsvTable& table, const std::string& path);
CsvTable read_csv(const std::string& path);

}  // namespace sgl
