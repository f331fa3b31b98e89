#include "sgl/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "sgl/errors.hpp"

namespace sgl {

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return static_cast<int>(i);
    }
    throw ConfigError("CSV column not found: " + name);
}

std::vector<double> CsvTable::column_values(const std::string& name) const {
    const int c = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& row : rows) out.push_back(row[c]);
    return out;
}

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

void write_csv(const CsvTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open CSV for writing: " + path);
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        if (i) out << ',';
        out << table.header[i];
    }
    out << '\n';
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size()) throw ConfigError("CSV row width mismatch");
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << format_number(row[i]);
        }
        out << '\n';
    }
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open CSV: " + path);
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty CSV: " + path);
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) table.header.push_back(cell);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream rs(line);
        std::vector<double> row;
        while (std::getline(rs, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ConfigError("non-numeric CSV cell '" + cell + "' in " + path);
            }
        }
        if (row.size() != table.header.size()) {
            throw ConfigError("CSV row width mismatch in " + path);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace sgl
