#include "timing/util/table.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace timing::util {

Table::Table(std::vector<std::string> columns) : columns_(std::move(columns)) {
    if (columns_.empty()) throw std::invalid_argument("Table: need at least one column");
}

void Table::add_row(std::vector<std::string> cells) {
    if (cells.size() != columns_.size())
        throw std::invalid_argument("Table: row width does not match header");
    rows_.push_back(std::move(cells));
}

std::string Table::to_tsv() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        if (i) out << '\t';
        out << columns_[i];
    }
    out << '\n';
    for (const auto& row : rows_) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << '\t';
            out << row[i];
        }
        out << '\n';
    }
    return out.str();
}

void Table::write_tsv(const std::string& path) const {
    std::ofstream file(path);
    if (!file) throw std::runtime_error("Table: cannot open " + path);
    file << to_tsv();
    if (!file) throw std::runtime_error("Table: write failed for " + path);
}

std::string Table::fmt(double value, int precision) {
    std::ostringstream out;
    out.imbue(std::locale::classic());
    out.setf(std::ios::fixed);
    out.precision(precision);
    out << value;
    return out.str();
}

std::string Table::fmt(long long value) {
    return std::to_string(value);
}

}  // namespace timing::util
