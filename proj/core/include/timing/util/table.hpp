#pragma once

#include <string>
#include <vector>

namespace timing::util {

// Small tab-separated table, written column-header first. Sweep results and
// analysis reports use this so files diff cleanly and load into anything.
class Table {
public:
    explicit Table(std::vector<std::string> columns);

    void add_row(std::vector<std::string> cells);
    std::string to_tsv() const;
    void write_tsv(const std::string& path) const;

    const std::vector<std::string>& columns() const { return columns_; }
    const std::vector<std::vector<std::string>>& rows() const { return rows_; }

    // Fixed-precision float formatting, locale independent.
    static std::string fmt(double value, int precision);
    static std::string fmt(long long value);

private:
    std::vector<std::string> columns_;
    std::vector<std::vector<std::string>> rows_;
};

}  // namespace timing::util
