#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace vg {

// Column of a plot-ready table; the unit is written next to the name in the header as name[unit].
struct Column {
    std::string name;
    std::string unit;
};

using Cell = std::variant<double, long, std::string>;

class Table {
public:
    Table() = default;
    explicit Table(std::vector<Column> columns) : columns_(std::move(columns)) {}
    void add_row(std::vector<Cell> row);
    const std::vector<Column>& columns() const { return columns_; }
    const std::vector<std::vector<Cell>>& rows() const { return rows_; }
    size_t size() const { return rows_.size(); }
    std::string header() const;
    std::string to_tsv() const;

private:
    std::vector<Column> columns_;
    std::vector<std::vector<Cell>> rows_;
};

// Shortest round-trip decimal form; identical doubles always print identically.
std::string format_number(double x);
std::string format_cell(const Cell& c);

void write_text(const std::filesystem::path& path, const std::string& text);
void write_tsv(const std::filesystem::path& path, const Table& table);

// FNV-1a 64-bit digest of the file contents as 16 hex digits.
std::string file_checksum(const std::filesystem::path& path);

// MANIFEST lines "<checksum>  <bytes>  <relative path>", sorted by path.
void write_manifest(const std::filesystem::path& dir, std::vector<std::string> files);

}  // namespace vg
