#include "vargauss/io.hpp"

#include "vargauss/numerics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace vg {

void Table::add_row(std::vector<Cell> row)
{
    if (row.size() != columns_.size())
        throw Error(ErrorKind::Precondition, "table row has " + std::to_string(row.size()) + " cells, expected " +
                                                 std::to_string(columns_.size()));
    rows_.push_back(std::move(row));
}

std::string Table::header() const
{
    std::string h;
    for (size_t i = 0; i < columns_.size(); ++i) {
        if (i) h += '\t';
        h += columns_[i].name + "[" + columns_[i].unit + "]";
    }
    return h;
}

std::string Table::to_tsv() const
{
    std::string out = header() + "\n";
    for (const auto& row : rows_) {
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) out += '\t';
            out += format_cell(row[i]);
        }
        out += '\n';
    }
    return out;
}

std::string format_number(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

std::string format_cell(const Cell& c)
{
    if (const double* d = std::get_if<double>(&c)) return format_number(*d);
    if (const long* l = std::get_if<long>(&c)) return std::to_string(*l);
    return std::get<std::string>(c);
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Precondition, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorKind::Precondition, "write failed for " + path.string());
}

void write_tsv(const std::filesystem::path& path, const Table& table) { write_text(path, table.to_tsv()); }

std::string file_checksum(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Precondition, "cannot read " + path.string());
    std::uint64_t h = 1469598103934665603ULL;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

void write_manifest(const std::filesystem::path& dir, std::vector<std::string> files)
{
    std::sort(files.begin(), files.end());
    files.erase(std::unique(files.begin(), files.end()), files.end());
    std::string text;
    for (const auto& f : files) {
        const auto p = dir / f;
        text += file_checksum(p) + "  " + std::to_string(std::filesystem::file_size(p)) + "  " + f + "\n";
    }
    write_text(dir / "MANIFEST", text);
}

}  // namespace vg
