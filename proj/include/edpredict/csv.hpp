#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace edpredict::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers; // 1-based source line of each row
};

/// Reads a comma-separated file with optional double-quoted cells.
/// Throws UnreadableFile or EmptyFile.
Table read(const std::filesystem::path &path);

std::string escape(const std::string &cell);
void write_row(std::ostream &out, const std::vector<std::string> &cells);

/// Fixed "%.10g" rendering used for every number written to report files.
std::string number(double value);

} // namespace edpredict::csv
