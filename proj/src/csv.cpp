#include "edpredict/csv.hpp"

#include "edpredict/error.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <boost/tokenizer.hpp>

namespace edpredict::csv {

Table read(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::UnreadableFile, "cannot open " + path.string());
    }
    using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;
    const boost::escaped_list_separator<char> separator('\\', ',', '"');

    Table table;
    std::string line;
    std::size_t line_number = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> cells;
        try {
            Tokenizer tokens(line, separator);
            cells.assign(tokens.begin(), tokens.end());
        } catch (const boost::escaped_list_error &) {
            // keep the raw line so the caller can report it as malformed
            cells = {line};
        }
        if (!have_header) {
            table.header = std::move(cells);
            have_header = true;
        } else {
            table.rows.push_back(std::move(cells));
            table.line_numbers.push_back(line_number);
        }
    }
    if (!have_header) {
        throw Error(ErrorCode::EmptyFile, path.string() + " is empty");
    }
    return table;
}

std::string escape(const std::string &cell) {
    if (cell.find_first_of(",\"\\\n") == std::string::npos) {
        return cell;
    }
    std::string out = "\"";
    for (char c : cell) {
        // the reader uses backslash escapes inside quoted cells
        if (c == '"' || c == '\\') {
            out += '\\';
        }
        out += c;
    }
    out += '"';
    return out;
}

void write_row(std::ostream &out, const std::vector<std::string> &cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i > 0) {
            out << ',';
        }
        out << escape(cells[i]);
    }
    out << '\n';
}

std::string number(double value) {
    if (std::isnan(value)) {
        return "nan";
    }
    if (std::isinf(value)) {
        return value > 0 ? "inf" : "-inf";
    }
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.10g", value);
    return buffer;
}

} // namespace edpredict::csv
