#include "esd/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>
#include <unistd.h>

namespace esd {

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

void append_row(std::string& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i > 0) out += ',';
        out += cells[i];
    }
    out += '\n';
}

}  // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string render_csv(const CsvArtifact& artifact) {
    std::string out;
    for (const auto& m : artifact.metadata) out += "# " + m + "\n";
    append_row(out, artifact.header);
    for (const auto& row : artifact.rows) {
        if (row.size() != artifact.header.size()) {
            throw IoError("CSV row width " + std::to_string(row.size()) + " does not match header width " +
                          std::to_string(artifact.header.size()) + " for " + artifact.path.string());
        }
        append_row(out, row);
    }
    return out;
}

void write_csv(const CsvArtifact& artifact) {
    const std::string text = render_csv(artifact);
    const auto tmp = artifact.path.string() + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp + "' for writing");
        out << text;
        out.flush();
        if (!out) throw IoError("write failed for '" + tmp + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, artifact.path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw IoError("cannot move output into place at '" + artifact.path.string() + "': " + ec.message());
    }
}

ParsedCsv parse_csv(std::string_view text) {
    ParsedCsv out;
    std::istringstream in{std::string(text)};
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (line.rfind("# ", 0) == 0) {
            out.metadata.push_back(line.substr(2));
        } else if (!have_header) {
            out.header = split(line);
            have_header = true;
        } else {
            out.rows.push_back(split(line));
        }
    }
    return out;
}

ParsedCsv read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str());
}

}  // namespace esd
