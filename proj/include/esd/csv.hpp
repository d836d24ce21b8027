#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace esd {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A CSV file: `# key=value` metadata lines, one header row, data rows.
struct CsvArtifact {
    std::filesystem::path path;
    std::vector<std::string> metadata;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// 17 significant digits; parses back to the identical double.
std::string format_double(double v);

std::string render_csv(const CsvArtifact& artifact);

/// Writes to a temporary sibling and renames it over the destination.
void write_csv(const CsvArtifact& artifact);

struct ParsedCsv {
    std::vector<std::string> metadata;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

ParsedCsv parse_csv(std::string_view text);
ParsedCsv read_csv(const std::filesystem::path& path);

}  // namespace esd
