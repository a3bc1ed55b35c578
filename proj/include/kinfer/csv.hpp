#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace kinfer::csv {

/// Number with `digits` significant digits, '.' decimal point, no locale.
std::string number(double value, int digits = 9);

/// Quotes a field when it contains a comma, quote or line break.
std::string field(std::string_view text);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
    std::string str() const;
};

void write_file(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

/// Minimal RFC 4180 reader; returns rows of fields (header included).
std::vector<std::vector<std::string>> parse(std::string_view text);

}  // namespace kinfer::csv
