#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fcprobe::io {

// Minimal CSV handling; fields never contain quotes or commas in the formats used here.
std::vector<std::string> split_csv_line(std::string_view line);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Column index by name; throws InvalidInput naming the file when absent.
    std::size_t column(std::string_view name) const;
    std::filesystem::path source;
};

CsvTable read_csv(const std::filesystem::path& path, bool has_header = true);

double parse_double(std::string_view field, const std::filesystem::path& path, std::size_t line);
long long parse_int(std::string_view field, const std::filesystem::path& path, std::size_t line);

std::string read_text(const std::filesystem::path& path);

// Writes through a temporary file in the same directory and renames into place.
void write_text(const std::filesystem::path& path, std::string_view content);

// Shortest text that parses back to exactly the same double.
std::string format_double(double v);

// %.{digits}g formatting.
std::string format_double(double v, int digits);

// FNV-1a 64-bit over bytes, as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);
std::string file_checksum(const std::filesystem::path& path);

}  // namespace fcprobe::io
