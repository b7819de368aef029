#pragma once

#include <string>
#include <vector>

namespace cvoam {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // -1 if absent
};

// RFC-4180-ish reader: comma separated, double quotes with "" escapes,
// tolerant of trailing \r. Every row must have as many fields as the header.
CsvTable read_csv(const std::string& path);

std::string csv_escape(const std::string& field);

// Strict double parse of a whole field; throws MalformedCsv on failure.
double parse_double_field(const std::string& field, const std::string& context);

// Shortest-ish round-trippable formatting used by all CSV emitters so that
// reruns are byte identical.
std::string format_double(double v);

// Writes content to path via a temporary file + atomic rename so failed
// commands never leave partial outputs behind.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_text_file(const std::string& path);

}  // namespace cvoam
