#pragma once

#include <string>
#include <vector>

namespace tabsyn::csv {

// RFC 4180 reader: comma separated, optional double-quote quoting with ""
// escapes, fields may contain embedded separators and newlines. Accepts both
// LF and CRLF line endings. Returns all records including the header row.
std::vector<std::vector<std::string>> read_file(const std::string& path);

std::vector<std::vector<std::string>> parse(const std::string& text);

// Quotes a field only when it needs quoting.
std::string escape_field(const std::string& field);

void write_file(const std::string& path,
                const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows);

}  // namespace tabsyn::csv
