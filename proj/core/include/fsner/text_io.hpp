#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace fsner {

// Shortest decimal representation that round-trips the value exactly.
std::string format_double(double v);
std::string format_float(float v);

// Strict full-string numeric parses; return false on any trailing garbage.
bool parse_double(const std::string& s, double& out);
bool parse_int64(const std::string& s, int64_t& out);

std::vector<std::string> split_whitespace(const std::string& line);
std::vector<std::string> split_on(const std::string& s, char sep);

std::string lowercase_ascii(const std::string& s);

// Minimal CSV quoting: wraps fields containing separators or quotes.
std::string csv_field(const std::string& s);

// `key = value` files, '#' comments, blank lines ignored.
std::map<std::string, std::string> read_kv_file(std::istream& in);
void write_kv_file(std::ostream& out, const std::map<std::string, std::string>& kv);

// Whole-file helpers.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace fsner
