#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace relkit {

using KeyValues = std::map<std::string, std::string>;

// Flat "key = value" text. Blank lines and lines starting with '#' are
// ignored; later keys override earlier ones. Throws UsageError on a line
// without '='.
KeyValues parse_kv(std::string_view text, std::string_view source = "<config>");
KeyValues read_kv_file(const std::filesystem::path& path);

// "key=value" as given on a command line.
std::pair<std::string, std::string> parse_assignment(std::string_view s);

// Value conversions; throw UsageError naming the key.
double kv_double(const std::string& key, const std::string& value);
std::uint64_t kv_uint(const std::string& key, const std::string& value);

}  // namespace relkit
