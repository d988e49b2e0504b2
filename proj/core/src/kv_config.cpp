#include "relkit/kv_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "relkit/error.hpp"

namespace relkit {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

KeyValues parse_kv(std::string_view text, std::string_view source) {
  KeyValues out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string line = trim(text.substr(pos, end - pos));
    ++line_no;
    pos = end + 1;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(std::string(source) + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.empty())
      throw UsageError(std::string(source) + ":" + std::to_string(line_no) + ": empty key");
    out[key] = trim(std::string_view(line).substr(eq + 1));
  }
  return out;
}

KeyValues read_kv_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_kv(ss.str(), path.string());
}

std::pair<std::string, std::string> parse_assignment(std::string_view s) {
  const auto eq = s.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw UsageError("expected key=value, got '" + std::string(s) + "'");
  return {trim(s.substr(0, eq)), trim(s.substr(eq + 1))};
}

double kv_double(const std::string& key, const std::string& value) {
  double v = 0.0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v))
    throw UsageError("config key '" + key + "' expects a number, got '" + value + "'");
  return v;
}

std::uint64_t kv_uint(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw UsageError("config key '" + key + "' expects a nonnegative integer, got '" + value + "'");
  return v;
}

}  // namespace relkit
