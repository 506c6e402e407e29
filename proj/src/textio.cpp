#include "treeopt/textio.hpp"

#include <stdexcept>

namespace treeopt {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

double KvSection::number(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end())
    throw std::invalid_argument("missing key '" + key + "' in section [" + name + "]");
  return std::stod(it->second);
}

double KvSection::number_or(const std::string& key, double fallback) const {
  auto it = values.find(key);
  return it == values.end() ? fallback : std::stod(it->second);
}

std::string KvSection::text_or(const std::string& key, const std::string& fallback) const {
  auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

std::vector<KvSection> parse_kv_file(std::istream& is) {
  std::vector<KvSection> sections;
  sections.push_back({"", {}});
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      sections.push_back({trim(line.substr(1, line.size() - 2)), {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("line " + std::to_string(line_no) + ": expected key = value");
    sections.back().values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return sections;
}

}  // namespace treeopt
