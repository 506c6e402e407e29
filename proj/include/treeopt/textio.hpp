#pragma once

#include <istream>
#include <map>
#include <string>
#include <vector>

namespace treeopt {

/// One `[section]` of a key = value file. Repeated section names are kept in
/// file order; keys before the first header land in a section named "".
struct KvSection {
  std::string name;
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const { return values.count(key) > 0; }
  double number(const std::string& key) const;
  double number_or(const std::string& key, double fallback) const;
  std::string text_or(const std::string& key, const std::string& fallback) const;
};

std::vector<KvSection> parse_kv_file(std::istream& is);

}  // namespace treeopt
