#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hashlab/tensor.hpp"

namespace hashlab {

/// Key = value configuration with [sections], order preserved.
struct IniSection {
  std::string name;
  std::vector<std::pair<std::string, std::string>> entries;

  std::optional<std::string> find(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  void set(const std::string& key, std::string value);
};

struct IniDocument {
  std::vector<IniSection> sections;

  const IniSection* section(const std::string& name) const;
  IniSection& section_or_add(const std::string& name);
};

IniDocument parse_ini(const std::string& text);
IniDocument read_ini(const std::filesystem::path& path);
std::string format_ini(const IniDocument& doc);

/// "3,224,224" -> {3, 224, 224}
std::vector<long long> parse_int_list(const std::string& text, const std::string& field);
std::string format_int_list(const std::vector<long long>& values);
Shape parse_shape(const std::string& text, const std::string& field);

}  // namespace hashlab
