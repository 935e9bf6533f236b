#include "hashlab/ini.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fstream>
#include <sstream>

namespace hashlab {

std::optional<std::string> IniSection::find(const std::string& key) const {
  for (const auto& [k, v] : entries) {
    if (k == key) return v;
  }
  return std::nullopt;
}

std::string IniSection::get(const std::string& key, const std::string& fallback) const {
  return find(key).value_or(fallback);
}

double IniSection::get_double(const std::string& key, double fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument(*v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(name + "." + key + ": expected a number, got '" + *v + "'");
  }
}

long long IniSection::get_int(const std::string& key, long long fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const long long i = std::stoll(*v, &used);
    if (used != v->size()) throw std::invalid_argument(*v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError(name + "." + key + ": expected an integer, got '" + *v + "'");
  }
}

bool IniSection::get_bool(const std::string& key, bool fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  const std::string s = boost::algorithm::to_lower_copy(*v);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(name + "." + key + ": expected a boolean, got '" + *v + "'");
}

void IniSection::set(const std::string& key, std::string value) {
  for (auto& [k, v] : entries) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries.emplace_back(key, std::move(value));
}

const IniSection* IniDocument::section(const std::string& name) const {
  for (const auto& s : sections) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

IniSection& IniDocument::section_or_add(const std::string& name) {
  for (auto& s : sections) {
    if (s.name == name) return s;
  }
  sections.push_back({name, {}});
  return sections.back();
}

IniDocument parse_ini(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }
  IniDocument doc;
  for (const auto& [name, child] : tree) {
    if (child.empty()) throw ConfigError("config entry '" + name + "' outside any section");
    IniSection section{name, {}};
    for (const auto& [key, value] : child) section.entries.emplace_back(key, value.data());
    doc.sections.push_back(std::move(section));
  }
  return doc;
}

IniDocument read_ini(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_ini(ss.str());
}

std::string format_ini(const IniDocument& doc) {
  std::ostringstream out;
  for (std::size_t i = 0; i < doc.sections.size(); ++i) {
    if (i) out << "\n";
    out << "[" << doc.sections[i].name << "]\n";
    for (const auto& [k, v] : doc.sections[i].entries) out << k << " = " << v << "\n";
  }
  return out.str();
}

std::vector<long long> parse_int_list(const std::string& text, const std::string& field) {
  std::vector<std::string> parts;
  boost::algorithm::split(parts, text, boost::algorithm::is_any_of(",x"));
  std::vector<long long> values;
  for (auto& p : parts) {
    boost::algorithm::trim(p);
    if (p.empty()) continue;
    try {
      std::size_t used = 0;
      values.push_back(std::stoll(p, &used));
      if (used != p.size()) throw std::invalid_argument(p);
    } catch (const std::exception&) {
      throw ConfigError(field + ": '" + text + "' is not a list of integers");
    }
  }
  if (values.empty()) throw ConfigError(field + ": empty list");
  return values;
}

std::string format_int_list(const std::vector<long long>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(values[i]);
  }
  return s;
}

Shape parse_shape(const std::string& text, const std::string& field) {
  const auto values = parse_int_list(text, field);
  Shape shape(values.begin(), values.end());
  if (!shape_valid(shape)) throw ConfigError(field + ": extents must be positive");
  return shape;
}

}  // namespace hashlab
