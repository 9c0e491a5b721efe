#include "homlab/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <numbers>
#include <sstream>

#include "homlab/errors.hpp"

namespace homlab {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  return out;
}

std::optional<double> to_double(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = t.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size()) return std::nullopt;
  return v;
}

}  // namespace

Config Config::parse(std::istream& is, const std::string& source) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(source + ": line " + std::to_string(e.line()) + ": " + e.message());
  }
  Config cfg;
  cfg.source_ = source;
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      cfg.values_[name] = trim(node.data());
    } else {
      for (const auto& [key, leaf] : node) cfg.values_[name + "." + key] = trim(leaf.data());
    }
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  Config cfg = parse(in, path.string());
  cfg.base_dir_ = path.parent_path();
  return cfg;
}

bool Config::has(const std::string& key) const { return values_.count(key) != 0; }

void Config::set(const std::string& key, const std::string& value) { values_[key] = value; }

const std::string* Config::find(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  used_.insert(key);
  return &it->second;
}

void Config::fail(const std::string& key, const std::string& what) const {
  throw ConfigError(source_ + ": " + key + ": " + what);
}

std::optional<std::string> Config::get_string(const std::string& key) const {
  if (const auto* v = find(key)) return *v;
  return std::nullopt;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  return get_string(key).value_or(fallback);
}

std::string Config::require_string(const std::string& key) const {
  const auto v = get_string(key);
  if (!v || v->empty()) fail(key, "required key is missing");
  return *v;
}

std::optional<double> Config::get_double(const std::string& key) const {
  const auto* v = find(key);
  if (!v) return std::nullopt;
  const auto d = to_double(*v);
  if (!d) fail(key, "expected a number, got '" + *v + "'");
  return d;
}

double Config::get_double(const std::string& key, double fallback) const {
  return get_double(key).value_or(fallback);
}

double Config::require_double(const std::string& key) const {
  const auto v = get_double(key);
  if (!v) fail(key, "required key is missing");
  return *v;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size() || v->empty())
    fail(key, "expected a non-negative integer, got '" + *v + "'");
  return out;
}

std::size_t Config::get_size(const std::string& key, std::size_t fallback) const {
  return static_cast<std::size_t>(get_u64(key, fallback));
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  std::string s = *v;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
  if (s == "false" || s == "no" || s == "off" || s == "0") return false;
  fail(key, "expected true or false, got '" + *v + "'");
}

std::optional<std::vector<double>> Config::get_list(const std::string& key, bool angles) const {
  const auto* v = find(key);
  if (!v) return std::nullopt;
  std::vector<double> out;
  for (const auto& item : split_list(*v, ',')) {
    if (angles) {
      try {
        out.push_back(parse_angle(item));
      } catch (const ConfigError& e) {
        fail(key, e.what());
      }
    } else {
      const auto d = to_double(item);
      if (!d) fail(key, "expected a comma-separated list of numbers, got '" + *v + "'");
      out.push_back(*d);
    }
  }
  if (out.empty()) fail(key, "list is empty");
  return out;
}

std::filesystem::path Config::resolve_path(const std::string& value) const {
  const std::filesystem::path p(value);
  if (p.is_absolute() || base_dir_.empty()) return p;
  return base_dir_ / p;
}

void Config::require_all_used() const {
  std::string unknown;
  for (const auto& [key, value] : values_) {
    if (used_.count(key)) continue;
    if (!unknown.empty()) unknown += ", ";
    unknown += key;
  }
  if (!unknown.empty()) throw ConfigError(source_ + ": unknown keys for this experiment: " + unknown);
}

double parse_angle(const std::string& text) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s += static_cast<char>(std::tolower(c));
  if (s.empty()) throw ConfigError("empty angle");

  if (s.size() > 3 && s.compare(s.size() - 3, 3, "deg") == 0) {
    const auto d = to_double(s.substr(0, s.size() - 3));
    if (!d) throw ConfigError("bad angle '" + text + "'");
    return *d * std::numbers::pi / 180.0;
  }
  const auto pi_pos = s.find("pi");
  if (pi_pos == std::string::npos) {
    const auto d = to_double(s);
    if (!d) throw ConfigError("bad angle '" + text + "'");
    return *d;
  }
  std::string coef = s.substr(0, pi_pos);
  if (!coef.empty() && coef.back() == '*') coef.pop_back();
  double factor = 1.0;
  if (coef == "-") {
    factor = -1.0;
  } else if (!coef.empty() && coef != "+") {
    const auto d = to_double(coef);
    if (!d) throw ConfigError("bad angle '" + text + "'");
    factor = *d;
  }
  const std::string rest = s.substr(pi_pos + 2);
  if (!rest.empty()) {
    if (rest.front() != '/') throw ConfigError("bad angle '" + text + "'");
    const auto d = to_double(rest.substr(1));
    if (!d || *d == 0.0) throw ConfigError("bad angle '" + text + "'");
    factor /= *d;
  }
  return factor * std::numbers::pi;
}

PhaseDistribution parse_phase_distribution(const std::string& text) {
  const std::string s = trim(text);
  if (s == "uniform" || s == "continuous") return PhaseDistribution::continuous_uniform();
  const auto colon = s.find(':');
  if (colon == std::string::npos)
    throw ConfigError("phase distribution must be uniform, discrete:<phases> or weighted:<phase@w,...>");
  const std::string kind = trim(s.substr(0, colon));
  const auto items = split_list(s.substr(colon + 1), ',');
  if (kind == "discrete") {
    std::vector<double> phases;
    for (const auto& item : items) phases.push_back(parse_angle(item));
    return PhaseDistribution::discrete_uniform(std::move(phases));
  }
  if (kind == "weighted") {
    std::vector<std::pair<double, double>> pw;
    for (const auto& item : items) {
      const auto at = item.find('@');
      if (at == std::string::npos) throw ConfigError("weighted entry '" + item + "' needs phase@weight");
      const auto w = to_double(item.substr(at + 1));
      if (!w) throw ConfigError("bad weight in '" + item + "'");
      pw.emplace_back(parse_angle(item.substr(0, at)), *w);
    }
    try {
      return PhaseDistribution::weighted(std::move(pw));
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    }
  }
  throw ConfigError("unknown phase distribution kind '" + kind + "'");
}

}  // namespace homlab
