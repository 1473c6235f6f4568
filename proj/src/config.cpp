#include "boolnet/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include "boolnet/analysis.hpp"

namespace boolnet {

namespace {

std::string trimmed(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-')
      return false;
  return true;
}

// Comment start: first '#' outside double quotes.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

}  // namespace

ConfigMap ConfigMap::parse(std::istream& is) {
  ConfigMap cfg;
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string s = trimmed(strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) +
                          ": unterminated section header");
      section = trimmed(s.substr(1, s.size() - 2));
      if (!valid_name(section))
        throw ConfigError("line " + std::to_string(lineno) +
                          ": bad section name \"" + section + "\"");
      continue;
    }
    auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected key = value");
    std::string key = trimmed(s.substr(0, eq));
    std::string value = trimmed(s.substr(eq + 1));
    if (!valid_name(key))
      throw ConfigError("line " + std::to_string(lineno) + ": bad key \"" +
                        key + "\"");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    else if (!value.empty() && value.front() == '"')
      throw ConfigError("line " + std::to_string(lineno) +
                        ": unterminated string");
    std::string full = section.empty() ? key : section + "." + key;
    if (cfg.values_.count(full))
      throw ConfigError("line " + std::to_string(lineno) +
                        ": duplicate key \"" + full + "\"");
    cfg.values_.emplace(std::move(full), std::move(value));
  }
  return cfg;
}

ConfigMap ConfigMap::parse_string(const std::string& text) {
  std::istringstream is(text);
  return parse(is);
}

void ConfigMap::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

std::optional<std::string> ConfigMap::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  consumed_.insert(key);
  return it->second;
}

std::string ConfigMap::get_string_or(const std::string& key,
                                     const std::string& fallback) const {
  return get_string(key).value_or(fallback);
}

std::optional<double> ConfigMap::get_double(const std::string& key) const {
  auto raw = get_string(key);
  if (!raw) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(raw->data(), raw->data() + raw->size(), v);
  if (ec != std::errc{} || ptr != raw->data() + raw->size())
    throw ConfigError(key + ": expected a number, got \"" + *raw + "\"");
  return v;
}

double ConfigMap::get_double_or(const std::string& key, double fallback) const {
  return get_double(key).value_or(fallback);
}

std::optional<std::int64_t> ConfigMap::get_int(const std::string& key) const {
  auto raw = get_string(key);
  if (!raw) return std::nullopt;
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(raw->data(), raw->data() + raw->size(), v);
  if (ec != std::errc{} || ptr != raw->data() + raw->size())
    throw ConfigError(key + ": expected an integer, got \"" + *raw + "\"");
  return v;
}

std::int64_t ConfigMap::get_int_or(const std::string& key,
                                   std::int64_t fallback) const {
  return get_int(key).value_or(fallback);
}

std::optional<bool> ConfigMap::get_bool(const std::string& key) const {
  auto raw = get_string(key);
  if (!raw) return std::nullopt;
  if (*raw == "true") return true;
  if (*raw == "false") return false;
  throw ConfigError(key + ": expected true or false, got \"" + *raw + "\"");
}

bool ConfigMap::get_bool_or(const std::string& key, bool fallback) const {
  return get_bool(key).value_or(fallback);
}

std::vector<std::string> ConfigMap::unused() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_)
    if (!consumed_.count(k)) out.push_back(k);
  return out;
}

void ConfigMap::reject_unused() const {
  auto leftover = unused();
  if (leftover.empty()) return;
  std::string msg = "unknown config key(s):";
  for (const auto& k : leftover) msg += " " + k;
  throw ConfigError(msg);
}

EtaSchedule parse_eta_schedule(const std::string& text) {
  if (text == "constant") return EtaSchedule::constant();
  const std::string head = "step(";
  if (text.rfind(head, 0) == 0 && text.back() == ')') {
    std::string inner = text.substr(head.size(), text.size() - head.size() - 1);
    auto comma = inner.find(',');
    if (comma != std::string::npos) {
      std::string fs = trimmed(inner.substr(0, comma));
      std::string ps = trimmed(inner.substr(comma + 1));
      double factor = 0.0;
      std::uint64_t period = 0;
      auto [p1, e1] = std::from_chars(fs.data(), fs.data() + fs.size(), factor);
      auto [p2, e2] = std::from_chars(ps.data(), ps.data() + ps.size(), period);
      if (e1 == std::errc{} && p1 == fs.data() + fs.size() &&
          e2 == std::errc{} && p2 == ps.data() + ps.size())
        return EtaSchedule::step(factor, period);
    }
  }
  throw ConfigError("bad schedule \"" + text +
                    "\": expected constant or step(factor,period)");
}

std::string format_eta_schedule(const EtaSchedule& s) {
  if (s.kind == EtaScheduleKind::Constant) return "constant";
  return "step(" + format_double(s.factor) + "," + std::to_string(s.period) +
         ")";
}

std::optional<double> parse_optional_double(const std::string& text) {
  if (text == "none") return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw ConfigError("expected a number or none, got \"" + text + "\"");
  return v;
}

OptimConfig read_optim_config(const ConfigMap& cfg,
                              const std::string& section) {
  OptimConfig oc;
  oc.eta0 = cfg.get_double_or(section + ".eta0", oc.eta0);
  oc.schedule =
      parse_eta_schedule(cfg.get_string_or(section + ".schedule", "constant"));
  oc.tau = cfg.get_double_or(section + ".tau", oc.tau);
  oc.kappa =
      parse_optional_double(cfg.get_string_or(section + ".kappa", "none"));

  std::string beta = cfg.get_string_or(section + ".beta", "adaptive");
  if (beta == "adaptive") {
    oc.beta_mode = BetaMode::Adaptive;
  } else {
    oc.beta_mode = BetaMode::Constant;
    auto v = parse_optional_double(beta);
    if (!v) throw ConfigError(section + ".beta: expected adaptive or a number");
    oc.beta_value = *v;
  }

  std::string flips = cfg.get_string_or(section + ".flips", "deterministic");
  if (flips == "deterministic")
    oc.flip_mode = FlipMode::Deterministic;
  else if (flips == "stochastic")
    oc.flip_mode = FlipMode::Stochastic;
  else
    throw ConfigError(section +
                      ".flips: expected deterministic or stochastic");
  return oc;
}

void ConfigWriter::add(const std::string& section, const std::string& key,
                       const std::string& value) {
  bool plain = !value.empty();
  for (char c : value)
    if (!std::isalnum(static_cast<unsigned char>(c)) &&
        std::string("_.()+-,/").find(c) == std::string::npos)
      plain = false;
  entries_.push_back({section, key, plain ? value : "\"" + value + "\""});
}

void ConfigWriter::add(const std::string& section, const std::string& key,
                       double value) {
  entries_.push_back({section, key, format_double(value)});
}

void ConfigWriter::add(const std::string& section, const std::string& key,
                       std::int64_t value) {
  entries_.push_back({section, key, std::to_string(value)});
}

void ConfigWriter::add(const std::string& section, const std::string& key,
                       bool value) {
  entries_.push_back({section, key, value ? "true" : "false"});
}

void ConfigWriter::write(std::ostream& os) const {
  // Section blocks in first-appearance order; global keys lead.
  std::vector<std::string> order;
  for (const auto& e : entries_)
    if (std::find(order.begin(), order.end(), e.section) == order.end())
      order.push_back(e.section);
  std::stable_sort(order.begin(), order.end(),
                   [](const std::string& a, const std::string& b) {
                     return a.empty() && !b.empty();
                   });
  bool first = true;
  for (const auto& sec : order) {
    if (!sec.empty()) {
      if (!first) os << "\n";
      os << "[" << sec << "]\n";
    }
    first = false;
    for (const auto& e : entries_)
      if (e.section == sec) os << e.key << " = " << e.value << "\n";
  }
}

}  // namespace boolnet
