#pragma once

// Plain-text experiment configuration: `key = value` lines grouped under
// `[section]` headers, `#` comments, quoted or bare values. Keys are
// addressed as "section.key". Typed getters mark keys as consumed so a
// caller can reject everything it did not understand.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "boolnet/optim.hpp"

namespace boolnet {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class ConfigMap {
 public:
  static ConfigMap parse(std::istream& is);
  static ConfigMap parse_string(const std::string& text);

  // Insert or overwrite (used by command-line overrides). The key is
  // "section.key" form.
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  // Typed getters; each records the key as consumed. The *_or forms supply
  // a default for an absent key. Parse failures throw ConfigError naming
  // the key.
  std::optional<std::string> get_string(const std::string& key) const;
  std::string get_string_or(const std::string& key,
                            const std::string& fallback) const;
  std::optional<double> get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;
  std::optional<std::int64_t> get_int(const std::string& key) const;
  std::int64_t get_int_or(const std::string& key, std::int64_t fallback) const;
  std::optional<bool> get_bool(const std::string& key) const;
  bool get_bool_or(const std::string& key, bool fallback) const;

  // Keys never touched by any getter, sorted. Empty means the whole file
  // was understood.
  std::vector<std::string> unused() const;
  // Throws ConfigError listing the unused keys, if any.
  void reject_unused() const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> consumed_;
};

// "constant" or "step(factor,period)".
EtaSchedule parse_eta_schedule(const std::string& text);
std::string format_eta_schedule(const EtaSchedule& s);

// A number, or "none" for an unset value.
std::optional<double> parse_optional_double(const std::string& text);

// Reads optimizer.* keys (eta0, schedule, tau, kappa, beta, flips) into an
// OptimConfig; the seed is left for the caller. Consumes the keys it reads.
OptimConfig read_optim_config(const ConfigMap& cfg,
                              const std::string& section = "optimizer");

// Accumulates resolved (section, key, value) entries and writes them back
// out in file order, one section block at a time. Doubles go through the
// shortest round-trip format, so re-parsing reproduces them exactly.
class ConfigWriter {
 public:
  void add(const std::string& section, const std::string& key,
           const std::string& value);
  void add(const std::string& section, const std::string& key, double value);
  void add(const std::string& section, const std::string& key,
           std::int64_t value);
  void add(const std::string& section, const std::string& key, bool value);

  void write(std::ostream& os) const;

 private:
  struct Entry {
    std::string section, key, value;
  };
  std::vector<Entry> entries_;
};

}  // namespace boolnet
