#pragma once

// Verification reports: per-check tallies with worst margin and witness,
// serialized as JSON (schema version "1") and CSV tables.

#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"
#include "s2wb/errors.hpp"

#ifndef S2WB_VERSION
#define S2WB_VERSION "1.0.0"
#endif

namespace s2wb {

using json = nlohmann::ordered_json;

inline constexpr const char* kSchemaVersion = "1";
inline constexpr const char* kLibraryVersion = S2WB_VERSION;

/// A check passes at an evaluation when its margin is >= 0 (> 0 when strict).
/// Informational checks are tallied but never fail a run.
class CheckSummary {
 public:
  CheckSummary() = default;
  CheckSummary(std::string name, bool hard = true, bool strict = false)
      : name_(std::move(name)), hard_(hard), strict_(strict) {}

  template <typename WitnessFn>
  void record(double margin, WitnessFn&& witness) {
    ++count_;
    const bool ok = strict_ ? margin > 0.0 : margin >= 0.0;
    if (ok) ++pass_;
    // NaN margins count as failures and, once seen, stay the worst
    if (count_ == 1 || margin < worst_ || (std::isnan(margin) && !std::isnan(worst_))) {
      worst_ = margin;
      witness_ = witness();
    }
  }
  void record(double margin) {
    record(margin, [] { return json(); });
  }

  /// Appends `other`, which covers later evaluations; ties keep the earlier witness.
  void merge(const CheckSummary& other) {
    if (other.count_ == 0) return;
    if (count_ == 0 || other.worst_ < worst_ || (std::isnan(other.worst_) && !std::isnan(worst_))) {
      worst_ = other.worst_;
      witness_ = other.witness_;
    }
    count_ += other.count_;
    pass_ += other.pass_;
  }

  const std::string& name() const noexcept { return name_; }
  std::size_t count() const noexcept { return count_; }
  std::size_t pass() const noexcept { return pass_; }
  double worst_margin() const noexcept { return worst_; }
  bool hard() const noexcept { return hard_; }
  bool failed() const noexcept { return hard_ && pass_ < count_; }

  json to_json() const {
    json j;
    j["name"] = name_;
    j["hard"] = hard_;
    j["count"] = count_;
    j["pass"] = pass_;
    j["worst_margin"] = count_ > 0 && std::isfinite(worst_) ? json(worst_) : json(nullptr);
    j["witness"] = witness_;
    return j;
  }

 private:
  std::string name_;
  bool hard_ = true;
  bool strict_ = false;
  std::size_t count_ = 0;
  std::size_t pass_ = 0;
  double worst_ = std::numeric_limits<double>::infinity();
  json witness_;
};

/// Ordered set of checks, merged chunk by chunk.
class CheckSet {
 public:
  CheckSummary& add(std::string name, bool hard = true, bool strict = false) {
    checks_.emplace_back(std::move(name), hard, strict);
    return checks_.back();
  }
  CheckSummary& operator[](const std::string& name) {
    for (auto& c : checks_)
      if (c.name() == name) return c;
    throw DomainError("CheckSet: unknown check " + name);
  }
  void merge(const CheckSet& other) {
    for (const auto& c : other.checks_) {
      bool found = false;
      for (auto& mine : checks_)
        if (mine.name() == c.name()) {
          mine.merge(c);
          found = true;
          break;
        }
      if (!found) checks_.push_back(c);
    }
  }
  bool any_failed() const {
    for (const auto& c : checks_)
      if (c.failed()) return true;
    return false;
  }
  const std::vector<CheckSummary>& checks() const noexcept { return checks_; }
  json to_json() const {
    json arr = json::array();
    for (const auto& c : checks_) arr.push_back(c.to_json());
    return arr;
  }

 private:
  std::vector<CheckSummary> checks_;
};

enum ExitCode : int { kExitOk = 0, kExitViolation = 2, kExitToolError = 3 };

inline const char* status_name(int code) {
  switch (code) {
    case kExitOk: return "ok";
    case kExitViolation: return "violated";
    default: return "error";
  }
}

/// Assembles the common report envelope.
inline json make_report(const std::string& command, const json& config, std::uint64_t seed, const CheckSet& checks,
                        int exit_code, double wall_time) {
  json r;
  r["schema_version"] = kSchemaVersion;
  r["tool"] = "s2wb";
  r["version"] = kLibraryVersion;
  r["command"] = command;
  r["seed"] = seed;
  r["config"] = config;
  r["status"] = status_name(exit_code);
  r["checks"] = checks.to_json();
  r["tables"] = json::object();
  r["diagnostics"] = json::object();
  r["wall_time_seconds"] = wall_time;
  return r;
}

/// Report without the wall-time field, for byte comparison across runs.
inline std::string report_body(json report) {
  report.erase("wall_time_seconds");
  return report.dump(2);
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  os << text;
  if (!os) throw ConfigError("write to " + path + " failed");
}

/// CSV with a header row; values use the shortest round-trip form.
inline std::string to_csv(const std::vector<std::string>& header, const std::vector<std::vector<json>>& rows) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
  out += '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += row[i].is_string() ? row[i].get<std::string>() : row[i].dump();
    }
    out += '\n';
  }
  return out;
}

}  // namespace s2wb
