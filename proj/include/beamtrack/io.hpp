#pragma once

// CSV output (RFC 4180 quoting) with '#' metadata lines, and a matching reader.

#include "beamtrack/sim.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace beamtrack {

/// Shortest round-trip decimal form; identical inputs always print identically.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  /// "# key=value" line. Must precede the header row.
  void meta(const std::string& key, const std::string& value) { os_ << "# " << key << '=' << value << '\n'; }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i > 0) os_ << ',';
      os_ << csv_escape(fields[i]);
    }
    os_ << '\n';
  }

 private:
  std::ostream& os_;
};

struct CsvTable {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
  }
  bool has(const std::string& name) const { return column(name) >= 0; }
};

/// Parses quoted fields (including embedded newlines). Lines starting with '#'
/// before the header are metadata.
inline CsvTable read_csv(std::istream& is) {
  CsvTable t;
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  while (pos < text.size() && text[pos] == '#') {
    const std::size_t end = text.find('\n', pos);
    std::string line = text.substr(pos + 1, end == std::string::npos ? std::string::npos : end - pos - 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line.front() == ' ') line.erase(0, 1);
    const auto eq = line.find('=');
    if (eq != std::string::npos) t.meta.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    pos = end == std::string::npos ? text.size() : end + 1;
  }
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> rec;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (; pos < text.size(); ++pos) {
    const char c = text[pos];
    if (quoted) {
      if (c == '"') {
        if (pos + 1 < text.size() && text[pos + 1] == '"') {
          field += '"';
          ++pos;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      rec.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && pos + 1 < text.size() && text[pos + 1] == '\n') ++pos;
      if (any || !field.empty()) {
        rec.push_back(std::move(field));
        records.push_back(std::move(rec));
      }
      rec.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw std::runtime_error("csv: unterminated quoted field");
  if (any || !field.empty()) {
    rec.push_back(std::move(field));
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw std::runtime_error("csv: no header row");
  t.header = std::move(records.front());
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].size() != t.header.size()) {
      throw std::runtime_error("csv: row " + std::to_string(i) + " has " + std::to_string(records[i].size()) +
                               " fields, header has " + std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(records[i]));
  }
  return t;
}

inline double to_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw std::runtime_error("csv: not a number: '" + s + "'");
  return v;
}

inline const std::vector<std::string>& episode_csv_header() {
  static const std::vector<std::string> h = {
      "episode", "algorithm", "t",       "action",      "level",  "index",  "phi_true",  "phi_hat", "phi_map",
      "coverage", "gain_sq",  "norm_gain", "se",        "se_expected", "obs_re", "obs_im", "obs_power", "jumped"};
  return h;
}

/// One row per slot.
inline void write_episode_rows(CsvWriter& w, const EpisodeLog& log) {
  for (const SlotRecord& r : log.slots) {
    const bool pilot = r.action == Action::Pilot;
    w.row({std::to_string(log.episode), log.algorithm, std::to_string(r.t), std::string(1, to_char(r.action)),
           std::to_string(r.beam.level), std::to_string(r.beam.index), format_double(r.phi_true),
           format_double(r.phi_hat), format_double(r.phi_map), format_double(r.coverage), format_double(r.gain_sq),
           format_double(r.norm_gain), format_double(r.se), format_double(r.se_expected),
           pilot ? format_double(r.obs.pilot_value.real()) : "", pilot ? format_double(r.obs.pilot_value.imag()) : "",
           pilot ? "" : format_double(r.obs.data_power), r.jumped ? "1" : "0"});
  }
}

}  // namespace beamtrack
