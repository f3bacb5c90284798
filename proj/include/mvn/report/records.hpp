#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "mvn/error.hpp"

namespace mvn::report {

enum class OutputFormat { Csv, Json };

inline std::string_view to_string(OutputFormat f) { return f == OutputFormat::Csv ? "csv" : "json"; }

inline OutputFormat parse_format(std::string_view text) {
  if (text == "csv") return OutputFormat::Csv;
  if (text == "json") return OutputFormat::Json;
  throw ConfigError("format: expected csv or json, got '" + std::string(text) + "'");
}

/// Role of a column: sweep keys and the seed identify a record, metrics are
/// measured or analytic values, flags are pass/fail outcomes.
enum class Role { Key, Seed, Metric, Flag };

/// Empty cell, real, integer, identifier or boolean.
using Value = std::variant<std::monostate, double, std::int64_t, std::string, bool>;

struct Column {
  std::string name;
  Role role = Role::Metric;
};

/// One row; values are stored by column name and must match the table's
/// column set.
struct ExperimentRecord {
  std::map<std::string, Value> values;

  template <class T>
  ExperimentRecord& set(const std::string& name, const T& v) {
    if constexpr (std::is_same_v<T, Value>) {
      values[name] = v;
    } else if constexpr (std::is_same_v<T, bool>) {
      values[name] = v;
    } else if constexpr (std::is_integral_v<T>) {
      values[name] = static_cast<std::int64_t>(v);
    } else if constexpr (std::is_floating_point_v<T>) {
      values[name] = static_cast<double>(v);
    } else if constexpr (std::is_same_v<T, std::optional<double>>) {
      values[name] = v ? Value(*v) : Value();
    } else if constexpr (std::is_same_v<T, std::optional<std::size_t>>) {
      values[name] = v ? Value(static_cast<std::int64_t>(*v)) : Value();
    } else {
      values[name] = std::string(std::string_view(v));
    }
    return *this;
  }

  [[nodiscard]] const Value& get(const std::string& name) const {
    static const Value empty;
    const auto it = values.find(name);
    return it == values.end() ? empty : it->second;
  }
};

/// Homogeneous set of records with a fixed column order.
struct RecordTable {
  std::vector<Column> columns;
  std::vector<ExperimentRecord> rows;

  /// Every row must use only known columns.
  void check_homogeneous() const {
    for (const auto& row : rows) {
      for (const auto& [name, value] : row.values) {
        bool found = false;
        for (const auto& c : columns) found = found || c.name == name;
        if (!found) throw ConfigError("emit: record has unknown column '" + name + "'");
      }
    }
  }

  /// Logical AND of every non-empty flag cell.
  [[nodiscard]] bool all_flags_pass() const {
    for (const auto& row : rows) {
      for (const auto& c : columns) {
        if (c.role != Role::Flag) continue;
        const Value& v = row.get(c.name);
        if (const bool* b = std::get_if<bool>(&v); b && !*b) return false;
      }
    }
    return true;
  }
};

/// 17 significant digits, so every finite double round-trips exactly.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_cell(const Value& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return "";
        } else if constexpr (std::is_same_v<T, double>) {
          return format_double(x);
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
          return std::to_string(x);
        } else if constexpr (std::is_same_v<T, bool>) {
          return x ? "true" : "false";
        } else {
          return x;
        }
      },
      v);
}

inline std::string json_cell(const Value& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return "null";
        } else if constexpr (std::is_same_v<T, double>) {
          return std::isfinite(x) ? format_double(x) : "null";
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
          return std::to_string(x);
        } else if constexpr (std::is_same_v<T, bool>) {
          return x ? "true" : "false";
        } else {
          return nlohmann::json(x).dump();
        }
      },
      v);
}

/// Serialized table. JSON is an array of flat objects with keys in column
/// order.
inline std::string render(const RecordTable& table, OutputFormat format) {
  std::ostringstream out;
  if (format == OutputFormat::Csv) {
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      out << (c ? "," : "") << table.columns[c].name;
    }
    out << '\n';
    for (const auto& row : table.rows) {
      for (std::size_t c = 0; c < table.columns.size(); ++c) {
        out << (c ? "," : "") << csv_cell(row.get(table.columns[c].name));
      }
      out << '\n';
    }
    return out.str();
  }
  out << '[';
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    out << (r ? ",\n " : "\n ") << '{';
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      const auto& name = table.columns[c].name;
      out << (c ? "," : "") << nlohmann::json(name).dump() << ':'
          << json_cell(table.rows[r].get(name));
    }
    out << '}';
  }
  out << (table.rows.empty() ? "]\n" : "\n]\n");
  return out.str();
}

/// Test hook: called before each row is written.
struct WriteHooks {
  std::function<void(std::size_t row)> on_row;
};

namespace detail {

/// Writes `content` to `<path>.partial` and renames it over `path`. On any
/// failure the final name is left untouched.
inline void atomic_write(const std::filesystem::path& path,
                         const std::function<void(std::ostream&)>& body) {
  const std::filesystem::path tmp = path.string() + ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    body(out);
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

}  // namespace detail

/// Writes the table to `path` and the metadata document to
/// `<path>.meta.json`, both via rename-from-temporary.
inline void emit(const RecordTable& table, const std::filesystem::path& path, OutputFormat format,
                 const nlohmann::json& meta, const WriteHooks& hooks = {}) {
  table.check_homogeneous();
  detail::atomic_write(path, [&](std::ostream& out) {
    if (!hooks.on_row) {
      out << render(table, format);
      return;
    }
    // Row-by-row so a hook can interrupt mid-file.
    RecordTable head{table.columns, {}};
    const std::string header = render(head, format);
    if (format == OutputFormat::Csv) {
      out << header;
      for (std::size_t r = 0; r < table.rows.size(); ++r) {
        hooks.on_row(r);
        RecordTable one{table.columns, {table.rows[r]}};
        const std::string text = render(one, format);
        out << text.substr(header.size());
      }
    } else {
      for (std::size_t r = 0; r < table.rows.size(); ++r) hooks.on_row(r);
      out << render(table, format);
    }
  });
  detail::atomic_write(path.string() + ".meta.json",
                       [&](std::ostream& out) { out << meta.dump(2) << '\n'; });
}

/// Mean and sample standard deviation over seeds of every real metric,
/// grouped by the key columns. Flags are combined with AND; the seed column
/// is replaced by a count.
inline RecordTable aggregate(const RecordTable& table) {
  RecordTable out;
  std::vector<std::string> keys;
  std::vector<std::string> metrics;
  std::vector<std::string> flags;
  for (const auto& c : table.columns) {
    if (c.role == Role::Key) {
      keys.push_back(c.name);
      out.columns.push_back(c);
    } else if (c.role == Role::Metric) {
      metrics.push_back(c.name);
    } else if (c.role == Role::Flag) {
      flags.push_back(c.name);
    }
  }
  out.columns.push_back({"n_seeds", Role::Metric});
  for (const auto& m : metrics) {
    out.columns.push_back({m + "_mean", Role::Metric});
    out.columns.push_back({m + "_std", Role::Metric});
  }
  for (const auto& f : flags) out.columns.push_back({f, Role::Flag});

  // Groups in order of first appearance.
  std::vector<std::vector<const ExperimentRecord*>> groups;
  std::vector<std::string> group_keys;
  for (const auto& row : table.rows) {
    std::string k;
    for (const auto& name : keys) k += csv_cell(row.get(name)) + '\x1f';
    std::size_t g = 0;
    while (g < group_keys.size() && group_keys[g] != k) ++g;
    if (g == group_keys.size()) {
      group_keys.push_back(k);
      groups.emplace_back();
    }
    groups[g].push_back(&row);
  }

  for (const auto& group : groups) {
    ExperimentRecord rec;
    for (const auto& name : keys) rec.set(name, group.front()->get(name));
    rec.set("n_seeds", static_cast<std::int64_t>(group.size()));
    for (const auto& m : metrics) {
      std::vector<double> xs;
      for (const auto* row : group) {
        const Value& v = row->get(m);
        if (const double* d = std::get_if<double>(&v)) xs.push_back(*d);
        if (const std::int64_t* i = std::get_if<std::int64_t>(&v)) xs.push_back(static_cast<double>(*i));
      }
      if (xs.empty()) continue;
      double mean = 0.0;
      for (double x : xs) mean += x;
      mean /= static_cast<double>(xs.size());
      double ss = 0.0;
      for (double x : xs) ss += (x - mean) * (x - mean);
      rec.set(m + "_mean", mean);
      rec.set(m + "_std", xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0);
    }
    for (const auto& f : flags) {
      bool any = false;
      bool all = true;
      for (const auto* row : group) {
        if (const bool* b = std::get_if<bool>(&row->get(f))) {
          any = true;
          all = all && *b;
        }
      }
      if (any) rec.set(f, all);
    }
    out.rows.push_back(std::move(rec));
  }
  return out;
}

}  // namespace mvn::report
