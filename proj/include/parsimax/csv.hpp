#ifndef PARSIMAX_CSV_HPP
#define PARSIMAX_CSV_HPP

// RFC 4180 CSV reading and writing for datasets. Header row required,
// '.' decimal separator.

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "parsimax/data.hpp"
#include "parsimax/error.hpp"

namespace parsimax {

struct ColumnSpec {
  std::string y;
  std::vector<std::string> z;
  std::vector<std::string> x;
};

namespace csv {

/// Splits a CSV document into records. Quoted fields may contain commas,
/// doubled quotes and line breaks. Blank lines are skipped.
inline std::vector<std::vector<std::string>> parse(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  char c;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    if (field_started || !record.empty() || !field.empty()) {
      end_field();
      records.push_back(std::move(record));
    }
    record.clear();
  };
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        field_started = true;
        break;
      case '\r':
        if (in.peek() == '\n') in.get(c);
        end_record();
        break;
      case '\n':
        end_record();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw Error(ErrorKind::invalid_argument, "csv: unterminated quoted field");
  end_record();
  return records;
}

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

/// Shortest decimal form that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace csv

inline Dataset read_dataset(std::istream& in, const ColumnSpec& spec) {
  const auto records = csv::parse(in);
  if (records.empty()) throw Error(ErrorKind::invalid_argument, "csv: missing header row");
  const auto& header = records.front();
  auto column_of = [&](const std::string& name) -> std::size_t {
    for (std::size_t k = 0; k < header.size(); ++k) {
      if (csv::trim(header[k]) == name) return k;
    }
    throw Error(ErrorKind::missing_column, "csv: no column named '" + name + "'");
  };
  const std::size_t y_col = column_of(spec.y);
  std::vector<std::size_t> z_cols, x_cols;
  for (const auto& name : spec.z) z_cols.push_back(column_of(name));
  for (const auto& name : spec.x) x_cols.push_back(column_of(name));

  const auto n = static_cast<Eigen::Index>(records.size() - 1);
  const auto p = static_cast<Eigen::Index>(z_cols.size());
  const auto h = static_cast<Eigen::Index>(x_cols.size());
  if (p < 1 || h < 1) throw Error(ErrorKind::invalid_argument, "csv: need at least one z and one x column");
  if (n <= p + h) {
    throw Error(ErrorKind::too_few_rows, "csv: " + std::to_string(n) + " data rows, need more than p + h = " +
                                             std::to_string(p + h));
  }
  Vector y(n);
  Matrix z(n, p), x(n, h);
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto& rec = records[static_cast<std::size_t>(t) + 1];
    const std::size_t line = static_cast<std::size_t>(t) + 2;
    auto cell = [&](std::size_t col) {
      double v = 0.0;
      if (col >= rec.size() || !csv::parse_double(rec[col], v)) {
        throw Error(ErrorKind::non_numeric_cell,
                    "csv: non-numeric cell at row " + std::to_string(line) + ", column '" +
                        std::string(csv::trim(header[col])) + "'",
                    line);
      }
      return v;
    };
    y(t) = cell(y_col);
    for (Eigen::Index k = 0; k < p; ++k) z(t, k) = cell(z_cols[static_cast<std::size_t>(k)]);
    for (Eigen::Index k = 0; k < h; ++k) x(t, k) = cell(x_cols[static_cast<std::size_t>(k)]);
  }
  return Dataset(std::move(y), std::move(z), std::move(x));
}

inline Dataset ingest_csv(const std::string& path, const ColumnSpec& spec) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::file_not_found, "csv: cannot open '" + path + "'");
  return read_dataset(in, spec);
}

/// Writes columns y, z..., x... under the names in `spec`.
inline void write_dataset(std::ostream& out, const Dataset& d, const ColumnSpec& spec) {
  if (static_cast<Eigen::Index>(spec.z.size()) != d.p() || static_cast<Eigen::Index>(spec.x.size()) != d.h()) {
    throw Error(ErrorKind::dimension_mismatch, "write_dataset: column names do not match dataset shape");
  }
  out << csv::quote(spec.y);
  for (const auto& s : spec.z) out << ',' << csv::quote(s);
  for (const auto& s : spec.x) out << ',' << csv::quote(s);
  out << '\n';
  for (Eigen::Index t = 0; t < d.n(); ++t) {
    out << csv::format_double(d.y()(t));
    for (Eigen::Index k = 0; k < d.p(); ++k) out << ',' << csv::format_double(d.z()(t, k));
    for (Eigen::Index k = 0; k < d.h(); ++k) out << ',' << csv::format_double(d.x()(t, k));
    out << '\n';
  }
}

inline ColumnSpec default_columns(Eigen::Index p, Eigen::Index h) {
  ColumnSpec spec{"y", {}, {}};
  for (Eigen::Index k = 0; k < p; ++k) spec.z.push_back("z" + std::to_string(k + 1));
  for (Eigen::Index k = 0; k < h; ++k) spec.x.push_back("x" + std::to_string(k + 1));
  return spec;
}

}  // namespace parsimax

#endif  // PARSIMAX_CSV_HPP
