#pragma once

#include <deque>
#include <fstream>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "qrt/linalg.hpp"

namespace qrt {

// Column-oriented result table with a metadata block that pins the sign and
// metric conventions of every emitted number.
struct ResultTable {
  std::string name;
  struct Column {
    std::string name;
    std::vector<double> num;
    std::vector<std::string> str;  // used when non-empty
    bool is_text() const { return !str.empty(); }
    size_t size() const { return is_text() ? str.size() : num.size(); }
  };
  std::deque<Column> columns;  // deque keeps add_column references stable
  std::map<std::string, std::string> metadata;

  Column& add_column(const std::string& cname) {
    columns.push_back({cname, {}, {}});
    return columns.back();
  }
  void validate() const {
    for (const auto& c : columns)
      if (c.size() != columns.front().size())
        throw Error("ValidationError", "ragged result table '" + name + "'");
  }
};

namespace io {

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_csv(const ResultTable& t, std::ostream& os) {
  t.validate();
  for (const auto& [k, v] : t.metadata) os << "# " << k << ": " << v << "\n";
  for (size_t c = 0; c < t.columns.size(); ++c)
    os << t.columns[c].name << (c + 1 < t.columns.size() ? "," : "\n");
  const size_t rows = t.columns.empty() ? 0 : t.columns.front().size();
  for (size_t r = 0; r < rows; ++r) {
    for (size_t c = 0; c < t.columns.size(); ++c) {
      const auto& col = t.columns[c];
      os << (col.is_text() ? col.str[r] : format_number(col.num[r]));
      os << (c + 1 < t.columns.size() ? "," : "\n");
    }
  }
}

inline void write_json(const ResultTable& t, std::ostream& os) {
  t.validate();
  os << "{\n  \"name\": \"" << t.name << "\",\n  \"metadata\": {";
  bool first = true;
  for (const auto& [k, v] : t.metadata) {
    os << (first ? "" : ",") << "\n    \"" << k << "\": \"" << v << "\"";
    first = false;
  }
  os << "\n  },\n  \"columns\": {";
  first = true;
  for (const auto& col : t.columns) {
    os << (first ? "" : ",") << "\n    \"" << col.name << "\": [";
    for (size_t r = 0; r < col.size(); ++r) {
      if (r) os << ", ";
      if (col.is_text())
        os << '"' << col.str[r] << '"';
      else
        os << format_number(col.num[r]);
    }
    os << "]";
    first = false;
  }
  os << "\n  }\n}\n";
}

inline void write_table(const ResultTable& t, const std::string& dir,
                        const std::string& format) {
  const std::string path = dir + "/" + t.name + "." + format;
  std::ofstream os(path);
  if (!os) throw Error("ValidationError", "cannot open output file " + path);
  if (format == "csv")
    write_csv(t, os);
  else if (format == "json")
    write_json(t, os);
  else
    throw Error("ValidationError", "unknown output format '" + format + "'");
}

}  // namespace io

// Named tolerance bundles shared by the command-line tool and the test
// suites: `strict` gates exact identities, `numeric` gates finite-difference
// and quadrature comparisons.
struct ToleranceProfile {
  std::string name;
  double identity;  // exact algebraic identities
  double numeric;   // discretized or finite-difference checks
};

inline ToleranceProfile tolerance_profile(const std::string& name) {
  if (name == "strict") return {"strict", 1e-12, 1e-8};
  if (name == "numeric") return {"numeric", 1e-10, 1e-5};
  throw Error("ValidationError", "unknown tolerance profile '" + name + "'");
}

}  // namespace qrt
