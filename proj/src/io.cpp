#include "cdk/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace cdk::io {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool is_scalar(const nlohmann::ordered_json& j) { return !j.is_object() && !j.is_array(); }

void dump_value(const nlohmann::ordered_json& j, std::ostringstream& os, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
  if (j.is_number_float()) {
    const double v = j.get<double>();
    os << (std::isfinite(v) ? format_double(v) : "null");
  } else if (j.is_object()) {
    if (j.empty()) {
      os << "{}";
      return;
    }
    os << "{\n";
    bool first = true;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!first) os << ",\n";
      first = false;
      os << pad << nlohmann::json(it.key()).dump() << ": ";
      dump_value(it.value(), os, indent, depth + 1);
    }
    os << "\n" << close_pad << "}";
  } else if (j.is_array()) {
    const bool flat = std::all_of(j.begin(), j.end(), [](const auto& e) { return is_scalar(e); });
    if (j.empty()) {
      os << "[]";
    } else if (flat) {
      os << "[";
      bool first = true;
      for (const auto& e : j) {
        if (!first) os << ", ";
        first = false;
        dump_value(e, os, indent, depth + 1);
      }
      os << "]";
    } else {
      os << "[\n";
      bool first = true;
      for (const auto& e : j) {
        if (!first) os << ",\n";
        first = false;
        os << pad;
        dump_value(e, os, indent, depth + 1);
      }
      os << "\n" << close_pad << "]";
    }
  } else {
    os << j.dump();
  }
}

}  // namespace

std::string dump(const nlohmann::ordered_json& j, int indent) {
  std::ostringstream os;
  dump_value(j, os, indent, 0);
  os << "\n";
  return os.str();
}

SampleSet read_samples_csv(std::istream& in) {
  std::string line;
  std::size_t row = 1;
  if (!std::getline(in, line)) throw FormatError("samples CSV is empty", 1);
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split(line);
  if (header.size() < 2) throw FormatError("samples CSV header needs at least x1,y", row);
  for (std::size_t j = 0; j + 1 < header.size(); ++j)
    if (header[j] != "x" + std::to_string(j + 1))
      throw FormatError("samples CSV header column " + std::to_string(j + 1) + " must be 'x" + std::to_string(j + 1) +
                            "', got '" + std::string(header[j]) + "'",
                        row);
  if (header.back() != "y") throw FormatError("samples CSV header must end with 'y'", row);

  SampleSet samples(static_cast<int>(header.size()));
  std::vector<double> point(header.size());
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    if (fields.size() != header.size())
      throw FormatError("row " + std::to_string(row) + " has " + std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(header.size()),
                        row);
    for (std::size_t j = 0; j < fields.size(); ++j) {
      const auto f = fields[j];
      const char* first = f.data();
      if (!f.empty() && *first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, f.data() + f.size(), point[j]);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(point[j]))
        throw FormatError("row " + std::to_string(row) + ", column " + std::to_string(j + 1) + ": '" + std::string(f) +
                              "' is not a finite number",
                          row);
    }
    samples.add(point);
  }
  if (samples.size() == 0) throw FormatError("samples CSV has no data rows", row);
  return samples;
}

SampleSet read_samples_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string(), 0);
  return read_samples_csv(in);
}

nlohmann::ordered_json moment_matrix_to_json(const MomentMatrix& m) {
  nlohmann::ordered_json j;
  j["nvars"] = m.spec.nvars;
  j["degree"] = m.spec.degree;
  j["family"] = std::string(to_string(m.spec.family));
  j["normalization"] = std::string(to_string(m.normalization));
  auto entries = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < m.entries.rows(); ++r)
    for (Eigen::Index c = 0; c < m.entries.cols(); ++c) entries.push_back(m.entries(r, c));
  j["entries"] = std::move(entries);
  return j;
}

MomentMatrix moment_matrix_from_json(const nlohmann::json& j) {
  try {
    MomentMatrix m;
    m.spec.nvars = j.at("nvars").get<int>();
    m.spec.degree = j.at("degree").get<int>();
    m.spec.family = parse_family(j.at("family").get<std::string>());
    m.spec.validate();
    m.normalization = parse_normalization(j.at("normalization").get<std::string>());
    const auto n = static_cast<Eigen::Index>(m.spec.size());
    const auto& entries = j.at("entries");
    if (!entries.is_array() || entries.size() != static_cast<std::size_t>(n * n))
      throw FormatError("moment matrix JSON: entries must hold N^2 numbers", 0);
    m.entries.resize(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index c = 0; c < n; ++c) m.entries(r, c) = entries[static_cast<std::size_t>(r * n + c)].get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("moment matrix JSON: ") + e.what(), 0);
  }
}

nlohmann::ordered_json certificate_to_json(const DegreeCertificate& cert) {
  nlohmann::ordered_json j;
  j["constant_c"] = cert.constant_c;
  j["d_star_sep"] = cert.d_star_sep ? nlohmann::ordered_json(*cert.d_star_sep) : nlohmann::ordered_json(nullptr);
  auto table = nlohmann::ordered_json::array();
  for (const auto& r : cert.table) {
    nlohmann::ordered_json row;
    row["d"] = r.d;
    row["lhs"] = r.lhs;
    row["rhs"] = r.rhs;
    row["separated"] = r.separated;
    table.push_back(std::move(row));
  }
  j["table"] = std::move(table);
  return j;
}

std::string report_csv(const ErrorReport& report) {
  std::ostringstream os;
  os << "d,sup_global,sup_masked,l1,max_q_on_graph,runtime_ms\n";
  for (const auto& r : report.rows)
    os << r.d << ',' << format_double(r.sup_error_global) << ',' << format_double(r.sup_error_masked) << ','
       << format_double(r.l1_error) << ',' << format_double(r.max_q_on_graph) << ',' << format_double(r.runtime_ms)
       << '\n';
  return os.str();
}

nlohmann::ordered_json report_to_json(const ErrorReport& report) {
  nlohmann::ordered_json j;
  j["mask"] = report.mask_description;
  j["masked_points"] = report.masked_points;
  j["grid_size"] = report.grid_size;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    nlohmann::ordered_json row;
    row["d"] = r.d;
    row["sup_global"] = r.sup_error_global;
    row["sup_masked"] = r.sup_error_masked;
    row["l1"] = r.l1_error;
    row["max_q_on_graph"] = r.max_q_on_graph;
    row["runtime_ms"] = r.runtime_ms;
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  return j;
}

std::string approximant_csv(const std::vector<ApproximantRecord>& records) {
  std::ostringstream os;
  const std::size_t dim = records.empty() ? 1 : records.front().x.size();
  if (dim == 1) {
    os << "x";
  } else {
    for (std::size_t j = 0; j < dim; ++j) os << (j ? "," : "") << "x" << j + 1;
  }
  os << ",f,y_star,q_min\n";
  for (const auto& r : records) {
    for (std::size_t j = 0; j < r.x.size(); ++j) os << (j ? "," : "") << format_double(r.x[j]);
    os << ',' << format_double(r.f) << ',' << format_double(r.y_star) << ',' << format_double(r.q_min) << '\n';
  }
  return os.str();
}

void write_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    if (!out.flush()) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace cdk::io
