#include "tlasso/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tlasso/errors.hpp"

namespace tlasso {

Eigen::VectorXd Dataset::to_raw_scale(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  require(x.size() == d(), "Dataset::to_raw_scale: dimension mismatch");
  return x.cwiseQuotient(standardization.scales);
}

CsvTable parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  auto end_field = [&] {
    record.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    const bool blank = record.size() == 1 && record[0].empty();
    if (!blank) records.push_back(std::move(record));
    record.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      end_record();
    } else if (c == '\r') {
      if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_record();
    } else {
      field += c;
      field_started = true;
    }
  }
  if (in_quotes) throw IoError("CSV: unterminated quoted field");
  if (field_started || !field.empty() || !record.empty()) end_record();

  CsvTable table;
  if (records.empty()) throw IoError("CSV: no header row");
  table.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size()) {
      throw IoError("CSV: row " + std::to_string(r + 1) + " has " +
                    std::to_string(records[r].size()) + " fields, header has " +
                    std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

namespace {

double parse_number(const std::string& raw, std::size_t row, const std::string& column) {
  std::size_t b = raw.find_first_not_of(" \t");
  std::size_t e = raw.find_last_not_of(" \t");
  const std::string s = b == std::string::npos ? "" : raw.substr(b, e - b + 1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw IoError("non-numeric cell '" + raw + "' at data row " + std::to_string(row + 1) +
                  ", column '" + column + "'");
  }
  return v;
}

}  // namespace

Dataset standardize(const Eigen::Ref<const Eigen::MatrixXd>& raw_design,
                    const Eigen::Ref<const Eigen::VectorXd>& raw_response,
                    std::vector<std::string> column_names, std::string response_name) {
  const Eigen::Index n = raw_design.rows();
  const Eigen::Index d = raw_design.cols();
  require(raw_response.size() == n, "standardize: response length differs from row count");
  require(n >= 2, "standardize: need at least two rows");
  require(d >= 1, "standardize: need at least one regressor");
  require(static_cast<Eigen::Index>(column_names.size()) == d,
          "standardize: one name per column required");
  Dataset ds;
  ds.column_names = std::move(column_names);
  ds.response_name = std::move(response_name);
  ds.design.resize(n, d);
  ds.standardization.means.resize(d);
  ds.standardization.scales.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double mean = raw_design.col(j).mean();
    Eigen::VectorXd c = raw_design.col(j).array() - mean;
    const double norm = c.norm();
    const double magnitude = std::max(1.0, raw_design.col(j).cwiseAbs().maxCoeff());
    if (!(norm > 1e-12 * magnitude * std::sqrt(static_cast<double>(n)))) {
      throw DegenerateInput("column '" + ds.column_names[j] + "' is constant");
    }
    ds.design.col(j) = c / norm;
    ds.standardization.means(j) = mean;
    ds.standardization.scales(j) = norm;
  }
  ds.standardization.response_mean = raw_response.mean();
  ds.response = raw_response.array() - ds.standardization.response_mean;
  return ds;
}

Dataset load_dataset(const std::string& path, const std::string& response_column) {
  const CsvTable t = read_csv_file(path);
  const std::size_t cols = t.header.size();
  if (cols < 2) throw IoError("'" + path + "': need a response and at least one regressor");
  if (t.rows.size() < 2) throw IoError("'" + path + "': need at least two data rows");
  std::size_t resp = cols - 1;
  if (!response_column.empty()) {
    resp = cols;
    for (std::size_t c = 0; c < cols; ++c) {
      if (t.header[c] == response_column) resp = c;
    }
    if (resp == cols) {
      throw IoError("'" + path + "': no column named '" + response_column + "'");
    }
  }
  const Eigen::Index n = static_cast<Eigen::Index>(t.rows.size());
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(cols - 1));
  Eigen::VectorXd y(n);
  std::vector<std::string> names;
  for (std::size_t c = 0; c < cols; ++c) {
    if (c != resp) names.push_back(t.header[c]);
  }
  for (Eigen::Index r = 0; r < n; ++r) {
    Eigen::Index j = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = parse_number(t.rows[r][c], static_cast<std::size_t>(r), t.header[c]);
      if (c == resp) {
        y(r) = v;
      } else {
        x(r, j++) = v;
      }
    }
  }
  return standardize(x, y, std::move(names), t.header[resp]);
}

}  // namespace tlasso
