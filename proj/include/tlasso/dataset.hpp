#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace tlasso {

// What load_dataset did to the raw columns: design = (raw - means) / scales,
// response = raw_y - response_mean.
struct Standardization {
  Eigen::VectorXd means;
  Eigen::VectorXd scales;
  double response_mean = 0.0;
};

struct Dataset {
  Eigen::MatrixXd design;
  Eigen::VectorXd response;
  std::vector<std::string> column_names;
  std::string response_name;
  Standardization standardization;

  int n() const { return static_cast<int>(design.rows()); }
  int d() const { return static_cast<int>(design.cols()); }
  // Coefficients on the raw column scale.
  Eigen::VectorXd to_raw_scale(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// RFC 4180: quoted fields, doubled quotes, CRLF or LF line ends.
CsvTable parse_csv(const std::string& text);
CsvTable read_csv_file(const std::string& path);

// Columns centered and scaled to unit l2 norm; response centered.
Dataset standardize(const Eigen::Ref<const Eigen::MatrixXd>& raw_design,
                    const Eigen::Ref<const Eigen::VectorXd>& raw_response,
                    std::vector<std::string> column_names, std::string response_name);

// Every column except response_column becomes a regressor. An empty
// response_column selects the last column.
Dataset load_dataset(const std::string& path, const std::string& response_column = "");

}  // namespace tlasso
