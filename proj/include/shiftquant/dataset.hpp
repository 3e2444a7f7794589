#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "shiftquant/common.hpp"
#include "shiftquant/types.hpp"

namespace shiftquant {

// Feature matrix with integer class labels. All columns hold binary {0,1}
// values except an optional trailing numeric column scaled to [0,1].
struct LabeledDataset {
  Matrix features;                  // n x F
  std::vector<int> labels;          // values in [0, num_classes)
  int num_classes = 0;
  bool numeric_tail = false;        // last column is the numeric feature
  std::vector<int> subclass_tags;   // diagnostics; empty when untracked

  int rows() const { return static_cast<int>(features.rows()); }
  int cols() const { return static_cast<int>(features.cols()); }

  void validate() const {
    require(rows() > 0, "dataset: empty");
    require(static_cast<int>(labels.size()) == rows(), "dataset: label count mismatch");
    require(num_classes >= 1, "dataset: num_classes must be positive");
    for (int y : labels) {
      require(y >= 0 && y < num_classes, "dataset: label out of range");
    }
    const int binary_cols = numeric_tail ? cols() - 1 : cols();
    for (int j = 0; j < binary_cols; ++j) {
      for (int i = 0; i < rows(); ++i) {
        const double v = features(i, j);
        require(v == 0.0 || v == 1.0,
                "dataset: column f" + std::to_string(j) + " is not binary");
      }
    }
    if (numeric_tail) {
      const int j = cols() - 1;
      require(features.col(j).minCoeff() >= 0.0 && features.col(j).maxCoeff() <= 1.0,
              "dataset: numeric column outside [0,1]");
    }
    if (!subclass_tags.empty()) {
      require(static_cast<int>(subclass_tags.size()) == rows(),
              "dataset: subclass tag count mismatch");
    }
  }
};

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace detail

// CSV layout: header "f0,...,f{F-1},label", one row per example.
inline void write_csv(const LabeledDataset& ds, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "write_csv: cannot open " + path);
  for (int j = 0; j < ds.cols(); ++j) out << 'f' << j << ',';
  out << "label\n";
  const int binary_cols = ds.numeric_tail ? ds.cols() - 1 : ds.cols();
  for (int i = 0; i < ds.rows(); ++i) {
    for (int j = 0; j < ds.cols(); ++j) {
      if (j < binary_cols) {
        out << (ds.features(i, j) != 0.0 ? '1' : '0');
      } else {
        out << detail::format_double(ds.features(i, j));
      }
      out << ',';
    }
    out << ds.labels[i] << '\n';
  }
  require(out.good(), "write_csv: write failed for " + path);
}

// Reads a dataset written by write_csv. num_classes defaults to max label + 1
// when not supplied (pass 0 to infer).
inline LabeledDataset read_csv(const std::string& path, int num_classes = 0) {
  std::ifstream in(path);
  require(in.good(), "read_csv: cannot open " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "read_csv: missing header in " + path);

  int columns = 0;
  {
    std::stringstream header(line);
    std::string field;
    while (std::getline(header, field, ',')) ++columns;
  }
  require(columns >= 2, "read_csv: header needs at least one feature and a label");
  const int F = columns - 1;

  std::vector<double> values;
  std::vector<int> labels;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string field;
    int col = 0;
    while (std::getline(row, field, ',')) {
      require(col < columns, "read_csv: too many fields at line " + std::to_string(line_no));
      try {
        if (col < F) {
          values.push_back(std::stod(field));
        } else {
          labels.push_back(std::stoi(field));
        }
      } catch (const std::exception&) {
        throw ValidationError("read_csv: bad value '" + field + "' at line " +
                              std::to_string(line_no));
      }
      ++col;
    }
    require(col == columns, "read_csv: missing fields at line " + std::to_string(line_no));
  }
  require(!labels.empty(), "read_csv: no data rows in " + path);

  const int n = static_cast<int>(labels.size());
  LabeledDataset ds;
  ds.features = Matrix(n, F);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < F; ++j) ds.features(i, j) = values[static_cast<std::size_t>(i) * F + j];
  }
  ds.labels = std::move(labels);
  if (num_classes > 0) {
    ds.num_classes = num_classes;
  } else {
    int max_label = 0;
    for (int y : ds.labels) max_label = std::max(max_label, y);
    ds.num_classes = max_label + 1;
  }
  // The last column may be the numeric feature; every other column must be binary.
  const auto binary = [&](int j) {
    for (int i = 0; i < n; ++i) {
      const double v = ds.features(i, j);
      if (v != 0.0 && v != 1.0) return false;
    }
    return true;
  };
  ds.numeric_tail = F >= 1 && !binary(F - 1);
  ds.validate();
  return ds;
}

}  // namespace shiftquant
