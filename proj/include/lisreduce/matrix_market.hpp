#ifndef LISREDUCE_MATRIX_MARKET_HPP
#define LISREDUCE_MATRIX_MARKET_HPP

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "lisreduce/core.hpp"

namespace lisreduce {

// Dense array-format Matrix Market writer/reader (column-major per spec).
inline void save_matrix_market(const Matrix& mat, const std::string& path,
                               const std::string& comment = "") {
  std::ofstream out(path);
  if (!out) throw config_error("save_matrix_market: cannot open '" + path + "'");
  out << "%%MatrixMarket matrix array real general\n";
  if (!comment.empty()) out << "% " << comment << "\n";
  out << mat.rows() << " " << mat.cols() << "\n";
  char buf[40];
  for (Index j = 0; j < mat.cols(); ++j)
    for (Index i = 0; i < mat.rows(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g\n", mat(i, j));
      out << buf;
    }
  if (!out) throw config_error("save_matrix_market: write failure on '" + path + "'");
}

inline Matrix load_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("load_matrix_market: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0)
    throw config_error("load_matrix_market: missing MatrixMarket banner in '" + path + "'");
  if (line.find("array") == std::string::npos || line.find("real") == std::string::npos)
    throw config_error("load_matrix_market: only dense real array format supported");
  do {
    if (!std::getline(in, line)) throw config_error("load_matrix_market: truncated header");
  } while (!line.empty() && line[0] == '%');
  std::istringstream dims(line);
  Index rows = 0, cols = 0;
  dims >> rows >> cols;
  if (rows <= 0 || cols <= 0) throw config_error("load_matrix_market: bad dimensions");
  Matrix mat(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i)
      if (!(in >> mat(i, j))) throw config_error("load_matrix_market: truncated data");
  return mat;
}

}  // namespace lisreduce

#endif  // LISREDUCE_MATRIX_MARKET_HPP
