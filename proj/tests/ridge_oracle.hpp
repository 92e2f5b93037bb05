#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

// Normal equations of the augmented problem [S 1] with the bias left
// unpenalized, solved by Gaussian elimination with partial pivoting in long double.
inline Eigen::MatrixXd normal_equations_oracle(const Eigen::MatrixXd& s, const Eigen::MatrixXd& y, double lambda) {
  const long n = s.cols() + 1;
  const long t = s.rows();
  const long m = y.cols();
  std::vector<std::vector<long double>> a(n, std::vector<long double>(n + m, 0.0L));
  const auto x = [&](long row, long col) -> long double { return col < n - 1 ? s(row, col) : 1.0L; };
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j < n; ++j) {
      long double acc = 0;
      for (long r = 0; r < t; ++r) acc += x(r, i) * x(r, j);
      a[i][j] = acc + ((i == j && i < n - 1) ? lambda : 0.0L);
    }
    for (long k = 0; k < m; ++k) {
      long double acc = 0;
      for (long r = 0; r < t; ++r) acc += x(r, i) * y(r, k);
      a[i][n + k] = acc;
    }
  }
  for (long c = 0; c < n; ++c) {
    long piv = c;
    for (long r = c + 1; r < n; ++r) {
      if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
    }
    std::swap(a[c], a[piv]);
    for (long r = 0; r < n; ++r) {
      if (r == c) continue;
      const long double f = a[r][c] / a[c][c];
      for (long k = c; k < n + m; ++k) a[r][k] -= f * a[c][k];
    }
  }
  Eigen::MatrixXd w(m, n);
  for (long k = 0; k < m; ++k) {
    for (long i = 0; i < n; ++i) w(k, i) = static_cast<double>(a[i][n + k] / a[i][i]);
  }
  return w;
}

}  // namespace oracle
