#include "lgan/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lgan {

namespace {

void check_matrix(const Tensor& jacobian) {
  if (jacobian.rank() != 2) {
    throw std::invalid_argument("expected a matrix of tangent columns, got " +
                shape_str(jacobian.shape()));
  }
}

// Gram matrix J^T J as a dense row-major N*N buffer.
std::vector<double> gram_of(const Tensor& jacobian) {
  const std::size_t d = jacobian.rows();
  const std::size_t n = jacobian.cols();
  std::vector<double> gram(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a; b < n; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        s += jacobian.at(i, a) * jacobian.at(i, b);
      }
      gram[a * n + b] = s;
      gram[b * n + a] = s;
    }
  }
  return gram;
}

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations. The matrix
// is tiny (N = chart dimension), so quadratic sweeps are cheap.
std::vector<double> symmetric_eigenvalues(std::vector<double> a,
                                          std::size_t n) {
  if (n == 0) return {};
  const double tol = 1e-12;
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    scale = std::max(scale, std::abs(a[i * n + i]));
  }
  for (double v : a) scale = std::max(scale, std::abs(v));
  const double stop = tol * std::max(scale, 1.0);

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        off = std::max(off, std::abs(a[p * n + q]));
      }
    }
    if (off <= stop) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (std::abs(apq) <= stop) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p];
          const double akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k];
          const double aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        a[p * n + q] = 0.0;
        a[q * n + p] = 0.0;
      }
    }
  }

  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a[i * n + i];
  return eig;
}

}  // namespace

double gram_deviation(const Tensor& jacobian) {
  check_matrix(jacobian);
  const std::size_t n = jacobian.cols();
  std::vector<double> gram = gram_of(jacobian);
  double sq = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      const double dev = gram[a * n + b] - (a == b ? 1.0 : 0.0);
      sq += dev * dev;
    }
  }
  return std::sqrt(sq);
}

std::vector<double> singular_values(const Tensor& jacobian) {
  check_matrix(jacobian);
  std::vector<double> eig =
      symmetric_eigenvalues(gram_of(jacobian), jacobian.cols());
  std::vector<double> sv(eig.size());
  for (std::size_t i = 0; i < eig.size(); ++i) {
    sv[i] = std::sqrt(std::max(eig[i], 0.0));
  }
  std::sort(sv.begin(), sv.end(), std::greater<double>());
  return sv;
}

std::size_t local_dimension(const Tensor& jacobian, double tol) {
  if (!(tol > 0.0)) {
    throw std::invalid_argument("local_dimension: tolerance must be positive");
  }
  std::vector<double> sv = singular_values(jacobian);
  std::size_t count = 0;
  for (double v : sv) count += v > tol ? 1 : 0;
  return count;
}

double manifold_distance_circle(const Tensor& points, double radius) {
  if (points.rank() != 2 || points.cols() != 2) {
    throw std::invalid_argument("manifold_distance_circle: expected [n, 2] points, got " +
                shape_str(points.shape()));
  }
  if (points.rows() == 0) {
    throw std::invalid_argument("manifold_distance_circle: empty point set");
  }
  if (radius <= 0.0) {
    throw std::invalid_argument("manifold_distance_circle: radius must be positive");
  }
  double total = 0.0;
  for (std::size_t r = 0; r < points.rows(); ++r) {
    total += std::abs(std::hypot(points.at(r, 0), points.at(r, 1)) - radius);
  }
  return total / double(points.rows());
}

double classification_error(const std::vector<int>& predictions,
                            const std::vector<int>& labels) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("classification_error: " + std::to_string(predictions.size()) +
                " predictions for " + std::to_string(labels.size()) +
                " labels");
  }
  if (predictions.empty()) {
    throw std::invalid_argument("classification_error: empty sequences");
  }
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    wrong += predictions[i] != labels[i] ? 1 : 0;
  }
  return double(wrong) / double(predictions.size());
}

}  // namespace lgan
