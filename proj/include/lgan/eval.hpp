#ifndef LGAN_EVAL_HPP
#define LGAN_EVAL_HPP

#include <cstddef>
#include <vector>

#include "lgan/tensor.hpp"

namespace lgan {

/// Frobenius norm of J^T J - I (not squared; the square is the training
/// penalty). Zero exactly when the columns are orthonormal.
double gram_deviation(const Tensor& jacobian);

/// Singular values of a [D, N] matrix, descending, via eigenvalues of the
/// small N-by-N Gram matrix (cyclic Jacobi rotations, tolerance 1e-12).
std::vector<double> singular_values(const Tensor& jacobian);

/// Number of singular values strictly greater than tol: the effective rank
/// of the tangent basis. Collapsed directions drop out.
std::size_t local_dimension(const Tensor& jacobian, double tol = 0.1);

/// Mean over rows of | ||p|| - radius |, the average radial offset of 2-D
/// points from a circle.
double manifold_distance_circle(const Tensor& points, double radius);

/// Fraction of mismatched entries between two equal-length label sequences.
double classification_error(const std::vector<int>& predictions,
                            const std::vector<int>& labels);

}  // namespace lgan

#endif
