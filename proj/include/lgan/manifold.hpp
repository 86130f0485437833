#ifndef LGAN_MANIFOLD_HPP
#define LGAN_MANIFOLD_HPP

#include <functional>
#include <vector>

#include "lgan/classifier.hpp"
#include "lgan/geometry.hpp"
#include "lgan/tape.hpp"
#include "lgan/tensor.hpp"

namespace lgan {

/// Scalar function on the ambient space. When `gradient` is empty the
/// ambient gradient falls back to central finite differences of `value`.
struct ScalarField {
  std::function<double(const Tensor&)> value;
  std::function<Tensor(const Tensor&)> gradient;
};

/// Gradient of f along the chart coordinates: J^T grad_x f(x), which equals
/// the z-gradient of f(G(x, z)) at z = 0.
Tensor manifold_gradient(const ScalarField& f, const LocalGeneratorModel& model,
                         const Tensor& x);

/// Sum over the K real classes of the squared coordinate-gradient norm of
/// the log-likelihood: sum_k || grad_z log P(y=k | G(x,z)) at 0 ||^2.
double manifold_gradient_norm_penalty(const ClassifierModel& clf,
                                      const LocalGeneratorModel& model,
                                      const Tensor& x);

/// |f(G(x, dz)) - f(G(x, 0))|^2, the squared response to a coordinate
/// perturbation.
double perturbation_response(const ScalarField& f,
                             const LocalGeneratorModel& model, const Tensor& x,
                             const Tensor& dz);

/// Central second-difference estimate of sum_j d^2 f(G(x,z)) / d(z_j)^2 at
/// z = 0 (the chart Laplacian under an orthonormal basis).
double laplace_beltrami(const ScalarField& f, const LocalGeneratorModel& model,
                        const Tensor& x, double h = 1e-3);

/// Batched, differentiable form of the gradient-norm penalty: mean over the
/// rows of `clf_trace` of sum_k || J_i^T grad_x log P(k | x_i) ||^2. The
/// per-row Jacobians are constants of the classifier (they depend only on
/// the generator), so the node differentiates with respect to classifier
/// parameters only.
NodeId emit_manifold_penalty(Tape& tape, const ClassifierModel& clf,
                             const MlpTrace& clf_trace,
                             const std::vector<Tensor>& row_jacobians);

}  // namespace lgan

#endif
