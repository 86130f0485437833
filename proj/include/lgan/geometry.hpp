#ifndef LGAN_GEOMETRY_HPP
#define LGAN_GEOMETRY_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "lgan/nets.hpp"
#include "lgan/rng.hpp"
#include "lgan/tape.hpp"
#include "lgan/tensor.hpp"

namespace lgan {

/// Generator of points near x, parameterized by local coordinates z:
///   G(x, z) = x + B(x, z) - B(x, 0)
/// where B is `core` applied to the concatenation (x, z). The residual form
/// pins G(x, 0) = x exactly. `residual = false` drops the B(x, 0) correction
/// (G = x + B(x, z)), used to study generators that only approximate the
/// pinning condition.
struct LocalGeneratorModel {
  Mlp core;
  std::size_t ambient_dim = 0;
  std::size_t coord_dim = 0;
  bool residual = true;

  void validate() const;
};

/// Fresh generator with the given dimensions and hidden stack for B.
LocalGeneratorModel make_local_generator(std::size_t ambient_dim,
                                         std::size_t coord_dim,
                                         const std::vector<std::size_t>& hidden,
                                         Activation hidden_act,
                                         std::uint64_t seed);

/// Tangent vectors of the coordinate chart at a base point: column j of the
/// Jacobian is the derivative of G(x, z) along z_j at z = 0.
struct TangentBasis {
  Tensor base_point;  // [D]
  Tensor jacobian;    // [D, N]
};

/// Applies the generator to a single point (x [D], z [N]) or a batch
/// (x [n,D], z [n,N], row-wise).
Tensor local_generate(const LocalGeneratorModel& model, const Tensor& x,
                      const Tensor& z);

/// One draw from the coordinate-noise mixture: the exact zero vector with
/// probability zero_weight, otherwise standard normal per component.
Tensor sample_local_noise(std::size_t coord_dim, double zero_weight, Rng& rng);

/// Batch of noise draws, one row per point.
Tensor sample_local_noise_batch(std::size_t n, std::size_t coord_dim,
                                double zero_weight, Rng& rng);

/// min(m, coord_dim) distinct indices, uniform without replacement, sorted.
std::vector<std::size_t> subsample_coordinates(std::size_t coord_dim,
                                               std::size_t m, Rng& rng);

TangentBasis tangent_basis(const LocalGeneratorModel& model, const Tensor& x);

/// Tangent Jacobians for every row of a batch, computed on one shared trace.
std::vector<Tensor> batch_tangent_jacobians(const LocalGeneratorModel& model,
                                            const Tensor& x_batch);

/// Squared Frobenius distance of the Gram matrix from the identity:
/// || J^T J - I ||_F^2. Zero exactly when the columns are orthonormal.
double orthonormality_penalty(const Tensor& jacobian);

/// || G(x, 0) - x ||^2; identically zero for residual models.
double locality_penalty(const LocalGeneratorModel& model, const Tensor& x);

/// mu * locality + eta * orthonormality over the given coordinate subset
/// (all coordinates when `coord_subset` is null).
double regularizer_omega(const LocalGeneratorModel& model, const Tensor& x,
                         double mu, double eta,
                         const std::vector<std::size_t>* coord_subset = nullptr);

// ---- tape emission ---------------------------------------------------------

/// Traced batch application of the generator. Both core passes (at z and at
/// zero) share one set of parameter nodes, so gradients accumulate into a
/// single "{prefix}layer{i}.*" leaf per tensor.
struct GeneratorTrace {
  NodeId x;       // [n, D]
  NodeId z;       // [n, N]
  NodeId output;  // [n, D]
  MlpTrace core_z;
  MlpTrace core_zero;
  const LocalGeneratorModel* model = nullptr;
};

GeneratorTrace emit_local_generate(Tape& tape, const LocalGeneratorModel& model,
                                   NodeId x, NodeId z, const std::string& prefix,
                                   bool params_as_leaves);

/// Variant over existing core parameter nodes, so several traces (for
/// different inputs) can share one set of differentiated parameters.
GeneratorTrace emit_local_generate_with_params(Tape& tape,
                                               const LocalGeneratorModel& model,
                                               NodeId x, NodeId z,
                                               const std::vector<NodeId>& weights,
                                               const std::vector<NodeId>& biases);

/// Jacobian columns of G with respect to z at z = 0, one [n, D] node per
/// requested coordinate (row i holds the column for batch point i).
std::vector<NodeId> emit_tangent_columns(Tape& tape,
                                         const GeneratorTrace& trace,
                                         const std::vector<std::size_t>& coords);

/// Batch-mean regularizer as a differentiable scalar node:
/// mean_i [ mu * ||G(x_i,0)-x_i||^2 + eta * ||J_S^T J_S - I||_F^2 ].
/// `locality` and `orthonormality` are the unweighted batch means of the
/// two penalties, kept for reporting.
struct OmegaNodes {
  NodeId total;
  NodeId locality;
  NodeId orthonormality;
};

OmegaNodes emit_regularizer_omega_parts(Tape& tape, const GeneratorTrace& trace,
                                        double mu, double eta,
                                        const std::vector<std::size_t>& coords);

NodeId emit_regularizer_omega(Tape& tape, const GeneratorTrace& trace,
                              double mu, double eta,
                              const std::vector<std::size_t>& coords);

}  // namespace lgan

#endif
