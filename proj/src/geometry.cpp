#include "lgan/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lgan {

void LocalGeneratorModel::validate() const {
  if (ambient_dim == 0 || coord_dim == 0) {
    throw Error("local generator: dimensions must be positive");
  }
  if (coord_dim > ambient_dim) {
    throw Error("local generator: coordinate dimension " +
                std::to_string(coord_dim) + " exceeds ambient dimension " +
                std::to_string(ambient_dim) +
                " (orthonormal tangents need coord_dim <= ambient_dim)");
  }
  if (core.in_dim() != ambient_dim + coord_dim || core.out_dim() != ambient_dim) {
    throw Error("local generator: core must map " +
                std::to_string(ambient_dim + coord_dim) + " -> " +
                std::to_string(ambient_dim) + ", got " +
                std::to_string(core.in_dim()) + " -> " +
                std::to_string(core.out_dim()));
  }
}

LocalGeneratorModel make_local_generator(std::size_t ambient_dim,
                                         std::size_t coord_dim,
                                         const std::vector<std::size_t>& hidden,
                                         Activation hidden_act,
                                         std::uint64_t seed) {
  LocalGeneratorModel model;
  model.ambient_dim = ambient_dim;
  model.coord_dim = coord_dim;
  model.core = init_params(
      mlp_spec(ambient_dim + coord_dim, hidden, ambient_dim, hidden_act), seed);
  model.validate();
  return model;
}

namespace {

Tensor concat_features(const Tensor& x, const Tensor& z) {
  if (x.rank() == 1) {
    Tensor out(Shape{x.size() + z.size()});
    auto od = out.data();
    std::copy(x.data().begin(), x.data().end(), od.begin());
    std::copy(z.data().begin(), z.data().end(), od.begin() + x.size());
    return out;
  }
  std::size_t n = x.shape()[0], dx = x.shape()[1], dz = z.shape()[1];
  Tensor out(Shape{n, dx + dz});
  auto od = out.data();
  auto xd = x.data();
  auto zd = z.data();
  for (std::size_t r = 0; r < n; ++r) {
    std::copy(xd.begin() + r * dx, xd.begin() + (r + 1) * dx,
              od.begin() + r * (dx + dz));
    std::copy(zd.begin() + r * dz, zd.begin() + (r + 1) * dz,
              od.begin() + r * (dx + dz) + dx);
  }
  return out;
}

void check_generate_dims(const LocalGeneratorModel& model, const Tensor& x,
                         const Tensor& z) {
  model.validate();
  if (x.rank() == 1 && z.rank() == 1) {
    if (x.size() != model.ambient_dim || z.size() != model.coord_dim) {
      throw Error("local_generate: expected point [" +
                  std::to_string(model.ambient_dim) + "] and coordinates [" +
                  std::to_string(model.coord_dim) + "], got " +
                  shape_str(x.shape()) + " and " + shape_str(z.shape()));
    }
    return;
  }
  if (x.rank() == 2 && z.rank() == 2 && x.shape()[0] == z.shape()[0] &&
      x.shape()[1] == model.ambient_dim && z.shape()[1] == model.coord_dim) {
    return;
  }
  throw Error("local_generate: incompatible shapes " + shape_str(x.shape()) +
              " and " + shape_str(z.shape()));
}

}  // namespace

Tensor local_generate(const LocalGeneratorModel& model, const Tensor& x,
                      const Tensor& z) {
  check_generate_dims(model, x, z);
  Tensor bz = mlp_forward(model.core, concat_features(x, z));
  Tensor out = x;
  auto od = out.data();
  auto bzd = bz.data();
  if (model.residual) {
    Tensor zero = z.rank() == 1 ? Tensor::zeros(z.shape())
                                : Tensor::zeros({z.shape()[0], z.shape()[1]});
    Tensor b0 = mlp_forward(model.core, concat_features(x, zero));
    auto b0d = b0.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] += bzd[i] - b0d[i];
  } else {
    for (std::size_t i = 0; i < od.size(); ++i) od[i] += bzd[i];
  }
  return out;
}

Tensor sample_local_noise(std::size_t coord_dim, double zero_weight, Rng& rng) {
  if (zero_weight < 0.0 || zero_weight > 1.0) {
    throw Error("sample_local_noise: zero_weight must lie in [0, 1]");
  }
  if (rng.uniform() < zero_weight) return Tensor::zeros({coord_dim});
  Tensor z(Shape{coord_dim});
  for (double& v : z.data()) v = rng.normal();
  return z;
}

Tensor sample_local_noise_batch(std::size_t n, std::size_t coord_dim,
                                double zero_weight, Rng& rng) {
  Tensor out(Shape{n, coord_dim});
  auto od = out.data();
  for (std::size_t r = 0; r < n; ++r) {
    Tensor row = sample_local_noise(coord_dim, zero_weight, rng);
    std::copy(row.data().begin(), row.data().end(), od.begin() + r * coord_dim);
  }
  return out;
}

std::vector<std::size_t> subsample_coordinates(std::size_t coord_dim,
                                               std::size_t m, Rng& rng) {
  if (m == 0) throw Error("subsample_coordinates: sample size must be >= 1");
  std::vector<std::size_t> pool(coord_dim);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  std::size_t k = std::min(m, coord_dim);
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(
                            rng.below(static_cast<std::uint64_t>(coord_dim - i)));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

TangentBasis tangent_basis(const LocalGeneratorModel& model, const Tensor& x) {
  model.validate();
  if (x.rank() != 1 || x.size() != model.ambient_dim) {
    throw Error("tangent_basis: expected a point of dimension " +
                std::to_string(model.ambient_dim) + ", got " +
                shape_str(x.shape()));
  }
  std::size_t d = model.ambient_dim, n = model.coord_dim;

  // N forward probes through the core at z = 0; the x + B(x,z) - B(x,0)
  // wrapper adds nothing to dG/dz, so the core Jacobian is the answer.
  Tape tape;
  Tensor row(Shape{1, d}, {x.data().begin(), x.data().end()});
  NodeId input = tape.concat_cols(tape.constant(row),
                                  tape.constant(Tensor::zeros({1, n})));
  MlpTrace trace = emit_mlp_forward(tape, model.core, input, "", false);
  std::vector<NodeId> probes;
  probes.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    probes.push_back(emit_jvp(tape, trace, d + j));
  }
  tape.forward({});

  TangentBasis basis;
  basis.base_point = x;
  basis.jacobian = Tensor(Shape{d, n});
  for (std::size_t j = 0; j < n; ++j) {
    const Tensor& col = tape.value(probes[j]);
    for (std::size_t i = 0; i < d; ++i) {
      basis.jacobian.at(i, j) = col.data()[i];
    }
  }
  return basis;
}

double orthonormality_penalty(const Tensor& jacobian) {
  if (jacobian.rank() != 2) {
    throw Error("orthonormality_penalty: expected a matrix, got " +
                shape_str(jacobian.shape()));
  }
  std::size_t d = jacobian.rows(), n = jacobian.cols();
  double penalty = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      double gram = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        gram += jacobian.at(i, a) * jacobian.at(i, b);
      }
      double dev = gram - (a == b ? 1.0 : 0.0);
      penalty += dev * dev;
    }
  }
  return penalty;
}

double locality_penalty(const LocalGeneratorModel& model, const Tensor& x) {
  Tensor gx = local_generate(model, x, Tensor::zeros({model.coord_dim}));
  double s = 0.0;
  auto gd = gx.data();
  auto xd = x.data();
  for (std::size_t i = 0; i < gd.size(); ++i) {
    double d = gd[i] - xd[i];
    s += d * d;
  }
  return s;
}

double regularizer_omega(const LocalGeneratorModel& model, const Tensor& x,
                         double mu, double eta,
                         const std::vector<std::size_t>* coord_subset) {
  if (mu < 0.0 || eta < 0.0) {
    throw Error("regularizer_omega: weights must be non-negative");
  }
  double loc = locality_penalty(model, x);
  TangentBasis basis = tangent_basis(model, x);
  Tensor j = basis.jacobian;
  if (coord_subset) {
    for (std::size_t c : *coord_subset) {
      if (c >= model.coord_dim) {
        throw Error("regularizer_omega: coordinate index " + std::to_string(c) +
                    " out of range");
      }
    }
    Tensor sub(Shape{model.ambient_dim, coord_subset->size()});
    for (std::size_t a = 0; a < coord_subset->size(); ++a) {
      for (std::size_t i = 0; i < model.ambient_dim; ++i) {
        sub.at(i, a) = j.at(i, (*coord_subset)[a]);
      }
    }
    j = std::move(sub);
  }
  return mu * loc + eta * orthonormality_penalty(j);
}

GeneratorTrace emit_local_generate_with_params(Tape& tape,
                                               const LocalGeneratorModel& model,
                                               NodeId x, NodeId z,
                                               const std::vector<NodeId>& weights,
                                               const std::vector<NodeId>& biases) {
  model.validate();
  const Shape& xs = tape.shape(x);
  const Shape& zs = tape.shape(z);
  if (xs.size() != 2 || zs.size() != 2 || xs[0] != zs[0] ||
      xs[1] != model.ambient_dim || zs[1] != model.coord_dim) {
    throw Error("emit_local_generate: incompatible shapes " + shape_str(xs) +
                " and " + shape_str(zs));
  }
  std::size_t n = xs[0];

  GeneratorTrace trace;
  trace.x = x;
  trace.z = z;
  trace.model = &model;

  NodeId in_z = tape.concat_cols(x, z);
  trace.core_z =
      emit_mlp_forward_with_params(tape, model.core, in_z, weights, biases);

  NodeId zero = tape.constant(Tensor::zeros({n, model.coord_dim}));
  NodeId in_zero = tape.concat_cols(x, zero);
  trace.core_zero =
      emit_mlp_forward_with_params(tape, model.core, in_zero, weights, biases);

  if (model.residual) {
    trace.output =
        tape.add(x, tape.sub(trace.core_z.output, trace.core_zero.output));
  } else {
    trace.output = tape.add(x, trace.core_z.output);
  }
  return trace;
}

GeneratorTrace emit_local_generate(Tape& tape, const LocalGeneratorModel& model,
                                   NodeId x, NodeId z, const std::string& prefix,
                                   bool params_as_leaves) {
  model.validate();
  std::vector<NodeId> weights, biases;
  emit_mlp_params(tape, model.core, prefix, params_as_leaves, weights, biases);
  return emit_local_generate_with_params(tape, model, x, z, weights, biases);
}

std::vector<Tensor> batch_tangent_jacobians(const LocalGeneratorModel& model,
                                            const Tensor& x_batch) {
  model.validate();
  if (x_batch.rank() != 2 || x_batch.cols() != model.ambient_dim) {
    throw Error("batch_tangent_jacobians: expected [n, " +
                std::to_string(model.ambient_dim) + "] points, got " +
                shape_str(x_batch.shape()));
  }
  const std::size_t n = x_batch.rows();
  const std::size_t d = model.ambient_dim;

  Tape tape;
  NodeId x = tape.constant(x_batch);
  NodeId z = tape.constant(Tensor::zeros({n, model.coord_dim}));
  GeneratorTrace trace = emit_local_generate(tape, model, x, z, "",
                                             /*params_as_leaves=*/false);
  std::vector<std::size_t> coords(model.coord_dim);
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  std::vector<NodeId> cols = emit_tangent_columns(tape, trace, coords);
  tape.forward({});

  std::vector<Tensor> jacobians(n, Tensor(Shape{d, model.coord_dim}));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    const Tensor& col = tape.value(cols[j]);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t i = 0; i < d; ++i) {
        jacobians[r].at(i, j) = col.at(r, i);
      }
    }
  }
  return jacobians;
}

std::vector<NodeId> emit_tangent_columns(Tape& tape,
                                         const GeneratorTrace& trace,
                                         const std::vector<std::size_t>& coords) {
  if (!trace.model) throw Error("emit_tangent_columns: empty trace");
  std::vector<NodeId> cols;
  cols.reserve(coords.size());
  for (std::size_t c : coords) {
    if (c >= trace.model->coord_dim) {
      throw Error("emit_tangent_columns: coordinate index " +
                  std::to_string(c) + " out of range");
    }
    cols.push_back(
        emit_jvp(tape, trace.core_zero, trace.model->ambient_dim + c));
  }
  return cols;
}

OmegaNodes emit_regularizer_omega_parts(Tape& tape, const GeneratorTrace& trace,
                                        double mu, double eta,
                                        const std::vector<std::size_t>& coords) {
  if (!trace.model) throw Error("emit_regularizer_omega: empty trace");
  if (mu < 0.0 || eta < 0.0) {
    throw Error("emit_regularizer_omega: weights must be non-negative");
  }
  std::size_t n = tape.shape(trace.x)[0];

  // Locality rows: || G(x_i, 0) - x_i ||^2. For residual models the
  // difference is the same node subtracted from itself, identically zero
  // with zero gradient, kept so the reported term is a real evaluation.
  NodeId diff0 = trace.model->residual
                     ? tape.sub(trace.core_zero.output, trace.core_zero.output)
                     : trace.core_zero.output;
  NodeId loc = tape.mean(tape.row_sum(tape.mul(diff0, diff0)));

  // Gram block of the sampled tangent columns, one entry expression per
  // (a <= b) pair; off-diagonal deviations count twice by symmetry.
  std::vector<NodeId> cols = emit_tangent_columns(tape, trace, coords);
  NodeId penalty_rows = tape.constant(Tensor::zeros({n}));
  NodeId ones = tape.constant(Tensor::full({n}, 1.0));
  for (std::size_t a = 0; a < cols.size(); ++a) {
    for (std::size_t b = a; b < cols.size(); ++b) {
      NodeId gram = tape.row_sum(tape.mul(cols[a], cols[b]));
      NodeId dev = a == b ? tape.sub(gram, ones) : gram;
      NodeId sq = tape.mul(dev, dev);
      penalty_rows = tape.add(penalty_rows, a == b ? sq : tape.scale(sq, 2.0));
    }
  }
  NodeId orth = tape.mean(penalty_rows);

  OmegaNodes nodes;
  nodes.locality = loc;
  nodes.orthonormality = orth;
  nodes.total = tape.add(tape.scale(loc, mu), tape.scale(orth, eta));
  return nodes;
}

NodeId emit_regularizer_omega(Tape& tape, const GeneratorTrace& trace,
                              double mu, double eta,
                              const std::vector<std::size_t>& coords) {
  return emit_regularizer_omega_parts(tape, trace, mu, eta, coords).total;
}

}  // namespace lgan
