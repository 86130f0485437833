#include "lgan/manifold.hpp"

#include <cmath>

namespace lgan {

Tensor manifold_gradient(const ScalarField& f, const LocalGeneratorModel& model,
                         const Tensor& x) {
  if (!f.value) throw Error("manifold_gradient: field has no value function");
  Tensor g = f.gradient ? f.gradient(x) : finite_diff_gradient(f.value, x, 1e-5);
  if (!g.all_finite()) {
    throw Error("manifold_gradient: non-finite ambient gradient");
  }
  if (g.rank() != 1 || g.size() != model.ambient_dim) {
    throw Error("manifold_gradient: ambient gradient has shape " +
                shape_str(g.shape()) + ", expected [" +
                std::to_string(model.ambient_dim) + "]");
  }
  TangentBasis basis = tangent_basis(model, x);
  Tensor out(Shape{model.coord_dim});
  auto od = out.data();
  auto gd = g.data();
  for (std::size_t j = 0; j < model.coord_dim; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < model.ambient_dim; ++i) {
      s += basis.jacobian.at(i, j) * gd[i];
    }
    od[j] = s;
  }
  return out;
}

NodeId emit_manifold_penalty(Tape& tape, const ClassifierModel& clf,
                             const MlpTrace& clf_trace,
                             const std::vector<Tensor>& row_jacobians) {
  clf.validate();
  const Shape& out_shape = tape.shape(clf_trace.output);
  if (out_shape.size() != 2 || out_shape[1] != clf.logit_count()) {
    throw Error("emit_manifold_penalty: trace output " + shape_str(out_shape) +
                " does not give " + std::to_string(clf.logit_count()) +
                " logits");
  }
  std::size_t n = out_shape[0];
  if (row_jacobians.size() != n) {
    throw Error("emit_manifold_penalty: need one Jacobian per row, got " +
                std::to_string(row_jacobians.size()) + " for " +
                std::to_string(n) + " rows");
  }
  std::size_t d = clf.as_mlp().in_dim();
  std::size_t coord_dim = row_jacobians.empty() ? 0 : row_jacobians[0].cols();
  for (const Tensor& j : row_jacobians) {
    if (j.rank() != 2 || j.rows() != d || j.cols() != coord_dim) {
      throw Error("emit_manifold_penalty: Jacobian shape " +
                  shape_str(j.shape()) + " does not match [" +
                  std::to_string(d) + ",N]");
    }
  }

  // Column j of every row Jacobian, stacked: row i holds J_i[:, j].
  std::vector<NodeId> jcols;
  jcols.reserve(coord_dim);
  for (std::size_t j = 0; j < coord_dim; ++j) {
    Tensor stacked(Shape{n, d});
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t r = 0; r < d; ++r) {
        stacked.at(i, r) = row_jacobians[i].at(r, j);
      }
    }
    jcols.push_back(tape.constant(std::move(stacked)));
  }

  NodeId probs = tape.softmax_rows(clf_trace.output);
  NodeId penalty_rows = tape.constant(Tensor::zeros({n}));
  for (std::size_t k = 0; k < clf.num_classes; ++k) {
    // d log P(k|x) / d logits = e_k - softmax(logits), rowwise.
    Tensor onehot = Tensor::zeros({n, clf.logit_count()});
    for (std::size_t i = 0; i < n; ++i) onehot.at(i, k) = 1.0;
    NodeId dlogits = tape.sub(tape.constant(std::move(onehot)), probs);
    NodeId gx = emit_input_gradient(tape, clf_trace, dlogits);
    for (std::size_t j = 0; j < coord_dim; ++j) {
      NodeId comp = tape.row_sum(tape.mul(gx, jcols[j]));
      penalty_rows = tape.add(penalty_rows, tape.mul(comp, comp));
    }
  }
  return tape.mean(penalty_rows);
}

double manifold_gradient_norm_penalty(const ClassifierModel& clf,
                                      const LocalGeneratorModel& model,
                                      const Tensor& x) {
  if (x.rank() != 1 || x.size() != model.ambient_dim) {
    throw Error("manifold_gradient_norm_penalty: expected a point of dimension " +
                std::to_string(model.ambient_dim) + ", got " +
                shape_str(x.shape()));
  }
  TangentBasis basis = tangent_basis(model, x);

  Tape tape;
  Tensor row(Shape{1, x.size()}, {x.data().begin(), x.data().end()});
  MlpTrace trace =
      emit_mlp_forward(tape, clf.as_mlp(), tape.constant(row), "", false);
  NodeId penalty = emit_manifold_penalty(tape, clf, trace, {basis.jacobian});
  tape.forward({});
  return tape.value(penalty).item();
}

double perturbation_response(const ScalarField& f,
                             const LocalGeneratorModel& model, const Tensor& x,
                             const Tensor& dz) {
  if (!f.value) throw Error("perturbation_response: field has no value function");
  double moved = f.value(local_generate(model, x, dz));
  double base = f.value(local_generate(model, x, Tensor::zeros({model.coord_dim})));
  double diff = moved - base;
  return diff * diff;
}

double laplace_beltrami(const ScalarField& f, const LocalGeneratorModel& model,
                        const Tensor& x, double h) {
  if (!f.value) throw Error("laplace_beltrami: field has no value function");
  if (!(h > 0.0)) throw Error("laplace_beltrami: step must be positive");
  std::size_t n = model.coord_dim;
  double base = f.value(local_generate(model, x, Tensor::zeros({n})));
  if (!std::isfinite(base)) {
    throw Error("laplace_beltrami: non-finite value at the base point");
  }
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    Tensor step = Tensor::zeros({n});
    step.data()[j] = h;
    double up = f.value(local_generate(model, x, step));
    step.data()[j] = -h;
    double down = f.value(local_generate(model, x, step));
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw Error("laplace_beltrami: non-finite value at coordinate probe " +
                  std::to_string(j));
    }
    total += (up - 2.0 * base + down) / (h * h);
  }
  return total;
}

}  // namespace lgan
