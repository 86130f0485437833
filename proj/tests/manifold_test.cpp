#include "doctest.h"
#include "lgan/manifold.hpp"

#include <cmath>

using namespace lgan;

namespace {

// Core computing B(x, z) = M z: a single linear layer with a zero x-block.
LocalGeneratorModel linear_in_z_model(std::size_t d, std::size_t n,
                                      const Tensor& m) {
  LocalGeneratorModel model;
  model.ambient_dim = d;
  model.coord_dim = n;
  DenseLayer layer;
  layer.weights = Tensor::zeros({d, d + n});
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      layer.weights.at(i, d + j) = m.at(i, j);
    }
  }
  layer.bias = Tensor::zeros({d});
  layer.activation = Activation::Linear;
  model.core.layers.push_back(std::move(layer));
  return model;
}

ScalarField squared_norm_field() {
  ScalarField f;
  f.value = [](const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v * v;
    return s;
  };
  f.gradient = [](const Tensor& x) {
    Tensor g(x.shape());
    auto xd = x.data();
    for (std::size_t i = 0; i < xd.size(); ++i) g.data()[i] = 2.0 * xd[i];
    return g;
  };
  return f;
}

ScalarField linear_field(const Tensor& a) {
  ScalarField f;
  f.value = [a](const Tensor& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * x.data()[i];
    return s;
  };
  f.gradient = [a](const Tensor&) { return a; };
  return f;
}

}  // namespace

TEST_CASE("chart gradient vanishes when the core is identically zero") {
  LocalGeneratorModel model = linear_in_z_model(3, 2, Tensor::zeros({3, 2}));
  Tensor g = manifold_gradient(squared_norm_field(), model,
                               Tensor::from_vector({1, 2, 3}));
  CHECK(g == Tensor::zeros({2}));
}

TEST_CASE("identity tangent block passes the ambient gradient through") {
  LocalGeneratorModel model = linear_in_z_model(2, 2, Tensor::identity(2));
  Tensor g = manifold_gradient(squared_norm_field(), model,
                               Tensor::from_vector({1, -2}));
  REQUIRE(g.shape() == Shape{2});
  CHECK(g.data()[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(g.data()[1] == doctest::Approx(-4.0).epsilon(1e-12));
}

TEST_CASE("chart gradient of a linear core is exactly M^T grad f") {
  Tensor m = Tensor::matrix(3, 2, {0.5, -1.0, 2.0, 0.0, 1.5, 3.0});
  LocalGeneratorModel model = linear_in_z_model(3, 2, m);
  Tensor a = Tensor::from_vector({1.0, -0.5, 2.0});
  Tensor g = manifold_gradient(linear_field(a), model,
                               Tensor::from_vector({0.3, 0.1, -0.9}));
  for (std::size_t j = 0; j < 2; ++j) {
    double expect = 0.0;
    for (std::size_t i = 0; i < 3; ++i) expect += m.at(i, j) * a.data()[i];
    CHECK(g.data()[j] == expect);
  }
}

TEST_CASE("chart gradient matches finite differences of f composed with G") {
  Rng rng(31);
  for (int rep = 0; rep < 5; ++rep) {
    LocalGeneratorModel model =
        make_local_generator(3, 2, {12, 12}, Activation::Tanh, 400 + rep);
    Tensor x(Shape{3});
    for (double& v : x.data()) v = rng.normal();
    ScalarField f = squared_norm_field();
    Tensor got = manifold_gradient(f, model, x);
    Tensor fd = finite_diff_gradient(
        [&](const Tensor& z) { return f.value(local_generate(model, x, z)); },
        Tensor::zeros({2}), 1e-6);
    CHECK(gradients_close(got, fd, 1e-6, 1e-8));
  }
}

TEST_CASE("chart gradient falls back to finite differences without a gradient") {
  LocalGeneratorModel model = linear_in_z_model(2, 1, Tensor::matrix(2, 1, {1, 2}));
  ScalarField f;
  f.value = [](const Tensor& x) {
    return x.data()[0] * x.data()[0] + 3.0 * x.data()[1];
  };
  Tensor g = manifold_gradient(f, model, Tensor::from_vector({0.5, 0.0}));
  // grad f = (2 * 0.5, 3), column (1, 2) -> 1 + 6 = 7.
  CHECK(g.data()[0] == doctest::Approx(7.0).epsilon(1e-8));
}

TEST_CASE("gradient-norm penalty is zero for a constant classifier") {
  ClassifierModel clf;
  clf.num_classes = 2;
  DenseLayer trunk_layer;
  trunk_layer.weights = Tensor::identity(2);
  trunk_layer.bias = Tensor::zeros({2});
  trunk_layer.activation = Activation::Linear;
  clf.trunk.layers.push_back(trunk_layer);
  clf.head.weights = Tensor::zeros({3, 2});
  clf.head.bias = Tensor::from_vector({0.2, -0.1, 0.4});
  clf.head.activation = Activation::Linear;

  LocalGeneratorModel model =
      make_local_generator(2, 1, {8}, Activation::Tanh, 77);
  double p = manifold_gradient_norm_penalty(clf, model,
                                            Tensor::from_vector({0.4, 0.6}));
  CHECK(p == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("gradient-norm penalty is zero when the core is identically zero") {
  ClassifierModel clf = make_classifier(2, {8}, 2, Activation::Tanh, 12);
  LocalGeneratorModel model = linear_in_z_model(2, 2, Tensor::zeros({2, 2}));
  double p = manifold_gradient_norm_penalty(clf, model,
                                            Tensor::from_vector({1.0, -1.0}));
  CHECK(p == 0.0);
}

TEST_CASE("gradient-norm penalty matches the closed form for linear logits") {
  // Identity trunk, logits = W x over two real classes plus fake, chart
  // basis J = I. Then grad_x log P(k|x) = w_k - sum_c p_c w_c and the
  // penalty sums its squared norm over the two real classes.
  Tensor w = Tensor::matrix(3, 2, {1.0, 0.5, -0.5, 1.5, 0.2, -0.3});
  ClassifierModel clf;
  clf.num_classes = 2;
  DenseLayer trunk_layer;
  trunk_layer.weights = Tensor::identity(2);
  trunk_layer.bias = Tensor::zeros({2});
  trunk_layer.activation = Activation::Linear;
  clf.trunk.layers.push_back(trunk_layer);
  clf.head.weights = w;
  clf.head.bias = Tensor::zeros({3});
  clf.head.activation = Activation::Linear;

  LocalGeneratorModel model = linear_in_z_model(2, 2, Tensor::identity(2));
  Tensor x = Tensor::from_vector({0.3, -0.8});

  Tensor probs = class_probabilities(clf, x);
  double expect = 0.0;
  for (std::size_t k = 0; k < 2; ++k) {
    for (std::size_t j = 0; j < 2; ++j) {
      double comp = w.at(k, j);
      for (std::size_t c = 0; c < 3; ++c) comp -= probs.data()[c] * w.at(c, j);
      expect += comp * comp;
    }
  }
  double got = manifold_gradient_norm_penalty(clf, model, x);
  CHECK(got == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("gradient-norm penalty decomposes over per-class chart gradients") {
  ClassifierModel clf = make_classifier(3, {10}, 2, Activation::Tanh, 19);
  LocalGeneratorModel model =
      make_local_generator(3, 2, {12}, Activation::Tanh, 23);
  Tensor x = Tensor::from_vector({0.2, -0.4, 0.9});
  TangentBasis basis = tangent_basis(model, x);

  double expect = 0.0;
  for (std::size_t k = 0; k < 2; ++k) {
    // Input gradient of log P(k | x) through the joint network.
    Tape tape;
    NodeId input = tape.leaf("x", {1, 3});
    MlpTrace trace = emit_mlp_forward(tape, clf.as_mlp(), input, "clf.",
                                      /*params_as_leaves=*/false);
    NodeId lp = tape.sum(tape.sub(
        tape.row_sum(tape.gather_cols(trace.output, {k})),
        tape.logsumexp_rows(trace.output)));
    Tensor xrow({1, 3});
    for (std::size_t i = 0; i < 3; ++i) xrow.at(0, i) = x.data()[i];
    tape.forward({{"x", xrow}});
    GradientMap grads = tape.backward(lp);
    const Tensor& gx = grads.at("x");
    for (std::size_t j = 0; j < 2; ++j) {
      double comp = 0.0;
      for (std::size_t i = 0; i < 3; ++i) {
        comp += basis.jacobian.at(i, j) * gx.at(0, i);
      }
      expect += comp * comp;
    }
  }
  double got = manifold_gradient_norm_penalty(clf, model, x);
  CHECK(got == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("batched penalty node averages the per-point penalties") {
  ClassifierModel clf = make_classifier(2, {8}, 2, Activation::Tanh, 41);
  LocalGeneratorModel model =
      make_local_generator(2, 1, {8}, Activation::Tanh, 42);
  Tensor batch = Tensor::matrix(3, 2, {0.1, 0.2, -0.5, 0.7, 1.1, -0.3});

  std::vector<Tensor> jacobians;
  double mean_single = 0.0;
  for (std::size_t r = 0; r < 3; ++r) {
    Tensor x = Tensor::from_vector({batch.at(r, 0), batch.at(r, 1)});
    jacobians.push_back(tangent_basis(model, x).jacobian);
    mean_single += manifold_gradient_norm_penalty(clf, model, x);
  }
  mean_single /= 3.0;

  Tape tape;
  MlpTrace trace = emit_mlp_forward(tape, clf.as_mlp(), tape.constant(batch),
                                    "clf.", /*params_as_leaves=*/false);
  NodeId penalty = emit_manifold_penalty(tape, clf, trace, jacobians);
  tape.forward({});
  CHECK(tape.value(penalty).item() ==
        doctest::Approx(mean_single).epsilon(1e-12));
}

TEST_CASE("perturbation response is zero at zero displacement") {
  LocalGeneratorModel model =
      make_local_generator(3, 2, {10}, Activation::Tanh, 61);
  double r = perturbation_response(squared_norm_field(), model,
                                   Tensor::from_vector({0.5, -0.5, 1.0}),
                                   Tensor::zeros({2}));
  CHECK(r == 0.0);
}

TEST_CASE("perturbation response of a linear field and core is exact") {
  Tensor m = Tensor::matrix(3, 2, {1.0, 0.0, 0.0, 2.0, 1.0, 1.0});
  LocalGeneratorModel model = linear_in_z_model(3, 2, m);
  Tensor a = Tensor::from_vector({0.5, -1.0, 2.0});
  Tensor dz = Tensor::from_vector({0.3, -0.2});
  // f(G(x, dz)) - f(G(x, 0)) = a^T M dz.
  double proj = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      proj += a.data()[i] * m.at(i, j) * dz.data()[j];
    }
  }
  double r = perturbation_response(linear_field(a), model,
                                   Tensor::from_vector({0.1, 0.2, 0.3}), dz);
  CHECK(r == doctest::Approx(proj * proj).epsilon(1e-12));
}

TEST_CASE("small perturbations follow the first-order chart expansion") {
  LocalGeneratorModel model =
      make_local_generator(3, 2, {12, 12}, Activation::Tanh, 71);
  Tensor x = Tensor::from_vector({0.4, -0.2, 0.6});
  ScalarField f = squared_norm_field();
  Tensor g = manifold_gradient(f, model, x);
  Tensor dz = Tensor::from_vector({0.7, -0.4});
  const double t = 1e-4;
  Tensor step = Tensor::from_vector({t * 0.7, t * -0.4});
  double response = perturbation_response(f, model, x, step);
  double predicted = t * (g.data()[0] * dz.data()[0] + g.data()[1] * dz.data()[1]);
  predicted *= predicted;
  CHECK(response == doctest::Approx(predicted).epsilon(1e-3));
}

TEST_CASE("chart Laplacian of a constant field is zero") {
  LocalGeneratorModel model =
      make_local_generator(2, 1, {8}, Activation::Tanh, 81);
  ScalarField f;
  f.value = [](const Tensor&) { return 4.25; };
  double lap = laplace_beltrami(f, model, Tensor::from_vector({0.3, 0.3}));
  CHECK(std::abs(lap) < 1e-8);
}

TEST_CASE("chart Laplacian of the squared norm under an orthonormal basis") {
  // Columns e1, e2, e3 in ambient dimension 4: J^T J = I, and the squared
  // norm restricted to the chart has second derivative 2 per coordinate.
  Tensor q = Tensor::zeros({4, 3});
  q.at(0, 0) = 1.0;
  q.at(1, 1) = 1.0;
  q.at(2, 2) = 1.0;
  LocalGeneratorModel model = linear_in_z_model(4, 3, q);
  Tensor x = Tensor::from_vector({0.2, -0.1, 0.5, 0.8});
  for (double h : {1e-2, 1e-3}) {
    double lap = laplace_beltrami(squared_norm_field(), model, x, h);
    CHECK(lap == doctest::Approx(6.0).epsilon(1e-8));
  }
}

TEST_CASE("chart Laplacian of a linear field vanishes") {
  Tensor m = Tensor::matrix(3, 2, {1.0, 0.5, 0.0, 1.0, 2.0, -1.0});
  LocalGeneratorModel model = linear_in_z_model(3, 2, m);
  double lap = laplace_beltrami(linear_field(Tensor::from_vector({1, 2, 3})),
                                model, Tensor::from_vector({0.1, 0.1, 0.1}));
  CHECK(std::abs(lap) < 1e-8);
}

TEST_CASE("chart Laplacian rejects nonpositive step sizes") {
  LocalGeneratorModel model =
      make_local_generator(2, 1, {8}, Activation::Tanh, 91);
  CHECK_THROWS_AS(laplace_beltrami(squared_norm_field(), model,
                                   Tensor::from_vector({0, 0}), 0.0),
                  Error);
}
