#include "doctest.h"
#include "lgan/geometry.hpp"

#include <cmath>
#include <set>

using namespace lgan;

namespace {

// Core computing B(x, z) = M z for a fixed D-by-N matrix M: a single linear
// layer whose weight block on x is zero.
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

LocalGeneratorModel zero_core_model(std::size_t d, std::size_t n) {
  return linear_in_z_model(d, n, Tensor::zeros({d, n}));
}

Tensor random_point(Rng& rng, std::size_t d) {
  Tensor x(Shape{d});
  for (double& v : x.data()) v = rng.normal();
  return x;
}

}  // namespace

TEST_CASE("generating at zero coordinates returns the base point exactly") {
  Rng rng(101);
  for (int rep = 0; rep < 5; ++rep) {
    LocalGeneratorModel model =
        make_local_generator(4, 2, {16, 16}, Activation::Tanh, 50 + rep);
    Tensor x = random_point(rng, 4);
    Tensor gx = local_generate(model, x, Tensor::zeros({2}));
    CHECK(gx == x);
  }
}

TEST_CASE("identity coordinate block translates the point") {
  LocalGeneratorModel model = linear_in_z_model(2, 2, Tensor::identity(2));
  Tensor gx = local_generate(model, Tensor::from_vector({1, 2}),
                             Tensor::from_vector({0.5, -0.5}));
  CHECK(gx == Tensor::from_vector({1.5, 1.5}));
}

TEST_CASE("zero core leaves every point fixed for all coordinates") {
  LocalGeneratorModel model = zero_core_model(3, 2);
  Rng rng(5);
  for (int rep = 0; rep < 4; ++rep) {
    Tensor x = random_point(rng, 3);
    Tensor z = random_point(rng, 2);
    CHECK(local_generate(model, x, z) == x);
  }
}

TEST_CASE("generator rejects mismatched dimensions") {
  LocalGeneratorModel model = zero_core_model(3, 2);
  CHECK_THROWS_AS(local_generate(model, Tensor::from_vector({1, 2}),
                                 Tensor::from_vector({0, 0})),
                  Error);
  CHECK_THROWS_AS(local_generate(model, Tensor::from_vector({1, 2, 3}),
                                 Tensor::from_vector({0})),
                  Error);
}

TEST_CASE("coordinate dimension may not exceed ambient dimension") {
  LocalGeneratorModel model;
  model.ambient_dim = 2;
  model.coord_dim = 3;
  model.core = init_params(mlp_spec(5, {}, 2, Activation::Linear), 1);
  CHECK_THROWS_AS(model.validate(), Error);
}

TEST_CASE("noise mixture degenerates to zero when fully weighted") {
  Rng rng(9);
  for (int rep = 0; rep < 10; ++rep) {
    Tensor z = sample_local_noise(4, 1.0, rng);
    CHECK(z == Tensor::zeros({4}));
  }
}

TEST_CASE("noise mixture hits the zero atom at about its weight") {
  Rng rng(12345);
  int zeros = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    Tensor z = sample_local_noise(3, 0.1, rng);
    bool all_zero = true;
    for (double v : z.data()) all_zero = all_zero && v == 0.0;
    if (all_zero) ++zeros;
  }
  double frac = static_cast<double>(zeros) / draws;
  CHECK(frac >= 0.09);
  CHECK(frac <= 0.11);
}

TEST_CASE("noise draws are reproducible per seed") {
  Rng a(77), b(77);
  for (int i = 0; i < 20; ++i) {
    CHECK(sample_local_noise(5, 0.3, a) == sample_local_noise(5, 0.3, b));
  }
}

TEST_CASE("tangent basis of a zero core vanishes") {
  LocalGeneratorModel model = zero_core_model(4, 3);
  TangentBasis basis = tangent_basis(model, Tensor::from_vector({1, 2, 3, 4}));
  CHECK(basis.jacobian == Tensor::zeros({4, 3}));
}

TEST_CASE("tangent basis of a linear coordinate map is its matrix") {
  Rng rng(31);
  Tensor m(Shape{3, 2});
  for (double& v : m.data()) v = rng.normal();
  LocalGeneratorModel model = linear_in_z_model(3, 2, m);
  TangentBasis basis = tangent_basis(model, random_point(rng, 3));
  CHECK(gradients_close(basis.jacobian, m, 1e-12, 1e-12));
}

TEST_CASE("tangent columns match central finite differences") {
  Rng rng(999);
  int pairs = 0;
  for (int mi = 0; mi < 10; ++mi) {
    LocalGeneratorModel model =
        make_local_generator(3, 2, {12, 12}, Activation::Tanh, 400 + mi);
    for (int xi = 0; xi < 10; ++xi) {
      Tensor x = random_point(rng, 3);
      TangentBasis basis = tangent_basis(model, x);
      const double eps = 1e-5;
      for (std::size_t j = 0; j < 2; ++j) {
        Tensor zp = Tensor::zeros({2}), zm = Tensor::zeros({2});
        zp.data()[j] = eps;
        zm.data()[j] = -eps;
        Tensor hi = local_generate(model, x, zp);
        Tensor lo = local_generate(model, x, zm);
        for (std::size_t i = 0; i < 3; ++i) {
          double fd = (hi.data()[i] - lo.data()[i]) / (2.0 * eps);
          double got = basis.jacobian.at(i, j);
          double tol = 1e-8 + 1e-6 * std::max(std::abs(fd), std::abs(got));
          CHECK(std::abs(fd - got) <= tol);
        }
      }
      ++pairs;
    }
  }
  CHECK(pairs == 100);
}

TEST_CASE("forward probes agree with per-component reverse passes") {
  LocalGeneratorModel model =
      make_local_generator(3, 2, {8}, Activation::Sigmoid, 71);
  Rng rng(72);
  Tensor x = random_point(rng, 3);
  TangentBasis basis = tangent_basis(model, x);

  // Row i of the Jacobian via backward on output component i.
  for (std::size_t i = 0; i < 3; ++i) {
    Tape tape;
    NodeId z = tape.leaf("z", {1, 2});
    Tensor row(Shape{1, 3}, {x.data().begin(), x.data().end()});
    GeneratorTrace trace =
        emit_local_generate(tape, model, tape.constant(row), z, "", false);
    tape.sum(tape.gather_cols(trace.output, {i}));
    tape.forward({{"z", Tensor::zeros({1, 2})}});
    Tensor dz = tape.backward().at("z");
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(basis.jacobian.at(i, j) ==
            doctest::Approx(dz.data()[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("orthonormal columns incur no penalty") {
  CHECK(orthonormality_penalty(Tensor::identity(3)) == 0.0);
  Tensor q(Shape{3, 2});
  q.at(0, 0) = 1.0;
  q.at(1, 1) = 1.0;
  CHECK(orthonormality_penalty(q) == 0.0);
}

TEST_CASE("scaled identity and duplicated columns are penalized") {
  Tensor two_i = Tensor::matrix(2, 2, {2, 0, 0, 2});
  CHECK(orthonormality_penalty(two_i) == doctest::Approx(18.0));
  Tensor dup = Tensor::matrix(2, 2, {1, 1, 0, 0});
  CHECK(orthonormality_penalty(dup) == doctest::Approx(2.0));
}

TEST_CASE("penalty vanishes exactly when the Gram matrix is the identity") {
  Rng rng(55);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor j(Shape{4, 2});
    for (double& v : j.data()) v = rng.normal();
    double pen = orthonormality_penalty(j);
    CHECK(pen >= 0.0);
    double gram_dev = 0.0;
    for (std::size_t a = 0; a < 2; ++a) {
      for (std::size_t b = 0; b < 2; ++b) {
        double g = 0.0;
        for (std::size_t i = 0; i < 4; ++i) g += j.at(i, a) * j.at(i, b);
        gram_dev = std::max(gram_dev, std::abs(g - (a == b ? 1.0 : 0.0)));
      }
    }
    CHECK((pen == 0.0) == (gram_dev <= 1e-12));
  }
}

TEST_CASE("residual models have exactly zero locality penalty") {
  Rng rng(66);
  LocalGeneratorModel model =
      make_local_generator(5, 3, {32}, Activation::LeakyRelu, 67);
  for (int rep = 0; rep < 5; ++rep) {
    CHECK(locality_penalty(model, random_point(rng, 5)) == 0.0);
  }
}

TEST_CASE("a generator shifted off its base point is penalized") {
  LocalGeneratorModel model = zero_core_model(2, 1);
  model.residual = false;
  model.core.layers[0].bias = Tensor::from_vector({1, 0});
  CHECK(locality_penalty(model, Tensor::from_vector({3, 4})) ==
        doctest::Approx(1.0));
}

TEST_CASE("the origin is a fixed point of a zero generator") {
  LocalGeneratorModel model = zero_core_model(2, 1);
  CHECK(locality_penalty(model, Tensor::zeros({2})) == 0.0);
}

TEST_CASE("coordinate subsampling is exhaustive, distinct, and reproducible") {
  Rng rng(88);
  auto all = subsample_coordinates(4, 9, rng);
  CHECK(all == std::vector<std::size_t>{0, 1, 2, 3});

  auto ten = subsample_coordinates(256, 10, rng);
  CHECK(ten.size() == 10);
  std::set<std::size_t> uniq(ten.begin(), ten.end());
  CHECK(uniq.size() == 10);
  for (std::size_t c : ten) CHECK(c < 256);

  Rng a(5), b(5);
  CHECK(subsample_coordinates(100, 7, a) == subsample_coordinates(100, 7, b));
}

TEST_CASE("regularizer weights scale the two terms") {
  Rng rng(91);
  LocalGeneratorModel model =
      make_local_generator(3, 2, {8}, Activation::Tanh, 92);
  Tensor x = random_point(rng, 3);
  CHECK(regularizer_omega(model, x, 0.0, 0.0) == 0.0);

  LocalGeneratorModel flat = zero_core_model(4, 3);
  CHECK(regularizer_omega(flat, Tensor::zeros({4}), 1.0, 1.0) ==
        doctest::Approx(3.0));

  // Orthonormal coordinate block: both conditions hold, omega is zero.
  Tensor q(Shape{3, 2});
  q.at(0, 0) = 1.0;
  q.at(1, 1) = 1.0;
  LocalGeneratorModel ortho = linear_in_z_model(3, 2, q);
  CHECK(regularizer_omega(ortho, x, 1.0, 1.0) == doctest::Approx(0.0));
}

TEST_CASE("full-subset regularizer decomposes into its two penalties") {
  Rng rng(93);
  LocalGeneratorModel model =
      make_local_generator(4, 2, {16}, Activation::Tanh, 94);
  Tensor x = random_point(rng, 4);
  std::vector<std::size_t> full{0, 1};
  double with_subset = regularizer_omega(model, x, 0.7, 1.3, &full);
  double expected = 0.7 * locality_penalty(model, x) +
                    1.3 * orthonormality_penalty(tangent_basis(model, x).jacobian);
  CHECK(with_subset == doctest::Approx(expected).epsilon(1e-12));
  CHECK(regularizer_omega(model, x, 0.7, 1.3) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("traced generator matches the numeric generator bit for bit") {
  Rng rng(95);
  for (bool residual : {true, false}) {
    LocalGeneratorModel model =
        make_local_generator(3, 2, {10, 10}, Activation::Tanh, 96);
    model.residual = residual;
    Tensor x(Shape{4, 3});
    Tensor z(Shape{4, 2});
    for (double& v : x.data()) v = rng.normal();
    for (double& v : z.data()) v = rng.normal();

    Tape tape;
    GeneratorTrace trace = emit_local_generate(
        tape, model, tape.constant(x), tape.constant(z), "g.", true);
    Bindings bind;
    add_param_bindings(bind, model.core, "g.");
    tape.forward(bind);
    CHECK(tape.value(trace.output) == local_generate(model, x, z));
  }
}

TEST_CASE("traced tangent columns agree with per-point bases") {
  LocalGeneratorModel model =
      make_local_generator(3, 2, {12}, Activation::Tanh, 97);
  Rng rng(98);
  Tensor x(Shape{3, 3});
  for (double& v : x.data()) v = rng.normal();

  Tape tape;
  NodeId z = tape.constant(Tensor::zeros({3, 2}));
  GeneratorTrace trace =
      emit_local_generate(tape, model, tape.constant(x), z, "", false);
  auto cols = emit_tangent_columns(tape, trace, {0, 1});
  tape.forward({});

  for (std::size_t r = 0; r < 3; ++r) {
    Tensor point(Shape{3});
    for (std::size_t i = 0; i < 3; ++i) point.data()[i] = x.at(r, i);
    TangentBasis basis = tangent_basis(model, point);
    for (std::size_t j = 0; j < 2; ++j) {
      const Tensor& col = tape.value(cols[j]);
      for (std::size_t i = 0; i < 3; ++i) {
        CHECK(col.at(r, i) ==
              doctest::Approx(basis.jacobian.at(i, j)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("traced regularizer equals the numeric batch mean") {
  LocalGeneratorModel model =
      make_local_generator(3, 2, {8, 8}, Activation::Tanh, 102);
  Rng rng(103);
  Tensor x(Shape{5, 3});
  for (double& v : x.data()) v = rng.normal();

  Tape tape;
  NodeId z = tape.constant(Tensor::zeros({5, 2}));
  GeneratorTrace trace =
      emit_local_generate(tape, model, tape.constant(x), z, "", false);
  emit_regularizer_omega(tape, trace, 1.0, 0.1, {0, 1});
  double emitted = tape.forward({}).item();

  double mean = 0.0;
  for (std::size_t r = 0; r < 5; ++r) {
    Tensor point(Shape{3});
    for (std::size_t i = 0; i < 3; ++i) point.data()[i] = x.at(r, i);
    mean += regularizer_omega(model, point, 1.0, 0.1);
  }
  mean /= 5.0;
  CHECK(emitted == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("regularizer gradients flow to core parameters correctly") {
  LocalGeneratorModel model =
      make_local_generator(2, 2, {6}, Activation::Tanh, 104);
  Rng rng(105);
  Tensor x(Shape{3, 2});
  for (double& v : x.data()) v = rng.normal();
  std::vector<std::size_t> coords{0, 1};

  Tape tape;
  NodeId z = tape.constant(Tensor::zeros({3, 2}));
  GeneratorTrace trace =
      emit_local_generate(tape, model, tape.constant(x), z, "g.", true);
  emit_regularizer_omega(tape, trace, 1.0, 1.0, coords);
  Bindings bind;
  add_param_bindings(bind, model.core, "g.");
  tape.forward(bind);
  auto grads = tape.backward();

  // Oracle: finite differences of the numeric batch-mean regularizer.
  for (const auto& [name, value] : param_flatten(model.core)) {
    auto f = [&](const Tensor& probe) {
      ParamList params = param_flatten(model.core);
      for (auto& [pname, pvalue] : params) {
        if (pname == name) pvalue = probe;
      }
      LocalGeneratorModel tweak = model;
      tweak.core = param_unflatten(model.core, params);
      double mean = 0.0;
      for (std::size_t r = 0; r < 3; ++r) {
        Tensor point(Shape{2});
        for (std::size_t i = 0; i < 2; ++i) point.data()[i] = x.at(r, i);
        mean += regularizer_omega(tweak, point, 1.0, 1.0, &coords);
      }
      return mean / 3.0;
    };
    Tensor fd = finite_diff_gradient(f, value, 1e-5);
    CHECK(gradients_close(grads.at("g." + name), fd, 1e-6, 1e-8));
  }
}
