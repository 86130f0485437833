#include "lgan/semisup.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lgan {

namespace {

NodeId zero_scalar(Tape& tape) { return tape.scalar_constant(0.0); }

Tensor onehot_rows(const std::vector<int>& labels, std::size_t width) {
  Tensor out = Tensor::zeros({labels.size(), width});
  for (std::size_t r = 0; r < labels.size(); ++r) {
    out.at(r, std::size_t(labels[r])) = 1.0;
  }
  return out;
}

void check_labels(const std::vector<int>& labels, std::size_t num_classes) {
  for (int label : labels) {
    if (label < 0 || std::size_t(label) >= num_classes) {
      throw Error("label " + std::to_string(label) + " outside the " +
                  std::to_string(num_classes) + " real classes");
    }
  }
}

// -mean(picked logit - logsumexp): cross entropy against the given labels
// over all K+1 logits.
NodeId emit_cross_entropy(Tape& tape, NodeId logits,
                          const std::vector<int>& labels, std::size_t width) {
  NodeId onehot = tape.constant(onehot_rows(labels, width));
  NodeId picked = tape.row_sum(tape.mul(logits, onehot));
  NodeId lse = tape.logsumexp_rows(logits);
  return tape.scale(tape.mean(tape.sub(picked, lse)), -1.0);
}

std::vector<std::size_t> first_indices(std::size_t k) {
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

std::size_t batch_rows(const Tape& tape, NodeId node) {
  const Shape& s = tape.shape(node);
  if (s.size() != 2) {
    throw Error("expected a batch matrix, got " + shape_str(s));
  }
  return s[0];
}

}  // namespace

ClassifierTermNodes emit_classifier_objective(
    Tape& tape, const ClassifierModel& clf, NodeId labeled_x,
    const std::vector<int>& labels, NodeId unlabeled_x, NodeId fake_x,
    const std::vector<Tensor>& jacobians, const std::string& prefix,
    bool params_as_leaves) {
  clf.validate();
  check_labels(labels, clf.num_classes);
  const std::size_t width = clf.logit_count();
  const std::size_t n_l = batch_rows(tape, labeled_x);
  const std::size_t n_u = batch_rows(tape, unlabeled_x);
  const std::size_t n_f = batch_rows(tape, fake_x);
  if (labels.size() != n_l) {
    throw Error("classifier objective: " + std::to_string(labels.size()) +
                " labels for " + std::to_string(n_l) + " labeled rows");
  }

  Mlp joint = clf.as_mlp();
  std::vector<NodeId> weights, biases;
  emit_mlp_params(tape, joint, prefix, params_as_leaves, weights, biases);

  ClassifierTermNodes nodes;

  if (n_l > 0) {
    MlpTrace trace =
        emit_mlp_forward_with_params(tape, joint, labeled_x, weights, biases);
    nodes.labeled_ce = emit_cross_entropy(tape, trace.output, labels, width);
  } else {
    nodes.labeled_ce = zero_scalar(tape);
  }

  MlpTrace trace_u;
  if (n_u > 0) {
    trace_u =
        emit_mlp_forward_with_params(tape, joint, unlabeled_x, weights, biases);
    NodeId real_lse = tape.logsumexp_rows(
        tape.gather_cols(trace_u.output, first_indices(clf.num_classes)));
    NodeId all_lse = tape.logsumexp_rows(trace_u.output);
    nodes.unlabeled_real =
        tape.scale(tape.mean(tape.sub(real_lse, all_lse)), -1.0);
  } else {
    nodes.unlabeled_real = zero_scalar(tape);
  }

  if (n_f > 0) {
    MlpTrace trace =
        emit_mlp_forward_with_params(tape, joint, fake_x, weights, biases);
    NodeId fake_logit =
        tape.row_sum(tape.gather_cols(trace.output, {clf.num_classes}));
    NodeId lse = tape.logsumexp_rows(trace.output);
    nodes.fake_ce = tape.scale(tape.mean(tape.sub(fake_logit, lse)), -1.0);
  } else {
    nodes.fake_ce = zero_scalar(tape);
  }

  if (!jacobians.empty()) {
    if (n_u == 0) {
      throw Error("classifier objective: tangent bases without unlabeled rows");
    }
    nodes.grad_penalty = emit_manifold_penalty(tape, clf, trace_u, jacobians);
  } else {
    nodes.grad_penalty = zero_scalar(tape);
  }

  nodes.total = tape.add(tape.add(nodes.labeled_ce, nodes.unlabeled_real),
                         tape.add(nodes.fake_ce, nodes.grad_penalty));
  return nodes;
}

ClassifierTerms classifier_objective_terms(const ClassifierModel& clf,
                                           const Tensor& labeled_x,
                                           const std::vector<int>& labels,
                                           const Tensor& unlabeled_x,
                                           const Tensor& fake_x,
                                           const std::vector<Tensor>& jacobians) {
  Tape tape;
  ClassifierTermNodes nodes = emit_classifier_objective(
      tape, clf, tape.constant(labeled_x), labels, tape.constant(unlabeled_x),
      tape.constant(fake_x), jacobians, "clf.", /*params_as_leaves=*/false);
  tape.forward({});
  ClassifierTerms terms;
  terms.labeled_ce = tape.value(nodes.labeled_ce).item();
  terms.unlabeled_real = tape.value(nodes.unlabeled_real).item();
  terms.fake_ce = tape.value(nodes.fake_ce).item();
  terms.grad_penalty = tape.value(nodes.grad_penalty).item();
  terms.total = tape.value(nodes.total).item();
  return terms;
}

ClassifierTerms classifier_objective(const ClassifierModel& clf,
                                     const LocalGeneratorModel& gen,
                                     const Tensor& labeled_x,
                                     const std::vector<int>& labels,
                                     const Tensor& unlabeled_x,
                                     double zero_weight, bool penalty_enabled,
                                     Rng& rng) {
  gen.validate();
  const std::size_t n_u = unlabeled_x.rank() == 2 ? unlabeled_x.rows() : 0;
  Tensor z_f = sample_local_noise_batch(n_u, gen.coord_dim, zero_weight, rng);
  Tensor fakes = n_u > 0 ? local_generate(gen, unlabeled_x, z_f)
                         : Tensor::zeros({0, gen.ambient_dim});
  std::vector<Tensor> jacobians;
  if (penalty_enabled && n_u > 0) {
    jacobians = batch_tangent_jacobians(gen, unlabeled_x);
  }
  return classifier_objective_terms(clf, labeled_x, labels, unlabeled_x, fakes,
                                    jacobians);
}

NodeId emit_label_preservation(Tape& tape, const ClassifierModel& clf,
                               const GeneratorTrace& gen_trace,
                               const std::vector<int>& labels) {
  clf.validate();
  check_labels(labels, clf.num_classes);
  if (batch_rows(tape, gen_trace.output) != labels.size()) {
    throw Error("label preservation: label count does not match batch");
  }
  Mlp joint = clf.as_mlp();
  MlpTrace trace = emit_mlp_forward(tape, joint, gen_trace.output, "",
                                    /*params_as_leaves=*/false);
  return emit_cross_entropy(tape, trace.output, labels, clf.logit_count());
}

NodeId emit_feature_matching(Tape& tape, const ClassifierModel& clf,
                             NodeId real_x, const GeneratorTrace& gen_trace) {
  clf.validate();
  std::vector<NodeId> weights, biases;
  emit_mlp_params(tape, clf.trunk, "", /*params_as_leaves=*/false, weights,
                  biases);
  MlpTrace real_trace =
      emit_mlp_forward_with_params(tape, clf.trunk, real_x, weights, biases);
  MlpTrace fake_trace = emit_mlp_forward_with_params(
      tape, clf.trunk, gen_trace.output, weights, biases);

  auto mean_rows = [&](NodeId features) {
    const Shape& s = tape.shape(features);
    NodeId ones = tape.constant(Tensor::full({s[0]}, 1.0));
    return tape.scale(tape.matmul(tape.transpose(features), ones),
                      1.0 / double(s[0]));
  };
  NodeId real_mean = mean_rows(real_trace.output);
  NodeId fake_mean = mean_rows(fake_trace.output);
  return tape.squared_norm(tape.sub(real_mean, fake_mean));
}

GeneratorTermNodes emit_generator_objective(
    Tape& tape, const ClassifierModel& clf, const LocalGeneratorModel& gen,
    NodeId labeled_x, const std::vector<int>& labels, NodeId labeled_z,
    NodeId unlabeled_x, NodeId unlabeled_z, double mu, double eta,
    const std::vector<std::size_t>& coords, const std::string& prefix,
    bool params_as_leaves) {
  gen.validate();
  clf.validate();
  const std::size_t n_l = batch_rows(tape, labeled_x);
  const std::size_t n_u = batch_rows(tape, unlabeled_x);

  std::vector<NodeId> weights, biases;
  emit_mlp_params(tape, gen.core, prefix, params_as_leaves, weights, biases);

  GeneratorTermNodes nodes;

  if (n_l > 0) {
    GeneratorTrace trace_l = emit_local_generate_with_params(
        tape, gen, labeled_x, labeled_z, weights, biases);
    nodes.label_preservation =
        emit_label_preservation(tape, clf, trace_l, labels);
  } else {
    nodes.label_preservation = zero_scalar(tape);
  }

  if (n_u > 0) {
    GeneratorTrace trace_u = emit_local_generate_with_params(
        tape, gen, unlabeled_x, unlabeled_z, weights, biases);
    nodes.feature_matching =
        emit_feature_matching(tape, clf, unlabeled_x, trace_u);
    nodes.omega =
        emit_regularizer_omega_parts(tape, trace_u, mu, eta, coords).total;
  } else {
    nodes.feature_matching = zero_scalar(tape);
    nodes.omega = zero_scalar(tape);
  }

  nodes.total = tape.add(tape.add(nodes.label_preservation,
                                  nodes.feature_matching),
                         nodes.omega);
  return nodes;
}

GeneratorTerms generator_objective_terms(const ClassifierModel& clf,
                                         const LocalGeneratorModel& gen,
                                         const Tensor& labeled_x,
                                         const std::vector<int>& labels,
                                         const Tensor& labeled_z,
                                         const Tensor& unlabeled_x,
                                         const Tensor& unlabeled_z, double mu,
                                         double eta,
                                         const std::vector<std::size_t>& coords) {
  Tape tape;
  GeneratorTermNodes nodes = emit_generator_objective(
      tape, clf, gen, tape.constant(labeled_x), labels,
      tape.constant(labeled_z), tape.constant(unlabeled_x),
      tape.constant(unlabeled_z), mu, eta, coords, "gen.",
      /*params_as_leaves=*/false);
  tape.forward({});
  GeneratorTerms terms;
  terms.label_preservation = tape.value(nodes.label_preservation).item();
  terms.feature_matching = tape.value(nodes.feature_matching).item();
  terms.omega = tape.value(nodes.omega).item();
  terms.total = tape.value(nodes.total).item();
  return terms;
}

GeneratorTerms generator_objective(const ClassifierModel& clf,
                                   const LocalGeneratorModel& gen,
                                   const Tensor& labeled_x,
                                   const std::vector<int>& labels,
                                   const Tensor& unlabeled_x, double mu,
                                   double eta, std::size_t coord_sample_size,
                                   double zero_weight, Rng& rng) {
  gen.validate();
  const std::size_t n_l = labeled_x.rank() == 2 ? labeled_x.rows() : 0;
  const std::size_t n_u = unlabeled_x.rank() == 2 ? unlabeled_x.rows() : 0;
  Tensor z_l = sample_local_noise_batch(n_l, gen.coord_dim, zero_weight, rng);
  Tensor z_u = sample_local_noise_batch(n_u, gen.coord_dim, zero_weight, rng);
  std::vector<std::size_t> coords =
      subsample_coordinates(gen.coord_dim, coord_sample_size, rng);
  return generator_objective_terms(clf, gen, labeled_x, labels, z_l,
                                   unlabeled_x, z_u, mu, eta, coords);
}

double classification_error(const ClassifierModel& clf, const Dataset& data) {
  clf.validate();
  data.validate(clf.num_classes);
  if (!data.labeled() || data.size() == 0) {
    throw Error("classification_error: need a labeled, nonempty dataset");
  }
  Tensor logits = classifier_logits(clf, data.points);
  std::size_t wrong = 0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < clf.num_classes; ++k) {
      if (logits.at(r, k) > logits.at(r, best)) best = k;
    }
    if (best != std::size_t(data.labels[r])) ++wrong;
  }
  return double(wrong) / double(data.size());
}

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = rng.below(i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace

SemiSupTrainResult train_semisup(const TrainConfig& config,
                                 const Dataset& labeled,
                                 const Dataset& unlabeled,
                                 const Dataset& validation,
                                 SemiSupModels models) {
  config.validate();
  models.classifier.validate();
  models.generator.validate();
  labeled.validate(models.classifier.num_classes);
  unlabeled.validate();
  validation.validate(models.classifier.num_classes);
  if (!labeled.labeled() || labeled.size() == 0) {
    throw Error("train_semisup: labeled set must be labeled and nonempty");
  }
  if (unlabeled.size() == 0) {
    throw Error("train_semisup: unlabeled set is empty");
  }
  if (!validation.labeled() || validation.size() == 0) {
    throw Error("train_semisup: validation set must be labeled and nonempty");
  }
  const std::size_t d = models.generator.ambient_dim;
  if (labeled.dim() != d || unlabeled.dim() != d || validation.dim() != d ||
      models.classifier.trunk.in_dim() != d) {
    throw Error("train_semisup: dimension mismatch between data and models");
  }

  const std::size_t n_u = unlabeled.size();
  const std::size_t n_l = labeled.size();
  const std::size_t coord_dim = models.generator.coord_dim;

  Mlp joint = models.classifier.as_mlp();
  ParamList clf_params = param_flatten(joint);
  ParamList gen_params = param_flatten(models.generator.core);
  AdamState clf_state = AdamState::like(clf_params, config.adam);
  AdamState gen_state = AdamState::like(gen_params, config.adam);

  Rng rng(config.seed);
  SemiSupTrainResult result;
  result.models = models;
  std::vector<double> val_history;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr_c = anneal_lr(config.lr_discriminator, epoch,
                                  config.epochs, config.anneal_start_epoch);
    const double lr_g = anneal_lr(config.lr_generator, epoch, config.epochs,
                                  config.anneal_start_epoch);
    std::vector<std::size_t> order = shuffled_indices(n_u, rng);

    SemiSupEpochRow row;
    row.epoch = epoch;
    row.lr_clf = lr_c;
    row.lr_gen = lr_g;
    double weight_sum = 0.0;

    for (std::size_t begin = 0; begin < n_u; begin += config.batch_size) {
      const std::size_t end = std::min(begin + config.batch_size, n_u);
      std::vector<std::size_t> batch_idx(order.begin() + long(begin),
                                         order.begin() + long(end));
      Tensor x_u = take_rows(unlabeled.points, batch_idx);
      const std::size_t m = batch_idx.size();

      // Labeled batch: the whole set when it fits, else a fresh subsample.
      Tensor x_l;
      std::vector<int> y_l;
      if (n_l <= config.batch_size) {
        x_l = labeled.points;
        y_l = labeled.labels;
      } else {
        std::vector<std::size_t> pick =
            subsample_coordinates(n_l, config.batch_size, rng);
        x_l = take_rows(labeled.points, pick);
        for (std::size_t i : pick) y_l.push_back(labeled.labels[i]);
      }

      // Classifier step.
      Tensor z_f = sample_local_noise_batch(m, coord_dim, config.zero_weight,
                                            rng);
      Tensor fakes = local_generate(result.models.generator, x_u, z_f);
      std::vector<Tensor> jacobians;
      if (config.grad_penalty) {
        jacobians = batch_tangent_jacobians(result.models.generator, x_u);
      }
      ClassifierTerms clf_terms;
      {
        Tape tape;
        ClassifierTermNodes nodes = emit_classifier_objective(
            tape, result.models.classifier, tape.constant(x_l), y_l,
            tape.constant(x_u), tape.constant(fakes), jacobians, "",
            /*params_as_leaves=*/true);
        Bindings bind;
        for (const auto& [name, value] : clf_params) bind.emplace(name, value);
        tape.forward(bind);
        clf_terms.labeled_ce = tape.value(nodes.labeled_ce).item();
        clf_terms.unlabeled_real = tape.value(nodes.unlabeled_real).item();
        clf_terms.fake_ce = tape.value(nodes.fake_ce).item();
        clf_terms.grad_penalty = tape.value(nodes.grad_penalty).item();
        clf_terms.total = tape.value(nodes.total).item();
        GradientMap grads = tape.backward(nodes.total);
        adam_step(clf_params, grads, clf_state, lr_c);
      }
      joint = param_unflatten(joint, clf_params);
      result.models.classifier =
          ClassifierModel::from_mlp(joint, models.classifier.num_classes);

      // Generator step against the just-updated classifier.
      Tensor z_l = sample_local_noise_batch(x_l.rows(), coord_dim,
                                            config.zero_weight, rng);
      Tensor z_u = sample_local_noise_batch(m, coord_dim, config.zero_weight,
                                            rng);
      std::vector<std::size_t> coords = subsample_coordinates(
          coord_dim, config.coord_sample_size, rng);
      GeneratorTerms gen_terms;
      {
        Tape tape;
        GeneratorTermNodes nodes = emit_generator_objective(
            tape, result.models.classifier, result.models.generator,
            tape.constant(x_l), y_l, tape.constant(z_l), tape.constant(x_u),
            tape.constant(z_u), config.mu, config.eta, coords, "",
            /*params_as_leaves=*/true);
        Bindings bind;
        for (const auto& [name, value] : gen_params) bind.emplace(name, value);
        tape.forward(bind);
        gen_terms.label_preservation =
            tape.value(nodes.label_preservation).item();
        gen_terms.feature_matching = tape.value(nodes.feature_matching).item();
        gen_terms.omega = tape.value(nodes.omega).item();
        gen_terms.total = tape.value(nodes.total).item();
        GradientMap grads = tape.backward(nodes.total);
        adam_step(gen_params, grads, gen_state, lr_g);
      }
      result.models.generator.core =
          param_unflatten(result.models.generator.core, gen_params);

      const double w = double(m);
      row.labeled_ce += w * clf_terms.labeled_ce;
      row.unlabeled_real += w * clf_terms.unlabeled_real;
      row.fake_ce += w * clf_terms.fake_ce;
      row.grad_penalty += w * clf_terms.grad_penalty;
      row.clf_total += w * clf_terms.total;
      row.label_preservation += w * gen_terms.label_preservation;
      row.feature_matching += w * gen_terms.feature_matching;
      row.omega += w * gen_terms.omega;
      row.gen_total += w * gen_terms.total;
      weight_sum += w;
    }

    row.labeled_ce /= weight_sum;
    row.unlabeled_real /= weight_sum;
    row.fake_ce /= weight_sum;
    row.grad_penalty /= weight_sum;
    row.clf_total /= weight_sum;
    row.label_preservation /= weight_sum;
    row.feature_matching /= weight_sum;
    row.omega /= weight_sum;
    row.gen_total /= weight_sum;
    if (!std::isfinite(row.clf_total) || !std::isfinite(row.gen_total)) {
      throw Error("train_semisup: non-finite loss at epoch " +
                  std::to_string(epoch));
    }

    row.val_error = classification_error(result.models.classifier, validation);
    result.log.push_back(row);
    val_history.push_back(row.val_error);
    if (early_stop_check(val_history, config.early_stop_patience,
                         config.early_stop_min_epoch)) {
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

}  // namespace lgan
