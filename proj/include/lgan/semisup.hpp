#ifndef LGAN_SEMISUP_HPP
#define LGAN_SEMISUP_HPP

#include <vector>

#include "lgan/classifier.hpp"
#include "lgan/data.hpp"
#include "lgan/geometry.hpp"
#include "lgan/manifold.hpp"
#include "lgan/training.hpp"

namespace lgan {

/// The four classifier terms: cross entropy on labeled points, the
/// real-versus-fake mass term on unlabeled points, cross entropy of fakes
/// into the extra class, and the chart gradient-norm penalty. An empty batch
/// contributes zero to the term it feeds.
struct ClassifierTerms {
  double labeled_ce = 0.0;
  double unlabeled_real = 0.0;
  double fake_ce = 0.0;
  double grad_penalty = 0.0;
  double total = 0.0;
};

struct ClassifierTermNodes {
  NodeId labeled_ce;
  NodeId unlabeled_real;
  NodeId fake_ce;
  NodeId grad_penalty;
  NodeId total;
};

/// The generator's three terms: label preservation (cross entropy of the
/// classifier at generated labeled points), feature matching between real
/// and generated unlabeled points, and the generator regularizer.
struct GeneratorTerms {
  double label_preservation = 0.0;
  double feature_matching = 0.0;
  double omega = 0.0;
  double total = 0.0;
};

struct GeneratorTermNodes {
  NodeId label_preservation;
  NodeId feature_matching;
  NodeId omega;
  NodeId total;
};

/// Traced classifier objective. Parameter nodes are "{prefix}layer{i}.*" over
/// the joint trunk-plus-head network. `jacobians` holds one [D, N] tangent
/// basis per unlabeled row and enables the gradient-norm penalty; pass empty
/// to disable it.
ClassifierTermNodes emit_classifier_objective(
    Tape& tape, const ClassifierModel& clf, NodeId labeled_x,
    const std::vector<int>& labels, NodeId unlabeled_x, NodeId fake_x,
    const std::vector<Tensor>& jacobians, const std::string& prefix,
    bool params_as_leaves);

/// Numeric classifier objective on fixed batches (fakes and tangent bases
/// supplied by the caller).
ClassifierTerms classifier_objective_terms(const ClassifierModel& clf,
                                           const Tensor& labeled_x,
                                           const std::vector<int>& labels,
                                           const Tensor& unlabeled_x,
                                           const Tensor& fake_x,
                                           const std::vector<Tensor>& jacobians);

/// Draws fake points from the generator (one coordinate-noise batch) and
/// evaluates the objective. Tangent bases are computed only when
/// `penalty_enabled`, and their computation consumes no randomness, so the
/// random stream is identical with the penalty on or off.
ClassifierTerms classifier_objective(const ClassifierModel& clf,
                                     const LocalGeneratorModel& gen,
                                     const Tensor& labeled_x,
                                     const std::vector<int>& labels,
                                     const Tensor& unlabeled_x,
                                     double zero_weight, bool penalty_enabled,
                                     Rng& rng);

/// Cross entropy of the (frozen) classifier at generated points against the
/// original labels of their base points.
NodeId emit_label_preservation(Tape& tape, const ClassifierModel& clf,
                               const GeneratorTrace& gen_trace,
                               const std::vector<int>& labels);

/// Squared distance between mean trunk features of real points and of
/// generated points.
NodeId emit_feature_matching(Tape& tape, const ClassifierModel& clf,
                             NodeId real_x, const GeneratorTrace& gen_trace);

/// Traced generator objective: label preservation on the labeled batch,
/// feature matching plus regularizer on the unlabeled batch. Generator
/// parameters are "{prefix}layer{i}.*"; the classifier is frozen.
GeneratorTermNodes emit_generator_objective(
    Tape& tape, const ClassifierModel& clf, const LocalGeneratorModel& gen,
    NodeId labeled_x, const std::vector<int>& labels, NodeId labeled_z,
    NodeId unlabeled_x, NodeId unlabeled_z, double mu, double eta,
    const std::vector<std::size_t>& coords, const std::string& prefix,
    bool params_as_leaves);

/// Numeric generator objective on fixed noise and coordinate choices.
GeneratorTerms generator_objective_terms(const ClassifierModel& clf,
                                         const LocalGeneratorModel& gen,
                                         const Tensor& labeled_x,
                                         const std::vector<int>& labels,
                                         const Tensor& labeled_z,
                                         const Tensor& unlabeled_x,
                                         const Tensor& unlabeled_z, double mu,
                                         double eta,
                                         const std::vector<std::size_t>& coords);

/// Draws labeled noise, unlabeled noise, and the coordinate subset (in that
/// order) from `rng`, then evaluates the objective.
GeneratorTerms generator_objective(const ClassifierModel& clf,
                                   const LocalGeneratorModel& gen,
                                   const Tensor& labeled_x,
                                   const std::vector<int>& labels,
                                   const Tensor& unlabeled_x, double mu,
                                   double eta, std::size_t coord_sample_size,
                                   double zero_weight, Rng& rng);

struct SemiSupModels {
  ClassifierModel classifier;
  LocalGeneratorModel generator;
};

struct SemiSupEpochRow {
  std::size_t epoch = 0;
  double lr_clf = 0.0;
  double lr_gen = 0.0;
  double labeled_ce = 0.0;
  double unlabeled_real = 0.0;
  double fake_ce = 0.0;
  double grad_penalty = 0.0;
  double clf_total = 0.0;
  double label_preservation = 0.0;
  double feature_matching = 0.0;
  double omega = 0.0;
  double gen_total = 0.0;
  double val_error = 0.0;
};

struct SemiSupTrainResult {
  SemiSupModels models;
  std::vector<SemiSupEpochRow> log;
  /// True when validation error stopped improving before the epoch budget.
  bool stopped_early = false;
};

/// Fraction of points whose predicted class differs from the label.
double classification_error(const ClassifierModel& clf, const Dataset& data);

/// Alternating semi-supervised training: per unlabeled minibatch one
/// classifier Adam step, then one generator Adam step. The whole labeled set
/// rides along when it fits in a batch; larger labeled sets are subsampled
/// per step. Early stopping watches validation error. Deterministic per
/// (config, data, seed).
SemiSupTrainResult train_semisup(const TrainConfig& config,
                                 const Dataset& labeled,
                                 const Dataset& unlabeled,
                                 const Dataset& validation,
                                 SemiSupModels models);

}  // namespace lgan

#endif
