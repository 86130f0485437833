#ifndef LGAN_TRAINING_HPP
#define LGAN_TRAINING_HPP

#include <cstdint>
#include <vector>

#include "lgan/data.hpp"
#include "lgan/geometry.hpp"
#include "lgan/nets.hpp"
#include "lgan/tape.hpp"

namespace lgan {

struct AdamConfig {
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Per-parameter moment estimates, shaped like the parameters they track.
struct AdamState {
  ParamList m;
  ParamList v;
  std::uint64_t t = 0;
  AdamConfig config;

  static AdamState like(const ParamList& params, AdamConfig config = {});
};

/// One Adam update over every parameter, in place. Gradients are looked up
/// by parameter name; the step counter advances once per call.
void adam_step(ParamList& params, const GradientMap& grads, AdamState& state,
               double lr);

struct TrainConfig {
  double lr_discriminator = 5e-5;
  double lr_generator = 1e-3;
  double mu = 1.0;
  double eta = 0.1;
  std::size_t batch_size = 64;
  std::size_t epochs = 0;
  std::size_t coord_sample_size = 10;
  double zero_weight = 0.1;
  /// First epoch of the linear learning-rate decay; >= epochs disables it.
  std::size_t anneal_start_epoch = SIZE_MAX;
  std::size_t early_stop_patience = 100;
  std::size_t early_stop_min_epoch = 600;
  std::uint64_t seed = 0;
  AdamConfig adam;
  /// Gradient-norm penalty of the semi-supervised classifier objective;
  /// disabling it changes no random draws (ablation arms share streams).
  bool grad_penalty = true;

  void validate() const;
};

/// Binary cross-entropy of a sigmoid discriminator (an Mlp with one output
/// logit): -[mean log D(real) + mean log(1 - D(fake))]. Sigmoid outputs are
/// clamped into [1e-7, 1 - 1e-7] before the log, so each summand is positive
/// and finite.
double discriminator_loss(const Mlp& disc, const Tensor& real_batch,
                          const Tensor& fake_batch);

/// -mean log D(G(x, z)): the generator's adversarial term (its full loss
/// adds the batch-mean regularizer).
double generator_adv_loss(const Mlp& disc, const LocalGeneratorModel& model,
                          const Tensor& x_batch, const Tensor& z_batch);

/// Traced discriminator loss; the two discriminator passes share parameter
/// nodes named "{prefix}layer{i}.*".
NodeId emit_discriminator_loss(Tape& tape, const Mlp& disc, NodeId real,
                               NodeId fake, const std::string& prefix,
                               bool params_as_leaves);

/// Traced adversarial term on an existing generator trace; discriminator
/// parameters are frozen constants.
NodeId emit_generator_adv_loss(Tape& tape, const Mlp& disc,
                               const GeneratorTrace& gen_trace);

/// base_lr before anneal_start, then linear decay hitting 0 at total_epochs.
double anneal_lr(double base_lr, std::size_t epoch, std::size_t total_epochs,
                 std::size_t anneal_start);

/// True when training should stop: at least min_epoch entries, and the most
/// recent strict improvement of the running best lies at least `patience`
/// entries in the past.
bool early_stop_check(const std::vector<double>& history, std::size_t patience,
                      std::size_t min_epoch);

struct GanModels {
  LocalGeneratorModel generator;
  Mlp discriminator;
};

struct GanEpochRow {
  std::size_t epoch = 0;
  double lr_disc = 0.0;
  double lr_gen = 0.0;
  double disc_loss = 0.0;
  double gen_adv = 0.0;
  double omega = 0.0;
  double locality = 0.0;
  double orthonormality = 0.0;
};

struct GanTrainResult {
  GanModels models;
  std::vector<GanEpochRow> log;
};

/// Alternating adversarial training: per minibatch one discriminator Adam
/// step against numerically generated fakes, then one generator Adam step on
/// the adversarial term plus the regularizer. Fully deterministic per
/// (config, data, seed).
GanTrainResult train_gan(const TrainConfig& config, const Dataset& data,
                         GanModels models);

}  // namespace lgan

#endif
