#include "lgan/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "lgan/rng.hpp"

namespace lgan {

AdamState AdamState::like(const ParamList& params, AdamConfig config) {
  AdamState state;
  state.config = config;
  state.m.reserve(params.size());
  state.v.reserve(params.size());
  for (const auto& [name, value] : params) {
    state.m.emplace_back(name, Tensor::zeros(value.shape()));
    state.v.emplace_back(name, Tensor::zeros(value.shape()));
  }
  return state;
}

void adam_step(ParamList& params, const GradientMap& grads, AdamState& state,
               double lr) {
  if (state.m.size() != params.size()) {
    throw Error("adam_step: state tracks " + std::to_string(state.m.size()) +
                " parameters, got " + std::to_string(params.size()));
  }
  state.t += 1;
  const double b1 = state.config.beta1;
  const double b2 = state.config.beta2;
  const double eps = state.config.epsilon;
  const double correction1 = 1.0 - std::pow(b1, double(state.t));
  const double correction2 = 1.0 - std::pow(b2, double(state.t));
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& [name, value] = params[p];
    if (state.m[p].first != name) {
      throw Error("adam_step: parameter order mismatch at " + name);
    }
    auto it = grads.find(name);
    if (it == grads.end()) {
      throw Error("adam_step: no gradient for parameter " + name);
    }
    const Tensor& g = it->second;
    if (!g.same_shape(value)) {
      throw Error("adam_step: gradient shape mismatch for " + name);
    }
    auto w = value.data();
    auto m = state.m[p].second.data();
    auto v = state.v[p].second.data();
    auto gd = g.data();
    const std::size_t n = w.size();
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * gd[i];
      v[i] = b2 * v[i] + (1.0 - b2) * gd[i] * gd[i];
      const double mhat = m[i] / correction1;
      const double vhat = v[i] / correction2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

void TrainConfig::validate() const {
  if (lr_discriminator <= 0.0 || lr_generator <= 0.0) {
    throw Error("TrainConfig: learning rates must be positive");
  }
  if (mu < 0.0 || eta < 0.0) {
    throw Error("TrainConfig: mu and eta must be nonnegative");
  }
  if (batch_size == 0) {
    throw Error("TrainConfig: batch_size must be positive");
  }
  if (coord_sample_size == 0) {
    throw Error("TrainConfig: coord_sample_size must be positive");
  }
  if (zero_weight < 0.0 || zero_weight > 1.0) {
    throw Error("TrainConfig: zero_weight must lie in [0, 1]");
  }
  if (adam.beta1 < 0.0 || adam.beta1 >= 1.0 || adam.beta2 < 0.0 ||
      adam.beta2 >= 1.0) {
    throw Error("TrainConfig: Adam betas must lie in [0, 1)");
  }
  if (adam.epsilon <= 0.0) {
    throw Error("TrainConfig: Adam epsilon must be positive");
  }
}

namespace {

void check_disc(const Mlp& disc) {
  if (disc.layers.empty() || disc.out_dim() != 1) {
    throw Error("discriminator must be an Mlp with one output logit");
  }
  if (disc.layers.back().activation != Activation::Linear) {
    throw Error("discriminator output layer must be linear");
  }
}

NodeId emit_log_sigmoid_mean(Tape& tape, NodeId logits, bool complement) {
  // logits: [n, 1]. Probability branch is clamped so the log stays finite.
  NodeId prob = tape.sigmoid(logits);
  if (complement) {
    NodeId one = tape.constant(Tensor::full(tape.shape(prob), 1.0));
    prob = tape.sub(one, prob);
  }
  NodeId safe = tape.clamp(prob, 1e-7, 1.0 - 1e-7);
  return tape.mean(tape.log(safe));
}

}  // namespace

NodeId emit_discriminator_loss(Tape& tape, const Mlp& disc, NodeId real,
                               NodeId fake, const std::string& prefix,
                               bool params_as_leaves) {
  check_disc(disc);
  std::vector<NodeId> weights;
  std::vector<NodeId> biases;
  emit_mlp_params(tape, disc, prefix, params_as_leaves, weights, biases);
  MlpTrace trace_real =
      emit_mlp_forward_with_params(tape, disc, real, weights, biases);
  MlpTrace trace_fake =
      emit_mlp_forward_with_params(tape, disc, fake, weights, biases);
  NodeId real_term = emit_log_sigmoid_mean(tape, trace_real.output, false);
  NodeId fake_term = emit_log_sigmoid_mean(tape, trace_fake.output, true);
  return tape.scale(tape.add(real_term, fake_term), -1.0);
}

NodeId emit_generator_adv_loss(Tape& tape, const Mlp& disc,
                               const GeneratorTrace& gen_trace) {
  check_disc(disc);
  MlpTrace trace = emit_mlp_forward(tape, disc, gen_trace.output, "disc.",
                                    /*params_as_leaves=*/false);
  return tape.scale(emit_log_sigmoid_mean(tape, trace.output, false), -1.0);
}

double discriminator_loss(const Mlp& disc, const Tensor& real_batch,
                          const Tensor& fake_batch) {
  if (real_batch.rows() == 0 || fake_batch.rows() == 0) {
    throw Error("discriminator_loss: empty batch");
  }
  Tape tape;
  NodeId real = tape.constant(real_batch);
  NodeId fake = tape.constant(fake_batch);
  NodeId loss = emit_discriminator_loss(tape, disc, real, fake, "disc.",
                                        /*params_as_leaves=*/false);
  tape.forward({});
  return tape.value(loss).item();
}

double generator_adv_loss(const Mlp& disc, const LocalGeneratorModel& model,
                          const Tensor& x_batch, const Tensor& z_batch) {
  if (x_batch.rows() == 0) {
    throw Error("generator_adv_loss: empty batch");
  }
  Tape tape;
  GeneratorTrace gen_trace =
      emit_local_generate(tape, model, tape.constant(x_batch),
                          tape.constant(z_batch), "gen.",
                          /*params_as_leaves=*/false);
  NodeId loss = emit_generator_adv_loss(tape, disc, gen_trace);
  tape.forward({});
  return tape.value(loss).item();
}

double anneal_lr(double base_lr, std::size_t epoch, std::size_t total_epochs,
                 std::size_t anneal_start) {
  if (anneal_start >= total_epochs) {
    return epoch >= total_epochs ? 0.0 : base_lr;
  }
  if (epoch >= total_epochs) {
    return 0.0;
  }
  if (epoch < anneal_start) {
    return base_lr;
  }
  return base_lr * double(total_epochs - epoch) /
         double(total_epochs - anneal_start);
}

bool early_stop_check(const std::vector<double>& history, std::size_t patience,
                      std::size_t min_epoch) {
  if (history.size() < min_epoch || history.empty()) {
    return false;
  }
  std::size_t last_improvement = 0;
  double best = history[0];
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (history[i] < best) {
      best = history[i];
      last_improvement = i;
    }
  }
  return history.size() - 1 - last_improvement >= patience;
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

GanTrainResult train_gan(const TrainConfig& config, const Dataset& data,
                         GanModels models) {
  config.validate();
  models.generator.validate();
  check_disc(models.discriminator);
  data.validate();
  if (data.size() == 0) {
    throw Error("train_gan: empty dataset");
  }
  if (data.dim() != models.generator.ambient_dim) {
    throw Error("train_gan: data dimension " + std::to_string(data.dim()) +
                " does not match generator ambient dimension " +
                std::to_string(models.generator.ambient_dim));
  }
  if (models.discriminator.in_dim() != models.generator.ambient_dim) {
    throw Error("train_gan: discriminator input dimension mismatch");
  }

  const std::size_t n = data.size();
  const std::size_t coord_dim = models.generator.coord_dim;

  ParamList disc_params = param_flatten(models.discriminator);
  ParamList gen_params = param_flatten(models.generator.core);
  AdamState disc_state = AdamState::like(disc_params, config.adam);
  AdamState gen_state = AdamState::like(gen_params, config.adam);

  Rng rng(config.seed);
  GanTrainResult result;
  result.models = models;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr_d = anneal_lr(config.lr_discriminator, epoch,
                                  config.epochs, config.anneal_start_epoch);
    const double lr_g = anneal_lr(config.lr_generator, epoch, config.epochs,
                                  config.anneal_start_epoch);
    std::vector<std::size_t> order = shuffled_indices(n, rng);

    GanEpochRow row;
    row.epoch = epoch;
    row.lr_disc = lr_d;
    row.lr_gen = lr_g;
    double weight_sum = 0.0;

    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const std::size_t end = std::min(begin + config.batch_size, n);
      std::vector<std::size_t> batch_idx(order.begin() + long(begin),
                                         order.begin() + long(end));
      Tensor x_batch = take_rows(data.points, batch_idx);
      const std::size_t m = batch_idx.size();

      // Discriminator step against freshly generated fakes.
      Tensor z_d = sample_local_noise_batch(m, coord_dim, config.zero_weight,
                                            rng);
      Tensor fakes = local_generate(result.models.generator, x_batch, z_d);
      double disc_loss_value = 0.0;
      {
        Tape tape;
        NodeId real = tape.constant(x_batch);
        NodeId fake = tape.constant(fakes);
        NodeId loss =
            emit_discriminator_loss(tape, result.models.discriminator, real,
                                    fake, "", /*params_as_leaves=*/true);
        Bindings bindings;
        for (const auto& [name, value] : disc_params) {
          bindings.emplace(name, value);
        }
        tape.forward(bindings);
        disc_loss_value = tape.value(loss).item();
        GradientMap grads = tape.backward(loss);
        adam_step(disc_params, grads, disc_state, lr_d);
      }
      result.models.discriminator =
          param_unflatten(result.models.discriminator, disc_params);

      // Generator step: adversarial term plus regularizer, frozen critic.
      Tensor z_g = sample_local_noise_batch(m, coord_dim, config.zero_weight,
                                            rng);
      std::vector<std::size_t> coords = subsample_coordinates(
          coord_dim, config.coord_sample_size, rng);
      double adv_value = 0.0;
      OmegaNodes omega_nodes;
      double omega_value = 0.0;
      double locality_value = 0.0;
      double orth_value = 0.0;
      {
        Tape tape;
        GeneratorTrace gen_trace = emit_local_generate(
            tape, result.models.generator, tape.constant(x_batch),
            tape.constant(z_g), "", /*params_as_leaves=*/true);
        NodeId adv = emit_generator_adv_loss(
            tape, result.models.discriminator, gen_trace);
        omega_nodes = emit_regularizer_omega_parts(
            tape, gen_trace, config.mu, config.eta, coords);
        NodeId total = tape.add(adv, omega_nodes.total);
        Bindings bindings;
        for (const auto& [name, value] : gen_params) {
          bindings.emplace(name, value);
        }
        tape.forward(bindings);
        adv_value = tape.value(adv).item();
        omega_value = tape.value(omega_nodes.total).item();
        locality_value = tape.value(omega_nodes.locality).item();
        orth_value = tape.value(omega_nodes.orthonormality).item();
        GradientMap grads = tape.backward(total);
        adam_step(gen_params, grads, gen_state, lr_g);
      }
      result.models.generator.core =
          param_unflatten(result.models.generator.core, gen_params);

      const double w = double(m);
      row.disc_loss += w * disc_loss_value;
      row.gen_adv += w * adv_value;
      row.omega += w * omega_value;
      row.locality += w * locality_value;
      row.orthonormality += w * orth_value;
      weight_sum += w;
    }

    row.disc_loss /= weight_sum;
    row.gen_adv /= weight_sum;
    row.omega /= weight_sum;
    row.locality /= weight_sum;
    row.orthonormality /= weight_sum;
    if (!std::isfinite(row.disc_loss) || !std::isfinite(row.gen_adv) ||
        !std::isfinite(row.omega)) {
      throw Error("train_gan: non-finite loss at epoch " +
                  std::to_string(epoch));
    }
    result.log.push_back(row);
  }
  return result;
}

}  // namespace lgan
