#ifndef LGAN_NETS_HPP
#define LGAN_NETS_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lgan/tape.hpp"
#include "lgan/tensor.hpp"

namespace lgan {

enum class Activation : std::uint8_t { Linear, LeakyRelu, Tanh, Sigmoid };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

/// Fully connected layer y = act(W x + b), weights stored out-by-in.
struct DenseLayer {
  Tensor weights;
  Tensor bias;
  Activation activation = Activation::Linear;

  std::size_t in_dim() const { return weights.cols(); }
  std::size_t out_dim() const { return weights.rows(); }
};

struct Mlp {
  std::vector<DenseLayer> layers;

  std::size_t in_dim() const;
  std::size_t out_dim() const;
};

/// Layer widths [in, hidden..., out] plus one activation per layer.
struct MlpSpec {
  std::vector<std::size_t> widths;
  std::vector<Activation> activations;
};

/// Builds a hidden-stack spec: every hidden layer uses `hidden_act`, the
/// output layer is linear.
MlpSpec mlp_spec(std::size_t in, const std::vector<std::size_t>& hidden,
                 std::size_t out, Activation hidden_act);

/// Applies the network to a vector [in] or a batch matrix [n, in], row-wise.
/// Batch rows evaluate exactly as the corresponding single-row calls.
Tensor mlp_forward(const Mlp& net, const Tensor& input);

/// Weights drawn uniformly from [-s, s] with s = sqrt(6 / (fan_in + fan_out)),
/// biases zero. A pure function of (spec, seed).
Mlp init_params(const MlpSpec& spec, std::uint64_t seed);

using ParamList = std::vector<std::pair<std::string, Tensor>>;

/// Parameters in stable order: layer index ascending, weights before bias,
/// named "layer{i}.weights" / "layer{i}.bias".
ParamList param_flatten(const Mlp& net);

/// Rebuilds a network shaped like `like` from named parameters; the inverse
/// of param_flatten.
Mlp param_unflatten(const Mlp& like, const ParamList& params);

// ---- tape emission ---------------------------------------------------------

/// Forward trace of one Mlp applied to a batch node [n, in]. Parameter nodes
/// are leaves named "{prefix}layer{i}.weights" / ".bias" (bind them with
/// param_bindings) or constants frozen at emission time.
struct MlpTrace {
  NodeId input;
  NodeId output;
  std::vector<NodeId> weights;
  std::vector<NodeId> biases;
  std::vector<NodeId> preacts;
  std::vector<NodeId> posts;
  const Mlp* net = nullptr;
};

MlpTrace emit_mlp_forward(Tape& tape, const Mlp& net, NodeId input,
                          const std::string& prefix, bool params_as_leaves);

/// Creates one parameter node per layer tensor (leaves named with `prefix`
/// or constants frozen from `net`). Feed these to
/// emit_mlp_forward_with_params to share parameters across several traces.
void emit_mlp_params(Tape& tape, const Mlp& net, const std::string& prefix,
                     bool params_as_leaves, std::vector<NodeId>& weights,
                     std::vector<NodeId>& biases);

/// Forward trace reusing existing parameter nodes (e.g. two passes of the
/// same network inside one loss).
MlpTrace emit_mlp_forward_with_params(Tape& tape, const Mlp& net, NodeId input,
                                      const std::vector<NodeId>& weights,
                                      const std::vector<NodeId>& biases);

/// Leaf bindings for a trace emitted with params_as_leaves.
void add_param_bindings(Bindings& bindings, const Mlp& net,
                        const std::string& prefix);

/// Derivative of layer `layer`'s activation at its pre-activation, as a tape
/// expression shaped like the layer output.
NodeId emit_activation_deriv(Tape& tape, const MlpTrace& trace,
                             std::size_t layer);

/// Pulls a gradient with respect to the network output [n, out] back to a
/// gradient with respect to the network input [n, in], as tape expressions
/// (the vector-Jacobian product of the traced forward pass).
NodeId emit_input_gradient(Tape& tape, const MlpTrace& trace,
                           NodeId grad_wrt_output);

/// Directional derivative of the traced network along the unit input
/// direction e_{input_coord}, batched: returns [n, out] (the Jacobian-vector
/// product, one Jacobian column per batch row).
NodeId emit_jvp(Tape& tape, const MlpTrace& trace, std::size_t input_coord);

}  // namespace lgan

#endif
