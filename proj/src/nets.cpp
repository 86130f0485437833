#include "lgan/nets.hpp"

#include <cmath>

#include "lgan/rng.hpp"

namespace lgan {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::LeakyRelu: return "leaky_relu";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "?";
}

Activation activation_from_name(const std::string& name) {
  if (name == "linear") return Activation::Linear;
  if (name == "leaky_relu") return Activation::LeakyRelu;
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid") return Activation::Sigmoid;
  throw Error("unknown activation '" + name + "'");
}

std::size_t Mlp::in_dim() const {
  if (layers.empty()) throw Error("mlp: no layers");
  return layers.front().in_dim();
}

std::size_t Mlp::out_dim() const {
  if (layers.empty()) throw Error("mlp: no layers");
  return layers.back().out_dim();
}

MlpSpec mlp_spec(std::size_t in, const std::vector<std::size_t>& hidden,
                 std::size_t out, Activation hidden_act) {
  MlpSpec spec;
  spec.widths.push_back(in);
  for (std::size_t h : hidden) {
    spec.widths.push_back(h);
    spec.activations.push_back(hidden_act);
  }
  spec.widths.push_back(out);
  spec.activations.push_back(Activation::Linear);
  return spec;
}

namespace {

double apply_activation(Activation a, double v) {
  switch (a) {
    case Activation::Linear: return v;
    case Activation::LeakyRelu: return v > 0.0 ? v : 0.2 * v;
    case Activation::Tanh: return std::tanh(v);
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-v));
  }
  return v;
}

}  // namespace

Tensor mlp_forward(const Mlp& net, const Tensor& input) {
  if (net.layers.empty()) throw Error("mlp_forward: network has no layers");
  bool single = input.rank() == 1;
  if (input.rank() != 1 && input.rank() != 2) {
    throw Error("mlp_forward: input must be a vector or batch matrix, got " +
                shape_str(input.shape()));
  }
  std::size_t n = single ? 1 : input.shape()[0];
  std::size_t width = single ? input.shape()[0] : input.shape()[1];
  if (width != net.in_dim()) {
    throw Error("mlp_forward: input width " + std::to_string(width) +
                " does not match first layer in-dimension " +
                std::to_string(net.in_dim()));
  }

  Tensor cur = single ? Tensor(Shape{1, width}, {input.data().begin(),
                                                 input.data().end()})
                      : input;
  for (const DenseLayer& layer : net.layers) {
    std::size_t in = layer.in_dim(), out = layer.out_dim();
    Tensor next(Shape{n, out});
    auto xd = cur.data();
    auto wd = layer.weights.data();
    auto bd = layer.bias.data();
    auto od = next.data();
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t o = 0; o < out; ++o) {
        double s = 0.0;
        for (std::size_t t = 0; t < in; ++t) {
          s += xd[r * in + t] * wd[o * in + t];
        }
        od[r * out + o] = apply_activation(layer.activation, s + bd[o]);
      }
    }
    cur = std::move(next);
  }
  if (single) {
    return Tensor(Shape{net.out_dim()},
                  {cur.data().begin(), cur.data().end()});
  }
  return cur;
}

Mlp init_params(const MlpSpec& spec, std::uint64_t seed) {
  if (spec.widths.size() < 2) {
    throw Error("init_params: need at least an input and an output width");
  }
  if (spec.activations.size() + 1 != spec.widths.size()) {
    throw Error("init_params: expected one activation per layer (" +
                std::to_string(spec.widths.size() - 1) + "), got " +
                std::to_string(spec.activations.size()));
  }
  for (std::size_t w : spec.widths) {
    if (w == 0) throw Error("init_params: zero-width layer");
  }
  Rng rng(seed);
  Mlp net;
  for (std::size_t i = 0; i + 1 < spec.widths.size(); ++i) {
    std::size_t fan_in = spec.widths[i], fan_out = spec.widths[i + 1];
    double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    DenseLayer layer;
    layer.weights = Tensor(Shape{fan_out, fan_in});
    for (double& w : layer.weights.data()) {
      w = (2.0 * rng.uniform() - 1.0) * s;
    }
    layer.bias = Tensor::zeros({fan_out});
    layer.activation = spec.activations[i];
    net.layers.push_back(std::move(layer));
  }
  return net;
}

ParamList param_flatten(const Mlp& net) {
  ParamList params;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    std::string base = "layer" + std::to_string(i);
    params.emplace_back(base + ".weights", net.layers[i].weights);
    params.emplace_back(base + ".bias", net.layers[i].bias);
  }
  return params;
}

Mlp param_unflatten(const Mlp& like, const ParamList& params) {
  Mlp net = like;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    std::string base = "layer" + std::to_string(i);
    for (const char* part : {".weights", ".bias"}) {
      std::string name = base + part;
      const Tensor* found = nullptr;
      for (const auto& [pname, value] : params) {
        if (pname == name) {
          found = &value;
          break;
        }
      }
      if (!found) throw Error("param_unflatten: missing parameter '" + name + "'");
      Tensor& dst = part == std::string(".weights") ? net.layers[i].weights
                                                    : net.layers[i].bias;
      if (!found->same_shape(dst)) {
        throw Error("param_unflatten: parameter '" + name + "' has shape " +
                    shape_str(found->shape()) + ", expected " +
                    shape_str(dst.shape()));
      }
      dst = *found;
    }
  }
  return net;
}

void emit_mlp_params(Tape& tape, const Mlp& net, const std::string& prefix,
                     bool params_as_leaves, std::vector<NodeId>& weights,
                     std::vector<NodeId>& biases) {
  weights.clear();
  biases.clear();
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const DenseLayer& layer = net.layers[i];
    std::string base = prefix + "layer" + std::to_string(i);
    weights.push_back(params_as_leaves
                          ? tape.leaf(base + ".weights", layer.weights.shape())
                          : tape.constant(layer.weights));
    biases.push_back(params_as_leaves
                         ? tape.leaf(base + ".bias", layer.bias.shape())
                         : tape.constant(layer.bias));
  }
}

MlpTrace emit_mlp_forward_with_params(Tape& tape, const Mlp& net, NodeId input,
                                      const std::vector<NodeId>& weights,
                                      const std::vector<NodeId>& biases) {
  if (net.layers.empty()) throw Error("emit_mlp_forward: network has no layers");
  if (weights.size() != net.layers.size() || biases.size() != net.layers.size()) {
    throw Error("emit_mlp_forward: parameter node count does not match layers");
  }
  const Shape& in_shape = tape.shape(input);
  if (in_shape.size() != 2 || in_shape[1] != net.in_dim()) {
    throw Error("emit_mlp_forward: input must be a batch matrix of width " +
                std::to_string(net.in_dim()) + ", got " + shape_str(in_shape));
  }
  MlpTrace trace;
  trace.input = input;
  trace.net = &net;
  trace.weights = weights;
  trace.biases = biases;
  NodeId cur = input;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    NodeId pre = tape.add_rowvec(tape.matmul(cur, tape.transpose(weights[i])),
                                 biases[i]);
    trace.preacts.push_back(pre);
    NodeId post = pre;
    switch (net.layers[i].activation) {
      case Activation::Linear: break;
      case Activation::LeakyRelu: post = tape.leaky_relu(pre, 0.2); break;
      case Activation::Tanh: post = tape.tanh(pre); break;
      case Activation::Sigmoid: post = tape.sigmoid(pre); break;
    }
    trace.posts.push_back(post);
    cur = post;
  }
  trace.output = cur;
  return trace;
}

MlpTrace emit_mlp_forward(Tape& tape, const Mlp& net, NodeId input,
                          const std::string& prefix, bool params_as_leaves) {
  std::vector<NodeId> weights, biases;
  emit_mlp_params(tape, net, prefix, params_as_leaves, weights, biases);
  return emit_mlp_forward_with_params(tape, net, input, weights, biases);
}

void add_param_bindings(Bindings& bindings, const Mlp& net,
                        const std::string& prefix) {
  for (auto& [name, value] : param_flatten(net)) {
    bindings.emplace(prefix + name, std::move(value));
  }
}

NodeId emit_activation_deriv(Tape& tape, const MlpTrace& trace,
                             std::size_t layer) {
  if (!trace.net || layer >= trace.net->layers.size()) {
    throw Error("emit_activation_deriv: layer index out of range");
  }
  NodeId pre = trace.preacts[layer];
  NodeId post = trace.posts[layer];
  const Shape& s = tape.shape(post);
  switch (trace.net->layers[layer].activation) {
    case Activation::Linear:
      return tape.constant(Tensor::full(s, 1.0));
    case Activation::LeakyRelu:
      return tape.leaky_relu_deriv(pre, 0.2);
    case Activation::Tanh:
      // d tanh(u)/du = 1 - tanh(u)^2
      return tape.sub(tape.constant(Tensor::full(s, 1.0)),
                      tape.mul(post, post));
    case Activation::Sigmoid:
      // d sigma(u)/du = sigma(u) (1 - sigma(u))
      return tape.mul(post, tape.sub(tape.constant(Tensor::full(s, 1.0)), post));
  }
  throw Error("emit_activation_deriv: unknown activation");
}

NodeId emit_input_gradient(Tape& tape, const MlpTrace& trace,
                           NodeId grad_wrt_output) {
  if (!trace.net) throw Error("emit_input_gradient: empty trace");
  const Shape& gs = tape.shape(grad_wrt_output);
  const Shape& os = tape.shape(trace.output);
  if (gs != os) {
    throw Error("emit_input_gradient: gradient shape " + shape_str(gs) +
                " does not match output shape " + shape_str(os));
  }
  NodeId g = grad_wrt_output;
  for (std::size_t i = trace.net->layers.size(); i-- > 0;) {
    if (trace.net->layers[i].activation != Activation::Linear) {
      g = tape.mul(g, emit_activation_deriv(tape, trace, i));
    }
    g = tape.matmul(g, trace.weights[i]);
  }
  return g;
}

NodeId emit_jvp(Tape& tape, const MlpTrace& trace, std::size_t input_coord) {
  if (!trace.net) throw Error("emit_jvp: empty trace");
  const Shape& in_shape = tape.shape(trace.input);
  if (input_coord >= in_shape[1]) {
    throw Error("emit_jvp: input coordinate " + std::to_string(input_coord) +
                " out of range for width " + std::to_string(in_shape[1]));
  }
  std::size_t n = in_shape[0];
  // First layer: the tangent of the pre-activation along e_coord is column
  // `input_coord` of the weight matrix, identical for every batch row.
  const Mlp& net = *trace.net;
  NodeId w0col = tape.row_sum(tape.gather_cols(trace.weights[0], {input_coord}));
  NodeId u = tape.mul_rowvec(
      tape.constant(Tensor::full({n, net.layers[0].out_dim()}, 1.0)), w0col);
  if (net.layers[0].activation != Activation::Linear) {
    u = tape.mul(emit_activation_deriv(tape, trace, 0), u);
  }
  for (std::size_t i = 1; i < net.layers.size(); ++i) {
    u = tape.matmul(u, tape.transpose(trace.weights[i]));
    if (net.layers[i].activation != Activation::Linear) {
      u = tape.mul(emit_activation_deriv(tape, trace, i), u);
    }
  }
  return u;
}

}  // namespace lgan
