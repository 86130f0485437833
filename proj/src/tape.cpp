#include "lgan/tape.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace lgan {
namespace {

void check_rank2(const char* opname, const Shape& s) {
  if (s.size() != 2) {
    throw Error(std::string(opname) + ": expected a matrix, got shape " +
                shape_str(s));
  }
}

// Rowwise log-sum-exp with the max subtracted before exponentiation.
double lse(const double* x, std::size_t m) {
  double mx = x[0];
  for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, x[j]);
  double s = 0.0;
  for (std::size_t j = 0; j < m; ++j) s += std::exp(x[j] - mx);
  return mx + std::log(s);
}

void softmax_into(const double* x, std::size_t m, double* out) {
  double mx = x[0];
  for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, x[j]);
  double s = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    out[j] = std::exp(x[j] - mx);
    s += out[j];
  }
  for (std::size_t j = 0; j < m; ++j) out[j] /= s;
}

}  // namespace

const char* Tape::op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Constant: return "constant";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Scale: return "scale";
    case Op::AddRowVec: return "add_rowvec";
    case Op::MulRowVec: return "mul_rowvec";
    case Op::ScaleRows: return "scale_rows";
    case Op::MatMul: return "matmul";
    case Op::Transpose: return "transpose";
    case Op::ConcatCols: return "concat_cols";
    case Op::GatherCols: return "gather_cols";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::RowSum: return "row_sum";
    case Op::SquaredNorm: return "squared_norm";
    case Op::LeakyRelu: return "leaky_relu";
    case Op::LeakyReluDeriv: return "leaky_relu_deriv";
    case Op::Tanh: return "tanh";
    case Op::Sigmoid: return "sigmoid";
    case Op::SoftmaxRows: return "softmax_rows";
    case Op::LogSumExpRows: return "logsumexp_rows";
    case Op::Log: return "log";
    case Op::Clamp: return "clamp";
  }
  return "?";
}

NodeId Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  evaluated_ = false;
  return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(NodeId id) const {
  if (!id.valid() || id.index >= nodes_.size()) {
    throw Error("tape: invalid node id");
  }
  return nodes_[id.index];
}

const Shape& Tape::shape(NodeId id) const { return node(id).shape; }

NodeId Tape::root() const {
  if (nodes_.empty()) throw Error("tape: empty, no root node");
  return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

NodeId Tape::leaf(std::string name, Shape shape) {
  if (name.empty()) throw Error("leaf: name must be non-empty");
  if (leaf_index_.contains(name)) {
    throw Error("leaf: duplicate name '" + name + "'");
  }
  Node n;
  n.op = Op::Leaf;
  n.name = name;
  n.shape = std::move(shape);
  NodeId id = push(std::move(n));
  leaf_index_.emplace(std::move(name), id.index);
  return id;
}

NodeId Tape::constant(Tensor value) {
  Node n;
  n.op = Op::Constant;
  n.shape = value.shape();
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Tape::binary_same_shape(Op op, const char* opname, NodeId a, NodeId b) {
  const Shape& sa = shape(a);
  const Shape& sb = shape(b);
  if (sa != sb) {
    throw Error(std::string(opname) + ": shape mismatch " + shape_str(sa) +
                " vs " + shape_str(sb));
  }
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.shape = sa;
  return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) { return binary_same_shape(Op::Add, "add", a, b); }
NodeId Tape::sub(NodeId a, NodeId b) { return binary_same_shape(Op::Sub, "sub", a, b); }
NodeId Tape::mul(NodeId a, NodeId b) { return binary_same_shape(Op::Mul, "mul", a, b); }

NodeId Tape::unary(Op op, NodeId a, double p0, double p1) {
  Node n;
  n.op = op;
  n.a = a;
  n.p0 = p0;
  n.p1 = p1;
  n.shape = shape(a);
  return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double factor) { return unary(Op::Scale, a, factor); }

NodeId Tape::add_rowvec(NodeId m, NodeId v) {
  const Shape& sm = shape(m);
  const Shape& sv = shape(v);
  check_rank2("add_rowvec", sm);
  if (sv.size() != 1 || sv[0] != sm[1]) {
    throw Error("add_rowvec: matrix " + shape_str(sm) +
                " needs a row vector of length " + std::to_string(sm[1]) +
                ", got " + shape_str(sv));
  }
  Node n;
  n.op = Op::AddRowVec;
  n.a = m;
  n.b = v;
  n.shape = sm;
  return push(std::move(n));
}

NodeId Tape::mul_rowvec(NodeId m, NodeId v) {
  const Shape& sm = shape(m);
  const Shape& sv = shape(v);
  check_rank2("mul_rowvec", sm);
  if (sv.size() != 1 || sv[0] != sm[1]) {
    throw Error("mul_rowvec: matrix " + shape_str(sm) +
                " needs a row vector of length " + std::to_string(sm[1]) +
                ", got " + shape_str(sv));
  }
  Node n;
  n.op = Op::MulRowVec;
  n.a = m;
  n.b = v;
  n.shape = sm;
  return push(std::move(n));
}

NodeId Tape::scale_rows(NodeId m, NodeId v) {
  const Shape& sm = shape(m);
  const Shape& sv = shape(v);
  check_rank2("scale_rows", sm);
  if (sv.size() != 1 || sv[0] != sm[0]) {
    throw Error("scale_rows: matrix " + shape_str(sm) +
                " needs one factor per row (" + std::to_string(sm[0]) +
                "), got " + shape_str(sv));
  }
  Node n;
  n.op = Op::ScaleRows;
  n.a = m;
  n.b = v;
  n.shape = sm;
  return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  const Shape& sa = shape(a);
  const Shape& sb = shape(b);
  check_rank2("matmul", sa);
  Node n;
  n.op = Op::MatMul;
  n.a = a;
  n.b = b;
  if (sb.size() == 2) {
    if (sa[1] != sb[0]) {
      throw Error("matmul: inner dimensions disagree, " + shape_str(sa) +
                  " x " + shape_str(sb));
    }
    n.shape = {sa[0], sb[1]};
  } else if (sb.size() == 1) {
    if (sa[1] != sb[0]) {
      throw Error("matmul: inner dimensions disagree, " + shape_str(sa) +
                  " x " + shape_str(sb));
    }
    n.shape = {sa[0]};
  } else {
    throw Error("matmul: right operand must be a matrix or vector, got " +
                shape_str(sb));
  }
  return push(std::move(n));
}

NodeId Tape::transpose(NodeId a) {
  const Shape& sa = shape(a);
  check_rank2("transpose", sa);
  Node n;
  n.op = Op::Transpose;
  n.a = a;
  n.shape = {sa[1], sa[0]};
  return push(std::move(n));
}

NodeId Tape::concat_cols(NodeId a, NodeId b) {
  const Shape& sa = shape(a);
  const Shape& sb = shape(b);
  Node n;
  n.op = Op::ConcatCols;
  n.a = a;
  n.b = b;
  if (sa.size() == 1 && sb.size() == 1) {
    n.shape = {sa[0] + sb[0]};
  } else if (sa.size() == 2 && sb.size() == 2 && sa[0] == sb[0]) {
    n.shape = {sa[0], sa[1] + sb[1]};
  } else {
    throw Error("concat_cols: incompatible shapes " + shape_str(sa) + " vs " +
                shape_str(sb));
  }
  return push(std::move(n));
}

NodeId Tape::gather_cols(NodeId a, std::vector<std::size_t> indices) {
  const Shape& sa = shape(a);
  if (indices.empty()) throw Error("gather_cols: empty index list");
  std::size_t width = sa.size() == 2 ? sa[1] : (sa.size() == 1 ? sa[0] : 0);
  if (sa.size() != 1 && sa.size() != 2) {
    throw Error("gather_cols: expected a vector or matrix, got shape " +
                shape_str(sa));
  }
  for (std::size_t idx : indices) {
    if (idx >= width) {
      throw Error("gather_cols: index " + std::to_string(idx) +
                  " out of range for shape " + shape_str(sa));
    }
  }
  Node n;
  n.op = Op::GatherCols;
  n.a = a;
  n.indices = std::move(indices);
  n.shape = sa.size() == 2 ? Shape{sa[0], n.indices.size()}
                           : Shape{n.indices.size()};
  return push(std::move(n));
}

NodeId Tape::slice_cols(NodeId a, std::size_t begin, std::size_t end) {
  if (begin >= end) throw Error("slice_cols: empty range");
  std::vector<std::size_t> idx(end - begin);
  for (std::size_t j = begin; j < end; ++j) idx[j - begin] = j;
  return gather_cols(a, std::move(idx));
}

NodeId Tape::sum(NodeId a) {
  Node n;
  n.op = Op::Sum;
  n.a = a;
  n.shape = {};
  return push(std::move(n));
}

NodeId Tape::mean(NodeId a) {
  if (shape_size(shape(a)) == 0) throw Error("mean: empty input");
  Node n;
  n.op = Op::Mean;
  n.a = a;
  n.shape = {};
  return push(std::move(n));
}

NodeId Tape::row_sum(NodeId a) {
  const Shape& sa = shape(a);
  check_rank2("row_sum", sa);
  Node n;
  n.op = Op::RowSum;
  n.a = a;
  n.shape = {sa[0]};
  return push(std::move(n));
}

NodeId Tape::squared_norm(NodeId a) {
  Node n;
  n.op = Op::SquaredNorm;
  n.a = a;
  n.shape = {};
  return push(std::move(n));
}

NodeId Tape::leaky_relu(NodeId a, double slope) {
  return unary(Op::LeakyRelu, a, slope);
}
NodeId Tape::leaky_relu_deriv(NodeId a, double slope) {
  return unary(Op::LeakyReluDeriv, a, slope);
}
NodeId Tape::tanh(NodeId a) { return unary(Op::Tanh, a); }
NodeId Tape::sigmoid(NodeId a) { return unary(Op::Sigmoid, a); }

NodeId Tape::softmax_rows(NodeId a) {
  const Shape& sa = shape(a);
  if (sa.size() != 1 && sa.size() != 2) {
    throw Error("softmax_rows: expected a vector or matrix, got shape " +
                shape_str(sa));
  }
  return unary(Op::SoftmaxRows, a);
}

NodeId Tape::logsumexp_rows(NodeId a) {
  const Shape& sa = shape(a);
  Node n;
  n.op = Op::LogSumExpRows;
  n.a = a;
  if (sa.size() == 1) {
    n.shape = {};
  } else if (sa.size() == 2) {
    n.shape = {sa[0]};
  } else {
    throw Error("logsumexp_rows: expected a vector or matrix, got shape " +
                shape_str(sa));
  }
  return push(std::move(n));
}

NodeId Tape::log(NodeId a) { return unary(Op::Log, a); }

NodeId Tape::clamp(NodeId a, double lo, double hi) {
  if (!(lo < hi)) throw Error("clamp: lower bound must be below upper bound");
  return unary(Op::Clamp, a, lo, hi);
}

void Tape::eval_node(std::size_t i) {
  Node& n = nodes_[i];
  auto in = [&](NodeId id) -> const Tensor& { return nodes_[id.index].value; };
  switch (n.op) {
    case Op::Leaf:
    case Op::Constant:
      return;
    case Op::Add:
    case Op::Sub:
    case Op::Mul: {
      const Tensor& a = in(n.a);
      const Tensor& b = in(n.b);
      Tensor out(n.shape);
      auto ad = a.data(), bd = b.data();
      auto od = out.data();
      if (n.op == Op::Add) {
        for (std::size_t k = 0; k < od.size(); ++k) od[k] = ad[k] + bd[k];
      } else if (n.op == Op::Sub) {
        for (std::size_t k = 0; k < od.size(); ++k) od[k] = ad[k] - bd[k];
      } else {
        for (std::size_t k = 0; k < od.size(); ++k) od[k] = ad[k] * bd[k];
      }
      n.value = std::move(out);
      return;
    }
    case Op::Scale: {
      const Tensor& a = in(n.a);
      Tensor out(n.shape);
      auto ad = a.data();
      auto od = out.data();
      for (std::size_t k = 0; k < od.size(); ++k) od[k] = n.p0 * ad[k];
      n.value = std::move(out);
      return;
    }
    case Op::AddRowVec:
    case Op::MulRowVec: {
      const Tensor& a = in(n.a);
      const Tensor& v = in(n.b);
      std::size_t rows = n.shape[0], cols = n.shape[1];
      Tensor out(n.shape);
      auto ad = a.data(), vd = v.data();
      auto od = out.data();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          od[r * cols + c] = n.op == Op::AddRowVec
                                 ? ad[r * cols + c] + vd[c]
                                 : ad[r * cols + c] * vd[c];
        }
      }
      n.value = std::move(out);
      return;
    }
    case Op::ScaleRows: {
      const Tensor& a = in(n.a);
      const Tensor& v = in(n.b);
      std::size_t rows = n.shape[0], cols = n.shape[1];
      Tensor out(n.shape);
      auto ad = a.data(), vd = v.data();
      auto od = out.data();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          od[r * cols + c] = ad[r * cols + c] * vd[r];
        }
      }
      n.value = std::move(out);
      return;
    }
    case Op::MatMul: {
      const Tensor& a = in(n.a);
      const Tensor& b = in(n.b);
      std::size_t r = a.shape()[0], c = a.shape()[1];
      auto ad = a.data(), bd = b.data();
      Tensor out(n.shape);
      auto od = out.data();
      if (b.rank() == 2) {
        std::size_t k = b.shape()[1];
        for (std::size_t i2 = 0; i2 < r; ++i2) {
          for (std::size_t j = 0; j < k; ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < c; ++t) {
              s += ad[i2 * c + t] * bd[t * k + j];
            }
            od[i2 * k + j] = s;
          }
        }
      } else {
        for (std::size_t i2 = 0; i2 < r; ++i2) {
          double s = 0.0;
          for (std::size_t t = 0; t < c; ++t) s += ad[i2 * c + t] * bd[t];
          od[i2] = s;
        }
      }
      n.value = std::move(out);
      return;
    }
    case Op::Transpose: {
      const Tensor& a = in(n.a);
      std::size_t r = a.shape()[0], c = a.shape()[1];
      Tensor out(n.shape);
      auto ad = a.data();
      auto od = out.data();
      for (std::size_t i2 = 0; i2 < r; ++i2) {
        for (std::size_t j = 0; j < c; ++j) od[j * r + i2] = ad[i2 * c + j];
      }
      n.value = std::move(out);
      return;
    }
    case Op::ConcatCols: {
      const Tensor& a = in(n.a);
      const Tensor& b = in(n.b);
      Tensor out(n.shape);
      auto ad = a.data(), bd = b.data();
      auto od = out.data();
      if (n.shape.size() == 1) {
        std::copy(ad.begin(), ad.end(), od.begin());
        std::copy(bd.begin(), bd.end(), od.begin() + ad.size());
      } else {
        std::size_t rows = n.shape[0];
        std::size_t ca = a.shape()[1], cb = b.shape()[1];
        for (std::size_t r = 0; r < rows; ++r) {
          std::copy(ad.begin() + r * ca, ad.begin() + (r + 1) * ca,
                    od.begin() + r * (ca + cb));
          std::copy(bd.begin() + r * cb, bd.begin() + (r + 1) * cb,
                    od.begin() + r * (ca + cb) + ca);
        }
      }
      n.value = std::move(out);
      return;
    }
    case Op::GatherCols: {
      const Tensor& a = in(n.a);
      Tensor out(n.shape);
      auto ad = a.data();
      auto od = out.data();
      if (a.rank() == 1) {
        for (std::size_t j = 0; j < n.indices.size(); ++j) {
          od[j] = ad[n.indices[j]];
        }
      } else {
        std::size_t rows = a.shape()[0], cols = a.shape()[1];
        std::size_t k = n.indices.size();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < k; ++j) {
            od[r * k + j] = ad[r * cols + n.indices[j]];
          }
        }
      }
      n.value = std::move(out);
      return;
    }
    case Op::Sum:
    case Op::Mean: {
      const Tensor& a = in(n.a);
      double s = 0.0;
      for (double v : a.data()) s += v;
      if (n.op == Op::Mean) s /= static_cast<double>(a.size());
      n.value = Tensor::scalar(s);
      return;
    }
    case Op::RowSum: {
      const Tensor& a = in(n.a);
      std::size_t rows = a.shape()[0], cols = a.shape()[1];
      Tensor out(n.shape);
      auto ad = a.data();
      auto od = out.data();
      for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < cols; ++c) s += ad[r * cols + c];
        od[r] = s;
      }
      n.value = std::move(out);
      return;
    }
    case Op::SquaredNorm: {
      const Tensor& a = in(n.a);
      double s = 0.0;
      for (double v : a.data()) s += v * v;
      n.value = Tensor::scalar(s);
      return;
    }
    case Op::LeakyRelu:
    case Op::LeakyReluDeriv: {
      const Tensor& a = in(n.a);
      Tensor out(n.shape);
      auto ad = a.data();
      auto od = out.data();
      for (std::size_t k = 0; k < od.size(); ++k) {
        if (n.op == Op::LeakyRelu) {
          od[k] = ad[k] > 0.0 ? ad[k] : n.p0 * ad[k];
        } else {
          od[k] = ad[k] > 0.0 ? 1.0 : n.p0;
        }
      }
      n.value = std::move(out);
      return;
    }
    case Op::Tanh: {
      const Tensor& a = in(n.a);
      Tensor out(n.shape);
      auto ad = a.data();
      auto od = out.data();
      for (std::size_t k = 0; k < od.size(); ++k) od[k] = std::tanh(ad[k]);
      n.value = std::move(out);
      return;
    }
    case Op::Sigmoid: {
      const Tensor& a = in(n.a);
      Tensor out(n.shape);
      auto ad = a.data();
      auto od = out.data();
      for (std::size_t k = 0; k < od.size(); ++k) {
        od[k] = 1.0 / (1.0 + std::exp(-ad[k]));
      }
      n.value = std::move(out);
      return;
    }
    case Op::SoftmaxRows: {
      const Tensor& a = in(n.a);
      Tensor out(n.shape);
      auto ad = a.data();
      auto od = out.data();
      if (a.rank() == 1) {
        softmax_into(ad.data(), ad.size(), od.data());
      } else {
        std::size_t rows = a.shape()[0], cols = a.shape()[1];
        for (std::size_t r = 0; r < rows; ++r) {
          softmax_into(ad.data() + r * cols, cols, od.data() + r * cols);
        }
      }
      n.value = std::move(out);
      return;
    }
    case Op::LogSumExpRows: {
      const Tensor& a = in(n.a);
      auto ad = a.data();
      if (a.rank() == 1) {
        n.value = Tensor::scalar(lse(ad.data(), ad.size()));
      } else {
        std::size_t rows = a.shape()[0], cols = a.shape()[1];
        Tensor out(n.shape);
        auto od = out.data();
        for (std::size_t r = 0; r < rows; ++r) {
          od[r] = lse(ad.data() + r * cols, cols);
        }
        n.value = std::move(out);
      }
      return;
    }
    case Op::Log: {
      const Tensor& a = in(n.a);
      Tensor out(n.shape);
      auto ad = a.data();
      auto od = out.data();
      for (std::size_t k = 0; k < od.size(); ++k) od[k] = std::log(ad[k]);
      n.value = std::move(out);
      return;
    }
    case Op::Clamp: {
      const Tensor& a = in(n.a);
      Tensor out(n.shape);
      auto ad = a.data();
      auto od = out.data();
      for (std::size_t k = 0; k < od.size(); ++k) {
        od[k] = std::clamp(ad[k], n.p0, n.p1);
      }
      n.value = std::move(out);
      return;
    }
  }
}

Tensor Tape::forward(const Bindings& bindings) {
  if (nodes_.empty()) throw Error("forward: tape is empty");
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    if (n.op == Op::Leaf) {
      auto it = bindings.find(n.name);
      if (it == bindings.end()) {
        throw Error("forward: missing binding for leaf '" + n.name + "'");
      }
      if (it->second.shape() != n.shape) {
        throw Error("forward: binding '" + n.name + "' has shape " +
                    shape_str(it->second.shape()) + ", leaf expects " +
                    shape_str(n.shape));
      }
      n.value = it->second;
    } else {
      eval_node(i);
    }
    if (!n.value.all_finite()) {
      std::string where =
          n.op == Op::Leaf ? "leaf '" + n.name + "'" : op_name(n.op);
      throw Error("forward: non-finite value in " + where);
    }
  }
  evaluated_ = true;
  return nodes_.back().value;
}

const Tensor& Tape::value(NodeId id) const {
  if (!evaluated_) throw Error("value: tape has not been evaluated");
  return node(id).value;
}

GradientMap Tape::backward(NodeId root_node) const {
  if (!evaluated_) throw Error("backward: tape has not been evaluated");
  const Node& rn = node(root_node);
  if (!rn.shape.empty()) {
    throw Error("backward: root must be a scalar, got shape " +
                shape_str(rn.shape));
  }

  std::vector<Tensor> adj(nodes_.size());
  std::vector<char> seen(nodes_.size(), 0);
  auto acc = [&](NodeId id, Tensor g) {
    std::size_t k = id.index;
    if (!seen[k]) {
      adj[k] = std::move(g);
      seen[k] = 1;
    } else {
      auto dst = adj[k].data();
      auto src = g.data();
      for (std::size_t t = 0; t < dst.size(); ++t) dst[t] += src[t];
    }
  };
  acc(root_node, Tensor::scalar(1.0));

  for (std::size_t i = root_node.index + 1; i-- > 0;) {
    if (!seen[i]) continue;
    const Node& n = nodes_[i];
    const Tensor& g = adj[i];
    auto in = [&](NodeId id) -> const Tensor& { return nodes_[id.index].value; };
    switch (n.op) {
      case Op::Leaf:
      case Op::Constant:
      case Op::LeakyReluDeriv:
        break;
      case Op::Add:
        acc(n.a, g);
        acc(n.b, g);
        break;
      case Op::Sub: {
        acc(n.a, g);
        Tensor nb(n.shape);
        auto gd = g.data();
        auto nd = nb.data();
        for (std::size_t k = 0; k < nd.size(); ++k) nd[k] = -gd[k];
        acc(n.b, std::move(nb));
        break;
      }
      case Op::Mul: {
        const Tensor& a = in(n.a);
        const Tensor& b = in(n.b);
        Tensor ga(n.shape), gb(n.shape);
        auto gd = g.data();
        auto ad = a.data(), bd = b.data();
        auto gad = ga.data(), gbd = gb.data();
        for (std::size_t k = 0; k < gd.size(); ++k) {
          gad[k] = gd[k] * bd[k];
          gbd[k] = gd[k] * ad[k];
        }
        acc(n.a, std::move(ga));
        acc(n.b, std::move(gb));
        break;
      }
      case Op::Scale: {
        Tensor ga(n.shape);
        auto gd = g.data();
        auto gad = ga.data();
        for (std::size_t k = 0; k < gd.size(); ++k) gad[k] = n.p0 * gd[k];
        acc(n.a, std::move(ga));
        break;
      }
      case Op::AddRowVec: {
        std::size_t rows = n.shape[0], cols = n.shape[1];
        acc(n.a, g);
        Tensor gv(Shape{cols});
        auto gd = g.data();
        auto gvd = gv.data();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) gvd[c] += gd[r * cols + c];
        }
        acc(n.b, std::move(gv));
        break;
      }
      case Op::MulRowVec: {
        std::size_t rows = n.shape[0], cols = n.shape[1];
        const Tensor& a = in(n.a);
        const Tensor& v = in(n.b);
        Tensor ga(n.shape);
        Tensor gv(Shape{cols});
        auto gd = g.data();
        auto ad = a.data(), vd = v.data();
        auto gad = ga.data(), gvd = gv.data();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) {
            gad[r * cols + c] = gd[r * cols + c] * vd[c];
            gvd[c] += gd[r * cols + c] * ad[r * cols + c];
          }
        }
        acc(n.a, std::move(ga));
        acc(n.b, std::move(gv));
        break;
      }
      case Op::ScaleRows: {
        std::size_t rows = n.shape[0], cols = n.shape[1];
        const Tensor& a = in(n.a);
        const Tensor& v = in(n.b);
        Tensor ga(n.shape);
        Tensor gv(Shape{rows});
        auto gd = g.data();
        auto ad = a.data(), vd = v.data();
        auto gad = ga.data(), gvd = gv.data();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) {
            gad[r * cols + c] = gd[r * cols + c] * vd[r];
            gvd[r] += gd[r * cols + c] * ad[r * cols + c];
          }
        }
        acc(n.a, std::move(ga));
        acc(n.b, std::move(gv));
        break;
      }
      case Op::MatMul: {
        const Tensor& a = in(n.a);
        const Tensor& b = in(n.b);
        std::size_t r = a.shape()[0], c = a.shape()[1];
        auto ad = a.data(), bd = b.data();
        auto gd = g.data();
        Tensor ga(a.shape()), gb(b.shape());
        auto gad = ga.data(), gbd = gb.data();
        if (b.rank() == 2) {
          std::size_t k = b.shape()[1];
          for (std::size_t i2 = 0; i2 < r; ++i2) {
            for (std::size_t t = 0; t < c; ++t) {
              double s = 0.0;
              for (std::size_t j = 0; j < k; ++j) {
                s += gd[i2 * k + j] * bd[t * k + j];
              }
              gad[i2 * c + t] = s;
            }
          }
          for (std::size_t t = 0; t < c; ++t) {
            for (std::size_t j = 0; j < k; ++j) {
              double s = 0.0;
              for (std::size_t i2 = 0; i2 < r; ++i2) {
                s += ad[i2 * c + t] * gd[i2 * k + j];
              }
              gbd[t * k + j] = s;
            }
          }
        } else {
          for (std::size_t i2 = 0; i2 < r; ++i2) {
            for (std::size_t t = 0; t < c; ++t) {
              gad[i2 * c + t] = gd[i2] * bd[t];
            }
          }
          for (std::size_t t = 0; t < c; ++t) {
            double s = 0.0;
            for (std::size_t i2 = 0; i2 < r; ++i2) {
              s += ad[i2 * c + t] * gd[i2];
            }
            gbd[t] = s;
          }
        }
        acc(n.a, std::move(ga));
        acc(n.b, std::move(gb));
        break;
      }
      case Op::Transpose: {
        std::size_t r = n.shape[0], c = n.shape[1];
        Tensor ga(Shape{c, r});
        auto gd = g.data();
        auto gad = ga.data();
        for (std::size_t i2 = 0; i2 < r; ++i2) {
          for (std::size_t j = 0; j < c; ++j) {
            gad[j * r + i2] = gd[i2 * c + j];
          }
        }
        acc(n.a, std::move(ga));
        break;
      }
      case Op::ConcatCols: {
        const Tensor& a = in(n.a);
        const Tensor& b = in(n.b);
        Tensor ga(a.shape()), gb(b.shape());
        auto gd = g.data();
        auto gad = ga.data(), gbd = gb.data();
        if (n.shape.size() == 1) {
          std::copy(gd.begin(), gd.begin() + gad.size(), gad.begin());
          std::copy(gd.begin() + gad.size(), gd.end(), gbd.begin());
        } else {
          std::size_t rows = n.shape[0];
          std::size_t ca = a.shape()[1], cb = b.shape()[1];
          for (std::size_t r = 0; r < rows; ++r) {
            std::copy(gd.begin() + r * (ca + cb),
                      gd.begin() + r * (ca + cb) + ca, gad.begin() + r * ca);
            std::copy(gd.begin() + r * (ca + cb) + ca,
                      gd.begin() + (r + 1) * (ca + cb), gbd.begin() + r * cb);
          }
        }
        acc(n.a, std::move(ga));
        acc(n.b, std::move(gb));
        break;
      }
      case Op::GatherCols: {
        const Tensor& a = in(n.a);
        Tensor ga = Tensor::zeros(a.shape());
        auto gd = g.data();
        auto gad = ga.data();
        if (a.rank() == 1) {
          for (std::size_t j = 0; j < n.indices.size(); ++j) {
            gad[n.indices[j]] += gd[j];
          }
        } else {
          std::size_t rows = a.shape()[0], cols = a.shape()[1];
          std::size_t k = n.indices.size();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < k; ++j) {
              gad[r * cols + n.indices[j]] += gd[r * k + j];
            }
          }
        }
        acc(n.a, std::move(ga));
        break;
      }
      case Op::Sum:
      case Op::Mean: {
        const Tensor& a = in(n.a);
        double gs = g.item();
        if (n.op == Op::Mean) gs /= static_cast<double>(a.size());
        acc(n.a, Tensor::full(a.shape(), gs));
        break;
      }
      case Op::RowSum: {
        const Tensor& a = in(n.a);
        std::size_t rows = a.shape()[0], cols = a.shape()[1];
        Tensor ga(a.shape());
        auto gd = g.data();
        auto gad = ga.data();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) gad[r * cols + c] = gd[r];
        }
        acc(n.a, std::move(ga));
        break;
      }
      case Op::SquaredNorm: {
        const Tensor& a = in(n.a);
        double gs = g.item();
        Tensor ga(a.shape());
        auto ad = a.data();
        auto gad = ga.data();
        for (std::size_t k = 0; k < gad.size(); ++k) {
          gad[k] = 2.0 * gs * ad[k];
        }
        acc(n.a, std::move(ga));
        break;
      }
      case Op::LeakyRelu: {
        const Tensor& a = in(n.a);
        Tensor ga(n.shape);
        auto gd = g.data();
        auto ad = a.data();
        auto gad = ga.data();
        for (std::size_t k = 0; k < gad.size(); ++k) {
          gad[k] = gd[k] * (ad[k] > 0.0 ? 1.0 : n.p0);
        }
        acc(n.a, std::move(ga));
        break;
      }
      case Op::Tanh: {
        const Tensor& y = n.value;
        Tensor ga(n.shape);
        auto gd = g.data();
        auto yd = y.data();
        auto gad = ga.data();
        for (std::size_t k = 0; k < gad.size(); ++k) {
          gad[k] = gd[k] * (1.0 - yd[k] * yd[k]);
        }
        acc(n.a, std::move(ga));
        break;
      }
      case Op::Sigmoid: {
        const Tensor& y = n.value;
        Tensor ga(n.shape);
        auto gd = g.data();
        auto yd = y.data();
        auto gad = ga.data();
        for (std::size_t k = 0; k < gad.size(); ++k) {
          gad[k] = gd[k] * yd[k] * (1.0 - yd[k]);
        }
        acc(n.a, std::move(ga));
        break;
      }
      case Op::SoftmaxRows: {
        const Tensor& y = n.value;
        Tensor ga(n.shape);
        auto gd = g.data();
        auto yd = y.data();
        auto gad = ga.data();
        std::size_t rows = n.shape.size() == 2 ? n.shape[0] : 1;
        std::size_t cols = n.shape.size() == 2 ? n.shape[1] : n.shape[0];
        for (std::size_t r = 0; r < rows; ++r) {
          double dot = 0.0;
          for (std::size_t c = 0; c < cols; ++c) {
            dot += gd[r * cols + c] * yd[r * cols + c];
          }
          for (std::size_t c = 0; c < cols; ++c) {
            gad[r * cols + c] = yd[r * cols + c] * (gd[r * cols + c] - dot);
          }
        }
        acc(n.a, std::move(ga));
        break;
      }
      case Op::LogSumExpRows: {
        const Tensor& a = in(n.a);
        Tensor ga(a.shape());
        auto ad = a.data();
        auto gd = g.data();
        auto gad = ga.data();
        if (a.rank() == 1) {
          softmax_into(ad.data(), ad.size(), gad.data());
          for (std::size_t k = 0; k < gad.size(); ++k) gad[k] *= gd[0];
        } else {
          std::size_t rows = a.shape()[0], cols = a.shape()[1];
          for (std::size_t r = 0; r < rows; ++r) {
            softmax_into(ad.data() + r * cols, cols, gad.data() + r * cols);
            for (std::size_t c = 0; c < cols; ++c) gad[r * cols + c] *= gd[r];
          }
        }
        acc(n.a, std::move(ga));
        break;
      }
      case Op::Log: {
        const Tensor& a = in(n.a);
        Tensor ga(n.shape);
        auto gd = g.data();
        auto ad = a.data();
        auto gad = ga.data();
        for (std::size_t k = 0; k < gad.size(); ++k) gad[k] = gd[k] / ad[k];
        acc(n.a, std::move(ga));
        break;
      }
      case Op::Clamp: {
        const Tensor& a = in(n.a);
        Tensor ga(n.shape);
        auto gd = g.data();
        auto ad = a.data();
        auto gad = ga.data();
        for (std::size_t k = 0; k < gad.size(); ++k) {
          gad[k] = (ad[k] >= n.p0 && ad[k] <= n.p1) ? gd[k] : 0.0;
        }
        acc(n.a, std::move(ga));
        break;
      }
    }
  }

  GradientMap grads;
  for (const auto& [name, idx] : leaf_index_) {
    if (seen[idx]) {
      grads.emplace(name, std::move(adj[idx]));
    } else {
      grads.emplace(name, Tensor::zeros(nodes_[idx].shape));
    }
  }
  return grads;
}

Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f,
                            const Tensor& x, double eps) {
  if (!(eps > 0.0)) throw Error("finite_diff_gradient: eps must be positive");
  Tensor grad(x.shape());
  Tensor probe = x;
  auto pd = probe.data();
  auto gd = grad.data();
  for (std::size_t i = 0; i < pd.size(); ++i) {
    double orig = pd[i];
    pd[i] = orig + eps;
    double hi = f(probe);
    pd[i] = orig - eps;
    double lo = f(probe);
    pd[i] = orig;
    if (!std::isfinite(hi) || !std::isfinite(lo)) {
      throw Error("finite_diff_gradient: non-finite function value at probe " +
                  std::to_string(i));
    }
    gd[i] = (hi - lo) / (2.0 * eps);
  }
  return grad;
}

bool gradients_close(const Tensor& a, const Tensor& b, double rel,
                     double abs_floor) {
  if (!a.same_shape(b)) {
    throw Error("gradients_close: shape mismatch " + shape_str(a.shape()) +
                " vs " + shape_str(b.shape()));
  }
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) {
    double tol = abs_floor + rel * std::max(std::abs(ad[i]), std::abs(bd[i]));
    if (std::abs(ad[i] - bd[i]) > tol) return false;
  }
  return true;
}

}  // namespace lgan
