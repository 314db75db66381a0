#include "conprom/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "conprom/error.hpp"

namespace conprom::ad {

namespace {

[[noreturn]] void shape_error(const std::string& op, const Tensor& a, const Tensor& b) {
  raise(ErrorKind::InvalidArgument,
        op + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

[[noreturn]] void shape_error(const std::string& op, const Tensor& a) {
  raise(ErrorKind::InvalidArgument, op + ": unsupported shape " + shape_str(a));
}

}  // namespace

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.values = {v};
  return t;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  Tensor t;
  t.shape = std::move(shape);
  std::size_t n = 1;
  for (std::size_t d : t.shape) n *= d;
  t.values.assign(n, 0.0);
  return t;
}

Tensor Tensor::vector(std::vector<double> v) {
  Tensor t;
  t.shape = {v.size()};
  t.values = std::move(v);
  return t;
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
  if (v.size() != rows * cols) {
    raise(ErrorKind::InvalidArgument, "Tensor::matrix: value count does not match shape");
  }
  Tensor t;
  t.shape = {rows, cols};
  t.values = std::move(v);
  return t;
}

std::size_t Tensor::numel() const { return values.size(); }

std::size_t Tensor::rows() const {
  if (rank() != 2) raise(ErrorKind::InvalidArgument, "Tensor::rows: not a matrix");
  return shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) raise(ErrorKind::InvalidArgument, "Tensor::cols: not a matrix");
  return shape[1];
}

double& Tensor::at(std::size_t r, std::size_t c) { return values[r * shape[1] + c]; }
double Tensor::at(std::size_t r, std::size_t c) const { return values[r * shape[1] + c]; }

bool Tensor::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

std::string shape_str(const Tensor& t) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < t.shape.size(); ++i) {
    if (i) out << "x";
    out << t.shape[i];
  }
  out << "]";
  return out.str();
}

NodeId Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

const Graph::Node& Graph::node(NodeId id) const {
  check_id(id);
  return nodes_[static_cast<std::size_t>(id)];
}

void Graph::check_id(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
    raise(ErrorKind::InvalidArgument, "graph: invalid node id " + std::to_string(id));
  }
}

const Tensor& Graph::value(NodeId id) const { return node(id).value; }

NodeId Graph::constant(Tensor value) { return push({Op::Constant, {}, std::move(value)}); }

NodeId Graph::param(Tensor value) { return push({Op::Param, {}, std::move(value)}); }

NodeId Graph::add(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) shape_error("add", ta, tb);
  Tensor out = ta;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += tb.values[i];
  return push({Op::Add, {a, b}, std::move(out)});
}

NodeId Graph::subtract(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) shape_error("subtract", ta, tb);
  Tensor out = ta;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] -= tb.values[i];
  return push({Op::Subtract, {a, b}, std::move(out)});
}

NodeId Graph::scale(NodeId a, double factor) {
  Tensor out = value(a);
  for (double& v : out.values) v *= factor;
  Node n{Op::Scale, {a}, std::move(out)};
  n.factor = factor;
  return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.rank() != 2) shape_error("matmul", ta, tb);
  std::size_t m = ta.shape[0], k = ta.shape[1];
  if (tb.rank() == 2) {
    if (tb.shape[0] != k) shape_error("matmul", ta, tb);
    std::size_t n = tb.shape[1];
    Tensor out = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        double aip = ta.at(i, p);
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) += aip * tb.at(p, j);
      }
    }
    return push({Op::MatMul, {a, b}, std::move(out)});
  }
  if (tb.rank() == 1) {
    if (tb.shape[0] != k) shape_error("matmul", ta, tb);
    Tensor out = Tensor::zeros({m});
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ta.at(i, p) * tb.values[p];
      out.values[i] = acc;
    }
    return push({Op::MatMul, {a, b}, std::move(out)});
  }
  shape_error("matmul", ta, tb);
}

NodeId Graph::tanh(NodeId a) {
  Tensor out = value(a);
  for (double& v : out.values) v = std::tanh(v);
  return push({Op::Tanh, {a}, std::move(out)});
}

NodeId Graph::relu(NodeId a) {
  Tensor out = value(a);
  for (double& v : out.values) v = v > 0.0 ? v : 0.0;
  return push({Op::Relu, {a}, std::move(out)});
}

NodeId Graph::square(NodeId a) {
  Tensor out = value(a);
  for (double& v : out.values) v = v * v;
  return push({Op::Square, {a}, std::move(out)});
}

NodeId Graph::sum(NodeId a) {
  const Tensor& ta = value(a);
  double acc = 0.0;
  for (double v : ta.values) acc += v;
  return push({Op::Sum, {a}, Tensor::scalar(acc)});
}

NodeId Graph::dot(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.numel() != tb.numel()) shape_error("dot", ta, tb);
  double acc = 0.0;
  for (std::size_t i = 0; i < ta.values.size(); ++i) acc += ta.values[i] * tb.values[i];
  return push({Op::Dot, {a, b}, Tensor::scalar(acc)});
}

NodeId Graph::euclidean_distance(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.numel() != tb.numel()) shape_error("euclidean_distance", ta, tb);
  double acc = 0.0;
  for (std::size_t i = 0; i < ta.values.size(); ++i) {
    double d = ta.values[i] - tb.values[i];
    acc += d * d;
  }
  return push({Op::EuclideanDistance, {a, b}, Tensor::scalar(std::sqrt(acc))});
}

NodeId Graph::row_softmax(NodeId a) {
  const Tensor& ta = value(a);
  if (ta.rank() != 2) shape_error("row_softmax", ta);
  std::size_t m = ta.shape[0], n = ta.shape[1];
  if (n == 0) shape_error("row_softmax", ta);
  Tensor out = Tensor::zeros({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double mx = ta.at(i, 0);
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, ta.at(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double e = std::exp(ta.at(i, j) - mx);
      out.at(i, j) = e;
      denom += e;
    }
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) /= denom;
  }
  return push({Op::RowSoftmax, {a}, std::move(out)});
}

NodeId Graph::mean_rows(NodeId a) {
  const Tensor& ta = value(a);
  if (ta.rank() != 2) shape_error("mean_rows", ta);
  std::size_t m = ta.shape[0], n = ta.shape[1];
  if (m == 0) raise(ErrorKind::InvalidArgument, "mean_rows: empty matrix");
  Tensor out = Tensor::zeros({n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.values[j] += ta.at(i, j);
  }
  for (double& v : out.values) v /= static_cast<double>(m);
  return push({Op::MeanRows, {a}, std::move(out)});
}

NodeId Graph::cross_entropy_from_logits(NodeId logits, std::vector<std::size_t> gold) {
  const Tensor& tl = value(logits);
  if (tl.rank() != 2) shape_error("cross_entropy_from_logits", tl);
  std::size_t m = tl.shape[0], n = tl.shape[1];
  if (m == 0 || n == 0) shape_error("cross_entropy_from_logits", tl);
  if (gold.size() != m) {
    raise(ErrorKind::InvalidArgument, "cross_entropy_from_logits: " + std::to_string(gold.size()) +
                                          " labels for " + std::to_string(m) + " rows");
  }
  Tensor probs = Tensor::zeros({m, n});
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (gold[i] >= n) {
      raise(ErrorKind::InvalidArgument,
            "cross_entropy_from_logits: gold index " + std::to_string(gold[i]) + " out of range");
    }
    double mx = tl.at(i, 0);
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, tl.at(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double e = std::exp(tl.at(i, j) - mx);
      probs.at(i, j) = e;
      denom += e;
    }
    for (std::size_t j = 0; j < n; ++j) probs.at(i, j) /= denom;
    loss += std::log(denom) - (tl.at(i, gold[i]) - mx);
  }
  loss /= static_cast<double>(m);
  Node node{Op::CrossEntropy, {logits}, Tensor::scalar(loss)};
  node.indices = std::move(gold);
  node.aux = std::move(probs);
  return push(std::move(node));
}

NodeId Graph::gather_rows(NodeId a, std::vector<std::size_t> indices) {
  const Tensor& ta = value(a);
  if (ta.rank() != 2) shape_error("gather_rows", ta);
  std::size_t n = ta.shape[1];
  Tensor out = Tensor::zeros({indices.size(), n});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= ta.shape[0]) {
      raise(ErrorKind::InvalidArgument,
            "gather_rows: row index " + std::to_string(indices[r]) + " out of range for " +
                shape_str(ta));
    }
    for (std::size_t j = 0; j < n; ++j) out.at(r, j) = ta.at(indices[r], j);
  }
  Node node{Op::GatherRows, {a}, std::move(out)};
  node.indices = std::move(indices);
  return push(std::move(node));
}

NodeId Graph::row(NodeId a, std::size_t index) {
  const Tensor& ta = value(a);
  if (ta.rank() != 2) shape_error("row", ta);
  if (index >= ta.shape[0]) {
    raise(ErrorKind::InvalidArgument,
          "row: index " + std::to_string(index) + " out of range for " + shape_str(ta));
  }
  std::size_t n = ta.shape[1];
  Tensor out = Tensor::zeros({n});
  for (std::size_t j = 0; j < n; ++j) out.values[j] = ta.at(index, j);
  Node node{Op::GatherRows, {a}, std::move(out)};
  node.indices = {index};
  return push(std::move(node));
}

NodeId Graph::stack_rows(const std::vector<NodeId>& vectors) {
  if (vectors.empty()) raise(ErrorKind::InvalidArgument, "stack_rows: no inputs");
  const Tensor& first = value(vectors[0]);
  if (first.rank() != 1) shape_error("stack_rows", first);
  std::size_t n = first.shape[0];
  Tensor out = Tensor::zeros({vectors.size(), n});
  for (std::size_t r = 0; r < vectors.size(); ++r) {
    const Tensor& tr = value(vectors[r]);
    if (tr.rank() != 1 || tr.shape[0] != n) shape_error("stack_rows", first, tr);
    for (std::size_t j = 0; j < n; ++j) out.at(r, j) = tr.values[j];
  }
  return push({Op::StackRows, vectors, std::move(out)});
}

NodeId Graph::concat_rows(const std::vector<NodeId>& matrices) {
  if (matrices.empty()) raise(ErrorKind::InvalidArgument, "concat_rows: no inputs");
  const Tensor& first = value(matrices[0]);
  if (first.rank() != 2) shape_error("concat_rows", first);
  std::size_t n = first.shape[1];
  std::size_t total = 0;
  for (NodeId id : matrices) {
    const Tensor& t = value(id);
    if (t.rank() != 2 || t.shape[1] != n) shape_error("concat_rows", first, t);
    total += t.shape[0];
  }
  Tensor out = Tensor::zeros({total, n});
  std::size_t r = 0;
  for (NodeId id : matrices) {
    const Tensor& t = value(id);
    for (std::size_t i = 0; i < t.shape[0]; ++i, ++r) {
      for (std::size_t j = 0; j < n; ++j) out.at(r, j) = t.at(i, j);
    }
  }
  return push({Op::ConcatRows, matrices, std::move(out)});
}

NodeId Graph::stack_scalars(const std::vector<NodeId>& scalars) {
  if (scalars.empty()) raise(ErrorKind::InvalidArgument, "stack_scalars: no inputs");
  Tensor out = Tensor::zeros({scalars.size()});
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    const Tensor& t = value(scalars[i]);
    if (t.numel() != 1) shape_error("stack_scalars", t);
    out.values[i] = t.values[0];
  }
  return push({Op::StackScalars, scalars, std::move(out)});
}

NodeId Graph::transpose(NodeId a) {
  const Tensor& ta = value(a);
  if (ta.rank() != 2) shape_error("transpose", ta);
  std::size_t m = ta.shape[0], n = ta.shape[1];
  Tensor out = Tensor::zeros({n, m});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.at(j, i) = ta.at(i, j);
  }
  return push({Op::Transpose, {a}, std::move(out)});
}

void Graph::backward(NodeId loss) {
  check_id(loss);
  if (value(loss).numel() != 1) {
    raise(ErrorKind::InvalidArgument, "backward: loss must be a scalar, got " +
                                          shape_str(value(loss)));
  }
  grads_.assign(nodes_.size(), Tensor{});
  touched_.assign(nodes_.size(), false);

  auto ensure = [&](NodeId id) -> Tensor& {
    std::size_t i = static_cast<std::size_t>(id);
    if (!touched_[i]) {
      grads_[i] = Tensor::zeros(nodes_[i].value.shape);
      touched_[i] = true;
    }
    return grads_[i];
  };

  ensure(loss).values[0] = 1.0;

  for (NodeId id = loss; id >= 0; --id) {
    std::size_t i = static_cast<std::size_t>(id);
    if (!touched_[i]) continue;
    const Node& n = nodes_[i];
    const Tensor& g = grads_[i];
    switch (n.op) {
      case Op::Constant:
      case Op::Param:
        break;
      case Op::Add: {
        Tensor& ga = ensure(n.inputs[0]);
        Tensor& gb = ensure(n.inputs[1]);
        for (std::size_t p = 0; p < g.values.size(); ++p) {
          ga.values[p] += g.values[p];
          gb.values[p] += g.values[p];
        }
        break;
      }
      case Op::Subtract: {
        Tensor& ga = ensure(n.inputs[0]);
        Tensor& gb = ensure(n.inputs[1]);
        for (std::size_t p = 0; p < g.values.size(); ++p) {
          ga.values[p] += g.values[p];
          gb.values[p] -= g.values[p];
        }
        break;
      }
      case Op::Scale: {
        Tensor& ga = ensure(n.inputs[0]);
        for (std::size_t p = 0; p < g.values.size(); ++p) ga.values[p] += n.factor * g.values[p];
        break;
      }
      case Op::MatMul: {
        const Tensor& a = value(n.inputs[0]);
        const Tensor& b = value(n.inputs[1]);
        Tensor& ga = ensure(n.inputs[0]);
        Tensor& gb = ensure(n.inputs[1]);
        std::size_t m = a.shape[0], k = a.shape[1];
        if (b.rank() == 2) {
          std::size_t c = b.shape[1];
          // dA = g * B^T ; dB = A^T * g
          for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t p = 0; p < k; ++p) {
              double acc = 0.0;
              for (std::size_t j = 0; j < c; ++j) acc += g.at(r, j) * b.at(p, j);
              ga.at(r, p) += acc;
            }
          }
          for (std::size_t p = 0; p < k; ++p) {
            for (std::size_t j = 0; j < c; ++j) {
              double acc = 0.0;
              for (std::size_t r = 0; r < m; ++r) acc += a.at(r, p) * g.at(r, j);
              gb.at(p, j) += acc;
            }
          }
        } else {
          // y = A*x: dA = g outer x ; dx = A^T * g
          for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t p = 0; p < k; ++p) {
              ga.at(r, p) += g.values[r] * b.values[p];
              gb.values[p] += a.at(r, p) * g.values[r];
            }
          }
        }
        break;
      }
      case Op::Tanh: {
        Tensor& ga = ensure(n.inputs[0]);
        for (std::size_t p = 0; p < g.values.size(); ++p) {
          double y = n.value.values[p];
          ga.values[p] += g.values[p] * (1.0 - y * y);
        }
        break;
      }
      case Op::Relu: {
        const Tensor& x = value(n.inputs[0]);
        Tensor& ga = ensure(n.inputs[0]);
        // relu'(0) = 0 by convention
        for (std::size_t p = 0; p < g.values.size(); ++p) {
          if (x.values[p] > 0.0) ga.values[p] += g.values[p];
        }
        break;
      }
      case Op::Square: {
        const Tensor& x = value(n.inputs[0]);
        Tensor& ga = ensure(n.inputs[0]);
        for (std::size_t p = 0; p < g.values.size(); ++p) {
          ga.values[p] += 2.0 * x.values[p] * g.values[p];
        }
        break;
      }
      case Op::Sum: {
        Tensor& ga = ensure(n.inputs[0]);
        double gs = g.values[0];
        for (double& v : ga.values) v += gs;
        break;
      }
      case Op::Dot: {
        const Tensor& a = value(n.inputs[0]);
        const Tensor& b = value(n.inputs[1]);
        Tensor& ga = ensure(n.inputs[0]);
        Tensor& gb = ensure(n.inputs[1]);
        double gs = g.values[0];
        for (std::size_t p = 0; p < a.values.size(); ++p) {
          ga.values[p] += gs * b.values[p];
          gb.values[p] += gs * a.values[p];
        }
        break;
      }
      case Op::EuclideanDistance: {
        const Tensor& a = value(n.inputs[0]);
        const Tensor& b = value(n.inputs[1]);
        double dist = n.value.values[0];
        // subgradient 0 when the inputs coincide
        if (dist > 0.0) {
          Tensor& ga = ensure(n.inputs[0]);
          Tensor& gb = ensure(n.inputs[1]);
          double gs = g.values[0] / dist;
          for (std::size_t p = 0; p < a.values.size(); ++p) {
            double d = (a.values[p] - b.values[p]) * gs;
            ga.values[p] += d;
            gb.values[p] -= d;
          }
        }
        break;
      }
      case Op::RowSoftmax: {
        Tensor& ga = ensure(n.inputs[0]);
        std::size_t m = n.value.shape[0], c = n.value.shape[1];
        for (std::size_t r = 0; r < m; ++r) {
          double inner = 0.0;
          for (std::size_t j = 0; j < c; ++j) inner += g.at(r, j) * n.value.at(r, j);
          for (std::size_t j = 0; j < c; ++j) {
            ga.at(r, j) += n.value.at(r, j) * (g.at(r, j) - inner);
          }
        }
        break;
      }
      case Op::MeanRows: {
        const Tensor& x = value(n.inputs[0]);
        Tensor& ga = ensure(n.inputs[0]);
        std::size_t m = x.shape[0], c = x.shape[1];
        double inv = 1.0 / static_cast<double>(m);
        for (std::size_t r = 0; r < m; ++r) {
          for (std::size_t j = 0; j < c; ++j) ga.at(r, j) += g.values[j] * inv;
        }
        break;
      }
      case Op::CrossEntropy: {
        Tensor& ga = ensure(n.inputs[0]);
        std::size_t m = n.aux.shape[0], c = n.aux.shape[1];
        double gs = g.values[0] / static_cast<double>(m);
        for (std::size_t r = 0; r < m; ++r) {
          for (std::size_t j = 0; j < c; ++j) {
            double delta = (j == n.indices[r]) ? 1.0 : 0.0;
            ga.at(r, j) += gs * (n.aux.at(r, j) - delta);
          }
        }
        break;
      }
      case Op::GatherRows: {
        Tensor& ga = ensure(n.inputs[0]);
        std::size_t c = value(n.inputs[0]).shape[1];
        for (std::size_t r = 0; r < n.indices.size(); ++r) {
          for (std::size_t j = 0; j < c; ++j) {
            double gv = (g.rank() == 2) ? g.at(r, j) : g.values[j];
            ga.at(n.indices[r], j) += gv;
          }
        }
        break;
      }
      case Op::StackRows: {
        std::size_t c = n.value.shape[1];
        for (std::size_t r = 0; r < n.inputs.size(); ++r) {
          Tensor& gi = ensure(n.inputs[r]);
          for (std::size_t j = 0; j < c; ++j) gi.values[j] += g.at(r, j);
        }
        break;
      }
      case Op::ConcatRows: {
        std::size_t c = n.value.shape[1];
        std::size_t r = 0;
        for (NodeId in : n.inputs) {
          Tensor& gi = ensure(in);
          std::size_t mi = value(in).shape[0];
          for (std::size_t i2 = 0; i2 < mi; ++i2, ++r) {
            for (std::size_t j = 0; j < c; ++j) gi.at(i2, j) += g.at(r, j);
          }
        }
        break;
      }
      case Op::StackScalars: {
        for (std::size_t p = 0; p < n.inputs.size(); ++p) {
          ensure(n.inputs[p]).values[0] += g.values[p];
        }
        break;
      }
      case Op::Transpose: {
        Tensor& ga = ensure(n.inputs[0]);
        std::size_t m = n.value.shape[0], c = n.value.shape[1];
        for (std::size_t r = 0; r < m; ++r) {
          for (std::size_t j = 0; j < c; ++j) ga.at(j, r) += g.at(r, j);
        }
        break;
      }
    }
  }
}

const Tensor& Graph::grad(NodeId id) const {
  check_id(id);
  std::size_t i = static_cast<std::size_t>(id);
  if (grads_.size() != nodes_.size() || !touched_[i]) {
    static thread_local Tensor zero;
    zero = Tensor::zeros(nodes_[i].value.shape);
    return zero;
  }
  return grads_[i];
}

GradCheckResult grad_check(const LossBuilder& build_loss, const ParamTensors& params, double eps) {
  if (eps <= 0.0) raise(ErrorKind::InvalidArgument, "grad_check: eps must be positive");
  for (const auto& [name, t] : params) {
    if (!t.all_finite()) {
      raise(ErrorKind::InvalidArgument, "grad_check: parameter '" + name + "' is not finite");
    }
  }

  auto evaluate = [&](const ParamTensors& probe, std::map<std::string, NodeId>* out_ids,
                      Graph* out_graph) -> double {
    Graph local;
    Graph& g = out_graph ? *out_graph : local;
    std::map<std::string, NodeId> ids;
    for (const auto& [name, t] : probe) ids[name] = g.param(t);
    NodeId loss = build_loss(g, ids);
    const Tensor& lv = g.value(loss);
    if (lv.numel() != 1) {
      raise(ErrorKind::InvalidArgument, "grad_check: loss is not a scalar");
    }
    if (!std::isfinite(lv.values[0])) {
      raise(ErrorKind::Runtime, "grad_check: non-finite loss during probing");
    }
    if (out_ids) *out_ids = std::move(ids);
    if (out_graph) g.backward(loss);
    return lv.values[0];
  };

  Graph g;
  std::map<std::string, NodeId> ids;
  evaluate(params, &ids, &g);

  GradCheckResult result;
  ParamTensors probe = params;
  for (const auto& [name, base] : params) {
    const Tensor& analytic = g.grad(ids.at(name));
    for (std::size_t i = 0; i < base.values.size(); ++i) {
      double saved = probe.at(name).values[i];
      probe.at(name).values[i] = saved + eps;
      double up = evaluate(probe, nullptr, nullptr);
      probe.at(name).values[i] = saved - eps;
      double down = evaluate(probe, nullptr, nullptr);
      probe.at(name).values[i] = saved;
      double numeric = (up - down) / (2.0 * eps);
      double a = analytic.values[i];
      double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst_param = name;
        result.worst_coord = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace conprom::ad
