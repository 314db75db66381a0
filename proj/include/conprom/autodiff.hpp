#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace conprom::ad {

// Dense row-major tensor of 64-bit floats. Rank 0 is a scalar, rank 1 a
// vector, rank 2 a matrix. No broadcasting beyond scalar-times-tensor.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;

  static Tensor scalar(double v);
  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v);

  std::size_t numel() const;
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;
};

std::string shape_str(const Tensor& t);

using NodeId = std::int32_t;

enum class Op : std::uint8_t {
  Constant,
  Param,
  Add,
  Subtract,
  Scale,
  MatMul,
  Tanh,
  Relu,
  Square,
  Sum,
  Dot,
  EuclideanDistance,
  RowSoftmax,
  MeanRows,
  CrossEntropy,
  GatherRows,
  StackRows,
  ConcatRows,
  StackScalars,
  Transpose,
};

// Append-only tape of operations. Node ids are topologically ordered, so the
// backward pass is a single reverse sweep visiting each node exactly once.
class Graph {
 public:
  // Leaves.
  NodeId constant(Tensor value);
  NodeId param(Tensor value);

  // Forward ops.
  NodeId add(NodeId a, NodeId b);
  NodeId subtract(NodeId a, NodeId b);
  NodeId scale(NodeId a, double factor);
  NodeId matmul(NodeId a, NodeId b);  // [m x k]*[k x n] -> [m x n], or [m x k]*[k] -> [m]
  NodeId tanh(NodeId a);
  NodeId relu(NodeId a);
  NodeId square(NodeId a);
  NodeId sum(NodeId a);                       // -> scalar
  NodeId dot(NodeId a, NodeId b);             // same shape -> scalar
  NodeId euclidean_distance(NodeId a, NodeId b);  // same shape -> scalar
  NodeId row_softmax(NodeId a);               // [m x n], shift-invariant
  NodeId mean_rows(NodeId a);                 // [m x n] -> [n]
  // Mean over rows of -log softmax(logits)[gold]. logits: [r x c].
  NodeId cross_entropy_from_logits(NodeId logits, std::vector<std::size_t> gold);

  // Structural ops.
  NodeId gather_rows(NodeId a, std::vector<std::size_t> indices);  // -> [k x n]
  NodeId row(NodeId a, std::size_t index);                         // -> [n]
  NodeId stack_rows(const std::vector<NodeId>& vectors);           // k vectors [n] -> [k x n]
  NodeId concat_rows(const std::vector<NodeId>& matrices);         // [mi x n] -> [sum(mi) x n]
  NodeId stack_scalars(const std::vector<NodeId>& scalars);        // k scalars -> [k]
  NodeId transpose(NodeId a);

  const Tensor& value(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }

  // Reverse-mode sweep from a scalar loss. Gradients accumulate over all
  // paths; leaves off the loss path keep zero gradients.
  void backward(NodeId loss);
  const Tensor& grad(NodeId id) const;

 private:
  struct Node {
    Node(Op op_, std::vector<NodeId> inputs_, Tensor value_)
        : op(op_), inputs(std::move(inputs_)), value(std::move(value_)) {}

    Op op;
    std::vector<NodeId> inputs;
    Tensor value;
    double factor = 0.0;                  // Scale
    std::vector<std::size_t> indices;     // GatherRows / CrossEntropy gold
    Tensor aux;                           // CrossEntropy softmax cache
  };

  NodeId push(Node node);
  const Node& node(NodeId id) const;
  void check_id(NodeId id) const;

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::vector<bool> touched_;
};

// Finite-difference gradient checking. The builder constructs the loss from
// named parameter nodes; the same builder is re-run for every probe.
struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_coord = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

using ParamTensors = std::map<std::string, Tensor>;
using LossBuilder = std::function<NodeId(Graph&, const std::map<std::string, NodeId>&)>;

// Compares analytic gradients with central differences
// (f(x+eps) - f(x-eps)) / (2 eps); relative error per coordinate is
// |a - n| / max(1e-8, |a| + |n|).
GradCheckResult grad_check(const LossBuilder& build_loss, const ParamTensors& params, double eps);

}  // namespace conprom::ad
