#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace pieceformer {

/// Dense row-major 2D tensor of doubles. Scalars are [1 x 1]; vectors are
/// [1 x c] or [r x 1]. `grad` is allocated iff requires_grad.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;
  bool requires_grad = false;
  std::vector<double> grad;

  Tensor() = default;
  Tensor(int r, int c, double fill = 0.0)
      : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {}

  static Tensor scalar(double x) {
    Tensor t(1, 1);
    t.v[0] = x;
    return t;
  }

  size_t size() const { return v.size(); }
  double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

  void set_requires_grad(bool on) {
    requires_grad = on;
    if (on)
      grad.assign(v.size(), 0.0);
    else
      grad.clear();
  }
  void zero_grad() {
    if (requires_grad) std::fill(grad.begin(), grad.end(), 0.0);
  }
};

/// Reverse-mode tape over 2D tensors. Forward values are computed eagerly as
/// ops are recorded; backward walks the record once in reverse. A tape is
/// single-threaded; independent tapes may run concurrently and their leaf
/// gradients are merged by the caller in a fixed order.
class Tape {
 public:
  using Id = int32_t;

  /// Registers a leaf bound to an external tensor (values copied). When
  /// `t.requires_grad`, backward accumulates into the tape-local buffer and
  /// collect_leaf_grads() adds it onto t.grad.
  Id leaf(Tensor& t);
  /// Unbound constant input (never receives gradient).
  Id constant(const Tensor& t);
  Id constant(int rows, int cols, const std::vector<double>& vals);

  // primitives -------------------------------------------------------------
  Id matmul(Id a, Id b);
  Id add(Id a, Id b);          // same shape, or b a [1 x c] row bias
  Id sub(Id a, Id b);
  Id scale(Id a, double s);
  Id add_scalar(Id a, double s);
  Id hadamard(Id a, Id b);
  Id scale_rows(Id a, Id col); // col: [r x 1], scales row i by col[i]
  Id relu(Id a);
  Id elu(Id a);
  Id exp(Id a);
  Id log(Id a);
  Id softplus(Id a);
  Id sigmoid(Id a);
  Id recip(Id a);
  Id transpose(Id a);
  Id sum_all(Id a);            // -> [1 x 1]
  Id sum_rows(Id a);           // [r x c] -> [1 x c], sums down each column
  Id mean_all(Id a);           // -> [1 x 1]
  Id concat_cols(const std::vector<Id>& parts);
  Id gather_rows(Id a, std::vector<int32_t> index);
  Id scatter_add_rows(Id a, std::vector<int32_t> index, int out_rows);
  Id l2_norm(Id a);            // -> [1 x 1]

  // execution ---------------------------------------------------------------
  const Tensor& value(Id id) const;
  /// Gradient buffer of a node after backward (zeros if the node was never
  /// reached). Only meaningful for nodes on a gradient path.
  std::vector<double> grad_of(Id id) const;

  /// Standard entry point: seeds d(loss)/d(loss) = 1, runs the reverse pass,
  /// adds leaf gradients onto their bound tensors, then clears tape grads so
  /// repeated calls accumulate.
  void backward(Id loss);

  /// Multi-seed reverse pass; gradients stay on the tape until
  /// collect_leaf_grads() is called. Used by the block-parallel encoder.
  void backward_seeded(const std::vector<std::pair<Id, std::vector<double>>>& seeds);
  void collect_leaf_grads();

  size_t num_nodes() const { return nodes_.size(); }

 private:
  enum class Op : uint8_t {
    Leaf, Const, MatMul, Add, AddRow, Sub, Scale, AddScalar, Hadamard,
    ScaleRows, Relu, Elu, Exp, Log, Softplus, Sigmoid, Recip, Transpose,
    SumAll, SumRows, MeanAll, ConcatCols, GatherRows, ScatterAddRows, L2Norm,
  };

  struct Node {
    Op op;
    int rows, cols;
    std::vector<double> val;
    std::vector<double> grad;   // lazily sized during backward
    Id a = -1, b = -1;
    std::vector<Id> parts;      // concat inputs
    std::vector<int32_t> index; // gather/scatter
    double scalar = 0.0;
    Tensor* bound = nullptr;
    bool needs_grad = false;
  };

  Id push(Node n);
  Node& node(Id id) { return nodes_[id]; }
  const Node& node(Id id) const { return nodes_[id]; }
  bool needs(Id id) const { return nodes_[id].needs_grad; }
  void check_shape(Id id, int r, int c, const char* who) const;
  void run_backward();

  std::vector<Node> nodes_;
};

/// Adam with bias correction over a named parameter set.
struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  /// Applies one update to every tensor with requires_grad using its .grad.
  void step(std::map<std::string, Tensor>& params);
  int64_t steps_taken() const { return t_; }

 private:
  struct Slot {
    std::vector<double> m, v;
  };
  AdamConfig cfg_;
  std::map<std::string, Slot> state_;
  int64_t t_ = 0;
};

/// Versioned JSON checkpoint of named tensors (exact round trip) with an
/// arbitrary metadata block.
void save_tensors(const std::string& path,
                  const std::map<std::string, Tensor>& tensors,
                  const std::string& meta_json = "{}");
std::map<std::string, Tensor> load_tensors(const std::string& path,
                                           std::string* meta_json = nullptr);

}  // namespace pieceformer
