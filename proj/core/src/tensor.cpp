#include "pieceformer/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "pieceformer/error.hpp"

namespace pieceformer {

using nlohmann::json;

namespace {

double stable_softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    const double z = std::exp(-x);
    return 1.0 / (1.0 + z);
  }
  const double z = std::exp(x);
  return z / (1.0 + z);
}

}  // namespace

Tape::Id Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size() - 1);
}

void Tape::check_shape(Id id, int r, int c, const char* who) const {
  const Node& n = node(id);
  if (n.rows != r || n.cols != c)
    throw TensorError(std::string(who) + ": expected " + std::to_string(r) +
                      "x" + std::to_string(c) + ", got " +
                      std::to_string(n.rows) + "x" + std::to_string(n.cols));
}

Tape::Id Tape::leaf(Tensor& t) {
  Node n;
  n.op = Op::Leaf;
  n.rows = t.rows;
  n.cols = t.cols;
  n.val = t.v;
  n.bound = &t;
  n.needs_grad = t.requires_grad;
  return push(std::move(n));
}

Tape::Id Tape::constant(const Tensor& t) {
  Node n;
  n.op = Op::Const;
  n.rows = t.rows;
  n.cols = t.cols;
  n.val = t.v;
  return push(std::move(n));
}

Tape::Id Tape::constant(int rows, int cols, const std::vector<double>& vals) {
  if (vals.size() != static_cast<size_t>(rows) * cols)
    throw TensorError("constant: value count does not match shape");
  Node n;
  n.op = Op::Const;
  n.rows = rows;
  n.cols = cols;
  n.val = vals;
  return push(std::move(n));
}

Tape::Id Tape::matmul(Id a, Id b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  if (na.cols != nb.rows)
    throw TensorError("matmul: inner dims " + std::to_string(na.cols) + " vs " +
                      std::to_string(nb.rows));
  Node n;
  n.op = Op::MatMul;
  n.a = a;
  n.b = b;
  n.rows = na.rows;
  n.cols = nb.cols;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.val.assign(static_cast<size_t>(n.rows) * n.cols, 0.0);
  const int m = na.rows, k = na.cols, p = nb.cols;
  for (int i = 0; i < m; ++i)
    for (int kk = 0; kk < k; ++kk) {
      const double aik = na.val[static_cast<size_t>(i) * k + kk];
      if (aik == 0.0) continue;
      const double* brow = nb.val.data() + static_cast<size_t>(kk) * p;
      double* orow = n.val.data() + static_cast<size_t>(i) * p;
      for (int j = 0; j < p; ++j) orow[j] += aik * brow[j];
    }
  return push(std::move(n));
}

Tape::Id Tape::add(Id a, Id b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  const bool row_bias = nb.rows == 1 && nb.cols == na.cols && na.rows != 1;
  if (!row_bias && (na.rows != nb.rows || na.cols != nb.cols))
    throw TensorError("add: shape mismatch");
  Node n;
  n.op = row_bias ? Op::AddRow : Op::Add;
  n.a = a;
  n.b = b;
  n.rows = na.rows;
  n.cols = na.cols;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.val = na.val;
  if (row_bias) {
    for (int i = 0; i < n.rows; ++i)
      for (int j = 0; j < n.cols; ++j)
        n.val[static_cast<size_t>(i) * n.cols + j] += nb.val[j];
  } else {
    for (size_t i = 0; i < n.val.size(); ++i) n.val[i] += nb.val[i];
  }
  return push(std::move(n));
}

Tape::Id Tape::sub(Id a, Id b) {
  const Node& na = node(a);
  check_shape(b, na.rows, na.cols, "sub");
  Node n;
  n.op = Op::Sub;
  n.a = a;
  n.b = b;
  n.rows = na.rows;
  n.cols = na.cols;
  n.needs_grad = na.needs_grad || node(b).needs_grad;
  n.val = na.val;
  for (size_t i = 0; i < n.val.size(); ++i) n.val[i] -= node(b).val[i];
  return push(std::move(n));
}

Tape::Id Tape::scale(Id a, double s) {
  const Node& na = node(a);
  Node n;
  n.op = Op::Scale;
  n.a = a;
  n.scalar = s;
  n.rows = na.rows;
  n.cols = na.cols;
  n.needs_grad = na.needs_grad;
  n.val = na.val;
  for (double& x : n.val) x *= s;
  return push(std::move(n));
}

Tape::Id Tape::add_scalar(Id a, double s) {
  const Node& na = node(a);
  Node n;
  n.op = Op::AddScalar;
  n.a = a;
  n.scalar = s;
  n.rows = na.rows;
  n.cols = na.cols;
  n.needs_grad = na.needs_grad;
  n.val = na.val;
  for (double& x : n.val) x += s;
  return push(std::move(n));
}

Tape::Id Tape::hadamard(Id a, Id b) {
  const Node& na = node(a);
  check_shape(b, na.rows, na.cols, "hadamard");
  Node n;
  n.op = Op::Hadamard;
  n.a = a;
  n.b = b;
  n.rows = na.rows;
  n.cols = na.cols;
  n.needs_grad = na.needs_grad || node(b).needs_grad;
  n.val = na.val;
  for (size_t i = 0; i < n.val.size(); ++i) n.val[i] *= node(b).val[i];
  return push(std::move(n));
}

Tape::Id Tape::scale_rows(Id a, Id col) {
  const Node& na = node(a);
  check_shape(col, na.rows, 1, "scale_rows");
  Node n;
  n.op = Op::ScaleRows;
  n.a = a;
  n.b = col;
  n.rows = na.rows;
  n.cols = na.cols;
  n.needs_grad = na.needs_grad || node(col).needs_grad;
  n.val = na.val;
  for (int i = 0; i < n.rows; ++i) {
    const double s = node(col).val[i];
    for (int j = 0; j < n.cols; ++j)
      n.val[static_cast<size_t>(i) * n.cols + j] *= s;
  }
  return push(std::move(n));
}

#define PF_UNARY(NAME, OP_TAG, EXPR)                       \
  Tape::Id Tape::NAME(Id a) {                              \
    const Node& na = node(a);                              \
    Node n;                                                \
    n.op = Op::OP_TAG;                                     \
    n.a = a;                                               \
    n.rows = na.rows;                                      \
    n.cols = na.cols;                                      \
    n.needs_grad = na.needs_grad;                          \
    n.val.resize(na.val.size());                           \
    for (size_t i = 0; i < na.val.size(); ++i) {           \
      const double x = na.val[i];                          \
      n.val[i] = (EXPR);                                   \
    }                                                      \
    return push(std::move(n));                             \
  }

PF_UNARY(relu, Relu, x > 0.0 ? x : 0.0)
PF_UNARY(elu, Elu, x > 0.0 ? x : std::expm1(x))
PF_UNARY(exp, Exp, std::exp(x))
PF_UNARY(log, Log, std::log(x))
PF_UNARY(softplus, Softplus, stable_softplus(x))
PF_UNARY(sigmoid, Sigmoid, stable_sigmoid(x))
PF_UNARY(recip, Recip, 1.0 / x)
#undef PF_UNARY

Tape::Id Tape::transpose(Id a) {
  const Node& na = node(a);
  Node n;
  n.op = Op::Transpose;
  n.a = a;
  n.rows = na.cols;
  n.cols = na.rows;
  n.needs_grad = na.needs_grad;
  n.val.resize(na.val.size());
  for (int i = 0; i < na.rows; ++i)
    for (int j = 0; j < na.cols; ++j)
      n.val[static_cast<size_t>(j) * na.rows + i] =
          na.val[static_cast<size_t>(i) * na.cols + j];
  return push(std::move(n));
}

Tape::Id Tape::sum_all(Id a) {
  const Node& na = node(a);
  Node n;
  n.op = Op::SumAll;
  n.a = a;
  n.rows = 1;
  n.cols = 1;
  n.needs_grad = na.needs_grad;
  double s = 0.0;
  for (double x : na.val) s += x;
  n.val = {s};
  return push(std::move(n));
}

Tape::Id Tape::sum_rows(Id a) {
  const Node& na = node(a);
  Node n;
  n.op = Op::SumRows;
  n.a = a;
  n.rows = 1;
  n.cols = na.cols;
  n.needs_grad = na.needs_grad;
  n.val.assign(na.cols, 0.0);
  for (int i = 0; i < na.rows; ++i)
    for (int j = 0; j < na.cols; ++j)
      n.val[j] += na.val[static_cast<size_t>(i) * na.cols + j];
  return push(std::move(n));
}

Tape::Id Tape::mean_all(Id a) {
  const Node& na = node(a);
  if (na.val.empty()) throw TensorError("mean_all: empty tensor");
  Node n;
  n.op = Op::MeanAll;
  n.a = a;
  n.rows = 1;
  n.cols = 1;
  n.needs_grad = na.needs_grad;
  double s = 0.0;
  for (double x : na.val) s += x;
  n.val = {s / static_cast<double>(na.val.size())};
  return push(std::move(n));
}

Tape::Id Tape::concat_cols(const std::vector<Id>& parts) {
  if (parts.empty()) throw TensorError("concat_cols: no inputs");
  const int rows = node(parts[0]).rows;
  int cols = 0;
  bool needs = false;
  for (Id p : parts) {
    if (node(p).rows != rows) throw TensorError("concat_cols: row mismatch");
    cols += node(p).cols;
    needs = needs || node(p).needs_grad;
  }
  Node n;
  n.op = Op::ConcatCols;
  n.parts = parts;
  n.rows = rows;
  n.cols = cols;
  n.needs_grad = needs;
  n.val.assign(static_cast<size_t>(rows) * cols, 0.0);
  int off = 0;
  for (Id p : parts) {
    const Node& np = node(p);
    for (int i = 0; i < rows; ++i)
      std::copy(np.val.begin() + static_cast<size_t>(i) * np.cols,
                np.val.begin() + static_cast<size_t>(i + 1) * np.cols,
                n.val.begin() + static_cast<size_t>(i) * cols + off);
    off += np.cols;
  }
  return push(std::move(n));
}

Tape::Id Tape::gather_rows(Id a, std::vector<int32_t> index) {
  const Node& na = node(a);
  for (int32_t i : index)
    if (i < 0 || i >= na.rows)
      throw TensorError("gather_rows: index out of range");
  Node n;
  n.op = Op::GatherRows;
  n.a = a;
  n.rows = static_cast<int>(index.size());
  n.cols = na.cols;
  n.needs_grad = na.needs_grad;
  n.val.assign(static_cast<size_t>(n.rows) * n.cols, 0.0);
  for (size_t i = 0; i < index.size(); ++i)
    std::copy(na.val.begin() + static_cast<size_t>(index[i]) * na.cols,
              na.val.begin() + static_cast<size_t>(index[i] + 1) * na.cols,
              n.val.begin() + i * na.cols);
  n.index = std::move(index);
  return push(std::move(n));
}

Tape::Id Tape::scatter_add_rows(Id a, std::vector<int32_t> index,
                                int out_rows) {
  const Node& na = node(a);
  if (static_cast<int>(index.size()) != na.rows)
    throw TensorError("scatter_add_rows: index size != rows");
  for (int32_t i : index)
    if (i < 0 || i >= out_rows)
      throw TensorError("scatter_add_rows: index out of range");
  Node n;
  n.op = Op::ScatterAddRows;
  n.a = a;
  n.rows = out_rows;
  n.cols = na.cols;
  n.needs_grad = na.needs_grad;
  n.val.assign(static_cast<size_t>(out_rows) * na.cols, 0.0);
  for (size_t i = 0; i < index.size(); ++i) {
    double* dst = n.val.data() + static_cast<size_t>(index[i]) * na.cols;
    const double* src = na.val.data() + i * na.cols;
    for (int j = 0; j < na.cols; ++j) dst[j] += src[j];
  }
  n.index = std::move(index);
  return push(std::move(n));
}

Tape::Id Tape::l2_norm(Id a) {
  const Node& na = node(a);
  Node n;
  n.op = Op::L2Norm;
  n.a = a;
  n.rows = 1;
  n.cols = 1;
  n.needs_grad = na.needs_grad;
  double s = 0.0;
  for (double x : na.val) s += x * x;
  n.val = {std::sqrt(s)};
  return push(std::move(n));
}

const Tensor& Tape::value(Id id) const {
  // Cheap view: materialize into a thread_local to keep the API simple.
  thread_local Tensor view;
  const Node& n = node(id);
  view.rows = n.rows;
  view.cols = n.cols;
  view.v = n.val;
  view.requires_grad = false;
  view.grad.clear();
  return view;
}

std::vector<double> Tape::grad_of(Id id) const {
  const Node& n = node(id);
  if (n.grad.empty()) return std::vector<double>(n.val.size(), 0.0);
  return n.grad;
}

void Tape::backward(Id loss) {
  const Node& n = node(loss);
  if (n.rows != 1 || n.cols != 1)
    throw TensorError("backward: loss must be a scalar");
  backward_seeded({{loss, {1.0}}});
  collect_leaf_grads();
  for (Node& nd : nodes_) nd.grad.clear();
}

void Tape::backward_seeded(
    const std::vector<std::pair<Id, std::vector<double>>>& seeds) {
  for (const auto& [id, g] : seeds) {
    Node& n = node(id);
    if (g.size() != n.val.size())
      throw TensorError("backward_seeded: seed shape mismatch");
    if (n.grad.empty()) n.grad.assign(n.val.size(), 0.0);
    for (size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
  }
  run_backward();
}

void Tape::run_backward() {
  auto ensure = [&](Id id) -> std::vector<double>& {
    Node& n = node(id);
    if (n.grad.empty()) n.grad.assign(n.val.size(), 0.0);
    return n.grad;
  };

  for (Id id = static_cast<Id>(nodes_.size()) - 1; id >= 0; --id) {
    Node& n = node(id);
    if (!n.needs_grad || n.grad.empty()) continue;
    const std::vector<double>& g = n.grad;
    switch (n.op) {
      case Op::Leaf:
      case Op::Const:
        break;
      case Op::MatMul: {
        Node& na = node(n.a);
        Node& nb = node(n.b);
        const int m = na.rows, k = na.cols, p = nb.cols;
        if (na.needs_grad) {
          auto& ga = ensure(n.a);
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < p; ++j) {
              const double gij = g[static_cast<size_t>(i) * p + j];
              if (gij == 0.0) continue;
              const double* brow = nb.val.data();
              for (int kk = 0; kk < k; ++kk)
                ga[static_cast<size_t>(i) * k + kk] +=
                    gij * brow[static_cast<size_t>(kk) * p + j];
            }
        }
        if (nb.needs_grad) {
          auto& gb = ensure(n.b);
          for (int i = 0; i < m; ++i)
            for (int kk = 0; kk < k; ++kk) {
              const double aik = na.val[static_cast<size_t>(i) * k + kk];
              if (aik == 0.0) continue;
              const double* grow = g.data() + static_cast<size_t>(i) * p;
              double* gbrow = gb.data() + static_cast<size_t>(kk) * p;
              for (int j = 0; j < p; ++j) gbrow[j] += aik * grow[j];
            }
        }
        break;
      }
      case Op::Add: {
        if (needs(n.a)) {
          auto& ga = ensure(n.a);
          for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (needs(n.b)) {
          auto& gb = ensure(n.b);
          for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        }
        break;
      }
      case Op::AddRow: {
        if (needs(n.a)) {
          auto& ga = ensure(n.a);
          for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (needs(n.b)) {
          auto& gb = ensure(n.b);
          for (int i = 0; i < n.rows; ++i)
            for (int j = 0; j < n.cols; ++j)
              gb[j] += g[static_cast<size_t>(i) * n.cols + j];
        }
        break;
      }
      case Op::Sub: {
        if (needs(n.a)) {
          auto& ga = ensure(n.a);
          for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (needs(n.b)) {
          auto& gb = ensure(n.b);
          for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
        break;
      }
      case Op::Scale: {
        if (needs(n.a)) {
          auto& ga = ensure(n.a);
          for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.scalar;
        }
        break;
      }
      case Op::AddScalar: {
        if (needs(n.a)) {
          auto& ga = ensure(n.a);
          for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        break;
      }
      case Op::Hadamard: {
        if (needs(n.a)) {
          auto& ga = ensure(n.a);
          const auto& bv = node(n.b).val;
          for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (needs(n.b)) {
          auto& gb = ensure(n.b);
          const auto& av = node(n.a).val;
          for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
        }
        break;
      }
      case Op::ScaleRows: {
        const auto& av = node(n.a).val;
        const auto& cv = node(n.b).val;
        if (needs(n.a)) {
          auto& ga = ensure(n.a);
          for (int i = 0; i < n.rows; ++i)
            for (int j = 0; j < n.cols; ++j)
              ga[static_cast<size_t>(i) * n.cols + j] +=
                  g[static_cast<size_t>(i) * n.cols + j] * cv[i];
        }
        if (needs(n.b)) {
          auto& gc = ensure(n.b);
          for (int i = 0; i < n.rows; ++i) {
            double s = 0.0;
            for (int j = 0; j < n.cols; ++j)
              s += g[static_cast<size_t>(i) * n.cols + j] *
                   av[static_cast<size_t>(i) * n.cols + j];
            gc[i] += s;
          }
        }
        break;
      }
      case Op::Relu: {
        if (needs(n.a)) {
          auto& ga = ensure(n.a);
          const auto& av = node(n.a).val;
          for (size_t i = 0; i < g.size(); ++i)
            if (av[i] > 0.0) ga[i] += g[i];
        }
        break;
      }
      case Op::Elu: {
        if (needs(n.a)) {
          auto& ga = ensure(n.a);
          const auto& av = node(n.a).val;
          for (size_t i = 0; i < g.size(); ++i)
            ga[i] += g[i] * (av[i] > 0.0 ? 1.0 : std::exp(av[i]));
        }
        break;
      }
      case Op::Exp: {
        if (needs(n.a)) {
          auto& ga = ensure(n.a);
          for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.val[i];
        }
        break;
      }
      case Op::Log: {
        if (needs(n.a)) {
          auto& ga = ensure(n.a);
          const auto& av = node(n.a).val;
          for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / av[i];
        }
        break;
      }
      case Op::Softplus: {
        if (needs(n.a)) {
          auto& ga = ensure(n.a);
          const auto& av = node(n.a).val;
          for (size_t i = 0; i < g.size(); ++i)
            ga[i] += g[i] * stable_sigmoid(av[i]);
        }
        break;
      }
      case Op::Sigmoid: {
        if (needs(n.a)) {
          auto& ga = ensure(n.a);
          for (size_t i = 0; i < g.size(); ++i)
            ga[i] += g[i] * n.val[i] * (1.0 - n.val[i]);
        }
        break;
      }
      case Op::Recip: {
        if (needs(n.a)) {
          auto& ga = ensure(n.a);
          for (size_t i = 0; i < g.size(); ++i)
            ga[i] -= g[i] * n.val[i] * n.val[i];
        }
        break;
      }
      case Op::Transpose: {
        if (needs(n.a)) {
          auto& ga = ensure(n.a);
          const Node& na = node(n.a);
          for (int i = 0; i < na.rows; ++i)
            for (int j = 0; j < na.cols; ++j)
              ga[static_cast<size_t>(i) * na.cols + j] +=
                  g[static_cast<size_t>(j) * na.rows + i];
        }
        break;
      }
      case Op::SumAll: {
        if (needs(n.a)) {
          auto& ga = ensure(n.a);
          for (double& x : ga) x += g[0];
        }
        break;
      }
      case Op::SumRows: {
        if (needs(n.a)) {
          auto& ga = ensure(n.a);
          const Node& na = node(n.a);
          for (int i = 0; i < na.rows; ++i)
            for (int j = 0; j < na.cols; ++j)
              ga[static_cast<size_t>(i) * na.cols + j] += g[j];
        }
        break;
      }
      case Op::MeanAll: {
        if (needs(n.a)) {
          auto& ga = ensure(n.a);
          const double s = g[0] / static_cast<double>(ga.size());
          for (double& x : ga) x += s;
        }
        break;
      }
      case Op::ConcatCols: {
        int off = 0;
        for (Id p : n.parts) {
          const Node& np = node(p);
          if (np.needs_grad) {
            auto& gp = ensure(p);
            for (int i = 0; i < n.rows; ++i)
              for (int j = 0; j < np.cols; ++j)
                gp[static_cast<size_t>(i) * np.cols + j] +=
                    g[static_cast<size_t>(i) * n.cols + off + j];
          }
          off += node(p).cols;
        }
        break;
      }
      case Op::GatherRows: {
        if (needs(n.a)) {
          auto& ga = ensure(n.a);
          for (size_t i = 0; i < n.index.size(); ++i)
            for (int j = 0; j < n.cols; ++j)
              ga[static_cast<size_t>(n.index[i]) * n.cols + j] +=
                  g[i * n.cols + j];
        }
        break;
      }
      case Op::ScatterAddRows: {
        if (needs(n.a)) {
          auto& ga = ensure(n.a);
          for (size_t i = 0; i < n.index.size(); ++i)
            for (int j = 0; j < n.cols; ++j)
              ga[i * n.cols + j] +=
                  g[static_cast<size_t>(n.index[i]) * n.cols + j];
        }
        break;
      }
      case Op::L2Norm: {
        if (needs(n.a) && n.val[0] > 0.0) {
          auto& ga = ensure(n.a);
          const auto& av = node(n.a).val;
          const double s = g[0] / n.val[0];
          for (size_t i = 0; i < ga.size(); ++i) ga[i] += s * av[i];
        }
        break;
      }
    }
  }
}

void Tape::collect_leaf_grads() {
  for (Node& n : nodes_) {
    if (n.op != Op::Leaf || !n.bound || !n.bound->requires_grad) continue;
    if (n.grad.empty()) continue;
    for (size_t i = 0; i < n.grad.size(); ++i) n.bound->grad[i] += n.grad[i];
  }
}

void Adam::step(std::map<std::string, Tensor>& params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& [name, p] : params) {
    if (!p.requires_grad) continue;
    Slot& s = state_[name];
    if (s.m.size() != p.v.size()) {
      s.m.assign(p.v.size(), 0.0);
      s.v.assign(p.v.size(), 0.0);
    }
    for (size_t i = 0; i < p.v.size(); ++i) {
      const double gi = p.grad[i];
      s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * gi;
      s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * gi * gi;
      const double mhat = s.m[i] / bc1;
      const double vhat = s.v[i] / bc2;
      p.v[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void save_tensors(const std::string& path,
                  const std::map<std::string, Tensor>& tensors,
                  const std::string& meta_json) {
  json j;
  j["format"] = "pieceformer-checkpoint";
  j["version"] = 1;
  j["meta"] = json::parse(meta_json);
  json jt = json::object();
  for (const auto& [name, t] : tensors) {
    json entry;
    entry["shape"] = {t.rows, t.cols};
    entry["requires_grad"] = t.requires_grad;
    entry["values"] = t.v;
    jt[name] = std::move(entry);
  }
  j["tensors"] = std::move(jt);
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open for writing");
  out << j.dump() << "\n";
}

std::map<std::string, Tensor> load_tensors(const std::string& path,
                                           std::string* meta_json) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "pieceformer-checkpoint")
      throw ParseError(path + ": not a checkpoint file");
    if (j.at("version").get<int>() != 1)
      throw ParseError(path + ": unsupported checkpoint version");
    if (meta_json) *meta_json = j.at("meta").dump();
    std::map<std::string, Tensor> out;
    for (const auto& [name, entry] : j.at("tensors").items()) {
      Tensor t;
      t.rows = entry.at("shape").at(0).get<int>();
      t.cols = entry.at("shape").at(1).get<int>();
      t.v = entry.at("values").get<std::vector<double>>();
      if (t.v.size() != static_cast<size_t>(t.rows) * t.cols)
        throw ParseError(path + ": tensor \"" + name + "\" shape mismatch");
      t.set_requires_grad(entry.at("requires_grad").get<bool>());
      out.emplace(name, std::move(t));
    }
    return out;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace pieceformer
