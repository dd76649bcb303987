#include "kbvqa/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kbvqa {

namespace {
[[noreturn]] void shape_error(const std::string& op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(op + ": incompatible shapes " + a.shape_str() + " vs " + b.shape_str());
}
}  // namespace

Node& Tape::node(int id) { return nodes_[static_cast<size_t>(id)]; }
const Node& Tape::node(int id) const { return nodes_[static_cast<size_t>(id)]; }

Var Tape::push(Node&& n) {
  if (n.op != Op::kLeaf && n.op != Op::kParam) {
    for (int p : n.parents)
      if (node(p).requires_grad) n.requires_grad = true;
  }
  apply_precision(n.value, precision_);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1, this};
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

Var Tape::param(ParamEntry& entry) {
  auto it = param_nodes_.find(&entry);
  if (it != param_nodes_.end()) return Var{it->second, this};
  Node n;
  n.op = Op::kParam;
  n.value = entry.value;  // copy; entries are small at pipeline scale
  n.requires_grad = true;
  n.param = &entry;
  Var v = push(std::move(n));
  param_nodes_.emplace(&entry, v.id);
  return v;
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.ndim() != 2) throw std::invalid_argument("matmul: left operand must be 2-d, got " + A.shape_str());
  if (B.ndim() != 1 && B.ndim() != 2) shape_error("matmul", A, B);
  int m = A.shape[0], k = A.shape[1];
  int bk = B.shape[0];
  int nn = B.ndim() == 2 ? B.shape[1] : 1;
  if (k != bk) shape_error("matmul", A, B);
  Node n;
  n.op = Op::kMatMul;
  n.parents = {a.id, b.id};
  n.value = B.ndim() == 2 ? Tensor::zeros({m, nn}) : Tensor::zeros({m});
  // i-k-j loop order keeps the inner loop contiguous
  for (int i = 0; i < m; ++i) {
    double* out = &n.value.data[static_cast<size_t>(i) * nn];
    const double* arow = &A.data[static_cast<size_t>(i) * k];
    for (int l = 0; l < k; ++l) {
      double av = arow[l];
      if (av == 0.0) continue;
      const double* brow = &B.data[static_cast<size_t>(l) * nn];
      for (int j = 0; j < nn; ++j) out[j] += av * brow[j];
    }
  }
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (!A.same_shape(B)) shape_error("add", A, B);
  Node n;
  n.op = Op::kAdd;
  n.parents = {a.id, b.id};
  n.value = A;
  for (size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] += B.data[i];
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (!A.same_shape(B)) shape_error("sub", A, B);
  Node n;
  n.op = Op::kSub;
  n.parents = {a.id, b.id};
  n.value = A;
  for (size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] -= B.data[i];
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (!A.same_shape(B)) shape_error("mul", A, B);
  Node n;
  n.op = Op::kMul;
  n.parents = {a.id, b.id};
  n.value = A;
  for (size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] *= B.data[i];
  return push(std::move(n));
}

Var Tape::scale(Var a, double c) {
  Node n;
  n.op = Op::kScale;
  n.parents = {a.id};
  n.d0 = c;
  n.value = value(a);
  for (double& x : n.value.data) x *= c;
  return push(std::move(n));
}

Var Tape::tanh_op(Var a) {
  Node n;
  n.op = Op::kTanh;
  n.parents = {a.id};
  n.value = value(a);
  for (double& x : n.value.data) x = std::tanh(x);
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  Node n;
  n.op = Op::kSigmoid;
  n.parents = {a.id};
  n.value = value(a);
  for (double& x : n.value.data) x = 1.0 / (1.0 + std::exp(-x));
  return push(std::move(n));
}

Var Tape::softmax(Var a, int axis) {
  const Tensor& A = value(a);
  if (A.ndim() == 0) throw std::invalid_argument("softmax: scalar input");
  if (axis < 0 || axis >= A.ndim())
    throw std::invalid_argument("softmax: axis " + std::to_string(axis) + " invalid for shape " + A.shape_str());
  Node n;
  n.op = Op::kSoftmax;
  n.parents = {a.id};
  n.i0 = axis;
  n.value = A;
  Tensor& Y = n.value;
  // treat a vector as a single column
  int rows = A.ndim() == 2 ? A.shape[0] : A.shape[0];
  int cols = A.ndim() == 2 ? A.shape[1] : 1;
  bool along_rows = (A.ndim() == 2 && axis == 1);
  int n_slices = along_rows ? rows : cols;
  int slice_len = along_rows ? cols : rows;
  auto idx = [&](int s, int t) {
    return along_rows ? static_cast<size_t>(s) * cols + t : static_cast<size_t>(t) * cols + s;
  };
  for (int s = 0; s < n_slices; ++s) {
    double mx = Y.data[idx(s, 0)];
    for (int t = 1; t < slice_len; ++t) mx = std::max(mx, Y.data[idx(s, t)]);
    double total = 0.0;
    for (int t = 0; t < slice_len; ++t) {
      double e = std::exp(Y.data[idx(s, t)] - mx);
      Y.data[idx(s, t)] = e;
      total += e;
    }
    for (int t = 0; t < slice_len; ++t) Y.data[idx(s, t)] /= total;
  }
  return push(std::move(n));
}

Var Tape::concat(const std::vector<Var>& xs, int axis) {
  if (xs.empty()) throw std::invalid_argument("concat: no inputs");
  const Tensor& first = value(xs[0]);
  int nd = first.ndim();
  if (nd == 0 || axis < 0 || axis >= std::max(nd, 1))
    throw std::invalid_argument("concat: axis " + std::to_string(axis) + " invalid for shape " + first.shape_str());
  Node n;
  n.op = Op::kConcat;
  n.i0 = axis;
  int total = 0;
  for (Var x : xs) {
    const Tensor& T = value(x);
    if (T.ndim() != nd) shape_error("concat", first, T);
    for (int d = 0; d < nd; ++d)
      if (d != axis && T.shape[d] != first.shape[d]) shape_error("concat", first, T);
    n.parents.push_back(x.id);
    n.aux_ids.push_back(T.shape[axis]);
    total += T.shape[axis];
  }
  std::vector<int> out_shape = first.shape;
  out_shape[axis] = total;
  n.value = Tensor::zeros(out_shape);
  if (nd == 1) {
    int off = 0;
    for (Var x : xs) {
      const Tensor& T = value(x);
      std::copy(T.data.begin(), T.data.end(), n.value.data.begin() + off);
      off += T.numel();
    }
  } else {
    int out_cols = n.value.shape[1];
    if (axis == 0) {
      int row_off = 0;
      for (Var x : xs) {
        const Tensor& T = value(x);
        std::copy(T.data.begin(), T.data.end(), n.value.data.begin() + static_cast<size_t>(row_off) * out_cols);
        row_off += T.shape[0];
      }
    } else {
      int col_off = 0;
      for (Var x : xs) {
        const Tensor& T = value(x);
        for (int r = 0; r < T.shape[0]; ++r)
          std::copy(T.data.begin() + static_cast<size_t>(r) * T.shape[1],
                    T.data.begin() + static_cast<size_t>(r + 1) * T.shape[1],
                    n.value.data.begin() + static_cast<size_t>(r) * out_cols + col_off);
        col_off += T.shape[1];
      }
    }
  }
  return push(std::move(n));
}

Var Tape::transpose(Var a) {
  const Tensor& A = value(a);
  if (A.ndim() != 2) throw std::invalid_argument("transpose: need 2-d, got " + A.shape_str());
  Node n;
  n.op = Op::kTranspose;
  n.parents = {a.id};
  n.value = Tensor::zeros({A.shape[1], A.shape[0]});
  for (int r = 0; r < A.shape[0]; ++r)
    for (int c = 0; c < A.shape[1]; ++c) n.value.at(c, r) = A.at(r, c);
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  Node n;
  n.op = Op::kSum;
  n.parents = {a.id};
  double total = 0.0;
  for (double x : value(a).data) total += x;
  n.value = Tensor::scalar(total);
  return push(std::move(n));
}

Var Tape::mean(Var a) { return scale(sum(a), 1.0 / value(a).numel()); }

Var Tape::cross_entropy(Var dist, int label) {
  const Tensor& P = value(dist);
  if (P.ndim() != 1) throw std::invalid_argument("cross_entropy: need a probability vector, got " + P.shape_str());
  if (label < 0 || label >= P.numel())
    throw std::out_of_range("cross_entropy: label " + std::to_string(label) + " out of range for " + P.shape_str());
  double total = 0.0;
  for (double p : P.data) total += p;
  if (std::abs(total - 1.0) > 1e-6)
    throw std::invalid_argument("cross_entropy: input sums to " + std::to_string(total) + ", not a distribution");
  Node n;
  n.op = Op::kCrossEntropy;
  n.parents = {dist.id};
  n.i0 = label;
  n.value = Tensor::scalar(-std::log(std::max(P.data[static_cast<size_t>(label)], kCrossEntropyFloor)));
  return push(std::move(n));
}

Var Tape::pick_col(Var a, int col) {
  const Tensor& A = value(a);
  if (A.ndim() != 2) throw std::invalid_argument("pick_col: need 2-d, got " + A.shape_str());
  if (col < 0 || col >= A.shape[1]) throw std::out_of_range("pick_col: column " + std::to_string(col));
  Node n;
  n.op = Op::kPickCol;
  n.parents = {a.id};
  n.i0 = col;
  n.value = Tensor::zeros({A.shape[0]});
  for (int r = 0; r < A.shape[0]; ++r) n.value.data[r] = A.at(r, col);
  return push(std::move(n));
}

Var Tape::tile_cols(Var a, int count) {
  const Tensor& A = value(a);
  if (A.ndim() != 1) throw std::invalid_argument("tile_cols: need 1-d, got " + A.shape_str());
  if (count < 1) throw std::invalid_argument("tile_cols: count must be positive");
  Node n;
  n.op = Op::kTileCols;
  n.parents = {a.id};
  n.i0 = count;
  n.value = Tensor::zeros({A.shape[0], count});
  for (int r = 0; r < A.shape[0]; ++r)
    for (int c = 0; c < count; ++c) n.value.at(r, c) = A.data[r];
  return push(std::move(n));
}

Var Tape::stack_cols(const std::vector<Var>& xs) {
  std::vector<Var> cols;
  cols.reserve(xs.size());
  for (Var x : xs) {
    const Tensor& T = value(x);
    if (T.ndim() != 1) throw std::invalid_argument("stack_cols: need 1-d inputs, got " + T.shape_str());
    cols.push_back(reshape(x, {T.shape[0], 1}));
  }
  return concat(cols, 1);
}

Var Tape::embed(Var table, const std::vector<int>& ids) {
  const Tensor& T = value(table);
  if (T.ndim() != 2) throw std::invalid_argument("embed: table must be 2-d, got " + T.shape_str());
  if (ids.empty()) throw std::invalid_argument("embed: empty id sequence");
  int vocab = T.shape[0], dim = T.shape[1];
  for (int id : ids)
    if (id < 0 || id >= vocab)
      throw std::out_of_range("embed: token id " + std::to_string(id) + " outside vocabulary of size " +
                              std::to_string(vocab));
  Node n;
  n.op = Op::kEmbed;
  n.parents = {table.id};
  n.aux_ids = ids;
  n.value = Tensor::zeros({dim, static_cast<int>(ids.size())});
  for (size_t i = 0; i < ids.size(); ++i)
    for (int d = 0; d < dim; ++d) n.value.at(d, static_cast<int>(i)) = T.at(ids[i], d);
  return push(std::move(n));
}

Var Tape::batch_norm_train(Var x, Var gamma, Var beta, double eps, Tensor* batch_mean, Tensor* batch_var) {
  const Tensor& X = value(x);
  const Tensor& G = value(gamma);
  const Tensor& B = value(beta);
  if (X.ndim() != 2) throw std::invalid_argument("batch_norm: input must be [features, batch], got " + X.shape_str());
  int d = X.shape[0], batch = X.shape[1];
  if (G.ndim() != 1 || G.shape[0] != d) shape_error("batch_norm(gamma)", X, G);
  if (B.ndim() != 1 || B.shape[0] != d) shape_error("batch_norm(beta)", X, B);
  Node n;
  n.op = Op::kBatchNorm;
  n.parents = {x.id, gamma.id, beta.id};
  n.d0 = eps;
  n.value = Tensor::zeros({d, batch});
  n.aux_a = Tensor::zeros({d, batch});  // normalized input
  n.aux_b = Tensor::zeros({d});         // inverse stddev
  Tensor mean = Tensor::zeros({d});
  Tensor var = Tensor::zeros({d});
  for (int r = 0; r < d; ++r) {
    double mu = 0.0;
    for (int c = 0; c < batch; ++c) mu += X.at(r, c);
    mu /= batch;
    double v = 0.0;
    for (int c = 0; c < batch; ++c) {
      double diff = X.at(r, c) - mu;
      v += diff * diff;
    }
    v /= batch;
    double inv = 1.0 / std::sqrt(v + eps);
    mean.data[r] = mu;
    var.data[r] = v;
    n.aux_b.data[r] = inv;
    for (int c = 0; c < batch; ++c) {
      double xh = (X.at(r, c) - mu) * inv;
      n.aux_a.at(r, c) = xh;
      n.value.at(r, c) = G.data[r] * xh + B.data[r];
    }
  }
  if (batch_mean) *batch_mean = std::move(mean);
  if (batch_var) *batch_var = std::move(var);
  return push(std::move(n));
}

Var Tape::reshape(Var a, std::vector<int> shape) {
  const Tensor& A = value(a);
  if (shape_numel(shape) != A.numel())
    throw std::invalid_argument("reshape: cannot view " + A.shape_str() + " as " + shape_to_string(shape));
  Node n;
  n.op = Op::kReshape;
  n.parents = {a.id};
  n.value = A;
  n.value.shape = std::move(shape);
  return push(std::move(n));
}

Tensor Tape::grad(Var v) const {
  const Node& n = node(v.id);
  if (n.grad_alloc) return n.grad;
  Tensor z = n.value;
  z.fill(0.0);
  return z;
}

Tensor& Tape::grad_buf(int id) {
  Node& n = node(id);
  if (!n.grad_alloc) {
    n.grad = n.value;
    n.grad.fill(0.0);
    n.grad_alloc = true;
  }
  return n.grad;
}

void Tape::accumulate(int id, const Tensor& g) {
  Tensor& dst = grad_buf(id);
  for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += g.data[i];
}

void Tape::backward(Var loss) {
  if (consumed_) throw std::logic_error("backward: tape already consumed; reset() before reuse");
  if (!value(loss).is_scalar())
    throw std::invalid_argument("backward: loss must be a scalar, got " + value(loss).shape_str());
  consumed_ = true;
  grad_buf(loss.id).data[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = node(id);
    if (!n.grad_alloc || !n.requires_grad) continue;
    backprop_node(id);
  }
  // flush parameter gradients into their store entries
  for (auto& [entry, id] : param_nodes_) {
    Node& n = node(id);
    if (!n.grad_alloc) continue;
    ParamEntry* e = n.param;
    for (size_t i = 0; i < e->grad.data.size(); ++i) e->grad.data[i] += n.grad.data[i];
    e->grad_set = true;
  }
}

void Tape::backprop_node(int id) {
  Node& n = node(id);
  const Tensor& g = n.grad;
  auto wants = [&](int pid) { return node(pid).requires_grad; };
  switch (n.op) {
    case Op::kLeaf:
    case Op::kParam:
      break;
    case Op::kMatMul: {
      int a = n.parents[0], b = n.parents[1];
      const Tensor& A = node(a).value;
      const Tensor& B = node(b).value;
      int m = A.shape[0], k = A.shape[1];
      int nn = B.ndim() == 2 ? B.shape[1] : 1;
      if (wants(a)) {
        Tensor& da = grad_buf(a);
        for (int i = 0; i < m; ++i)
          for (int l = 0; l < k; ++l) {
            double s = 0.0;
            const double* grow = &g.data[static_cast<size_t>(i) * nn];
            const double* brow = &B.data[static_cast<size_t>(l) * nn];
            for (int j = 0; j < nn; ++j) s += grow[j] * brow[j];
            da.data[static_cast<size_t>(i) * k + l] += s;
          }
      }
      if (wants(b)) {
        Tensor& db = grad_buf(b);
        for (int l = 0; l < k; ++l) {
          double* dbrow = &db.data[static_cast<size_t>(l) * nn];
          for (int i = 0; i < m; ++i) {
            double av = A.data[static_cast<size_t>(i) * k + l];
            if (av == 0.0) continue;
            const double* grow = &g.data[static_cast<size_t>(i) * nn];
            for (int j = 0; j < nn; ++j) dbrow[j] += av * grow[j];
          }
        }
      }
      break;
    }
    case Op::kAdd:
      if (wants(n.parents[0])) accumulate(n.parents[0], g);
      if (wants(n.parents[1])) accumulate(n.parents[1], g);
      break;
    case Op::kSub: {
      if (wants(n.parents[0])) accumulate(n.parents[0], g);
      if (wants(n.parents[1])) {
        Tensor& db = grad_buf(n.parents[1]);
        for (size_t i = 0; i < db.data.size(); ++i) db.data[i] -= g.data[i];
      }
      break;
    }
    case Op::kMul: {
      int a = n.parents[0], b = n.parents[1];
      if (wants(a)) {
        Tensor& da = grad_buf(a);
        const Tensor& B = node(b).value;
        for (size_t i = 0; i < da.data.size(); ++i) da.data[i] += g.data[i] * B.data[i];
      }
      if (wants(b)) {
        Tensor& db = grad_buf(b);
        const Tensor& A = node(a).value;
        for (size_t i = 0; i < db.data.size(); ++i) db.data[i] += g.data[i] * A.data[i];
      }
      break;
    }
    case Op::kScale: {
      if (wants(n.parents[0])) {
        Tensor& da = grad_buf(n.parents[0]);
        for (size_t i = 0; i < da.data.size(); ++i) da.data[i] += n.d0 * g.data[i];
      }
      break;
    }
    case Op::kTanh: {
      if (wants(n.parents[0])) {
        Tensor& da = grad_buf(n.parents[0]);
        for (size_t i = 0; i < da.data.size(); ++i) da.data[i] += g.data[i] * (1.0 - n.value.data[i] * n.value.data[i]);
      }
      break;
    }
    case Op::kSigmoid: {
      if (wants(n.parents[0])) {
        Tensor& da = grad_buf(n.parents[0]);
        for (size_t i = 0; i < da.data.size(); ++i)
          da.data[i] += g.data[i] * n.value.data[i] * (1.0 - n.value.data[i]);
      }
      break;
    }
    case Op::kSoftmax: {
      if (!wants(n.parents[0])) break;
      Tensor& da = grad_buf(n.parents[0]);
      const Tensor& Y = n.value;
      int rows = Y.ndim() == 2 ? Y.shape[0] : Y.shape[0];
      int cols = Y.ndim() == 2 ? Y.shape[1] : 1;
      bool along_rows = (Y.ndim() == 2 && n.i0 == 1);
      int n_slices = along_rows ? rows : cols;
      int slice_len = along_rows ? cols : rows;
      auto idx = [&](int s, int t) {
        return along_rows ? static_cast<size_t>(s) * cols + t : static_cast<size_t>(t) * cols + s;
      };
      for (int s = 0; s < n_slices; ++s) {
        double dot = 0.0;
        for (int t = 0; t < slice_len; ++t) dot += g.data[idx(s, t)] * Y.data[idx(s, t)];
        for (int t = 0; t < slice_len; ++t) da.data[idx(s, t)] += Y.data[idx(s, t)] * (g.data[idx(s, t)] - dot);
      }
      break;
    }
    case Op::kConcat: {
      int axis = n.i0;
      int nd = n.value.ndim();
      int off = 0;
      for (size_t pi = 0; pi < n.parents.size(); ++pi) {
        int p = n.parents[pi];
        int extent = n.aux_ids[pi];
        if (wants(p)) {
          Tensor& dp = grad_buf(p);
          if (nd == 1) {
            for (int i = 0; i < extent; ++i) dp.data[i] += g.data[off + i];
          } else if (axis == 0) {
            int cols = n.value.shape[1];
            for (int r = 0; r < extent; ++r)
              for (int c = 0; c < cols; ++c)
                dp.data[static_cast<size_t>(r) * cols + c] += g.data[static_cast<size_t>(off + r) * cols + c];
          } else {
            int out_cols = n.value.shape[1];
            int rows = n.value.shape[0];
            for (int r = 0; r < rows; ++r)
              for (int c = 0; c < extent; ++c)
                dp.data[static_cast<size_t>(r) * extent + c] += g.data[static_cast<size_t>(r) * out_cols + off + c];
          }
        }
        off += extent;
      }
      break;
    }
    case Op::kTranspose: {
      if (wants(n.parents[0])) {
        Tensor& da = grad_buf(n.parents[0]);
        int rows = n.value.shape[0], cols = n.value.shape[1];
        for (int r = 0; r < rows; ++r)
          for (int c = 0; c < cols; ++c) da.at(c, r) += g.at(r, c);
      }
      break;
    }
    case Op::kSum: {
      if (wants(n.parents[0])) {
        Tensor& da = grad_buf(n.parents[0]);
        for (double& x : da.data) x += g.data[0];
      }
      break;
    }
    case Op::kCrossEntropy: {
      if (wants(n.parents[0])) {
        Tensor& da = grad_buf(n.parents[0]);
        const Tensor& P = node(n.parents[0]).value;
        double p = std::max(P.data[static_cast<size_t>(n.i0)], kCrossEntropyFloor);
        da.data[static_cast<size_t>(n.i0)] += g.data[0] * (-1.0 / p);
      }
      break;
    }
    case Op::kPickCol: {
      if (wants(n.parents[0])) {
        Tensor& da = grad_buf(n.parents[0]);
        int cols = node(n.parents[0]).value.shape[1];
        for (int r = 0; r < n.value.shape[0]; ++r) da.data[static_cast<size_t>(r) * cols + n.i0] += g.data[r];
      }
      break;
    }
    case Op::kTileCols: {
      if (wants(n.parents[0])) {
        Tensor& da = grad_buf(n.parents[0]);
        int d = n.value.shape[0], count = n.value.shape[1];
        for (int r = 0; r < d; ++r) {
          double s = 0.0;
          for (int c = 0; c < count; ++c) s += g.data[static_cast<size_t>(r) * count + c];
          da.data[r] += s;
        }
      }
      break;
    }
    case Op::kEmbed: {
      if (wants(n.parents[0])) {
        Tensor& dt = grad_buf(n.parents[0]);
        int dim = n.value.shape[0];
        int len = n.value.shape[1];
        int tdim = node(n.parents[0]).value.shape[1];
        for (int i = 0; i < len; ++i) {
          int row = n.aux_ids[static_cast<size_t>(i)];
          for (int d = 0; d < dim; ++d)
            dt.data[static_cast<size_t>(row) * tdim + d] += g.data[static_cast<size_t>(d) * len + i];
        }
      }
      break;
    }
    case Op::kBatchNorm: {
      int x = n.parents[0], gamma = n.parents[1], beta = n.parents[2];
      int d = n.value.shape[0], batch = n.value.shape[1];
      const Tensor& xhat = n.aux_a;
      const Tensor& invstd = n.aux_b;
      const Tensor& G = node(gamma).value;
      if (wants(beta)) {
        Tensor& db = grad_buf(beta);
        for (int r = 0; r < d; ++r) {
          double s = 0.0;
          for (int c = 0; c < batch; ++c) s += g.at(r, c);
          db.data[r] += s;
        }
      }
      if (wants(gamma)) {
        Tensor& dg = grad_buf(gamma);
        for (int r = 0; r < d; ++r) {
          double s = 0.0;
          for (int c = 0; c < batch; ++c) s += g.at(r, c) * xhat.at(r, c);
          dg.data[r] += s;
        }
      }
      if (wants(x)) {
        Tensor& dx = grad_buf(x);
        for (int r = 0; r < d; ++r) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (int c = 0; c < batch; ++c) {
            sum_g += g.at(r, c);
            sum_gx += g.at(r, c) * xhat.at(r, c);
          }
          double coef = G.data[r] * invstd.data[r] / batch;
          for (int c = 0; c < batch; ++c)
            dx.at(r, c) += coef * (batch * g.at(r, c) - sum_g - xhat.at(r, c) * sum_gx);
        }
      }
      break;
    }
    case Op::kReshape: {
      if (wants(n.parents[0])) {
        Tensor& da = grad_buf(n.parents[0]);
        for (size_t i = 0; i < da.data.size(); ++i) da.data[i] += g.data[i];
      }
      break;
    }
  }
}

void Tape::reset() {
  nodes_.clear();
  param_nodes_.clear();
  consumed_ = false;
}

}  // namespace kbvqa
