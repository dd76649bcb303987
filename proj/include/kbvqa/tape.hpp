#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "kbvqa/params.hpp"
#include "kbvqa/tensor.hpp"

namespace kbvqa {

// Probability floor inside cross_entropy, keeps log() off exact zeros.
inline constexpr double kCrossEntropyFloor = 1e-12;

class Tape;

// Handle to a node in the tape's differentiation graph.
struct Var {
  int id = -1;
  Tape* tape = nullptr;
  bool valid() const { return id >= 0; }
};

enum class Op {
  kLeaf,
  kParam,
  kMatMul,
  kAdd,
  kSub,
  kMul,
  kScale,
  kTanh,
  kSigmoid,
  kSoftmax,
  kConcat,
  kTranspose,
  kSum,
  kCrossEntropy,
  kPickCol,
  kTileCols,
  kEmbed,
  kBatchNorm,
  kReshape,
};

struct Node {
  Op op = Op::kLeaf;
  Tensor value;
  Tensor grad;  // allocated on first accumulation during backward
  bool grad_alloc = false;
  bool requires_grad = false;
  std::vector<int> parents;
  int i0 = 0;                 // axis / label / column / tile count
  double d0 = 0.0;            // scale factor / epsilon
  std::vector<int> aux_ids;   // embed token ids, concat extents
  Tensor aux_a, aux_b;        // batchnorm saved xhat / invstd
  ParamEntry* param = nullptr;
};

// Per-forward-pass reverse-mode graph. Built fresh each step; backward()
// consumes it (one backward per build), reset() clears it for reuse.
class Tape {
 public:
  explicit Tape(Precision precision = Precision::f64) : precision_(precision) {}

  Var leaf(Tensor value, bool requires_grad = false);
  // One node per store entry per tape; repeated calls return the same Var.
  Var param(ParamEntry& entry);
  Var param(ParameterStore& store, const std::string& name) { return param(store.entry(name)); }

  // a is [m,k]; b is [k,n] or a length-k vector (result then has length m).
  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var tanh_op(Var a);
  Var sigmoid(Var a);
  // axis 0 normalizes columns of a matrix (a vector is one column);
  // axis 1 normalizes rows. Max-subtracted for stability.
  Var softmax(Var a, int axis);
  Var concat(const std::vector<Var>& xs, int axis);
  Var transpose(Var a);
  Var sum(Var a);
  Var mean(Var a);
  // dist is a probability vector (validated to sum to 1 within 1e-6);
  // value is -log(max(dist[label], floor)).
  Var cross_entropy(Var dist, int label);
  Var pick_col(Var a, int col);
  Var tile_cols(Var a, int n);
  // Stacks length-d vectors into a [d, n] matrix (columns in order).
  Var stack_cols(const std::vector<Var>& xs);
  // table is [vocab, dim]; result is [dim, len(ids)].
  Var embed(Var table, const std::vector<int>& ids);
  // x is [d, batch]; per-feature batch statistics. Saves the batch mean and
  // (biased) variance into *batch_mean / *batch_var when non-null so the
  // caller can maintain running averages.
  Var batch_norm_train(Var x, Var gamma, Var beta, double eps, Tensor* batch_mean = nullptr,
                       Tensor* batch_var = nullptr);
  Var reshape(Var a, std::vector<int> shape);

  const Tensor& value(Var v) const { return node(v.id).value; }
  // Gradient of the last backward() w.r.t. this node; zeros if unreached.
  Tensor grad(Var v) const;

  void backward(Var loss);
  void reset();

  size_t size() const { return nodes_.size(); }
  Precision precision() const { return precision_; }

 private:
  Var push(Node&& n);
  Node& node(int id);
  const Node& node(int id) const;
  Tensor& grad_buf(int id);
  void accumulate(int id, const Tensor& g);
  void backprop_node(int id);

  Precision precision_;
  std::vector<Node> nodes_;
  std::unordered_map<const ParamEntry*, int> param_nodes_;
  bool consumed_ = false;
};

}  // namespace kbvqa
