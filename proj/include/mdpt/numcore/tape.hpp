#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "mdpt/numcore/tensor.hpp"

namespace mdpt::numcore {

// Handle into a Tape's node list.
struct Value {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
};

struct AttentionShape {
  size_t batch = 0;
  size_t seq = 0;
  size_t heads = 0;
};

// Define-by-run reverse-mode tape. Forward values are computed eagerly as ops
// are recorded; backprop() walks the graph once in reverse and then releases
// it, so a Tape serves exactly one loss evaluation.
//
// All activations are 2-D (rows x cols); 1-D tensors are read as 1 x n.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf holding a trainable parameter. Repeated calls with the same name
  // return the same node, so MLM loss and EWC penalty share leaves and their
  // gradients accumulate. The referenced tensor must outlive the tape.
  Value param(const std::string& name, const Tensor& t);
  // Leaf that takes no gradient (data, anchors, Fisher weights).
  Value input(Tensor t);

  Value matmul(Value a, Value b);          // (m,k) x (k,n)
  Value add(Value a, Value b);             // same shape
  Value sub(Value a, Value b);             // same shape
  Value add_bias(Value x, Value b);        // (n,h) + broadcast (h)
  Value scale(Value x, double c);
  Value mul(Value a, Value b);             // elementwise, same shape
  Value square(Value x);
  Value sum_all(Value x);                  // -> scalar
  Value gelu(Value x);                     // exact erf form
  Value layer_norm(Value x, Value gain, Value bias, double eps);
  // out[i,:] = table[ids[i],:]; ids must be < table rows.
  Value gather_rows(Value table, std::vector<int32_t> ids);
  // Bidirectional softmax attention over per-head slices of q,k,v, each
  // (batch*seq, hidden). key_valid has batch*seq entries; 0 marks padding
  // keys that are excluded from every softmax.
  Value attention(Value q, Value k, Value v, const AttentionShape& shape,
                  std::vector<uint8_t> key_valid);
  // Mean cross-entropy over the selected logit rows. targets[i] is the label
  // for logits row rows[i].
  Value masked_cross_entropy(Value logits, std::vector<int32_t> targets,
                             std::vector<size_t> rows);

  const Tensor& value(Value v) const;
  double scalar(Value v) const { return value(v).item(); }
  size_t node_count() const { return nodes_.size(); }
  bool released() const { return released_; }

  // Exact reverse-mode gradients for every parameter reachable from `loss`.
  // The graph is released afterwards; the tape cannot be reused.
  GradientMap backprop(Value loss);

 private:
  enum class Op : uint8_t {
    kParam, kInput, kMatMul, kAdd, kSub, kAddBias, kScale, kMul, kSquare,
    kSumAll, kGelu, kLayerNorm, kGatherRows, kAttention, kMaskedCrossEntropy,
  };

  struct Node {
    Op op;
    int32_t a = -1, b = -1, c = -1;
    Tensor out;
    double alpha = 0.0;               // scale factor / layer-norm eps
    std::vector<int32_t> ids;         // gather ids or CE targets
    std::vector<size_t> rows;         // CE target rows
    std::vector<uint8_t> key_valid;   // attention padding mask
    AttentionShape att;
    Tensor saved;                     // op-specific forward cache
    Tensor saved2;
    std::string pname;                // kParam only
  };

  Value push(Node n, const char* what);
  const Node& at(Value v) const;
  void check_alive() const;
  void backward_node(int32_t i, std::vector<Tensor>& grads);
  static Tensor& grad_for(std::vector<Tensor>& grads, const Node& owner, int32_t id,
                          const std::vector<Node>& nodes);

  std::vector<Node> nodes_;
  std::unordered_map<std::string, int32_t> param_index_;
  bool released_ = false;
};

}  // namespace mdpt::numcore
