#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace park {

using Shape = std::vector<int>;

int64_t numel(const Shape& s);
std::string shape_str(const Shape& s);

class Tensor;
struct Node;
class GradRouter;

using BackwardFn = std::function<void(Node&, GradRouter&)>;

// One record of the computation tape. Values are computed eagerly when the
// operation is built; the backward rule is stored for the reverse sweep.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // sized lazily during backward
  bool requires_grad = false;
  bool is_leaf = true;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;

  int64_t size() const { return static_cast<int64_t>(value.size()); }
  double* ensure_grad();
  void release_buffers();
};

// Gradients of leaf tensors collected by one backward pass. When training
// runs several graphs concurrently over shared parameters, each pass routes
// leaf gradients into its own map instead of the shared nodes.
class GradMap {
 public:
  std::vector<double>& slot(const Node* n, int64_t size);
  const std::vector<double>* find(const Tensor& leaf) const;
  void add_scaled(const GradMap& other, double scale);
  void clear() { grads_.clear(); }
  bool empty() const { return grads_.empty(); }

 private:
  std::unordered_map<const Node*, std::vector<double>> grads_;
};

// Routes gradient accumulation during one backward sweep: interior nodes
// accumulate in place, leaves go to the external map when one is given.
class GradRouter {
 public:
  explicit GradRouter(GradMap* sink) : sink_(sink) {}
  double* grad_of(const std::shared_ptr<Node>& n);

 private:
  GradMap* sink_;
};

// Value-semantic handle to a graph node. Copying shares the node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data,
                     bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t size() const { return node_->size(); }
  int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->is_leaf; }

  const std::vector<double>& value() const { return node_->value; }
  const std::vector<double>& grad() const { return node_->grad; }
  double item() const;

  // Mutable access to leaf storage (parameters). Mutating between graph
  // builds is fine; graph-tracked intermediate values are never mutated.
  std::vector<double>& leaf_data();
  void zero_grad();

  std::shared_ptr<Node> node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}
  std::shared_ptr<Node> node_;

  friend Tensor custom_op(const char* name, Shape out_shape,
                          std::vector<Tensor> inputs,
                          const std::function<void(Node&)>& forward,
                          BackwardFn backward);
};

// Builds a taped operation: allocates the output node, runs `forward` to
// fill its value, and registers `backward` if any input needs gradients.
Tensor custom_op(const char* name, Shape out_shape, std::vector<Tensor> inputs,
                 const std::function<void(Node&)>& forward,
                 BackwardFn backward);

// Reverse sweep from a scalar loss. Visits nodes once in reverse topological
// order. With `sink`, leaf gradients go to the map; otherwise they accumulate
// on the leaf nodes themselves. With `release`, interior buffers are freed as
// soon as they are no longer needed.
void backward(const Tensor& loss, GradMap* sink = nullptr,
              bool release = false);

// ---- operations ----

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor add_rowvec(const Tensor& m, const Tensor& v);  // [r,c] + [c]
Tensor add_colvec(const Tensor& m, const Tensor& v);  // [r,c] + [r]

Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k]x[k,n]
Tensor transpose(const Tensor& a);                // 2-D

Tensor reshape(const Tensor& a, Shape shape);
Tensor slice_rows(const Tensor& a, int r0, int r1);
Tensor slice_cols(const Tensor& a, int c0, int c1);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor square(const Tensor& a);

Tensor softmax(const Tensor& a, int axis);
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets);

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);

// Multi-head scaled-dot-product attention over 2-D token matrices
// q:[Tq,d] k,v:[Tk,d], d divisible by heads. `mask`, when defined, is a
// constant additive [Tq,Tk] bias (0 or large negative). Softmax rows are
// recomputed during backward instead of stored, keeping memory O(T*d).
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads,
                 const Tensor& mask = Tensor());

// Returns the [Tq,Tk] attention weights averaged over heads (forward only,
// no gradient); used for attention visualization.
std::vector<double> attention_weights(const Tensor& q, const Tensor& k,
                                      int heads, const Tensor& mask = Tensor());

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);

Tensor im2col(const Tensor& x, int kh, int kw, int stride, int pad);
Tensor avg_pool_chw(const Tensor& x, int k);
Tensor embedding(const Tensor& table, const std::vector<int>& ids);

bool all_finite(const Tensor& t);

}  // namespace park
