#include "park/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "park/kernels.hpp"

namespace park {

int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int e : s) n *= e;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

double* Node::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad.data();
}

void Node::release_buffers() {
  value.clear();
  value.shrink_to_fit();
  grad.clear();
  grad.shrink_to_fit();
  backward = nullptr;
}

std::vector<double>& GradMap::slot(const Node* n, int64_t size) {
  auto& v = grads_[n];
  if (static_cast<int64_t>(v.size()) != size) v.assign(size, 0.0);
  return v;
}

const std::vector<double>* GradMap::find(const Tensor& leaf) const {
  auto it = grads_.find(leaf.node().get());
  return it == grads_.end() ? nullptr : &it->second;
}

void GradMap::add_scaled(const GradMap& other, double scale) {
  for (const auto& [node, g] : other.grads_) {
    auto& mine = grads_[node];
    if (mine.size() != g.size()) mine.assign(g.size(), 0.0);
    for (size_t i = 0; i < g.size(); ++i) mine[i] += scale * g[i];
  }
}

double* GradRouter::grad_of(const std::shared_ptr<Node>& n) {
  if (sink_ && n->is_leaf) return sink_->slot(n.get(), n->size()).data();
  return n->ensure_grad();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return from(shape, std::vector<double>(numel(shape), 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  return from(shape, std::vector<double>(numel(shape), v), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  if (numel(shape) != static_cast<int64_t>(data.size()))
    throw std::invalid_argument("Tensor::from: shape " + shape_str(shape) +
                                " does not match data length " +
                                std::to_string(data.size()));
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(data);
  n->requires_grad = requires_grad;
  n->is_leaf = true;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from({1}, {v}, requires_grad);
}

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item() on non-scalar tensor");
  return node_->value[0];
}

std::vector<double>& Tensor::leaf_data() {
  if (!node_->is_leaf)
    throw std::logic_error("leaf_data() on an interior graph node");
  return node_->value;
}

void Tensor::zero_grad() {
  node_->grad.assign(node_->value.size(), 0.0);
}

Tensor custom_op(const char* name, Shape out_shape, std::vector<Tensor> inputs,
                 const std::function<void(Node&)>& forward,
                 BackwardFn backward) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(out_shape);
  n->value.assign(numel(n->shape), 0.0);
  n->is_leaf = false;
  n->op = name;
  bool rg = false;
  n->inputs.reserve(inputs.size());
  for (const Tensor& t : inputs) {
    rg = rg || t.requires_grad();
    n->inputs.push_back(t.node());
  }
  n->requires_grad = rg;
  forward(*n);
  if (rg) n->backward = std::move(backward);
  return Tensor(std::move(n));
}

void backward(const Tensor& loss, GradMap* sink, bool release) {
  if (!loss.defined() || loss.size() != 1)
    throw std::invalid_argument("backward: loss must be a scalar");
  if (!loss.requires_grad())
    throw std::invalid_argument("backward: loss does not require gradients");

  // Iterative post-order DFS: children before parents, then reversed.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->inputs.size()) {
      Node* child = node->inputs[idx++].get();
      if (child->requires_grad && !visited.count(child)) {
        visited.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->ensure_grad()[0] = 1.0;
  GradRouter router(sink);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) n->backward(*n, router);
    if (release && !n->is_leaf) n->release_buffers();
  }
}

// ---- helpers ----

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

const std::vector<double>& in_val(Node& n, size_t i) {
  return n.inputs[i]->value;
}

}  // namespace

// ---- elementwise ----

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "add: shape mismatch " +
                                      shape_str(a.shape()) + " vs " +
                                      shape_str(b.shape()));
  return custom_op(
      "add", a.shape(), {a, b},
      [](Node& n) {
        const auto& x = in_val(n, 0);
        const auto& y = in_val(n, 1);
        for (size_t i = 0; i < x.size(); ++i) n.value[i] = x[i] + y[i];
      },
      [](Node& n, GradRouter& r) {
        for (size_t s = 0; s < 2; ++s) {
          if (!n.inputs[s]->requires_grad) continue;
          double* g = r.grad_of(n.inputs[s]);
          for (size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
        }
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "sub: shape mismatch " +
                                      shape_str(a.shape()) + " vs " +
                                      shape_str(b.shape()));
  return custom_op(
      "sub", a.shape(), {a, b},
      [](Node& n) {
        const auto& x = in_val(n, 0);
        const auto& y = in_val(n, 1);
        for (size_t i = 0; i < x.size(); ++i) n.value[i] = x[i] - y[i];
      },
      [](Node& n, GradRouter& r) {
        if (n.inputs[0]->requires_grad) {
          double* g = r.grad_of(n.inputs[0]);
          for (size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
        }
        if (n.inputs[1]->requires_grad) {
          double* g = r.grad_of(n.inputs[1]);
          for (size_t i = 0; i < n.grad.size(); ++i) g[i] -= n.grad[i];
        }
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "mul: shape mismatch " +
                                      shape_str(a.shape()) + " vs " +
                                      shape_str(b.shape()));
  return custom_op(
      "mul", a.shape(), {a, b},
      [](Node& n) {
        const auto& x = in_val(n, 0);
        const auto& y = in_val(n, 1);
        for (size_t i = 0; i < x.size(); ++i) n.value[i] = x[i] * y[i];
      },
      [](Node& n, GradRouter& r) {
        const auto& x = in_val(n, 0);
        const auto& y = in_val(n, 1);
        if (n.inputs[0]->requires_grad) {
          double* g = r.grad_of(n.inputs[0]);
          for (size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * y[i];
        }
        if (n.inputs[1]->requires_grad) {
          double* g = r.grad_of(n.inputs[1]);
          for (size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * x[i];
        }
      });
}

Tensor scale(const Tensor& a, double s) {
  return custom_op(
      "scale", a.shape(), {a},
      [s](Node& n) {
        const auto& x = in_val(n, 0);
        for (size_t i = 0; i < x.size(); ++i) n.value[i] = x[i] * s;
      },
      [s](Node& n, GradRouter& r) {
        double* g = r.grad_of(n.inputs[0]);
        for (size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * s;
      });
}

Tensor add_scalar(const Tensor& a, double s) {
  return custom_op(
      "add_scalar", a.shape(), {a},
      [s](Node& n) {
        const auto& x = in_val(n, 0);
        for (size_t i = 0; i < x.size(); ++i) n.value[i] = x[i] + s;
      },
      [](Node& n, GradRouter& r) {
        double* g = r.grad_of(n.inputs[0]);
        for (size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
      });
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  require(m.rank() == 2 && v.rank() == 1 && m.dim(1) == v.dim(0),
          "add_rowvec: shapes " + shape_str(m.shape()) + " vs " +
              shape_str(v.shape()));
  const int rows = m.dim(0), cols = m.dim(1);
  return custom_op(
      "add_rowvec", m.shape(), {m, v},
      [rows, cols](Node& n) {
        const auto& x = in_val(n, 0);
        const auto& b = in_val(n, 1);
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < cols; ++j)
            n.value[i * cols + j] = x[i * cols + j] + b[j];
      },
      [rows, cols](Node& n, GradRouter& r) {
        if (n.inputs[0]->requires_grad) {
          double* g = r.grad_of(n.inputs[0]);
          for (size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
        }
        if (n.inputs[1]->requires_grad) {
          double* g = r.grad_of(n.inputs[1]);
          for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) g[j] += n.grad[i * cols + j];
        }
      });
}

Tensor add_colvec(const Tensor& m, const Tensor& v) {
  require(m.rank() == 2 && v.rank() == 1 && m.dim(0) == v.dim(0),
          "add_colvec: shapes " + shape_str(m.shape()) + " vs " +
              shape_str(v.shape()));
  const int rows = m.dim(0), cols = m.dim(1);
  return custom_op(
      "add_colvec", m.shape(), {m, v},
      [rows, cols](Node& n) {
        const auto& x = in_val(n, 0);
        const auto& b = in_val(n, 1);
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < cols; ++j)
            n.value[i * cols + j] = x[i * cols + j] + b[i];
      },
      [rows, cols](Node& n, GradRouter& r) {
        if (n.inputs[0]->requires_grad) {
          double* g = r.grad_of(n.inputs[0]);
          for (size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
        }
        if (n.inputs[1]->requires_grad) {
          double* g = r.grad_of(n.inputs[1]);
          for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) g[i] += n.grad[i * cols + j];
        }
      });
}

// ---- linear algebra ----

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0),
          "matmul: shape mismatch " + shape_str(a.shape()) + " vs " +
              shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  return custom_op(
      "matmul", {m, n}, {a, b},
      [m, k, n](Node& nd) {
        kernels::gemm(in_val(nd, 0).data(), in_val(nd, 1).data(),
                      nd.value.data(), m, k, n);
      },
      [m, k, n](Node& nd, GradRouter& r) {
        // dA += dC * B^T ; dB += A^T * dC
        if (nd.inputs[0]->requires_grad)
          kernels::gemm_nt_acc(nd.grad.data(), in_val(nd, 1).data(),
                               r.grad_of(nd.inputs[0]), m, n, k);
        if (nd.inputs[1]->requires_grad)
          kernels::gemm_tn_acc(in_val(nd, 0).data(), nd.grad.data(),
                               r.grad_of(nd.inputs[1]), k, m, n);
      });
}

Tensor transpose(const Tensor& a) {
  require(a.rank() == 2, "transpose: rank-2 tensor required, got " +
                             shape_str(a.shape()));
  const int rows = a.dim(0), cols = a.dim(1);
  return custom_op(
      "transpose", {cols, rows}, {a},
      [rows, cols](Node& n) {
        kernels::transpose(in_val(n, 0).data(), n.value.data(), rows, cols);
      },
      [rows, cols](Node& n, GradRouter& r) {
        double* g = r.grad_of(n.inputs[0]);
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < cols; ++j) g[i * cols + j] += n.grad[j * rows + i];
      });
}

// ---- shape ops ----

Tensor reshape(const Tensor& a, Shape shape) {
  require(numel(shape) == a.size(), "reshape: size mismatch " +
                                        shape_str(a.shape()) + " -> " +
                                        shape_str(shape));
  return custom_op(
      "reshape", std::move(shape), {a},
      [](Node& n) { n.value = in_val(n, 0); },
      [](Node& n, GradRouter& r) {
        double* g = r.grad_of(n.inputs[0]);
        for (size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
      });
}

Tensor slice_rows(const Tensor& a, int r0, int r1) {
  require(a.rank() == 2 && 0 <= r0 && r0 < r1 && r1 <= a.dim(0),
          "slice_rows: bad range");
  const int cols = a.dim(1);
  return custom_op(
      "slice_rows", {r1 - r0, cols}, {a},
      [r0, cols](Node& n) {
        const auto& x = in_val(n, 0);
        std::copy(x.begin() + static_cast<int64_t>(r0) * cols,
                  x.begin() + static_cast<int64_t>(r0) * cols +
                      static_cast<int64_t>(n.value.size()),
                  n.value.begin());
      },
      [r0, cols](Node& n, GradRouter& r) {
        double* g = r.grad_of(n.inputs[0]);
        for (size_t i = 0; i < n.grad.size(); ++i)
          g[static_cast<int64_t>(r0) * cols + i] += n.grad[i];
      });
}

Tensor slice_cols(const Tensor& a, int c0, int c1) {
  require(a.rank() == 2 && 0 <= c0 && c0 < c1 && c1 <= a.dim(1),
          "slice_cols: bad range");
  const int rows = a.dim(0), cols = a.dim(1), w = c1 - c0;
  return custom_op(
      "slice_cols", {rows, w}, {a},
      [rows, cols, c0, w](Node& n) {
        const auto& x = in_val(n, 0);
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < w; ++j)
            n.value[i * w + j] = x[i * cols + c0 + j];
      },
      [rows, cols, c0, w](Node& n, GradRouter& r) {
        double* g = r.grad_of(n.inputs[0]);
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < w; ++j)
            g[i * cols + c0 + j] += n.grad[i * w + j];
      });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_rows: empty list");
  const int cols = parts[0].rank() == 1 ? parts[0].dim(0) : parts[0].dim(1);
  int rows = 0;
  for (const Tensor& p : parts) {
    if (p.rank() == 1) {
      require(p.dim(0) == cols, "concat_rows: column mismatch");
      rows += 1;
    } else {
      require(p.rank() == 2 && p.dim(1) == cols, "concat_rows: column mismatch");
      rows += p.dim(0);
    }
  }
  return custom_op(
      "concat_rows", {rows, cols}, parts,
      [](Node& n) {
        size_t off = 0;
        for (auto& in : n.inputs) {
          std::copy(in->value.begin(), in->value.end(), n.value.begin() + off);
          off += in->value.size();
        }
      },
      [](Node& n, GradRouter& r) {
        size_t off = 0;
        for (auto& in : n.inputs) {
          if (in->requires_grad) {
            double* g = r.grad_of(in);
            for (size_t i = 0; i < in->value.size(); ++i)
              g[i] += n.grad[off + i];
          }
          off += in->value.size();
        }
      });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_cols: empty list");
  const int rows = parts[0].dim(0);
  int cols = 0;
  for (const Tensor& p : parts) {
    require(p.rank() == 2 && p.dim(0) == rows, "concat_cols: row mismatch");
    cols += p.dim(1);
  }
  return custom_op(
      "concat_cols", {rows, cols}, parts,
      [rows, cols](Node& n) {
        int c0 = 0;
        for (auto& in : n.inputs) {
          const int w = in->shape[1];
          for (int i = 0; i < rows; ++i)
            for (int j = 0; j < w; ++j)
              n.value[i * cols + c0 + j] = in->value[i * w + j];
          c0 += w;
        }
      },
      [rows, cols](Node& n, GradRouter& r) {
        int c0 = 0;
        for (auto& in : n.inputs) {
          const int w = in->shape[1];
          if (in->requires_grad) {
            double* g = r.grad_of(in);
            for (int i = 0; i < rows; ++i)
              for (int j = 0; j < w; ++j)
                g[i * w + j] += n.grad[i * cols + c0 + j];
          }
          c0 += w;
        }
      });
}

// ---- nonlinearities ----

Tensor tanh(const Tensor& a) {
  return custom_op(
      "tanh", a.shape(), {a},
      [](Node& n) {
        const auto& x = in_val(n, 0);
        for (size_t i = 0; i < x.size(); ++i) n.value[i] = std::tanh(x[i]);
      },
      [](Node& n, GradRouter& r) {
        double* g = r.grad_of(n.inputs[0]);
        for (size_t i = 0; i < n.grad.size(); ++i)
          g[i] += n.grad[i] * (1.0 - n.value[i] * n.value[i]);
      });
}

Tensor sigmoid(const Tensor& a) {
  return custom_op(
      "sigmoid", a.shape(), {a},
      [](Node& n) {
        const auto& x = in_val(n, 0);
        for (size_t i = 0; i < x.size(); ++i)
          n.value[i] = x[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-x[i]))
                                   : std::exp(x[i]) / (1.0 + std::exp(x[i]));
      },
      [](Node& n, GradRouter& r) {
        double* g = r.grad_of(n.inputs[0]);
        for (size_t i = 0; i < n.grad.size(); ++i)
          g[i] += n.grad[i] * n.value[i] * (1.0 - n.value[i]);
      });
}

Tensor relu(const Tensor& a) {
  return custom_op(
      "relu", a.shape(), {a},
      [](Node& n) {
        const auto& x = in_val(n, 0);
        for (size_t i = 0; i < x.size(); ++i) n.value[i] = x[i] > 0.0 ? x[i] : 0.0;
      },
      [](Node& n, GradRouter& r) {
        const auto& x = in_val(n, 0);
        double* g = r.grad_of(n.inputs[0]);
        for (size_t i = 0; i < n.grad.size(); ++i)
          if (x[i] > 0.0) g[i] += n.grad[i];
      });
}

Tensor square(const Tensor& a) {
  return custom_op(
      "square", a.shape(), {a},
      [](Node& n) {
        const auto& x = in_val(n, 0);
        for (size_t i = 0; i < x.size(); ++i) n.value[i] = x[i] * x[i];
      },
      [](Node& n, GradRouter& r) {
        const auto& x = in_val(n, 0);
        double* g = r.grad_of(n.inputs[0]);
        for (size_t i = 0; i < n.grad.size(); ++i)
          g[i] += 2.0 * n.grad[i] * x[i];
      });
}

// ---- reductions & probabilistic heads ----

Tensor softmax(const Tensor& a, int axis) {
  require(axis >= 0 && axis < a.rank(),
          "softmax: invalid axis " + std::to_string(axis) + " for shape " +
              shape_str(a.shape()));
  require(a.dim(axis) > 0, "softmax: empty axis");
  int64_t inner = 1, outer = 1;
  const int n = a.dim(axis);
  for (int i = 0; i < axis; ++i) outer *= a.dim(i);
  for (int i = axis + 1; i < a.rank(); ++i) inner *= a.dim(i);

  auto for_each_slice = [outer, inner, n](auto&& fn) {
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t in = 0; in < inner; ++in) {
        const int64_t base = o * n * inner + in;
        fn(base, inner);
      }
  };

  return custom_op(
      "softmax", a.shape(), {a},
      [for_each_slice, n](Node& nd) {
        const auto& x = in_val(nd, 0);
        for_each_slice([&](int64_t base, int64_t stride) {
          double mx = x[base];
          for (int i = 1; i < n; ++i) mx = std::max(mx, x[base + i * stride]);
          double sum = 0.0;
          for (int i = 0; i < n; ++i) {
            const double e = std::exp(x[base + i * stride] - mx);
            nd.value[base + i * stride] = e;
            sum += e;
          }
          const double inv = 1.0 / sum;
          for (int i = 0; i < n; ++i) nd.value[base + i * stride] *= inv;
        });
      },
      [for_each_slice, n](Node& nd, GradRouter& r) {
        double* g = r.grad_of(nd.inputs[0]);
        for_each_slice([&](int64_t base, int64_t stride) {
          double dot = 0.0;
          for (int i = 0; i < n; ++i)
            dot += nd.grad[base + i * stride] * nd.value[base + i * stride];
          for (int i = 0; i < n; ++i)
            g[base + i * stride] += nd.value[base + i * stride] *
                                    (nd.grad[base + i * stride] - dot);
        });
      });
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets) {
  require(logits.rank() == 2, "cross_entropy: logits must be [N,V], got " +
                                  shape_str(logits.shape()));
  const int rows = logits.dim(0), vocab = logits.dim(1);
  require(static_cast<int>(targets.size()) == rows,
          "cross_entropy: target count mismatch");
  for (int t : targets)
    require(t >= 0 && t < vocab, "cross_entropy: target index " +
                                     std::to_string(t) + " out of range [0," +
                                     std::to_string(vocab) + ")");
  return custom_op(
      "cross_entropy", {1}, {logits},
      [rows, vocab, targets](Node& n) {
        const auto& x = in_val(n, 0);
        double total = 0.0;
        for (int i = 0; i < rows; ++i) {
          const double* row = x.data() + static_cast<int64_t>(i) * vocab;
          double mx = row[0];
          for (int j = 1; j < vocab; ++j) mx = std::max(mx, row[j]);
          double sum = 0.0;
          for (int j = 0; j < vocab; ++j) sum += std::exp(row[j] - mx);
          if (!std::isfinite(sum))
            throw std::invalid_argument("cross_entropy: non-finite logits");
          total += std::log(sum) + mx - row[targets[i]];
        }
        n.value[0] = total / rows;
      },
      [rows, vocab, targets](Node& n, GradRouter& r) {
        const auto& x = in_val(n, 0);
        double* g = r.grad_of(n.inputs[0]);
        const double gy = n.grad[0] / rows;
        for (int i = 0; i < rows; ++i) {
          const double* row = x.data() + static_cast<int64_t>(i) * vocab;
          double* grow = g + static_cast<int64_t>(i) * vocab;
          double mx = row[0];
          for (int j = 1; j < vocab; ++j) mx = std::max(mx, row[j]);
          double sum = 0.0;
          for (int j = 0; j < vocab; ++j) sum += std::exp(row[j] - mx);
          const double inv = 1.0 / sum;
          for (int j = 0; j < vocab; ++j)
            grow[j] += gy * std::exp(row[j] - mx) * inv;
          grow[targets[i]] -= gy;
        }
      });
}

Tensor sum_all(const Tensor& a) {
  return custom_op(
      "sum_all", {1}, {a},
      [](Node& n) {
        double s = 0.0;
        for (double v : in_val(n, 0)) s += v;
        n.value[0] = s;
      },
      [](Node& n, GradRouter& r) {
        double* g = r.grad_of(n.inputs[0]);
        const double gy = n.grad[0];
        for (size_t i = 0; i < n.inputs[0]->value.size(); ++i) g[i] += gy;
      });
}

Tensor mean_all(const Tensor& a) {
  const double inv = 1.0 / static_cast<double>(a.size());
  return scale(sum_all(a), inv);
}

// ---- attention ----

namespace {

struct AttnDims {
  int tq, tk, d, heads, dh;
  double scl;
};

AttnDims attn_dims(const Tensor& q, const Tensor& k, const Tensor& v, int heads) {
  require(q.rank() == 2 && k.rank() == 2 && v.rank() == 2,
          "attention: rank-2 inputs required");
  require(q.dim(1) == k.dim(1) && k.shape() == v.shape(),
          "attention: shape mismatch q" + shape_str(q.shape()) + " k" +
              shape_str(k.shape()) + " v" + shape_str(v.shape()));
  require(heads > 0 && q.dim(1) % heads == 0,
          "attention: model width not divisible by head count");
  AttnDims d{};
  d.tq = q.dim(0);
  d.tk = k.dim(0);
  d.d = q.dim(1);
  d.heads = heads;
  d.dh = d.d / heads;
  d.scl = 1.0 / std::sqrt(static_cast<double>(d.dh));
  return d;
}

// One softmax(QK^T)V row for head h at query row i; probs written to p.
void attn_row_probs(const double* q, const double* k, const double* mask,
                    const AttnDims& a, int h, int i, double* p) {
  const double* qi = q + static_cast<int64_t>(i) * a.d + h * a.dh;
  double mx = -1e300;
  for (int j = 0; j < a.tk; ++j) {
    const double* kj = k + static_cast<int64_t>(j) * a.d + h * a.dh;
    double s = 0.0;
    for (int c = 0; c < a.dh; ++c) s += qi[c] * kj[c];
    s *= a.scl;
    if (mask) s += mask[static_cast<int64_t>(i) * a.tk + j];
    p[j] = s;
    mx = std::max(mx, s);
  }
  double sum = 0.0;
  for (int j = 0; j < a.tk; ++j) {
    p[j] = std::exp(p[j] - mx);
    sum += p[j];
  }
  const double inv = 1.0 / sum;
  for (int j = 0; j < a.tk; ++j) p[j] *= inv;
}

}  // namespace

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads,
                 const Tensor& mask) {
  const AttnDims a = attn_dims(q, k, v, heads);
  if (mask.defined())
    require(mask.rank() == 2 && mask.dim(0) == a.tq && mask.dim(1) == a.tk,
            "attention: mask shape mismatch");
  std::vector<Tensor> inputs = {q, k, v};
  if (mask.defined()) inputs.push_back(mask);
  const bool has_mask = mask.defined();
  return custom_op(
      "attention", {a.tq, a.d}, std::move(inputs),
      [a, has_mask](Node& n) {
        const double* qd = in_val(n, 0).data();
        const double* kd = in_val(n, 1).data();
        const double* vd = in_val(n, 2).data();
        const double* md = has_mask ? in_val(n, 3).data() : nullptr;
#pragma omp parallel for schedule(static) if (a.tq * a.tk > 4096)
        for (int h = 0; h < a.heads; ++h) {
          std::vector<double> p(a.tk);
          for (int i = 0; i < a.tq; ++i) {
            attn_row_probs(qd, kd, md, a, h, i, p.data());
            double* out = n.value.data() + static_cast<int64_t>(i) * a.d +
                          h * a.dh;
            for (int c = 0; c < a.dh; ++c) out[c] = 0.0;
            for (int j = 0; j < a.tk; ++j) {
              const double pj = p[j];
              const double* vj = vd + static_cast<int64_t>(j) * a.d + h * a.dh;
              for (int c = 0; c < a.dh; ++c) out[c] += pj * vj[c];
            }
          }
        }
      },
      [a, has_mask](Node& n, GradRouter& r) {
        const double* qd = in_val(n, 0).data();
        const double* kd = in_val(n, 1).data();
        const double* vd = in_val(n, 2).data();
        const double* md = has_mask ? in_val(n, 3).data() : nullptr;
        double* gq = n.inputs[0]->requires_grad ? r.grad_of(n.inputs[0]) : nullptr;
        double* gk = n.inputs[1]->requires_grad ? r.grad_of(n.inputs[1]) : nullptr;
        double* gv = n.inputs[2]->requires_grad ? r.grad_of(n.inputs[2]) : nullptr;
        // Probabilities are recomputed per row; accumulation into gk/gv is
        // serial over query rows within a head, heads run in parallel.
#pragma omp parallel for schedule(static) if (a.tq * a.tk > 4096)
        for (int h = 0; h < a.heads; ++h) {
          std::vector<double> p(a.tk), dp(a.tk);
          for (int i = 0; i < a.tq; ++i) {
            attn_row_probs(qd, kd, md, a, h, i, p.data());
            const double* go = n.grad.data() + static_cast<int64_t>(i) * a.d +
                               h * a.dh;
            double dot = 0.0;
            for (int j = 0; j < a.tk; ++j) {
              const double* vj = vd + static_cast<int64_t>(j) * a.d + h * a.dh;
              double s = 0.0;
              for (int c = 0; c < a.dh; ++c) s += go[c] * vj[c];
              dp[j] = s;
              dot += p[j] * s;
            }
            const double* qi = qd + static_cast<int64_t>(i) * a.d + h * a.dh;
            double* gqi = gq ? gq + static_cast<int64_t>(i) * a.d + h * a.dh
                             : nullptr;
            for (int j = 0; j < a.tk; ++j) {
              const double ds = p[j] * (dp[j] - dot) * a.scl;
              const double* kj = kd + static_cast<int64_t>(j) * a.d + h * a.dh;
              if (gqi)
                for (int c = 0; c < a.dh; ++c) gqi[c] += ds * kj[c];
              if (gk) {
                double* gkj = gk + static_cast<int64_t>(j) * a.d + h * a.dh;
                for (int c = 0; c < a.dh; ++c) gkj[c] += ds * qi[c];
              }
              if (gv) {
                double* gvj = gv + static_cast<int64_t>(j) * a.d + h * a.dh;
                for (int c = 0; c < a.dh; ++c) gvj[c] += p[j] * go[c];
              }
            }
          }
        }
      });
}

std::vector<double> attention_weights(const Tensor& q, const Tensor& k,
                                      int heads, const Tensor& mask) {
  const AttnDims a = attn_dims(q, k, k, heads);
  const double* md = mask.defined() ? mask.value().data() : nullptr;
  std::vector<double> out(static_cast<size_t>(a.tq) * a.tk, 0.0);
  std::vector<double> p(a.tk);
  for (int h = 0; h < a.heads; ++h)
    for (int i = 0; i < a.tq; ++i) {
      attn_row_probs(q.value().data(), k.value().data(), md, a, h, i, p.data());
      for (int j = 0; j < a.tk; ++j)
        out[static_cast<int64_t>(i) * a.tk + j] += p[j] / a.heads;
    }
  return out;
}

// ---- normalization ----

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  require(x.rank() == 2 && gain.rank() == 1 && bias.rank() == 1 &&
              gain.dim(0) == x.dim(1) && bias.dim(0) == x.dim(1),
          "layer_norm: shape mismatch");
  const int rows = x.dim(0), cols = x.dim(1);
  constexpr double kEps = 1e-5;
  return custom_op(
      "layer_norm", x.shape(), {x, gain, bias},
      [rows, cols](Node& n) {
        const auto& xv = in_val(n, 0);
        const auto& g = in_val(n, 1);
        const auto& b = in_val(n, 2);
        for (int i = 0; i < rows; ++i) {
          const double* row = xv.data() + static_cast<int64_t>(i) * cols;
          double mean = 0.0;
          for (int j = 0; j < cols; ++j) mean += row[j];
          mean /= cols;
          double var = 0.0;
          for (int j = 0; j < cols; ++j) {
            const double d = row[j] - mean;
            var += d * d;
          }
          var /= cols;
          const double rstd = 1.0 / std::sqrt(var + kEps);
          double* out = n.value.data() + static_cast<int64_t>(i) * cols;
          for (int j = 0; j < cols; ++j)
            out[j] = (row[j] - mean) * rstd * g[j] + b[j];
        }
      },
      [rows, cols](Node& n, GradRouter& r) {
        const auto& xv = in_val(n, 0);
        const auto& g = in_val(n, 1);
        double* gx = n.inputs[0]->requires_grad ? r.grad_of(n.inputs[0]) : nullptr;
        double* gg = n.inputs[1]->requires_grad ? r.grad_of(n.inputs[1]) : nullptr;
        double* gb = n.inputs[2]->requires_grad ? r.grad_of(n.inputs[2]) : nullptr;
        for (int i = 0; i < rows; ++i) {
          const double* row = xv.data() + static_cast<int64_t>(i) * cols;
          const double* dy = n.grad.data() + static_cast<int64_t>(i) * cols;
          double mean = 0.0;
          for (int j = 0; j < cols; ++j) mean += row[j];
          mean /= cols;
          double var = 0.0;
          for (int j = 0; j < cols; ++j) {
            const double d = row[j] - mean;
            var += d * d;
          }
          var /= cols;
          const double rstd = 1.0 / std::sqrt(var + kEps);
          double m1 = 0.0, m2 = 0.0;
          for (int j = 0; j < cols; ++j) {
            const double xh = (row[j] - mean) * rstd;
            const double dg = dy[j] * g[j];
            m1 += dg;
            m2 += dg * xh;
          }
          m1 /= cols;
          m2 /= cols;
          for (int j = 0; j < cols; ++j) {
            const double xh = (row[j] - mean) * rstd;
            if (gg) gg[j] += dy[j] * xh;
            if (gb) gb[j] += dy[j];
            if (gx) gx[i * cols + j] += (dy[j] * g[j] - m1 - xh * m2) * rstd;
          }
        }
      });
}

// ---- convolution support ----

Tensor im2col(const Tensor& x, int kh, int kw, int stride, int pad) {
  require(x.rank() == 3, "im2col: input must be [C,H,W]");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int oh = (h + 2 * pad - kh) / stride + 1;
  const int ow = (w + 2 * pad - kw) / stride + 1;
  require(oh > 0 && ow > 0, "im2col: kernel larger than padded input");
  const int krows = c * kh * kw, kcols = oh * ow;
  auto index_map = [=](int row, int col, int& src) -> bool {
    const int cc = row / (kh * kw);
    const int di = (row / kw) % kh;
    const int dj = row % kw;
    const int oy = col / ow, ox = col % ow;
    const int iy = oy * stride + di - pad;
    const int ix = ox * stride + dj - pad;
    if (iy < 0 || iy >= h || ix < 0 || ix >= w) return false;
    src = (cc * h + iy) * w + ix;
    return true;
  };
  return custom_op(
      "im2col", {krows, kcols}, {x},
      [krows, kcols, index_map](Node& n) {
        const auto& xv = in_val(n, 0);
#pragma omp parallel for schedule(static) if (krows * kcols > 16384)
        for (int rr = 0; rr < krows; ++rr)
          for (int cc2 = 0; cc2 < kcols; ++cc2) {
            int src;
            n.value[static_cast<int64_t>(rr) * kcols + cc2] =
                index_map(rr, cc2, src) ? xv[src] : 0.0;
          }
      },
      [krows, kcols, index_map](Node& n, GradRouter& r) {
        double* g = r.grad_of(n.inputs[0]);
        for (int rr = 0; rr < krows; ++rr)
          for (int cc2 = 0; cc2 < kcols; ++cc2) {
            int src;
            if (index_map(rr, cc2, src))
              g[src] += n.grad[static_cast<int64_t>(rr) * kcols + cc2];
          }
      });
}

Tensor avg_pool_chw(const Tensor& x, int k) {
  require(x.rank() == 3, "avg_pool: input must be [C,H,W]");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  require(h % k == 0 && w % k == 0, "avg_pool: extent not divisible by window");
  const int oh = h / k, ow = w / k;
  const double inv = 1.0 / (k * k);
  return custom_op(
      "avg_pool", {c, oh, ow}, {x},
      [=](Node& n) {
        const auto& xv = in_val(n, 0);
#pragma omp parallel for schedule(static) if (c * oh * ow > 4096)
        for (int cc = 0; cc < c; ++cc)
          for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j) {
              double s = 0.0;
              for (int di = 0; di < k; ++di)
                for (int dj = 0; dj < k; ++dj)
                  s += xv[(static_cast<int64_t>(cc) * h + i * k + di) * w +
                          j * k + dj];
              n.value[(static_cast<int64_t>(cc) * oh + i) * ow + j] = s * inv;
            }
      },
      [=](Node& n, GradRouter& r) {
        double* g = r.grad_of(n.inputs[0]);
        for (int cc = 0; cc < c; ++cc)
          for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j) {
              const double gy =
                  n.grad[(static_cast<int64_t>(cc) * oh + i) * ow + j] * inv;
              for (int di = 0; di < k; ++di)
                for (int dj = 0; dj < k; ++dj)
                  g[(static_cast<int64_t>(cc) * h + i * k + di) * w + j * k +
                    dj] += gy;
            }
      });
}

Tensor embedding(const Tensor& table, const std::vector<int>& ids) {
  require(table.rank() == 2, "embedding: table must be [V,d]");
  const int vocab = table.dim(0), d = table.dim(1);
  for (int id : ids)
    require(id >= 0 && id < vocab, "embedding: id out of range");
  const int n = static_cast<int>(ids.size());
  return custom_op(
      "embedding", {n, d}, {table},
      [ids, d](Node& nd) {
        const auto& t = in_val(nd, 0);
        for (size_t i = 0; i < ids.size(); ++i)
          std::copy(t.begin() + static_cast<int64_t>(ids[i]) * d,
                    t.begin() + static_cast<int64_t>(ids[i] + 1) * d,
                    nd.value.begin() + static_cast<int64_t>(i) * d);
      },
      [ids, d](Node& nd, GradRouter& r) {
        double* g = r.grad_of(nd.inputs[0]);
        for (size_t i = 0; i < ids.size(); ++i)
          for (int j = 0; j < d; ++j)
            g[static_cast<int64_t>(ids[i]) * d + j] +=
                nd.grad[static_cast<int64_t>(i) * d + j];
      });
}

bool all_finite(const Tensor& t) {
  for (double v : t.value())
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace park
