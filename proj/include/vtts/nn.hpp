// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode autodiff on dense double tensors. One Tape per
// forward pass; nodes are created in topological order and backward walks
// them in reverse. Parameters live outside the tape in a ParamStore; their
// gradients accumulate into an external flat buffer so per-sample tapes can
// run in parallel and reduce deterministically.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "vtts/common.hpp"

namespace vtts::nn {

/// Named parameter tensors packed into one flat vector. Registration order
/// defines the flat layout, so the same registration sequence on two
/// processes produces identical layouts.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    std::vector<int> shape;
    size_t offset = 0;
    size_t size = 0;
  };

  int add(const std::string& name, std::vector<int> shape);
  int index_of(const std::string& name) const;  // throws InputError if absent
  bool has(const std::string& name) const { return by_name_.count(name) != 0; }
  const Entry& entry(int idx) const { return entries_[idx]; }
  const Entry& entry(const std::string& name) const { return entries_[index_of(name)]; }
  const std::vector<Entry>& entries() const { return entries_; }
  size_t total_size() const { return flat_.size(); }

  double* data(int idx) { return flat_.data() + entries_[idx].offset; }
  const double* data(int idx) const { return flat_.data() + entries_[idx].offset; }
  double* data(const std::string& name) { return data(index_of(name)); }
  const double* data(const std::string& name) const { return data(index_of(name)); }

  std::vector<double>& flat() { return flat_; }
  const std::vector<double>& flat() const { return flat_; }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> by_name_;
  std::vector<double> flat_;
};

/// Non-trainable state (batch-norm running statistics). Same layout rules.
using StatStore = ParamStore;

struct BatchNormStats {
  std::string stat_prefix;  // "<prefix>.rmean" / "<prefix>.rvar"
  std::vector<double> mean;
  std::vector<double> var_unbiased;
};

enum class Mode { Train, Eval };

class Tape {
 public:
  /// grad_accum, when non-null, must have params->total_size() entries; the
  /// gradients of parameter leaves accumulate there. Null means
  /// inference-only (backward() throws).
  Tape(const ParamStore* params, double* grad_accum);

  // ---- node creation ----
  int input(const Mat& m);  // [rows, cols]
  int input(std::vector<int> shape, std::vector<double> values);
  int constant_like(std::vector<int> shape, std::vector<double> values) {
    return input(std::move(shape), std::move(values));
  }
  int param(const std::string& name);  // leaf viewing the store

  // ---- ops; all return the new node id ----
  int add(int a, int b);                       // same shape
  int sub(int a, int b);                       // same shape
  int mul(int a, int b);                       // hadamard
  int scale(int a, double s);
  int add_bias_rows(int x, int bias);          // x[R,C] + bias[C]
  int matmul(int a, int b);                    // [m,k]x[k,n] -> [m,n]
  int matmul_nt(int a, int b);                 // [m,k] x [n,k]^T -> [m,n]
  int linear(int x, int w, int b);             // x[R,K], w[N,K], b[N] -> [R,N]
  int relu(int a);
  int softmax_rows(int a);                     // [R,C], softmax over C
  int layer_norm(int x, int gamma, int beta, double eps);  // [R,C] row-wise
  int transpose(int x);                        // 2-D
  int slice_cols(int x, int c0, int c1);       // [R,C] -> [R,c1-c0)
  int concat_cols(const std::vector<int>& xs); // column-wise concat
  int reshape(int x, std::vector<int> shape);  // same numel
  int gather_rows(int table, std::vector<int> idx);  // [V,C],[T] -> [T,C]
  int dropout(int x, double p, Rng& rng, Mode mode);
  /// x[T, Cin] -> [T, Cout]; w[Cout, Cin*k]; stride 1, zero padding `pad`.
  int conv1d(int x, int w, int b, int kernel, int pad);
  /// x[N, C, H, W] -> [N, Cout, H', W']; w[Cout, Cin*k*k]; stride 1.
  int conv2d(int x, int w, int b, int kernel, int pad);
  /// 2x2/stride-2 max pool on [N, C, H, W]; floor semantics.
  int max_pool2(int x);
  /// Batch norm over (N, H, W) per channel on [N, C, H, W].
  /// Train mode uses batch statistics (and reports them via `stats_out` for
  /// the caller to fold into running statistics); eval mode uses the
  /// supplied running statistics.
  int batch_norm2d(int x, int gamma, int beta, const double* running_mean,
                   const double* running_var, Mode mode, double eps,
                   BatchNormStats* stats_out);
  int l1_loss(int pred, int target);   // mean |pred-target| -> scalar
  int mse_loss(int pred, int target);  // mean (pred-target)^2 -> scalar
  int weighted_sum(const std::vector<std::pair<double, int>>& terms);  // scalars

  // ---- access ----
  const std::vector<int>& shape(int id) const { return nodes_[id].shape; }
  const double* values(int id) const { return nodes_[id].x; }
  size_t numel(int id) const { return nodes_[id].n; }
  double scalar(int id) const;
  Mat mat(int id) const;  // 2-D copy

  /// Reverse pass from a scalar loss node.
  void backward(int loss);
  /// Reverse pass seeding d(output)/d(node) with an explicit upstream
  /// gradient (same numel as the node).
  void backward(int node, const std::vector<double>& upstream);
  /// Copy of a node's accumulated gradient (valid after backward()).
  std::vector<double> grad_of(int id) const;

 private:
  struct Node {
    std::vector<int> shape;
    size_t n = 0;
    const double* x = nullptr;        // value view
    std::vector<double> own_x;        // owning storage unless external
    double* g = nullptr;              // gradient view
    std::vector<double> own_g;
    std::function<void(Tape&)> back;  // null for leaves
  };

  int new_node(std::vector<int> shape);
  int new_node_like(const std::vector<int>& shape, size_t n);
  double* grad(int id) { return nodes_[id].g; }
  const double* val(int id) const { return nodes_[id].x; }
  void run_backward(int from);

  const ParamStore* params_;
  double* grad_accum_;
  std::unordered_map<int, int> param_nodes_;  // param index -> node id
  std::vector<Node> nodes_;
};

/// Global L2 norm of a flat gradient vector.
double l2_norm(const std::vector<double>& v);

/// Sinusoidal position encoding, [len, dim].
Mat position_encoding(int len, int dim);

}  // namespace vtts::nn
