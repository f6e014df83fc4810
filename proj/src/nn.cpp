// SPDX-License-Identifier: Apache-2.0
#include "vtts/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

namespace vtts::nn {

namespace {

size_t shape_numel(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw InputError("negative tensor dimension");
    n *= static_cast<size_t>(d);
  }
  return n;
}

// Cache-blocked GEMM kernels (row-major, += semantics). Rows of the small
// left operand are processed in tiles so the big right operand streams from
// memory once per tile instead of once per row.
constexpr int kRowTile = 8;

// Dot product over eight independent accumulators: fixed summation order
// (deterministic) without the serial dependency chain that blocks SIMD.
inline double dot8(const double* a, const double* b, int K) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, s5 = 0, s6 = 0, s7 = 0;
  int k = 0;
  for (; k + 8 <= K; k += 8) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
    s4 += a[k + 4] * b[k + 4];
    s5 += a[k + 5] * b[k + 5];
    s6 += a[k + 6] * b[k + 6];
    s7 += a[k + 7] * b[k + 7];
  }
  for (; k < K; ++k) s0 += a[k] * b[k];
  return ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7));
}

// C[M,N] += A[M,K] * B[K,N]
void gemm_nn(const double* A, const double* B, double* C, int M, int K, int N) {
  for (int i0 = 0; i0 < M; i0 += kRowTile) {
    int i1 = std::min(i0 + kRowTile, M);
    for (int k = 0; k < K; ++k) {
      const double* brow = B + static_cast<size_t>(k) * N;
      for (int i = i0; i < i1; ++i) {
        double a = A[static_cast<size_t>(i) * K + k];
        if (a == 0.0) continue;
        double* crow = C + static_cast<size_t>(i) * N;
        for (int j = 0; j < N; ++j) crow[j] += a * brow[j];
      }
    }
  }
}

// C[M,N] += A[M,K] * B[N,K]^T
void gemm_nt(const double* A, const double* B, double* C, int M, int K, int N) {
  for (int j0 = 0; j0 < N; j0 += kRowTile) {
    int j1 = std::min(j0 + kRowTile, N);
    for (int i = 0; i < M; ++i) {
      const double* arow = A + static_cast<size_t>(i) * K;
      double* crow = C + static_cast<size_t>(i) * N;
      for (int j = j0; j < j1; ++j)
        crow[j] += dot8(arow, B + static_cast<size_t>(j) * K, K);
    }
  }
}

// C[M,N] += A[K,M]^T * B[K,N]
void gemm_tn(const double* A, const double* B, double* C, int M, int K, int N) {
  for (int i0 = 0; i0 < M; i0 += kRowTile) {
    int i1 = std::min(i0 + kRowTile, M);
    for (int k = 0; k < K; ++k) {
      const double* brow = B + static_cast<size_t>(k) * N;
      const double* arow = A + static_cast<size_t>(k) * M;
      for (int i = i0; i < i1; ++i) {
        double a = arow[i];
        if (a == 0.0) continue;
        double* crow = C + static_cast<size_t>(i) * N;
        for (int j = 0; j < N; ++j) crow[j] += a * brow[j];
      }
    }
  }
}

std::string shape_str(const std::vector<int>& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw InputError(msg);
}

}  // namespace

// ---------------------------------------------------------------- ParamStore

int ParamStore::add(const std::string& name, std::vector<int> shape) {
  if (by_name_.count(name)) throw InputError("duplicate parameter name: " + name);
  Entry e;
  e.name = name;
  e.size = shape_numel(shape);
  e.shape = std::move(shape);
  e.offset = flat_.size();
  flat_.resize(flat_.size() + e.size, 0.0);
  entries_.push_back(e);
  by_name_[name] = static_cast<int>(entries_.size()) - 1;
  return static_cast<int>(entries_.size()) - 1;
}

int ParamStore::index_of(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw InputError("unknown parameter: " + name);
  return it->second;
}

// ---------------------------------------------------------------------- Tape

Tape::Tape(const ParamStore* params, double* grad_accum)
    : params_(params), grad_accum_(grad_accum) {
  nodes_.reserve(256);
}

int Tape::new_node(std::vector<int> shape) {
  Node n;
  n.n = shape_numel(shape);
  n.shape = std::move(shape);
  n.own_x.assign(n.n, 0.0);
  n.x = n.own_x.data();
  if (grad_accum_) {  // inference tapes carry no gradient buffers
    n.own_g.assign(n.n, 0.0);
    n.g = n.own_g.data();
  }
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::input(const Mat& m) {
  int id = new_node({m.rows, m.cols});
  std::copy(m.a.begin(), m.a.end(), nodes_[id].own_x.begin());
  return id;
}

int Tape::input(std::vector<int> shape, std::vector<double> values) {
  size_t n = shape_numel(shape);
  require(values.size() == n, "input: values length does not match shape");
  int id = new_node(std::move(shape));
  std::copy(values.begin(), values.end(), nodes_[id].own_x.begin());
  return id;
}

int Tape::param(const std::string& name) {
  require(params_ != nullptr, "tape has no parameter store");
  int pidx = params_->index_of(name);
  auto it = param_nodes_.find(pidx);
  if (it != param_nodes_.end()) return it->second;
  const auto& e = params_->entry(pidx);
  Node n;
  n.shape = e.shape;
  n.n = e.size;
  n.x = params_->data(pidx);
  if (grad_accum_) n.g = grad_accum_ + e.offset;
  nodes_.push_back(std::move(n));
  int id = static_cast<int>(nodes_.size()) - 1;
  param_nodes_[pidx] = id;
  return id;
}

double Tape::scalar(int id) const {
  require(nodes_[id].n == 1, "scalar: node is not a scalar");
  return nodes_[id].x[0];
}

Mat Tape::mat(int id) const {
  const Node& n = nodes_[id];
  require(n.shape.size() == 2, "mat: node is not 2-D");
  Mat m(n.shape[0], n.shape[1]);
  std::copy(n.x, n.x + n.n, m.a.begin());
  return m;
}

void Tape::run_backward(int from) {
  for (int i = from; i >= 0; --i) {
    if (nodes_[i].back) nodes_[i].back(*this);
  }
}

void Tape::backward(int loss) {
  require(grad_accum_ != nullptr, "backward on an inference-only tape");
  require(nodes_[loss].n == 1, "backward: loss must be scalar");
  nodes_[loss].g[0] += 1.0;
  run_backward(loss);
}

void Tape::backward(int node, const std::vector<double>& upstream) {
  require(grad_accum_ != nullptr, "backward on an inference-only tape");
  require(upstream.size() == nodes_[node].n, "backward: upstream gradient size mismatch");
  double* g = nodes_[node].g;
  for (size_t i = 0; i < upstream.size(); ++i) g[i] += upstream[i];
  run_backward(node);
}

std::vector<double> Tape::grad_of(int id) const {
  const Node& n = nodes_[id];
  if (!n.g) throw InputError("grad_of: inference-only tape has no gradients");
  return std::vector<double>(n.g, n.g + n.n);
}

// ------------------------------------------------------------------ ops

int Tape::add(int a, int b) {
  require(nodes_[a].shape == nodes_[b].shape,
          "add: shape mismatch " + shape_str(nodes_[a].shape) + " vs " +
              shape_str(nodes_[b].shape));
  int y = new_node(nodes_[a].shape);
  const double* xa = val(a);
  const double* xb = val(b);
  double* xy = nodes_[y].own_x.data();
  size_t n = nodes_[y].n;
  for (size_t i = 0; i < n; ++i) xy[i] = xa[i] + xb[i];
  nodes_[y].back = [a, b, y, n](Tape& t) {
    const double* gy = t.grad(y);
    double* ga = t.grad(a);
    double* gb = t.grad(b);
    for (size_t i = 0; i < n; ++i) {
      ga[i] += gy[i];
      gb[i] += gy[i];
    }
  };
  return y;
}

int Tape::sub(int a, int b) {
  require(nodes_[a].shape == nodes_[b].shape, "sub: shape mismatch");
  int y = new_node(nodes_[a].shape);
  const double* xa = val(a);
  const double* xb = val(b);
  double* xy = nodes_[y].own_x.data();
  size_t n = nodes_[y].n;
  for (size_t i = 0; i < n; ++i) xy[i] = xa[i] - xb[i];
  nodes_[y].back = [a, b, y, n](Tape& t) {
    const double* gy = t.grad(y);
    double* ga = t.grad(a);
    double* gb = t.grad(b);
    for (size_t i = 0; i < n; ++i) {
      ga[i] += gy[i];
      gb[i] -= gy[i];
    }
  };
  return y;
}

int Tape::mul(int a, int b) {
  require(nodes_[a].shape == nodes_[b].shape, "mul: shape mismatch");
  int y = new_node(nodes_[a].shape);
  const double* xa = val(a);
  const double* xb = val(b);
  double* xy = nodes_[y].own_x.data();
  size_t n = nodes_[y].n;
  for (size_t i = 0; i < n; ++i) xy[i] = xa[i] * xb[i];
  nodes_[y].back = [a, b, y, n](Tape& t) {
    const double* gy = t.grad(y);
    const double* xa2 = t.val(a);
    const double* xb2 = t.val(b);
    double* ga = t.grad(a);
    double* gb = t.grad(b);
    for (size_t i = 0; i < n; ++i) {
      ga[i] += gy[i] * xb2[i];
      gb[i] += gy[i] * xa2[i];
    }
  };
  return y;
}

int Tape::scale(int a, double s) {
  int y = new_node(nodes_[a].shape);
  const double* xa = val(a);
  double* xy = nodes_[y].own_x.data();
  size_t n = nodes_[y].n;
  for (size_t i = 0; i < n; ++i) xy[i] = xa[i] * s;
  nodes_[y].back = [a, y, s, n](Tape& t) {
    const double* gy = t.grad(y);
    double* ga = t.grad(a);
    for (size_t i = 0; i < n; ++i) ga[i] += gy[i] * s;
  };
  return y;
}

int Tape::add_bias_rows(int x, int bias) {
  require(nodes_[x].shape.size() == 2 && nodes_[bias].shape.size() == 1 &&
              nodes_[bias].shape[0] == nodes_[x].shape[1],
          "add_bias_rows: bias width mismatch");
  const int R = nodes_[x].shape[0];
  const int C = nodes_[x].shape[1];
  int y = new_node({R, C});
  const double* xv = val(x);
  const double* bv = val(bias);
  double* yv = nodes_[y].own_x.data();
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) yv[r * C + c] = xv[r * C + c] + bv[c];
  nodes_[y].back = [x, bias, y, R, C](Tape& t) {
    const double* gy = t.grad(y);
    double* gx = t.grad(x);
    double* gb = t.grad(bias);
    for (int r = 0; r < R; ++r)
      for (int c = 0; c < C; ++c) {
        gx[r * C + c] += gy[r * C + c];
        gb[c] += gy[r * C + c];
      }
  };
  return y;
}

int Tape::matmul(int a, int b) {
  require(nodes_[a].shape.size() == 2 && nodes_[b].shape.size() == 2 &&
              nodes_[a].shape[1] == nodes_[b].shape[0],
          "matmul: incompatible shapes");
  const int m = nodes_[a].shape[0];
  const int k = nodes_[a].shape[1];
  const int n = nodes_[b].shape[1];
  int y = new_node({m, n});
  gemm_nn(val(a), val(b), nodes_[y].own_x.data(), m, k, n);
  nodes_[y].back = [a, b, y, m, k, n](Tape& t) {
    const double* gy = t.grad(y);
    gemm_nt(gy, t.val(b), t.grad(a), m, n, k);  // ga += gy * b^T
    gemm_tn(t.val(a), gy, t.grad(b), k, m, n);  // gb += a^T * gy
  };
  return y;
}

int Tape::matmul_nt(int a, int b) {
  require(nodes_[a].shape.size() == 2 && nodes_[b].shape.size() == 2 &&
              nodes_[a].shape[1] == nodes_[b].shape[1],
          "matmul_nt: incompatible shapes");
  const int m = nodes_[a].shape[0];
  const int k = nodes_[a].shape[1];
  const int n = nodes_[b].shape[0];
  int y = new_node({m, n});
  gemm_nt(val(a), val(b), nodes_[y].own_x.data(), m, k, n);
  nodes_[y].back = [a, b, y, m, k, n](Tape& t) {
    const double* gy = t.grad(y);
    gemm_nn(gy, t.val(b), t.grad(a), m, n, k);  // ga += gy * b
    gemm_tn(gy, t.val(a), t.grad(b), n, m, k);  // gb += gy^T * a
  };
  return y;
}

int Tape::linear(int x, int w, int b) {
  require(nodes_[x].shape.size() == 2 && nodes_[w].shape.size() == 2 &&
              nodes_[x].shape[1] == nodes_[w].shape[1] &&
              nodes_[b].shape.size() == 1 && nodes_[b].shape[0] == nodes_[w].shape[0],
          "linear: incompatible shapes x" + shape_str(nodes_[x].shape) + " w" +
              shape_str(nodes_[w].shape));
  const int R = nodes_[x].shape[0];
  const int K = nodes_[x].shape[1];
  const int N = nodes_[w].shape[0];
  int y = new_node({R, N});
  const double* bv = val(b);
  double* yv = nodes_[y].own_x.data();
  for (int r = 0; r < R; ++r) std::copy(bv, bv + N, yv + static_cast<size_t>(r) * N);
  gemm_nt(val(x), val(w), yv, R, K, N);
  nodes_[y].back = [x, w, b, y, R, K, N](Tape& t) {
    const double* gy = t.grad(y);
    gemm_nn(gy, t.val(w), t.grad(x), R, N, K);  // gx += gy * w
    gemm_tn(gy, t.val(x), t.grad(w), N, R, K);  // gw += gy^T * x
    double* gb = t.grad(b);
    for (int r = 0; r < R; ++r) {
      const double* gyrow = gy + static_cast<size_t>(r) * N;
      for (int o = 0; o < N; ++o) gb[o] += gyrow[o];
    }
  };
  return y;
}

int Tape::relu(int a) {
  int y = new_node(nodes_[a].shape);
  const double* xa = val(a);
  double* xy = nodes_[y].own_x.data();
  size_t n = nodes_[y].n;
  for (size_t i = 0; i < n; ++i) xy[i] = xa[i] > 0.0 ? xa[i] : 0.0;
  nodes_[y].back = [a, y, n](Tape& t) {
    const double* gy = t.grad(y);
    const double* xa2 = t.val(a);
    double* ga = t.grad(a);
    for (size_t i = 0; i < n; ++i)
      if (xa2[i] > 0.0) ga[i] += gy[i];
  };
  return y;
}

int Tape::softmax_rows(int a) {
  require(nodes_[a].shape.size() == 2, "softmax_rows: need 2-D input");
  const int R = nodes_[a].shape[0];
  const int C = nodes_[a].shape[1];
  int y = new_node({R, C});
  const double* xv = val(a);
  double* yv = nodes_[y].own_x.data();
  for (int r = 0; r < R; ++r) {
    const double* xrow = xv + r * C;
    double* yrow = yv + r * C;
    double mx = xrow[0];
    for (int c = 1; c < C; ++c) mx = std::max(mx, xrow[c]);
    double denom = 0.0;
    for (int c = 0; c < C; ++c) {
      yrow[c] = std::exp(xrow[c] - mx);
      denom += yrow[c];
    }
    for (int c = 0; c < C; ++c) yrow[c] /= denom;
  }
  nodes_[y].back = [a, y, R, C](Tape& t) {
    const double* gy = t.grad(y);
    const double* yv2 = t.val(y);
    double* ga = t.grad(a);
    for (int r = 0; r < R; ++r) {
      const double* gyrow = gy + r * C;
      const double* yrow = yv2 + r * C;
      double dot = 0.0;
      for (int c = 0; c < C; ++c) dot += gyrow[c] * yrow[c];
      double* garow = ga + r * C;
      for (int c = 0; c < C; ++c) garow[c] += yrow[c] * (gyrow[c] - dot);
    }
  };
  return y;
}

int Tape::layer_norm(int x, int gamma, int beta, double eps) {
  require(nodes_[x].shape.size() == 2, "layer_norm: need 2-D input");
  const int R = nodes_[x].shape[0];
  const int C = nodes_[x].shape[1];
  require(nodes_[gamma].shape == std::vector<int>{C} &&
              nodes_[beta].shape == std::vector<int>{C},
          "layer_norm: gamma/beta width mismatch");
  int y = new_node({R, C});
  const double* xv = val(x);
  const double* gv = val(gamma);
  const double* bv = val(beta);
  double* yv = nodes_[y].own_x.data();
  auto invstd = std::make_shared<std::vector<double>>(R);
  auto xhat = std::make_shared<std::vector<double>>(static_cast<size_t>(R) * C);
  for (int r = 0; r < R; ++r) {
    const double* xrow = xv + r * C;
    double mean = 0.0;
    for (int c = 0; c < C; ++c) mean += xrow[c];
    mean /= C;
    double var = 0.0;
    for (int c = 0; c < C; ++c) {
      double d = xrow[c] - mean;
      var += d * d;
    }
    var /= C;
    double is = 1.0 / std::sqrt(var + eps);
    (*invstd)[r] = is;
    for (int c = 0; c < C; ++c) {
      double xh = (xrow[c] - mean) * is;
      (*xhat)[r * C + c] = xh;
      yv[r * C + c] = gv[c] * xh + bv[c];
    }
  }
  nodes_[y].back = [x, gamma, beta, y, R, C, invstd, xhat](Tape& t) {
    const double* gy = t.grad(y);
    const double* gv2 = t.val(gamma);
    double* gx = t.grad(x);
    double* gg = t.grad(gamma);
    double* gb = t.grad(beta);
    for (int r = 0; r < R; ++r) {
      const double* gyrow = gy + r * C;
      const double* xhrow = xhat->data() + r * C;
      double sum_gxh = 0.0;
      double sum_gxh_xh = 0.0;
      for (int c = 0; c < C; ++c) {
        double gxh = gyrow[c] * gv2[c];
        sum_gxh += gxh;
        sum_gxh_xh += gxh * xhrow[c];
        gg[c] += gyrow[c] * xhrow[c];
        gb[c] += gyrow[c];
      }
      double is = (*invstd)[r];
      for (int c = 0; c < C; ++c) {
        double gxh = gyrow[c] * gv2[c];
        gx[r * C + c] += is * (gxh - sum_gxh / C - xhrow[c] * sum_gxh_xh / C);
      }
    }
  };
  return y;
}

int Tape::transpose(int x) {
  require(nodes_[x].shape.size() == 2, "transpose: need 2-D input");
  const int R = nodes_[x].shape[0];
  const int C = nodes_[x].shape[1];
  int y = new_node({C, R});
  const double* xv = val(x);
  double* yv = nodes_[y].own_x.data();
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) yv[c * R + r] = xv[r * C + c];
  nodes_[y].back = [x, y, R, C](Tape& t) {
    const double* gy = t.grad(y);
    double* gx = t.grad(x);
    for (int r = 0; r < R; ++r)
      for (int c = 0; c < C; ++c) gx[r * C + c] += gy[c * R + r];
  };
  return y;
}

int Tape::slice_cols(int x, int c0, int c1) {
  require(nodes_[x].shape.size() == 2, "slice_cols: need 2-D input");
  const int R = nodes_[x].shape[0];
  const int C = nodes_[x].shape[1];
  require(0 <= c0 && c0 < c1 && c1 <= C, "slice_cols: bad range");
  const int W = c1 - c0;
  int y = new_node({R, W});
  const double* xv = val(x);
  double* yv = nodes_[y].own_x.data();
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < W; ++c) yv[r * W + c] = xv[r * C + c0 + c];
  nodes_[y].back = [x, y, R, C, W, c0](Tape& t) {
    const double* gy = t.grad(y);
    double* gx = t.grad(x);
    for (int r = 0; r < R; ++r)
      for (int c = 0; c < W; ++c) gx[r * C + c0 + c] += gy[r * W + c];
  };
  return y;
}

int Tape::concat_cols(const std::vector<int>& xs) {
  require(!xs.empty(), "concat_cols: empty input list");
  const int R = nodes_[xs[0]].shape[0];
  int total = 0;
  for (int x : xs) {
    require(nodes_[x].shape.size() == 2 && nodes_[x].shape[0] == R,
            "concat_cols: row mismatch");
    total += nodes_[x].shape[1];
  }
  int y = new_node({R, total});
  double* yv = nodes_[y].own_x.data();
  int off = 0;
  for (int x : xs) {
    const int C = nodes_[x].shape[1];
    const double* xv = val(x);
    for (int r = 0; r < R; ++r)
      for (int c = 0; c < C; ++c) yv[r * total + off + c] = xv[r * C + c];
    off += C;
  }
  auto parts = std::make_shared<std::vector<int>>(xs);
  nodes_[y].back = [parts, y, R, total](Tape& t) {
    const double* gy = t.grad(y);
    int off2 = 0;
    for (int x : *parts) {
      const int C = t.nodes_[x].shape[1];
      double* gx = t.grad(x);
      for (int r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c) gx[r * C + c] += gy[r * total + off2 + c];
      off2 += C;
    }
  };
  return y;
}

int Tape::reshape(int x, std::vector<int> shape) {
  require(shape_numel(shape) == nodes_[x].n, "reshape: numel mismatch");
  int y = new_node(std::move(shape));
  const double* xv = val(x);
  std::copy(xv, xv + nodes_[y].n, nodes_[y].own_x.begin());
  size_t n = nodes_[y].n;
  nodes_[y].back = [x, y, n](Tape& t) {
    const double* gy = t.grad(y);
    double* gx = t.grad(x);
    for (size_t i = 0; i < n; ++i) gx[i] += gy[i];
  };
  return y;
}

int Tape::gather_rows(int table, std::vector<int> idx) {
  require(nodes_[table].shape.size() == 2, "gather_rows: table must be 2-D");
  const int V = nodes_[table].shape[0];
  const int C = nodes_[table].shape[1];
  for (int i : idx) require(0 <= i && i < V, "gather_rows: index out of range");
  const int T = static_cast<int>(idx.size());
  int y = new_node({T, C});
  const double* tv = val(table);
  double* yv = nodes_[y].own_x.data();
  for (int t = 0; t < T; ++t)
    std::copy(tv + idx[t] * C, tv + (idx[t] + 1) * C, yv + t * C);
  auto ix = std::make_shared<std::vector<int>>(std::move(idx));
  nodes_[y].back = [table, y, ix, T, C](Tape& t) {
    const double* gy = t.grad(y);
    double* gt = t.grad(table);
    for (int r = 0; r < T; ++r) {
      double* grow = gt + (*ix)[r] * C;
      const double* gyrow = gy + r * C;
      for (int c = 0; c < C; ++c) grow[c] += gyrow[c];
    }
  };
  return y;
}

int Tape::dropout(int x, double p, Rng& rng, Mode mode) {
  if (mode == Mode::Eval || p <= 0.0) {
    // identity pass-through keeps node numbering stable between modes
    return scale(x, 1.0);
  }
  require(p < 1.0, "dropout: p must be < 1");
  size_t n = nodes_[x].n;
  auto mask = std::make_shared<std::vector<double>>(n);
  const double keep = 1.0 - p;
  for (size_t i = 0; i < n; ++i)
    (*mask)[i] = rng.uniform() >= p ? 1.0 / keep : 0.0;
  int y = new_node(nodes_[x].shape);
  const double* xv = val(x);
  double* yv = nodes_[y].own_x.data();
  for (size_t i = 0; i < n; ++i) yv[i] = xv[i] * (*mask)[i];
  nodes_[y].back = [x, y, mask, n](Tape& t) {
    const double* gy = t.grad(y);
    double* gx = t.grad(x);
    for (size_t i = 0; i < n; ++i) gx[i] += gy[i] * (*mask)[i];
  };
  return y;
}

int Tape::conv1d(int x, int w, int b, int kernel, int pad) {
  require(nodes_[x].shape.size() == 2 && nodes_[w].shape.size() == 2,
          "conv1d: need 2-D x and w");
  const int T = nodes_[x].shape[0];
  const int Cin = nodes_[x].shape[1];
  const int Cout = nodes_[w].shape[0];
  require(nodes_[w].shape[1] == Cin * kernel, "conv1d: weight shape mismatch");
  require(nodes_[b].shape == std::vector<int>{Cout}, "conv1d: bias shape mismatch");
  const int Tout = T + 2 * pad - kernel + 1;
  require(Tout == T || pad == 0, "conv1d: only same-length or valid supported");
  require(Tout >= 1, "conv1d: output length < 1");
  const int K = Cin * kernel;
  auto im2col = [Cin, kernel, pad, T](const double* xv, int Tout2) {
    std::vector<double> m(static_cast<size_t>(Tout2) * Cin * kernel, 0.0);
    for (int t = 0; t < Tout2; ++t) {
      double* row = m.data() + static_cast<size_t>(t) * Cin * kernel;
      for (int j = 0; j < kernel; ++j) {
        int src = t + j - pad;
        if (src >= 0 && src < T)
          std::copy(xv + static_cast<size_t>(src) * Cin,
                    xv + static_cast<size_t>(src + 1) * Cin,
                    row + static_cast<size_t>(j) * Cin);
      }
    }
    return m;
  };
  int y = new_node({Tout, Cout});
  const double* bv = val(b);
  double* yv = nodes_[y].own_x.data();
  for (int t = 0; t < Tout; ++t) std::copy(bv, bv + Cout, yv + static_cast<size_t>(t) * Cout);
  {
    std::vector<double> m = im2col(val(x), Tout);
    gemm_nt(m.data(), val(w), yv, Tout, K, Cout);
  }
  nodes_[y].back = [x, w, b, y, T, Cin, Cout, Tout, kernel, pad, K, im2col](Tape& t) {
    const double* gy = t.grad(y);
    std::vector<double> m = im2col(t.val(x), Tout);
    gemm_tn(gy, m.data(), t.grad(w), Cout, Tout, K);  // gw += gy^T * im2col
    std::vector<double> gm(static_cast<size_t>(Tout) * K, 0.0);
    gemm_nn(gy, t.val(w), gm.data(), Tout, Cout, K);  // gm += gy * w
    double* gx = t.grad(x);
    for (int tt = 0; tt < Tout; ++tt) {
      const double* gmrow = gm.data() + static_cast<size_t>(tt) * K;
      for (int j = 0; j < kernel; ++j) {
        int src = tt + j - pad;
        if (src < 0 || src >= T) continue;
        double* gxrow = gx + static_cast<size_t>(src) * Cin;
        const double* gsrc = gmrow + static_cast<size_t>(j) * Cin;
        for (int c = 0; c < Cin; ++c) gxrow[c] += gsrc[c];
      }
    }
    double* gb = t.grad(b);
    for (int tt = 0; tt < Tout; ++tt) {
      const double* gyrow = gy + static_cast<size_t>(tt) * Cout;
      for (int o = 0; o < Cout; ++o) gb[o] += gyrow[o];
    }
  };
  return y;
}

int Tape::conv2d(int x, int w, int b, int kernel, int pad) {
  require(nodes_[x].shape.size() == 4, "conv2d: need [N,C,H,W] input");
  const int N = nodes_[x].shape[0];
  const int Cin = nodes_[x].shape[1];
  const int H = nodes_[x].shape[2];
  const int W = nodes_[x].shape[3];
  require(nodes_[w].shape.size() == 2, "conv2d: weight must be [Cout, Cin*k*k]");
  const int Cout = nodes_[w].shape[0];
  require(nodes_[w].shape[1] == Cin * kernel * kernel, "conv2d: weight shape mismatch");
  require(nodes_[b].shape == std::vector<int>{Cout}, "conv2d: bias shape mismatch");
  const int Ho = H + 2 * pad - kernel + 1;
  const int Wo = W + 2 * pad - kernel + 1;
  require(Ho >= 1 && Wo >= 1, "conv2d: output collapsed to zero size");
  int y = new_node({N, Cout, Ho, Wo});
  const double* xv = val(x);
  const double* wv = val(w);
  const double* bv = val(b);
  double* yv = nodes_[y].own_x.data();
  auto xat = [&](int nn, int c, int r, int cc) {
    return xv[((static_cast<size_t>(nn) * Cin + c) * H + r) * W + cc];
  };
  for (int nn = 0; nn < N; ++nn)
    for (int o = 0; o < Cout; ++o) {
      const double* wbase = wv + static_cast<size_t>(o) * Cin * kernel * kernel;
      for (int r = 0; r < Ho; ++r)
        for (int c = 0; c < Wo; ++c) {
          double s = bv[o];
          for (int ci = 0; ci < Cin; ++ci)
            for (int kr = 0; kr < kernel; ++kr) {
              int sr = r + kr - pad;
              if (sr < 0 || sr >= H) continue;
              for (int kc = 0; kc < kernel; ++kc) {
                int sc = c + kc - pad;
                if (sc < 0 || sc >= W) continue;
                s += wbase[(ci * kernel + kr) * kernel + kc] * xat(nn, ci, sr, sc);
              }
            }
          yv[((static_cast<size_t>(nn) * Cout + o) * Ho + r) * Wo + c] = s;
        }
    }
  nodes_[y].back = [x, w, b, y, N, Cin, H, W, Cout, Ho, Wo, kernel, pad](Tape& t) {
    const double* gy = t.grad(y);
    const double* xv2 = t.val(x);
    const double* wv2 = t.val(w);
    double* gx = t.grad(x);
    double* gw = t.grad(w);
    double* gb = t.grad(b);
    for (int nn = 0; nn < N; ++nn)
      for (int o = 0; o < Cout; ++o) {
        const double* wbase = wv2 + static_cast<size_t>(o) * Cin * kernel * kernel;
        double* gwbase = gw + static_cast<size_t>(o) * Cin * kernel * kernel;
        for (int r = 0; r < Ho; ++r)
          for (int c = 0; c < Wo; ++c) {
            double g = gy[((static_cast<size_t>(nn) * Cout + o) * Ho + r) * Wo + c];
            if (g == 0.0) continue;
            gb[o] += g;
            for (int ci = 0; ci < Cin; ++ci)
              for (int kr = 0; kr < kernel; ++kr) {
                int sr = r + kr - pad;
                if (sr < 0 || sr >= H) continue;
                for (int kc = 0; kc < kernel; ++kc) {
                  int sc = c + kc - pad;
                  if (sc < 0 || sc >= W) continue;
                  size_t xi = ((static_cast<size_t>(nn) * Cin + ci) * H + sr) * W + sc;
                  gwbase[(ci * kernel + kr) * kernel + kc] += g * xv2[xi];
                  gx[xi] += g * wbase[(ci * kernel + kr) * kernel + kc];
                }
              }
          }
      }
  };
  return y;
}

int Tape::max_pool2(int x) {
  require(nodes_[x].shape.size() == 4, "max_pool2: need [N,C,H,W] input");
  const int N = nodes_[x].shape[0];
  const int C = nodes_[x].shape[1];
  const int H = nodes_[x].shape[2];
  const int W = nodes_[x].shape[3];
  const int Ho = H / 2;
  const int Wo = W / 2;
  require(Ho >= 1 && Wo >= 1, "max_pool2: output collapsed to zero size");
  int y = new_node({N, C, Ho, Wo});
  const double* xv = val(x);
  double* yv = nodes_[y].own_x.data();
  auto arg = std::make_shared<std::vector<size_t>>(nodes_[y].n);
  size_t oi = 0;
  for (int nn = 0; nn < N; ++nn)
    for (int c = 0; c < C; ++c) {
      const double* plane = xv + (static_cast<size_t>(nn) * C + c) * H * W;
      size_t plane_off = (static_cast<size_t>(nn) * C + c) * H * W;
      for (int r = 0; r < Ho; ++r)
        for (int cc = 0; cc < Wo; ++cc) {
          size_t best = static_cast<size_t>(2 * r) * W + 2 * cc;
          double bv = plane[best];
          const size_t cand[3] = {best + 1, best + W, best + W + 1};
          for (size_t k : cand) {
            // 2x2 window is always in range: Ho,Wo use floor semantics
            if (plane[k] > bv) {
              bv = plane[k];
              best = k;
            }
          }
          yv[oi] = bv;
          (*arg)[oi] = plane_off + best;
          ++oi;
        }
    }
  size_t total = nodes_[y].n;
  nodes_[y].back = [x, y, arg, total](Tape& t) {
    const double* gy = t.grad(y);
    double* gx = t.grad(x);
    for (size_t i = 0; i < total; ++i) gx[(*arg)[i]] += gy[i];
  };
  return y;
}

int Tape::batch_norm2d(int x, int gamma, int beta, const double* running_mean,
                       const double* running_var, Mode mode, double eps,
                       BatchNormStats* stats_out) {
  require(nodes_[x].shape.size() == 4, "batch_norm2d: need [N,C,H,W] input");
  const int N = nodes_[x].shape[0];
  const int C = nodes_[x].shape[1];
  const int H = nodes_[x].shape[2];
  const int W = nodes_[x].shape[3];
  require(nodes_[gamma].shape == std::vector<int>{C} &&
              nodes_[beta].shape == std::vector<int>{C},
          "batch_norm2d: gamma/beta shape mismatch");
  const size_t plane = static_cast<size_t>(H) * W;
  const size_t m = static_cast<size_t>(N) * plane;  // elements per channel
  int y = new_node(nodes_[x].shape);
  const double* xv = val(x);
  const double* gv = val(gamma);
  const double* bv = val(beta);
  double* yv = nodes_[y].own_x.data();

  auto mean = std::make_shared<std::vector<double>>(C);
  auto invstd = std::make_shared<std::vector<double>>(C);
  bool batch_stats = (mode == Mode::Train);
  for (int c = 0; c < C; ++c) {
    double mu, var;
    if (batch_stats) {
      require(m > 0, "batch_norm2d: empty batch");
      double s = 0.0;
      for (int nn = 0; nn < N; ++nn) {
        const double* p = xv + (static_cast<size_t>(nn) * C + c) * plane;
        for (size_t i = 0; i < plane; ++i) s += p[i];
      }
      mu = s / static_cast<double>(m);
      double v = 0.0;
      for (int nn = 0; nn < N; ++nn) {
        const double* p = xv + (static_cast<size_t>(nn) * C + c) * plane;
        for (size_t i = 0; i < plane; ++i) {
          double d = p[i] - mu;
          v += d * d;
        }
      }
      var = v / static_cast<double>(m);  // biased, used for normalization
      if (stats_out) {
        if (stats_out->mean.size() != static_cast<size_t>(C)) {
          stats_out->mean.assign(C, 0.0);
          stats_out->var_unbiased.assign(C, 0.0);
        }
        stats_out->mean[c] = mu;
        stats_out->var_unbiased[c] =
            m > 1 ? v / static_cast<double>(m - 1) : var;
      }
    } else {
      mu = running_mean[c];
      var = running_var[c];
    }
    (*mean)[c] = mu;
    (*invstd)[c] = 1.0 / std::sqrt(var + eps);
  }
  for (int nn = 0; nn < N; ++nn)
    for (int c = 0; c < C; ++c) {
      const double* p = xv + (static_cast<size_t>(nn) * C + c) * plane;
      double* q = yv + (static_cast<size_t>(nn) * C + c) * plane;
      double mu = (*mean)[c];
      double is = (*invstd)[c];
      double g = gv[c];
      double bb = bv[c];
      for (size_t i = 0; i < plane; ++i) q[i] = g * (p[i] - mu) * is + bb;
    }

  nodes_[y].back = [x, gamma, beta, y, N, C, plane, m, mean, invstd,
                    batch_stats](Tape& t) {
    const double* gy = t.grad(y);
    const double* xv2 = t.val(x);
    const double* gv2 = t.val(gamma);
    double* gx = t.grad(x);
    double* gg = t.grad(gamma);
    double* gb = t.grad(beta);
    for (int c = 0; c < C; ++c) {
      double mu = (*mean)[c];
      double is = (*invstd)[c];
      double g = gv2[c];
      double sum_gy = 0.0, sum_gy_xh = 0.0;
      for (int nn = 0; nn < N; ++nn) {
        const double* xp = xv2 + (static_cast<size_t>(nn) * C + c) * plane;
        const double* gp = gy + (static_cast<size_t>(nn) * C + c) * plane;
        for (size_t i = 0; i < plane; ++i) {
          sum_gy += gp[i];
          sum_gy_xh += gp[i] * (xp[i] - mu) * is;
        }
      }
      gg[c] += sum_gy_xh;
      gb[c] += sum_gy;
      double inv_m = batch_stats ? 1.0 / static_cast<double>(m) : 0.0;
      for (int nn = 0; nn < N; ++nn) {
        const double* xp = xv2 + (static_cast<size_t>(nn) * C + c) * plane;
        const double* gp = gy + (static_cast<size_t>(nn) * C + c) * plane;
        double* gxp = gx + (static_cast<size_t>(nn) * C + c) * plane;
        for (size_t i = 0; i < plane; ++i) {
          double xh = (xp[i] - mu) * is;
          if (batch_stats) {
            gxp[i] += g * is * (gp[i] - inv_m * sum_gy - xh * inv_m * sum_gy_xh);
          } else {
            gxp[i] += g * is * gp[i];
          }
        }
      }
    }
  };
  return y;
}

int Tape::l1_loss(int pred, int target) {
  require(nodes_[pred].shape == nodes_[target].shape, "l1_loss: shape mismatch");
  size_t n = nodes_[pred].n;
  require(n > 0, "l1_loss: empty input");
  int y = new_node({1});
  const double* pv = val(pred);
  const double* tv = val(target);
  double s = 0.0;
  for (size_t i = 0; i < n; ++i) s += std::abs(pv[i] - tv[i]);
  nodes_[y].own_x[0] = s / static_cast<double>(n);
  nodes_[y].back = [pred, target, y, n](Tape& t) {
    double g = t.grad(y)[0] / static_cast<double>(n);
    const double* pv2 = t.val(pred);
    const double* tv2 = t.val(target);
    double* gp = t.grad(pred);
    double* gt = t.grad(target);
    for (size_t i = 0; i < n; ++i) {
      double d = pv2[i] - tv2[i];
      double s = d > 0.0 ? g : (d < 0.0 ? -g : 0.0);
      gp[i] += s;
      gt[i] -= s;
    }
  };
  return y;
}

int Tape::mse_loss(int pred, int target) {
  require(nodes_[pred].shape == nodes_[target].shape, "mse_loss: shape mismatch");
  size_t n = nodes_[pred].n;
  require(n > 0, "mse_loss: empty input");
  int y = new_node({1});
  const double* pv = val(pred);
  const double* tv = val(target);
  double s = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double d = pv[i] - tv[i];
    s += d * d;
  }
  nodes_[y].own_x[0] = s / static_cast<double>(n);
  nodes_[y].back = [pred, target, y, n](Tape& t) {
    double g = 2.0 * t.grad(y)[0] / static_cast<double>(n);
    const double* pv2 = t.val(pred);
    const double* tv2 = t.val(target);
    double* gp = t.grad(pred);
    double* gt = t.grad(target);
    for (size_t i = 0; i < n; ++i) {
      double d = g * (pv2[i] - tv2[i]);
      gp[i] += d;
      gt[i] -= d;
    }
  };
  return y;
}

int Tape::weighted_sum(const std::vector<std::pair<double, int>>& terms) {
  int y = new_node({1});
  double s = 0.0;
  for (const auto& [w, id] : terms) {
    require(nodes_[id].n == 1, "weighted_sum: terms must be scalars");
    s += w * val(id)[0];
  }
  nodes_[y].own_x[0] = s;
  auto ts = std::make_shared<std::vector<std::pair<double, int>>>(terms);
  nodes_[y].back = [ts, y](Tape& t) {
    double g = t.grad(y)[0];
    for (const auto& [w, id] : *ts) t.grad(id)[0] += g * w;
  };
  return y;
}

double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

Mat position_encoding(int len, int dim) {
  Mat pe(len, dim);
  for (int pos = 0; pos < len; ++pos)
    for (int i = 0; i < dim / 2; ++i) {
      double angle = pos / std::pow(10000.0, 2.0 * i / dim);
      pe.at(pos, 2 * i) = std::sin(angle);
      pe.at(pos, 2 * i + 1) = std::cos(angle);
    }
  return pe;
}

}  // namespace vtts::nn
