#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cfmimo/linalg.hpp"

namespace cfmimo::ad {

struct Tensor {
  int rows = 0, cols = 0;
  std::vector<double> v;
  Tensor() = default;
  Tensor(int r, int c, double fill = 0.0)
      : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {}
  double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
  size_t size() const { return v.size(); }
  static Tensor from_mat(const Mat& m) {
    Tensor t(m.rows, m.cols);
    t.v = m.a;
    return t;
  }
  Mat to_mat() const {
    Mat m(rows, cols);
    m.a = v;
    return m;
  }
};

class Tape;

// Handle into a tape. Cheap to copy; owns nothing.
struct Val {
  Tape* tape = nullptr;
  int id = -1;
  bool ok() const { return tape != nullptr && id >= 0; }
};

class Tape {
 public:
  Val constant(Tensor t);
  Val constant(const Mat& m) { return constant(Tensor::from_mat(m)); }
  Val scalar(double x) { return constant(Tensor(1, 1, x)); }
  Val param(Tensor t);  // gradient-carrying leaf

  const Tensor& val(Val v) const { return nodes_[v.id].value; }
  const Tensor& grad(Val v) const { return nodes_[v.id].grad; }
  bool requires_grad(Val v) const { return nodes_[v.id].requires_grad; }
  int rows(Val v) const { return nodes_[v.id].value.rows; }
  int cols(Val v) const { return nodes_[v.id].value.cols; }
  int size() const { return static_cast<int>(nodes_.size()); }

  // Runs reverse accumulation from a 1x1 root. Grad buffers of all
  // gradient-carrying nodes are (re)set to zero first.
  void backward(Val root);

  void clear() { nodes_.clear(); }

  // internal
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::function<void(Tape&)> back;  // accumulates into parent grads
  };
  Val push(Tensor value, bool requires_grad, std::function<void(Tape&)> back);
  void set_back(Val v, std::function<void(Tape&)> f) {
    nodes_[v.id].back = std::move(f);
  }
  bool node_requires_grad(int id) const { return nodes_[id].requires_grad; }
  Tensor& grad_buf(int id) { return nodes_[id].grad; }
  const Tensor& value_of(int id) const { return nodes_[id].value; }

 private:
  std::vector<Node> nodes_;
};

// ---- ops -------------------------------------------------------------
// All binary ops require both operands on the same tape.

Val add(Val a, Val b);
Val sub(Val a, Val b);
Val mul(Val a, Val b);   // elementwise
Val div(Val a, Val b);   // elementwise
Val scale_const(Val a, double c);
Val add_const(Val a, double c);
Val neg(Val a);
Val matmul(Val a, Val b);
Val transpose(Val a);
Val relu(Val a);
Val tanh_op(Val a);
Val sigmoid(Val a);
Val log_clamped(Val a, double floor = 1e-12);
Val sqrt_op(Val a);
Val exp_op(Val a);
Val softmax_cols(Val a);  // per-column softmax over rows, max-subtracted
Val clamp(Val a, double lo, double hi);
Val max_const(Val a, double c);
Val sum_all(Val a);                 // -> [1,1]
Val sum_rows(Val a);                // column sums -> [1,C]
Val sum_cols(Val a);                // row sums -> [R,1]
Val gather_rows(Val a, std::vector<int> idx);
Val segment_sum(Val a, std::vector<int> seg, int n_seg);  // seg per row
Val row_scale_const(Val a, std::vector<double> w);        // w per row
Val mul_colvec(Val a, Val b);  // a[R,C] * b[R,1] broadcast over columns
Val mul_rowvec(Val a, Val b);  // a[R,C] * b[1,C] broadcast over rows
Val div_rowvec(Val a, Val b);  // a[R,C] / b[1,C]
Val sub_rowvec(Val a, Val b);  // a[R,C] - b[1,C]
Val add_rowvec(Val a, Val b);  // a[R,C] + b[1,C]
Val mul_scalar(Val a, Val s);  // a * s, s is [1,1]
Val concat_cols(Val a, Val b);
Val concat_rows(Val a, Val b);
Val slice_cols(Val a, int c0, int c1);  // columns [c0, c1)
Val reshape(Val a, int r, int c);       // same element order, new shape
Val magsq2(Val re, Val im);             // re^2 + im^2 elementwise

// out[(g,k), f] = sum_j A[(g,j), f] * B[(j,k), f]; A is [P*J, F], B is
// [J*K, F], result [P*K, F]. Feature-wise batched matrix product.
Val fbmm(Val a, Val b, int P, int J, int K);
// out[(j,k), f] = sum_m A[(m,j), f] * B[(m,k), f]; A [M*J, F], B [M*K, F].
Val fbmm_tA(Val a, Val b, int M, int J, int K);

// Pilot-use count sum_g (1 - prod_k (1 - x_gk)) -> [1,1].
Val pilot_count(Val x);

// Complex Hermitian positive definite solve. A = Ar + i*Ai is symmetrized
// before factorization; B = Br + i*Bi. Returns [2N, R]: rows [0,N) hold
// Re X, rows [N,2N) hold Im X where A X = B.
Val hermitian_solve(Val ar, Val ai, Val br, Val bi);

}  // namespace cfmimo::ad
