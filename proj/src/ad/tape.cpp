#include "cfmimo/ad/tape.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

#include "cfmimo/kernels.hpp"

namespace cfmimo::ad {

namespace {

void check_same_tape(Val a, Val b) {
  if (a.tape != b.tape)
    throw std::invalid_argument("ad: operands on different tapes");
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw std::invalid_argument(std::string("ad: shape mismatch in ") + op);
}

}  // namespace

Val Tape::push(Tensor value, bool requires_grad,
               std::function<void(Tape&)> back) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Val{this, static_cast<int>(nodes_.size()) - 1};
}

Val Tape::constant(Tensor t) { return push(std::move(t), false, nullptr); }

Val Tape::param(Tensor t) { return push(std::move(t), true, nullptr); }

void Tape::backward(Val root) {
  if (root.tape != this) throw std::invalid_argument("ad: root not on tape");
  const Tensor& rv = nodes_[root.id].value;
  if (rv.rows != 1 || rv.cols != 1)
    throw std::invalid_argument("ad: backward root must be 1x1");
  for (Node& n : nodes_)
    if (n.requires_grad) n.grad = Tensor(n.value.rows, n.value.cols, 0.0);
  if (!nodes_[root.id].requires_grad) return;
  nodes_[root.id].grad.v[0] = 1.0;
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.requires_grad && n.back) n.back(*this);
  }
}

namespace {

bool rg(Val a) { return a.tape->node_requires_grad(a.id); }

// Elementwise unary op; dfn(x, y) is dy/dx at input x, output y.
template <class Fn, class Dfn>
Val unary_ew(Val a, Fn fn, Dfn dfn) {
  Tape& t = *a.tape;
  const Tensor& va = t.val(a);
  Tensor out(va.rows, va.cols);
  for (size_t i = 0; i < out.size(); ++i) out.v[i] = fn(va.v[i]);
  bool need = rg(a);
  Val o = t.push(std::move(out), need, nullptr);
  if (need) {
    int aid = a.id, oid = o.id;
    t.set_back(o, [aid, oid, dfn](Tape& tp) {
      const Tensor& g = tp.grad_buf(oid);
      const Tensor& x = tp.value_of(aid);
      const Tensor& y = tp.value_of(oid);
      Tensor& ga = tp.grad_buf(aid);
      for (size_t i = 0; i < g.size(); ++i)
        ga.v[i] += g.v[i] * dfn(x.v[i], y.v[i]);
    });
  }
  return o;
}

}  // namespace

Val add(Val a, Val b) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  const Tensor &va = t.val(a), &vb = t.val(b);
  check_same_shape(va, vb, "add");
  Tensor out(va.rows, va.cols);
  for (size_t i = 0; i < out.size(); ++i) out.v[i] = va.v[i] + vb.v[i];
  bool need = rg(a) || rg(b);
  Val o = t.push(std::move(out), need, nullptr);
  if (need) {
    int aid = a.id, bid = b.id, oid = o.id;
    t.set_back(o, [aid, bid, oid](Tape& tp) {
      const Tensor& g = tp.grad_buf(oid);
      if (tp.node_requires_grad(aid)) {
        Tensor& ga = tp.grad_buf(aid);
        for (size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i];
      }
      if (tp.node_requires_grad(bid)) {
        Tensor& gb = tp.grad_buf(bid);
        for (size_t i = 0; i < g.size(); ++i) gb.v[i] += g.v[i];
      }
    });
  }
  return o;
}

Val sub(Val a, Val b) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  const Tensor &va = t.val(a), &vb = t.val(b);
  check_same_shape(va, vb, "sub");
  Tensor out(va.rows, va.cols);
  for (size_t i = 0; i < out.size(); ++i) out.v[i] = va.v[i] - vb.v[i];
  bool need = rg(a) || rg(b);
  Val o = t.push(std::move(out), need, nullptr);
  if (need) {
    int aid = a.id, bid = b.id, oid = o.id;
    t.set_back(o, [aid, bid, oid](Tape& tp) {
      const Tensor& g = tp.grad_buf(oid);
      if (tp.node_requires_grad(aid)) {
        Tensor& ga = tp.grad_buf(aid);
        for (size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i];
      }
      if (tp.node_requires_grad(bid)) {
        Tensor& gb = tp.grad_buf(bid);
        for (size_t i = 0; i < g.size(); ++i) gb.v[i] -= g.v[i];
      }
    });
  }
  return o;
}

Val mul(Val a, Val b) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  const Tensor &va = t.val(a), &vb = t.val(b);
  check_same_shape(va, vb, "mul");
  Tensor out(va.rows, va.cols);
  for (size_t i = 0; i < out.size(); ++i) out.v[i] = va.v[i] * vb.v[i];
  bool need = rg(a) || rg(b);
  Val o = t.push(std::move(out), need, nullptr);
  if (need) {
    int aid = a.id, bid = b.id, oid = o.id;
    t.set_back(o, [aid, bid, oid](Tape& tp) {
      const Tensor& g = tp.grad_buf(oid);
      const Tensor& x = tp.value_of(aid);
      const Tensor& y = tp.value_of(bid);
      if (tp.node_requires_grad(aid)) {
        Tensor& ga = tp.grad_buf(aid);
        for (size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i] * y.v[i];
      }
      if (tp.node_requires_grad(bid)) {
        Tensor& gb = tp.grad_buf(bid);
        for (size_t i = 0; i < g.size(); ++i) gb.v[i] += g.v[i] * x.v[i];
      }
    });
  }
  return o;
}

Val div(Val a, Val b) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  const Tensor &va = t.val(a), &vb = t.val(b);
  check_same_shape(va, vb, "div");
  Tensor out(va.rows, va.cols);
  for (size_t i = 0; i < out.size(); ++i) out.v[i] = va.v[i] / vb.v[i];
  bool need = rg(a) || rg(b);
  Val o = t.push(std::move(out), need, nullptr);
  if (need) {
    int aid = a.id, bid = b.id, oid = o.id;
    t.set_back(o, [aid, bid, oid](Tape& tp) {
      const Tensor& g = tp.grad_buf(oid);
      const Tensor& y = tp.value_of(bid);
      const Tensor& z = tp.value_of(oid);
      if (tp.node_requires_grad(aid)) {
        Tensor& ga = tp.grad_buf(aid);
        for (size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i] / y.v[i];
      }
      if (tp.node_requires_grad(bid)) {
        Tensor& gb = tp.grad_buf(bid);
        for (size_t i = 0; i < g.size(); ++i)
          gb.v[i] -= g.v[i] * z.v[i] / y.v[i];
      }
    });
  }
  return o;
}

Val scale_const(Val a, double c) {
  return unary_ew(
      a, [c](double x) { return x * c; },
      [c](double, double) { return c; });
}

Val add_const(Val a, double c) {
  return unary_ew(
      a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Val neg(Val a) { return scale_const(a, -1.0); }

Val matmul(Val a, Val b) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  const Tensor &va = t.val(a), &vb = t.val(b);
  if (va.cols != vb.rows)
    throw std::invalid_argument("ad: matmul inner dimension mismatch");
  Tensor out(va.rows, vb.cols);
  kern::matmul(va.v.data(), vb.v.data(), out.v.data(), va.rows, va.cols,
               vb.cols);
  bool need = rg(a) || rg(b);
  Val o = t.push(std::move(out), need, nullptr);
  if (need) {
    int aid = a.id, bid = b.id, oid = o.id;
    t.set_back(o, [aid, bid, oid](Tape& tp) {
      const Tensor& g = tp.grad_buf(oid);
      const Tensor& x = tp.value_of(aid);
      const Tensor& y = tp.value_of(bid);
      if (tp.node_requires_grad(aid)) {
        // dA += g * B^T
        Tensor inc(x.rows, x.cols);
        kern::matmul_tB(g.v.data(), y.v.data(), inc.v.data(), g.rows, g.cols,
                        y.rows);
        Tensor& ga = tp.grad_buf(aid);
        for (size_t i = 0; i < inc.size(); ++i) ga.v[i] += inc.v[i];
      }
      if (tp.node_requires_grad(bid)) {
        // dB += A^T * g
        Tensor inc(y.rows, y.cols);
        kern::matmul_tA(x.v.data(), g.v.data(), inc.v.data(), x.cols, x.rows,
                        g.cols);
        Tensor& gb = tp.grad_buf(bid);
        for (size_t i = 0; i < inc.size(); ++i) gb.v[i] += inc.v[i];
      }
    });
  }
  return o;
}

Val transpose(Val a) {
  Tape& t = *a.tape;
  const Tensor& va = t.val(a);
  Tensor out(va.cols, va.rows);
  for (int r = 0; r < va.rows; ++r)
    for (int c = 0; c < va.cols; ++c) out.at(c, r) = va.at(r, c);
  bool need = rg(a);
  Val o = t.push(std::move(out), need, nullptr);
  if (need) {
    int aid = a.id, oid = o.id;
    t.set_back(o, [aid, oid](Tape& tp) {
      const Tensor& g = tp.grad_buf(oid);
      Tensor& ga = tp.grad_buf(aid);
      for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.cols; ++c) ga.at(c, r) += g.at(r, c);
    });
  }
  return o;
}

Val relu(Val a) {
  return unary_ew(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Val tanh_op(Val a) {
  return unary_ew(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Val sigmoid(Val a) {
  return unary_ew(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Val log_clamped(Val a, double floor) {
  return unary_ew(
      a, [floor](double x) { return std::log(x > floor ? x : floor); },
      [floor](double x, double) { return x > floor ? 1.0 / x : 0.0; });
}

Val sqrt_op(Val a) {
  // subgradient 0 at 0 keeps zero-valued inputs from turning an upstream
  // zero cotangent into 0 * inf = NaN
  return unary_ew(
      a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Val exp_op(Val a) {
  return unary_ew(
      a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Val clamp(Val a, double lo, double hi) {
  return unary_ew(
      a,
      [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Val max_const(Val a, double c) {
  return unary_ew(
      a, [c](double x) { return x > c ? x : c; },
      [c](double x, double) { return x > c ? 1.0 : 0.0; });
}

Val softmax_cols(Val a) {
  Tape& t = *a.tape;
  const Tensor& va = t.val(a);
  Tensor out(va.rows, va.cols);
  for (int c = 0; c < va.cols; ++c) {
    double mx = va.at(0, c);
    for (int r = 1; r < va.rows; ++r) mx = std::max(mx, va.at(r, c));
    double denom = 0.0;
    for (int r = 0; r < va.rows; ++r) {
      double e = std::exp(va.at(r, c) - mx);
      out.at(r, c) = e;
      denom += e;
    }
    for (int r = 0; r < va.rows; ++r) out.at(r, c) = out.at(r, c) / denom;
  }
  bool need = rg(a);
  Val o = t.push(std::move(out), need, nullptr);
  if (need) {
    int aid = a.id, oid = o.id;
    t.set_back(o, [aid, oid](Tape& tp) {
      const Tensor& g = tp.grad_buf(oid);
      const Tensor& s = tp.value_of(oid);
      Tensor& ga = tp.grad_buf(aid);
      for (int c = 0; c < g.cols; ++c) {
        double dot = 0.0;
        for (int r = 0; r < g.rows; ++r) dot += g.at(r, c) * s.at(r, c);
        for (int r = 0; r < g.rows; ++r)
          ga.at(r, c) += s.at(r, c) * (g.at(r, c) - dot);
      }
    });
  }
  return o;
}

Val sum_all(Val a) {
  Tape& t = *a.tape;
  const Tensor& va = t.val(a);
  double s = 0.0;
  for (double x : va.v) s += x;
  bool need = rg(a);
  Val o = t.push(Tensor(1, 1, s), need, nullptr);
  if (need) {
    int aid = a.id, oid = o.id;
    t.set_back(o, [aid, oid](Tape& tp) {
      double g = tp.grad_buf(oid).v[0];
      Tensor& ga = tp.grad_buf(aid);
      for (size_t i = 0; i < ga.size(); ++i) ga.v[i] += g;
    });
  }
  return o;
}

Val sum_rows(Val a) {
  Tape& t = *a.tape;
  const Tensor& va = t.val(a);
  Tensor out(1, va.cols, 0.0);
  for (int r = 0; r < va.rows; ++r)
    for (int c = 0; c < va.cols; ++c) out.at(0, c) += va.at(r, c);
  bool need = rg(a);
  Val o = t.push(std::move(out), need, nullptr);
  if (need) {
    int aid = a.id, oid = o.id;
    t.set_back(o, [aid, oid](Tape& tp) {
      const Tensor& g = tp.grad_buf(oid);
      Tensor& ga = tp.grad_buf(aid);
      for (int r = 0; r < ga.rows; ++r)
        for (int c = 0; c < ga.cols; ++c) ga.at(r, c) += g.at(0, c);
    });
  }
  return o;
}

Val sum_cols(Val a) {
  Tape& t = *a.tape;
  const Tensor& va = t.val(a);
  Tensor out(va.rows, 1, 0.0);
  for (int r = 0; r < va.rows; ++r)
    for (int c = 0; c < va.cols; ++c) out.at(r, 0) += va.at(r, c);
  bool need = rg(a);
  Val o = t.push(std::move(out), need, nullptr);
  if (need) {
    int aid = a.id, oid = o.id;
    t.set_back(o, [aid, oid](Tape& tp) {
      const Tensor& g = tp.grad_buf(oid);
      Tensor& ga = tp.grad_buf(aid);
      for (int r = 0; r < ga.rows; ++r)
        for (int c = 0; c < ga.cols; ++c) ga.at(r, c) += g.at(r, 0);
    });
  }
  return o;
}

Val gather_rows(Val a, std::vector<int> idx) {
  Tape& t = *a.tape;
  const Tensor& va = t.val(a);
  Tensor out(static_cast<int>(idx.size()), va.cols);
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= va.rows)
      throw std::invalid_argument("ad: gather_rows index out of range");
    for (int c = 0; c < va.cols; ++c)
      out.at(static_cast<int>(i), c) = va.at(idx[i], c);
  }
  bool need = rg(a);
  Val o = t.push(std::move(out), need, nullptr);
  if (need) {
    int aid = a.id, oid = o.id;
    t.set_back(o, [aid, oid, idx = std::move(idx)](Tape& tp) {
      const Tensor& g = tp.grad_buf(oid);
      Tensor& ga = tp.grad_buf(aid);
      for (size_t i = 0; i < idx.size(); ++i)
        for (int c = 0; c < g.cols; ++c)
          ga.at(idx[i], c) += g.at(static_cast<int>(i), c);
    });
  }
  return o;
}

Val segment_sum(Val a, std::vector<int> seg, int n_seg) {
  Tape& t = *a.tape;
  const Tensor& va = t.val(a);
  if (static_cast<int>(seg.size()) != va.rows)
    throw std::invalid_argument("ad: segment_sum needs one id per row");
  Tensor out(n_seg, va.cols, 0.0);
  for (int r = 0; r < va.rows; ++r) {
    if (seg[r] < 0 || seg[r] >= n_seg)
      throw std::invalid_argument("ad: segment id out of range");
    for (int c = 0; c < va.cols; ++c) out.at(seg[r], c) += va.at(r, c);
  }
  bool need = rg(a);
  Val o = t.push(std::move(out), need, nullptr);
  if (need) {
    int aid = a.id, oid = o.id;
    t.set_back(o, [aid, oid, seg = std::move(seg)](Tape& tp) {
      const Tensor& g = tp.grad_buf(oid);
      Tensor& ga = tp.grad_buf(aid);
      for (int r = 0; r < ga.rows; ++r)
        for (int c = 0; c < ga.cols; ++c) ga.at(r, c) += g.at(seg[r], c);
    });
  }
  return o;
}

Val row_scale_const(Val a, std::vector<double> w) {
  Tape& t = *a.tape;
  const Tensor& va = t.val(a);
  if (static_cast<int>(w.size()) != va.rows)
    throw std::invalid_argument("ad: row_scale_const needs one weight per row");
  Tensor out(va.rows, va.cols);
  for (int r = 0; r < va.rows; ++r)
    for (int c = 0; c < va.cols; ++c) out.at(r, c) = va.at(r, c) * w[r];
  bool need = rg(a);
  Val o = t.push(std::move(out), need, nullptr);
  if (need) {
    int aid = a.id, oid = o.id;
    t.set_back(o, [aid, oid, w = std::move(w)](Tape& tp) {
      const Tensor& g = tp.grad_buf(oid);
      Tensor& ga = tp.grad_buf(aid);
      for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.cols; ++c) ga.at(r, c) += g.at(r, c) * w[r];
    });
  }
  return o;
}

namespace {

// shared shape checks for broadcast ops
void check_colvec(const Tensor& a, const Tensor& b, const char* op) {
  if (b.cols != 1 || b.rows != a.rows)
    throw std::invalid_argument(std::string("ad: bad column vector in ") + op);
}

void check_rowvec(const Tensor& a, const Tensor& b, const char* op) {
  if (b.rows != 1 || b.cols != a.cols)
    throw std::invalid_argument(std::string("ad: bad row vector in ") + op);
}

}  // namespace

Val mul_colvec(Val a, Val b) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  const Tensor &va = t.val(a), &vb = t.val(b);
  check_colvec(va, vb, "mul_colvec");
  Tensor out(va.rows, va.cols);
  for (int r = 0; r < va.rows; ++r)
    for (int c = 0; c < va.cols; ++c) out.at(r, c) = va.at(r, c) * vb.at(r, 0);
  bool need = rg(a) || rg(b);
  Val o = t.push(std::move(out), need, nullptr);
  if (need) {
    int aid = a.id, bid = b.id, oid = o.id;
    t.set_back(o, [aid, bid, oid](Tape& tp) {
      const Tensor& g = tp.grad_buf(oid);
      const Tensor& x = tp.value_of(aid);
      const Tensor& y = tp.value_of(bid);
      if (tp.node_requires_grad(aid)) {
        Tensor& ga = tp.grad_buf(aid);
        for (int r = 0; r < g.rows; ++r)
          for (int c = 0; c < g.cols; ++c) ga.at(r, c) += g.at(r, c) * y.at(r, 0);
      }
      if (tp.node_requires_grad(bid)) {
        Tensor& gb = tp.grad_buf(bid);
        for (int r = 0; r < g.rows; ++r) {
          double acc = 0.0;
          for (int c = 0; c < g.cols; ++c) acc += g.at(r, c) * x.at(r, c);
          gb.at(r, 0) += acc;
        }
      }
    });
  }
  return o;
}

Val mul_rowvec(Val a, Val b) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  const Tensor &va = t.val(a), &vb = t.val(b);
  check_rowvec(va, vb, "mul_rowvec");
  Tensor out(va.rows, va.cols);
  for (int r = 0; r < va.rows; ++r)
    for (int c = 0; c < va.cols; ++c) out.at(r, c) = va.at(r, c) * vb.at(0, c);
  bool need = rg(a) || rg(b);
  Val o = t.push(std::move(out), need, nullptr);
  if (need) {
    int aid = a.id, bid = b.id, oid = o.id;
    t.set_back(o, [aid, bid, oid](Tape& tp) {
      const Tensor& g = tp.grad_buf(oid);
      const Tensor& x = tp.value_of(aid);
      const Tensor& y = tp.value_of(bid);
      if (tp.node_requires_grad(aid)) {
        Tensor& ga = tp.grad_buf(aid);
        for (int r = 0; r < g.rows; ++r)
          for (int c = 0; c < g.cols; ++c) ga.at(r, c) += g.at(r, c) * y.at(0, c);
      }
      if (tp.node_requires_grad(bid)) {
        Tensor& gb = tp.grad_buf(bid);
        for (int c = 0; c < g.cols; ++c) {
          double acc = 0.0;
          for (int r = 0; r < g.rows; ++r) acc += g.at(r, c) * x.at(r, c);
          gb.at(0, c) += acc;
        }
      }
    });
  }
  return o;
}

Val div_rowvec(Val a, Val b) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  const Tensor &va = t.val(a), &vb = t.val(b);
  check_rowvec(va, vb, "div_rowvec");
  Tensor out(va.rows, va.cols);
  for (int r = 0; r < va.rows; ++r)
    for (int c = 0; c < va.cols; ++c) out.at(r, c) = va.at(r, c) / vb.at(0, c);
  bool need = rg(a) || rg(b);
  Val o = t.push(std::move(out), need, nullptr);
  if (need) {
    int aid = a.id, bid = b.id, oid = o.id;
    t.set_back(o, [aid, bid, oid](Tape& tp) {
      const Tensor& g = tp.grad_buf(oid);
      const Tensor& y = tp.value_of(bid);
      const Tensor& z = tp.value_of(oid);
      if (tp.node_requires_grad(aid)) {
        Tensor& ga = tp.grad_buf(aid);
        for (int r = 0; r < g.rows; ++r)
          for (int c = 0; c < g.cols; ++c) ga.at(r, c) += g.at(r, c) / y.at(0, c);
      }
      if (tp.node_requires_grad(bid)) {
        Tensor& gb = tp.grad_buf(bid);
        for (int c = 0; c < g.cols; ++c) {
          double acc = 0.0;
          for (int r = 0; r < g.rows; ++r) acc += g.at(r, c) * z.at(r, c);
          gb.at(0, c) -= acc / y.at(0, c);
        }
      }
    });
  }
  return o;
}

Val sub_rowvec(Val a, Val b) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  const Tensor &va = t.val(a), &vb = t.val(b);
  check_rowvec(va, vb, "sub_rowvec");
  Tensor out(va.rows, va.cols);
  for (int r = 0; r < va.rows; ++r)
    for (int c = 0; c < va.cols; ++c) out.at(r, c) = va.at(r, c) - vb.at(0, c);
  bool need = rg(a) || rg(b);
  Val o = t.push(std::move(out), need, nullptr);
  if (need) {
    int aid = a.id, bid = b.id, oid = o.id;
    t.set_back(o, [aid, bid, oid](Tape& tp) {
      const Tensor& g = tp.grad_buf(oid);
      if (tp.node_requires_grad(aid)) {
        Tensor& ga = tp.grad_buf(aid);
        for (size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i];
      }
      if (tp.node_requires_grad(bid)) {
        Tensor& gb = tp.grad_buf(bid);
        for (int c = 0; c < g.cols; ++c) {
          double acc = 0.0;
          for (int r = 0; r < g.rows; ++r) acc += g.at(r, c);
          gb.at(0, c) -= acc;
        }
      }
    });
  }
  return o;
}

Val add_rowvec(Val a, Val b) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  const Tensor &va = t.val(a), &vb = t.val(b);
  check_rowvec(va, vb, "add_rowvec");
  Tensor out(va.rows, va.cols);
  for (int r = 0; r < va.rows; ++r)
    for (int c = 0; c < va.cols; ++c) out.at(r, c) = va.at(r, c) + vb.at(0, c);
  bool need = rg(a) || rg(b);
  Val o = t.push(std::move(out), need, nullptr);
  if (need) {
    int aid = a.id, bid = b.id, oid = o.id;
    t.set_back(o, [aid, bid, oid](Tape& tp) {
      const Tensor& g = tp.grad_buf(oid);
      if (tp.node_requires_grad(aid)) {
        Tensor& ga = tp.grad_buf(aid);
        for (size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i];
      }
      if (tp.node_requires_grad(bid)) {
        Tensor& gb = tp.grad_buf(bid);
        for (int c = 0; c < g.cols; ++c) {
          double acc = 0.0;
          for (int r = 0; r < g.rows; ++r) acc += g.at(r, c);
          gb.at(0, c) += acc;
        }
      }
    });
  }
  return o;
}

Val mul_scalar(Val a, Val s) {
  check_same_tape(a, s);
  Tape& t = *a.tape;
  const Tensor &va = t.val(a), &vs = t.val(s);
  if (vs.rows != 1 || vs.cols != 1)
    throw std::invalid_argument("ad: mul_scalar needs a 1x1 scalar");
  double sv = vs.v[0];
  Tensor out(va.rows, va.cols);
  for (size_t i = 0; i < out.size(); ++i) out.v[i] = va.v[i] * sv;
  bool need = rg(a) || rg(s);
  Val o = t.push(std::move(out), need, nullptr);
  if (need) {
    int aid = a.id, sid = s.id, oid = o.id;
    t.set_back(o, [aid, sid, oid](Tape& tp) {
      const Tensor& g = tp.grad_buf(oid);
      const Tensor& x = tp.value_of(aid);
      double sv2 = tp.value_of(sid).v[0];
      if (tp.node_requires_grad(aid)) {
        Tensor& ga = tp.grad_buf(aid);
        for (size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i] * sv2;
      }
      if (tp.node_requires_grad(sid)) {
        double acc = 0.0;
        for (size_t i = 0; i < g.size(); ++i) acc += g.v[i] * x.v[i];
        tp.grad_buf(sid).v[0] += acc;
      }
    });
  }
  return o;
}

Val concat_cols(Val a, Val b) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  const Tensor &va = t.val(a), &vb = t.val(b);
  if (va.rows != vb.rows)
    throw std::invalid_argument("ad: concat_cols row mismatch");
  Tensor out(va.rows, va.cols + vb.cols);
  for (int r = 0; r < va.rows; ++r) {
    for (int c = 0; c < va.cols; ++c) out.at(r, c) = va.at(r, c);
    for (int c = 0; c < vb.cols; ++c) out.at(r, va.cols + c) = vb.at(r, c);
  }
  bool need = rg(a) || rg(b);
  const int ac = va.cols;  // before push: the node vector may reallocate
  Val o = t.push(std::move(out), need, nullptr);
  if (need) {
    int aid = a.id, bid = b.id, oid = o.id;
    t.set_back(o, [aid, bid, oid, ac](Tape& tp) {
      const Tensor& g = tp.grad_buf(oid);
      if (tp.node_requires_grad(aid)) {
        Tensor& ga = tp.grad_buf(aid);
        for (int r = 0; r < ga.rows; ++r)
          for (int c = 0; c < ga.cols; ++c) ga.at(r, c) += g.at(r, c);
      }
      if (tp.node_requires_grad(bid)) {
        Tensor& gb = tp.grad_buf(bid);
        for (int r = 0; r < gb.rows; ++r)
          for (int c = 0; c < gb.cols; ++c) gb.at(r, c) += g.at(r, ac + c);
      }
    });
  }
  return o;
}

Val concat_rows(Val a, Val b) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  const Tensor &va = t.val(a), &vb = t.val(b);
  if (va.cols != vb.cols)
    throw std::invalid_argument("ad: concat_rows column mismatch");
  Tensor out(va.rows + vb.rows, va.cols);
  for (int r = 0; r < va.rows; ++r)
    for (int c = 0; c < va.cols; ++c) out.at(r, c) = va.at(r, c);
  for (int r = 0; r < vb.rows; ++r)
    for (int c = 0; c < vb.cols; ++c) out.at(va.rows + r, c) = vb.at(r, c);
  bool need = rg(a) || rg(b);
  const int ar = va.rows;  // before push: the node vector may reallocate
  Val o = t.push(std::move(out), need, nullptr);
  if (need) {
    int aid = a.id, bid = b.id, oid = o.id;
    t.set_back(o, [aid, bid, oid, ar](Tape& tp) {
      const Tensor& g = tp.grad_buf(oid);
      if (tp.node_requires_grad(aid)) {
        Tensor& ga = tp.grad_buf(aid);
        for (int r = 0; r < ga.rows; ++r)
          for (int c = 0; c < ga.cols; ++c) ga.at(r, c) += g.at(r, c);
      }
      if (tp.node_requires_grad(bid)) {
        Tensor& gb = tp.grad_buf(bid);
        for (int r = 0; r < gb.rows; ++r)
          for (int c = 0; c < gb.cols; ++c) gb.at(r, c) += g.at(ar + r, c);
      }
    });
  }
  return o;
}

Val slice_cols(Val a, int c0, int c1) {
  Tape& t = *a.tape;
  const Tensor& va = t.val(a);
  if (c0 < 0 || c1 > va.cols || c0 >= c1)
    throw std::invalid_argument("ad: bad slice_cols range");
  Tensor out(va.rows, c1 - c0);
  for (int r = 0; r < va.rows; ++r)
    for (int c = c0; c < c1; ++c) out.at(r, c - c0) = va.at(r, c);
  bool need = rg(a);
  Val o = t.push(std::move(out), need, nullptr);
  if (need) {
    int aid = a.id, oid = o.id;
    t.set_back(o, [aid, oid, c0](Tape& tp) {
      const Tensor& g = tp.grad_buf(oid);
      Tensor& ga = tp.grad_buf(aid);
      for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.cols; ++c) ga.at(r, c0 + c) += g.at(r, c);
    });
  }
  return o;
}

Val reshape(Val a, int r, int c) {
  Tape& t = *a.tape;
  const Tensor& va = t.val(a);
  if (r * c != va.rows * va.cols)
    throw std::invalid_argument("ad: reshape element count mismatch");
  Tensor out(r, c);
  out.v = va.v;
  bool need = rg(a);
  Val o = t.push(std::move(out), need, nullptr);
  if (need) {
    int aid = a.id, oid = o.id;
    t.set_back(o, [aid, oid](Tape& tp) {
      const Tensor& g = tp.grad_buf(oid);
      Tensor& ga = tp.grad_buf(aid);
      for (size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i];
    });
  }
  return o;
}

Val magsq2(Val re, Val im) {
  check_same_tape(re, im);
  Tape& t = *re.tape;
  const Tensor &vr = t.val(re), &vi = t.val(im);
  check_same_shape(vr, vi, "magsq2");
  Tensor out(vr.rows, vr.cols);
  for (size_t i = 0; i < out.size(); ++i)
    out.v[i] = vr.v[i] * vr.v[i] + vi.v[i] * vi.v[i];
  bool need = rg(re) || rg(im);
  Val o = t.push(std::move(out), need, nullptr);
  if (need) {
    int rid = re.id, iid = im.id, oid = o.id;
    t.set_back(o, [rid, iid, oid](Tape& tp) {
      const Tensor& g = tp.grad_buf(oid);
      const Tensor& xr = tp.value_of(rid);
      const Tensor& xi = tp.value_of(iid);
      if (tp.node_requires_grad(rid)) {
        Tensor& gr = tp.grad_buf(rid);
        for (size_t i = 0; i < g.size(); ++i)
          gr.v[i] += g.v[i] * 2.0 * xr.v[i];
      }
      if (tp.node_requires_grad(iid)) {
        Tensor& gi = tp.grad_buf(iid);
        for (size_t i = 0; i < g.size(); ++i)
          gi.v[i] += g.v[i] * 2.0 * xi.v[i];
      }
    });
  }
  return o;
}

Val fbmm(Val a, Val b, int P, int J, int K) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  const Tensor &va = t.val(a), &vb = t.val(b);
  if (va.rows != P * J || vb.rows != J * K || va.cols != vb.cols)
    throw std::invalid_argument("ad: fbmm shape mismatch");
  const int F = va.cols;
  Tensor out(P * K, F, 0.0);
  for (int g_ = 0; g_ < P; ++g_)
    for (int j = 0; j < J; ++j)
      for (int k = 0; k < K; ++k) {
        const double* arow = &va.v[static_cast<size_t>(g_ * J + j) * F];
        const double* brow = &vb.v[static_cast<size_t>(j * K + k) * F];
        double* orow = &out.v[static_cast<size_t>(g_ * K + k) * F];
        for (int f = 0; f < F; ++f) orow[f] += arow[f] * brow[f];
      }
  bool need = rg(a) || rg(b);
  Val o = t.push(std::move(out), need, nullptr);
  if (need) {
    int aid = a.id, bid = b.id, oid = o.id;
    t.set_back(o, [aid, bid, oid, P, J, K, F](Tape& tp) {
      const Tensor& g = tp.grad_buf(oid);
      const Tensor& x = tp.value_of(aid);
      const Tensor& y = tp.value_of(bid);
      if (tp.node_requires_grad(aid)) {
        Tensor& ga = tp.grad_buf(aid);
        for (int g_ = 0; g_ < P; ++g_)
          for (int j = 0; j < J; ++j)
            for (int k = 0; k < K; ++k) {
              const double* grow = &g.v[static_cast<size_t>(g_ * K + k) * F];
              const double* brow = &y.v[static_cast<size_t>(j * K + k) * F];
              double* arow = &ga.v[static_cast<size_t>(g_ * J + j) * F];
              for (int f = 0; f < F; ++f) arow[f] += grow[f] * brow[f];
            }
      }
      if (tp.node_requires_grad(bid)) {
        Tensor& gb = tp.grad_buf(bid);
        for (int g_ = 0; g_ < P; ++g_)
          for (int j = 0; j < J; ++j)
            for (int k = 0; k < K; ++k) {
              const double* grow = &g.v[static_cast<size_t>(g_ * K + k) * F];
              const double* arow = &x.v[static_cast<size_t>(g_ * J + j) * F];
              double* brow = &gb.v[static_cast<size_t>(j * K + k) * F];
              for (int f = 0; f < F; ++f) brow[f] += grow[f] * arow[f];
            }
      }
    });
  }
  return o;
}

Val fbmm_tA(Val a, Val b, int M, int J, int K) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  const Tensor &va = t.val(a), &vb = t.val(b);
  if (va.rows != M * J || vb.rows != M * K || va.cols != vb.cols)
    throw std::invalid_argument("ad: fbmm_tA shape mismatch");
  const int F = va.cols;
  Tensor out(J * K, F, 0.0);
  for (int m = 0; m < M; ++m)
    for (int j = 0; j < J; ++j)
      for (int k = 0; k < K; ++k) {
        const double* arow = &va.v[static_cast<size_t>(m * J + j) * F];
        const double* brow = &vb.v[static_cast<size_t>(m * K + k) * F];
        double* orow = &out.v[static_cast<size_t>(j * K + k) * F];
        for (int f = 0; f < F; ++f) orow[f] += arow[f] * brow[f];
      }
  bool need = rg(a) || rg(b);
  Val o = t.push(std::move(out), need, nullptr);
  if (need) {
    int aid = a.id, bid = b.id, oid = o.id;
    t.set_back(o, [aid, bid, oid, M, J, K, F](Tape& tp) {
      const Tensor& g = tp.grad_buf(oid);
      const Tensor& x = tp.value_of(aid);
      const Tensor& y = tp.value_of(bid);
      if (tp.node_requires_grad(aid)) {
        Tensor& ga = tp.grad_buf(aid);
        for (int m = 0; m < M; ++m)
          for (int j = 0; j < J; ++j)
            for (int k = 0; k < K; ++k) {
              const double* grow = &g.v[static_cast<size_t>(j * K + k) * F];
              const double* brow = &y.v[static_cast<size_t>(m * K + k) * F];
              double* arow = &ga.v[static_cast<size_t>(m * J + j) * F];
              for (int f = 0; f < F; ++f) arow[f] += grow[f] * brow[f];
            }
      }
      if (tp.node_requires_grad(bid)) {
        Tensor& gb = tp.grad_buf(bid);
        for (int m = 0; m < M; ++m)
          for (int j = 0; j < J; ++j)
            for (int k = 0; k < K; ++k) {
              const double* grow = &g.v[static_cast<size_t>(j * K + k) * F];
              const double* arow = &x.v[static_cast<size_t>(m * J + j) * F];
              double* brow = &gb.v[static_cast<size_t>(m * K + k) * F];
              for (int f = 0; f < F; ++f) brow[f] += grow[f] * arow[f];
            }
      }
    });
  }
  return o;
}

Val pilot_count(Val x) {
  Tape& t = *x.tape;
  const Tensor& vx = t.val(x);
  double s = 0.0;
  for (int g = 0; g < vx.rows; ++g) {
    double prod = 1.0;
    for (int k = 0; k < vx.cols; ++k) prod *= 1.0 - vx.at(g, k);
    s += 1.0 - prod;
  }
  bool need = rg(x);
  Val o = t.push(Tensor(1, 1, s), need, nullptr);
  if (need) {
    int xid = x.id, oid = o.id;
    t.set_back(o, [xid, oid](Tape& tp) {
      double g = tp.grad_buf(oid).v[0];
      const Tensor& vx2 = tp.value_of(xid);
      Tensor& gx = tp.grad_buf(xid);
      std::vector<double> pre(vx2.cols + 1), suf(vx2.cols + 1);
      for (int r = 0; r < vx2.rows; ++r) {
        pre[0] = 1.0;
        for (int k = 0; k < vx2.cols; ++k)
          pre[k + 1] = pre[k] * (1.0 - vx2.at(r, k));
        suf[vx2.cols] = 1.0;
        for (int k = vx2.cols - 1; k >= 0; --k)
          suf[k] = suf[k + 1] * (1.0 - vx2.at(r, k));
        for (int k = 0; k < vx2.cols; ++k)
          gx.at(r, k) += g * pre[k] * suf[k + 1];
      }
    });
  }
  return o;
}

Val hermitian_solve(Val ar, Val ai, Val br, Val bi) {
  check_same_tape(ar, ai);
  check_same_tape(ar, br);
  check_same_tape(ar, bi);
  Tape& t = *ar.tape;
  const Tensor &tar = t.val(ar), &tai = t.val(ai);
  const Tensor &tbr = t.val(br), &tbi = t.val(bi);
  const int N = tar.rows, R = tbr.cols;
  if (tar.cols != N || tai.rows != N || tai.cols != N || tbr.rows != N ||
      tbi.rows != N || tbi.cols != R)
    throw std::invalid_argument("ad: hermitian_solve shape mismatch");
  // symmetrized system matrix
  auto L = std::make_shared<CMat>(N, N);
  for (int r = 0; r < N; ++r)
    for (int c = 0; c < N; ++c)
      L->at(r, c) = Cx{(tar.at(r, c) + tar.at(c, r)) / 2.0,
                      (tai.at(r, c) - tai.at(c, r)) / 2.0};
  cholesky_hermitian(*L);
  CMat X(N, R);
  for (int r = 0; r < N; ++r)
    for (int c = 0; c < R; ++c) X.at(r, c) = Cx{tbr.at(r, c), tbi.at(r, c)};
  solve_cholesky_factor(*L, X);
  Tensor out(2 * N, R);
  for (int r = 0; r < N; ++r)
    for (int c = 0; c < R; ++c) {
      out.at(r, c) = X.at(r, c).re;
      out.at(N + r, c) = X.at(r, c).im;
    }
  bool need = rg(ar) || rg(ai) || rg(br) || rg(bi);
  Val o = t.push(std::move(out), need, nullptr);
  if (need) {
    int arid = ar.id, aiid = ai.id, brid = br.id, biid = bi.id, oid = o.id;
    t.set_back(o, [arid, aiid, brid, biid, oid, L, N, R](Tape& tp) {
      const Tensor& g = tp.grad_buf(oid);
      const Tensor& xv = tp.value_of(oid);
      // S = A^{-1} Xbar using the cached factor
      CMat S(N, R);
      for (int r = 0; r < N; ++r)
        for (int c = 0; c < R; ++c) S.at(r, c) = Cx{g.at(r, c), g.at(N + r, c)};
      solve_cholesky_factor(*L, S);
      if (tp.node_requires_grad(brid)) {
        Tensor& gb = tp.grad_buf(brid);
        for (int r = 0; r < N; ++r)
          for (int c = 0; c < R; ++c) gb.at(r, c) += S.at(r, c).re;
      }
      if (tp.node_requires_grad(biid)) {
        Tensor& gb = tp.grad_buf(biid);
        for (int r = 0; r < N; ++r)
          for (int c = 0; c < R; ++c) gb.at(r, c) += S.at(r, c).im;
      }
      bool need_a =
          tp.node_requires_grad(arid) || tp.node_requires_grad(aiid);
      if (need_a) {
        // C = S X^H, with the symmetrization adjoint applied
        CMat C(N, N);
        for (int r = 0; r < N; ++r)
          for (int c = 0; c < N; ++c) {
            Cx acc{0.0, 0.0};
            for (int l = 0; l < R; ++l) {
              Cx xl{xv.at(c, l), xv.at(N + c, l)};
              acc = acc + S.at(r, l) * conj(xl);
            }
            C.at(r, c) = acc;
          }
        if (tp.node_requires_grad(arid)) {
          Tensor& ga = tp.grad_buf(arid);
          for (int r = 0; r < N; ++r)
            for (int c = 0; c < N; ++c)
              ga.at(r, c) += -(C.at(r, c).re + C.at(c, r).re) / 2.0;
        }
        if (tp.node_requires_grad(aiid)) {
          Tensor& ga = tp.grad_buf(aiid);
          for (int r = 0; r < N; ++r)
            for (int c = 0; c < N; ++c)
              ga.at(r, c) += -(C.at(r, c).im - C.at(c, r).im) / 2.0;
        }
      }
    });
  }
  return o;
}

}  // namespace cfmimo::ad
