#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "cfmimo/ad/nn.hpp"
#include "cfmimo/ad/tape.hpp"
#include "cfmimo/pilot.hpp"
#include "cfmimo/rng.hpp"

using namespace cfmimo;
using ad::Tape;
using ad::Tensor;
using ad::Val;

namespace {

using Builder = std::function<Val(Tape&, const std::vector<Val>&)>;

Tensor rand_t(int r, int c, std::uint64_t seed, double lo = -1.0,
              double hi = 1.0) {
  Tensor t(r, c);
  Rng rng(seed);
  for (double& x : t.v) x = rng.uniform(lo, hi);
  return t;
}

double eval_scalar(const std::vector<Tensor>& ins, const Builder& f,
                   const Tensor* W) {
  Tape tp;
  std::vector<Val> vs;
  for (const auto& t : ins) vs.push_back(tp.constant(t));
  Val out = f(tp, vs);
  if (!W) return tp.val(out).v[0];
  Val s = ad::sum_all(ad::mul(out, tp.constant(*W)));
  return tp.val(s).v[0];
}

// max over all input entries of |analytic - central difference| relative
// to max(|analytic|, |fd|, 1e-3)
double max_fd_err(std::vector<Tensor> ins, const Builder& f,
                  double h = 1e-5) {
  Tensor W;
  bool contract = false;
  {
    Tape tp;
    std::vector<Val> vs;
    for (const auto& t : ins) vs.push_back(tp.constant(t));
    Val out = f(tp, vs);
    if (tp.rows(out) != 1 || tp.cols(out) != 1) {
      contract = true;
      W = rand_t(tp.rows(out), tp.cols(out), 424242, -1.0, 1.0);
    }
  }
  const Tensor* Wp = contract ? &W : nullptr;

  std::vector<Tensor> grads;
  {
    Tape tp;
    std::vector<Val> vs;
    for (const auto& t : ins) vs.push_back(tp.param(t));
    Val out = f(tp, vs);
    Val root = contract ? ad::sum_all(ad::mul(out, tp.constant(W))) : out;
    tp.backward(root);
    for (Val v : vs) grads.push_back(tp.grad(v));
  }

  double worst = 0.0;
  for (size_t i = 0; i < ins.size(); ++i)
    for (size_t e = 0; e < ins[i].v.size(); ++e) {
      const double save = ins[i].v[e];
      ins[i].v[e] = save + h;
      const double fp = eval_scalar(ins, f, Wp);
      ins[i].v[e] = save - h;
      const double fm = eval_scalar(ins, f, Wp);
      ins[i].v[e] = save;
      const double fd = (fp - fm) / (2.0 * h);
      const double an = grads[i].v[e];
      const double err =
          std::abs(an - fd) /
          std::max({std::abs(an), std::abs(fd), 1e-3});
      worst = std::max(worst, err);
    }
  return worst;
}

}  // namespace

TEST_CASE("gradients of elementwise and scalar ops") {
  auto a = rand_t(3, 4, 1);
  auto b = rand_t(3, 4, 2, 0.5, 1.5);  // safe divisor
  CHECK(max_fd_err({a, b}, [](Tape&, const std::vector<Val>& v) {
          return ad::add(v[0], v[1]);
        }) < 1e-4);
  CHECK(max_fd_err({a, b}, [](Tape&, const std::vector<Val>& v) {
          return ad::sub(v[0], v[1]);
        }) < 1e-4);
  CHECK(max_fd_err({a, b}, [](Tape&, const std::vector<Val>& v) {
          return ad::mul(v[0], v[1]);
        }) < 1e-4);
  CHECK(max_fd_err({a, b}, [](Tape&, const std::vector<Val>& v) {
          return ad::div(v[0], v[1]);
        }) < 1e-4);
  CHECK(max_fd_err({a}, [](Tape&, const std::vector<Val>& v) {
          return ad::scale_const(v[0], -2.5);
        }) < 1e-4);
  CHECK(max_fd_err({a}, [](Tape&, const std::vector<Val>& v) {
          return ad::add_const(v[0], 3.0);
        }) < 1e-4);
  CHECK(max_fd_err({a}, [](Tape&, const std::vector<Val>& v) {
          return ad::neg(v[0]);
        }) < 1e-4);
}

TEST_CASE("gradients of activations") {
  // keep away from the relu/clamp kinks
  Tensor a = rand_t(3, 3, 3);
  for (double& x : a.v) x += (x >= 0.0 ? 0.2 : -0.2);
  CHECK(max_fd_err({a}, [](Tape&, const std::vector<Val>& v) {
          return ad::relu(v[0]);
        }) < 1e-4);
  CHECK(max_fd_err({a}, [](Tape&, const std::vector<Val>& v) {
          return ad::tanh_op(v[0]);
        }) < 1e-4);
  CHECK(max_fd_err({a}, [](Tape&, const std::vector<Val>& v) {
          return ad::sigmoid(v[0]);
        }) < 1e-4);
  CHECK(max_fd_err({a}, [](Tape&, const std::vector<Val>& v) {
          return ad::exp_op(v[0]);
        }) < 1e-4);
  auto pos = rand_t(3, 3, 4, 0.3, 2.0);
  CHECK(max_fd_err({pos}, [](Tape&, const std::vector<Val>& v) {
          return ad::log_clamped(v[0]);
        }) < 1e-4);
  CHECK(max_fd_err({pos}, [](Tape&, const std::vector<Val>& v) {
          return ad::sqrt_op(v[0]);
        }) < 1e-4);
  CHECK(max_fd_err({a}, [](Tape&, const std::vector<Val>& v) {
          return ad::clamp(v[0], -0.9, 0.9);
        }) < 1e-4);
  CHECK(max_fd_err({a}, [](Tape&, const std::vector<Val>& v) {
          return ad::max_const(v[0], 0.05);
        }) < 1e-4);
  // below the floor the clamped log is flat
  Tensor tiny(1, 2);
  tiny.v = {1e-15, 0.5};
  Tape tp;
  Val x = tp.param(tiny);
  tp.backward(ad::sum_all(ad::log_clamped(x)));
  CHECK(tp.grad(x).v[0] == 0.0);
  CHECK(tp.grad(x).v[1] == doctest::Approx(2.0));
}

TEST_CASE("gradients of matrix products and reshapes") {
  auto a = rand_t(3, 4, 5);
  auto b = rand_t(4, 2, 6);
  CHECK(max_fd_err({a, b}, [](Tape&, const std::vector<Val>& v) {
          return ad::matmul(v[0], v[1]);
        }) < 1e-4);
  CHECK(max_fd_err({a}, [](Tape&, const std::vector<Val>& v) {
          return ad::transpose(v[0]);
        }) < 1e-4);
  CHECK(max_fd_err({a}, [](Tape&, const std::vector<Val>& v) {
          return ad::sum_all(v[0]);
        }) < 1e-4);
  CHECK(max_fd_err({a}, [](Tape&, const std::vector<Val>& v) {
          return ad::sum_rows(v[0]);
        }) < 1e-4);
  CHECK(max_fd_err({a}, [](Tape&, const std::vector<Val>& v) {
          return ad::sum_cols(v[0]);
        }) < 1e-4);
  CHECK(max_fd_err({a, b}, [](Tape&, const std::vector<Val>& v) {
          return ad::concat_cols(ad::matmul(v[0], v[1]), v[0]);
        }) < 1e-4);
  CHECK(max_fd_err({a}, [](Tape&, const std::vector<Val>& v) {
          return ad::concat_rows(v[0], ad::neg(v[0]));
        }) < 1e-4);
  CHECK(max_fd_err({a}, [](Tape&, const std::vector<Val>& v) {
          return ad::slice_cols(v[0], 1, 3);
        }) < 1e-4);
  CHECK(max_fd_err({a}, [](Tape&, const std::vector<Val>& v) {
          return ad::mul(ad::reshape(v[0], 4, 3), ad::reshape(v[0], 4, 3));
        }) < 1e-4);
  Tape tpr;
  Val rs = ad::reshape(tpr.constant(a), 2, 6);
  CHECK(tpr.val(rs).at(1, 0) == a.at(1, 2));  // row-major order kept
}

TEST_CASE("gradients of gather, segment and row scaling") {
  auto a = rand_t(4, 3, 7);
  CHECK(max_fd_err({a}, [](Tape&, const std::vector<Val>& v) {
          return ad::gather_rows(v[0], {2, 0, 2, 1, 3});  // repeats included
        }) < 1e-4);
  CHECK(max_fd_err({a}, [](Tape&, const std::vector<Val>& v) {
          return ad::segment_sum(v[0], {1, 0, 1, 2}, 3);
        }) < 1e-4);
  CHECK(max_fd_err({a}, [](Tape&, const std::vector<Val>& v) {
          return ad::row_scale_const(v[0], {0.5, -1.0, 2.0, 0.25});
        }) < 1e-4);
  // values
  Tape tp;
  Val x = tp.constant(a);
  Val g = ad::gather_rows(x, {2, 2});
  CHECK(tp.val(g).at(0, 1) == a.at(2, 1));
  CHECK(tp.val(g).at(1, 1) == a.at(2, 1));
  Val s = ad::segment_sum(x, {1, 0, 1, 2}, 3);
  CHECK(tp.val(s).at(1, 0) == doctest::Approx(a.at(0, 0) + a.at(2, 0)));
  CHECK(tp.val(s).at(2, 2) == doctest::Approx(a.at(3, 2)));
}

TEST_CASE("gradients of broadcast ops") {
  auto a = rand_t(3, 4, 8);
  auto col = rand_t(3, 1, 9);
  auto row = rand_t(1, 4, 10, 0.5, 1.5);
  auto scl = rand_t(1, 1, 11);
  CHECK(max_fd_err({a, col}, [](Tape&, const std::vector<Val>& v) {
          return ad::mul_colvec(v[0], v[1]);
        }) < 1e-4);
  CHECK(max_fd_err({a, row}, [](Tape&, const std::vector<Val>& v) {
          return ad::mul_rowvec(v[0], v[1]);
        }) < 1e-4);
  CHECK(max_fd_err({a, row}, [](Tape&, const std::vector<Val>& v) {
          return ad::div_rowvec(v[0], v[1]);
        }) < 1e-4);
  CHECK(max_fd_err({a, row}, [](Tape&, const std::vector<Val>& v) {
          return ad::sub_rowvec(v[0], v[1]);
        }) < 1e-4);
  CHECK(max_fd_err({a, row}, [](Tape&, const std::vector<Val>& v) {
          return ad::add_rowvec(v[0], v[1]);
        }) < 1e-4);
  CHECK(max_fd_err({a, scl}, [](Tape&, const std::vector<Val>& v) {
          return ad::mul_scalar(v[0], v[1]);
        }) < 1e-4);
  CHECK(max_fd_err({a, a}, [](Tape&, const std::vector<Val>& v) {
          return ad::magsq2(v[0], v[1]);
        }) < 1e-4);
}

TEST_CASE("softmax columns: gradient and normalization") {
  auto a = rand_t(4, 3, 12, -2.0, 2.0);
  CHECK(max_fd_err({a}, [](Tape&, const std::vector<Val>& v) {
          return ad::softmax_cols(v[0]);
        }) < 1e-4);
  Tape tp;
  Val s = ad::softmax_cols(tp.constant(a));
  for (int c = 0; c < 3; ++c) {
    double sum = 0.0;
    for (int r = 0; r < 4; ++r) {
      double v = tp.val(s).at(r, c);
      CHECK(v > 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  // equal logits give the exact uniform column
  Tensor eq(3, 1, 0.7);
  Tape tp2;
  Val u = ad::softmax_cols(tp2.constant(eq));
  for (int r = 0; r < 3; ++r) CHECK(tp2.val(u).at(r, 0) == 1.0 / 3.0);
  // hand Jacobian for a 2-entry column
  Tensor two(2, 1);
  two.v = {0.3, -0.4};
  Tape tp3;
  Val x = tp3.param(two);
  Val sm = ad::softmax_cols(x);
  tp3.backward(ad::sum_all(ad::mul(sm, tp3.constant(Tensor(2, 1, 1.0) ) )));
  // sum of a softmax column is constant, so the gradient vanishes
  CHECK(tp3.grad(x).v[0] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("gradients of feature-batched products") {
  const int P = 2, J = 3, K = 2, F = 2;
  auto a = rand_t(P * J, F, 13);
  auto b = rand_t(J * K, F, 14);
  CHECK(max_fd_err({a, b}, [=](Tape&, const std::vector<Val>& v) {
          return ad::fbmm(v[0], v[1], P, J, K);
        }) < 1e-4);
  const int M = 3;
  auto c = rand_t(M * J, F, 15);
  auto d = rand_t(M * K, F, 16);
  CHECK(max_fd_err({c, d}, [=](Tape&, const std::vector<Val>& v) {
          return ad::fbmm_tA(v[0], v[1], M, J, K);
        }) < 1e-4);
  // values against naive loops
  Tape tp;
  Val o = ad::fbmm(tp.constant(a), tp.constant(b), P, J, K);
  for (int g = 0; g < P; ++g)
    for (int k = 0; k < K; ++k)
      for (int f = 0; f < F; ++f) {
        double s = 0.0;
        for (int j = 0; j < J; ++j)
          s += a.at(g * J + j, f) * b.at(j * K + k, f);
        CHECK(tp.val(o).at(g * K + k, f) == doctest::Approx(s).epsilon(1e-13));
      }
  Val o2 = ad::fbmm_tA(tp.constant(c), tp.constant(d), M, J, K);
  for (int j = 0; j < J; ++j)
    for (int k = 0; k < K; ++k)
      for (int f = 0; f < F; ++f) {
        double s = 0.0;
        for (int m = 0; m < M; ++m)
          s += c.at(m * J + j, f) * d.at(m * K + k, f);
        CHECK(tp.val(o2).at(j * K + k, f) == doctest::Approx(s).epsilon(1e-13));
      }
}

TEST_CASE("pilot-use count op matches the plain function") {
  auto x = rand_t(3, 4, 17, 0.1, 0.9);
  CHECK(max_fd_err({x}, [](Tape&, const std::vector<Val>& v) {
          return ad::pilot_count(v[0]);
        }) < 1e-4);
  Tape tp;
  Val o = ad::pilot_count(tp.constant(x));
  CHECK(tp.val(o).v[0] == doctest::Approx(psi(x.to_mat())).epsilon(1e-14));
}

TEST_CASE("hermitian solve: values and gradients") {
  const int n = 3, R = 2;
  // near-identity PD real part, small antisymmetric imaginary part
  Tensor ar = rand_t(n, n, 18, -0.15, 0.15);
  for (int i = 0; i < n; ++i) ar.at(i, i) += 2.0;
  Tensor ai = rand_t(n, n, 19, -0.15, 0.15);
  Tensor br = rand_t(n, R, 20);
  Tensor bi = rand_t(n, R, 21);
  CHECK(max_fd_err({ar, ai, br, bi}, [](Tape&, const std::vector<Val>& v) {
          return ad::hermitian_solve(v[0], v[1], v[2], v[3]);
        }) < 1e-4);

  // forward against the plain solver (symmetrize the same way)
  Tape tp;
  Val o = ad::hermitian_solve(tp.constant(ar), tp.constant(ai),
                              tp.constant(br), tp.constant(bi));
  CMat A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      A.at(i, j) = Cx{(ar.at(i, j) + ar.at(j, i)) / 2.0,
                      (ai.at(i, j) - ai.at(j, i)) / 2.0};
  CMat B(n, R);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < R; ++c) B.at(i, c) = Cx{br.at(i, c), bi.at(i, c)};
  solve_hermitian(A, B);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < R; ++c) {
      CHECK(tp.val(o).at(i, c) == doctest::Approx(B.at(i, c).re).epsilon(1e-12));
      CHECK(tp.val(o).at(n + i, c) ==
            doctest::Approx(B.at(i, c).im).epsilon(1e-12));
    }
}

TEST_CASE("backward resets accumulators and tracks reuse") {
  Tensor a(2, 2);
  a.v = {1.0, 2.0, 3.0, 4.0};
  Tape tp;
  Val x = tp.param(a);
  Val y = ad::add(ad::mul(x, x), x);  // x used twice in one node plus again
  Val s = ad::sum_all(y);
  tp.backward(s);
  Tensor g1 = tp.grad(x);
  for (int i = 0; i < 4; ++i)
    CHECK(g1.v[i] == doctest::Approx(2.0 * a.v[i] + 1.0));
  tp.backward(s);  // same result, not doubled
  for (int i = 0; i < 4; ++i) CHECK(tp.grad(x).v[i] == g1.v[i]);
}

TEST_CASE("constant-only graphs carry no gradient requirement") {
  Tape tp;
  Val c = tp.constant(Tensor(2, 2, 1.5));
  Val y = ad::mul(c, c);
  CHECK(!tp.requires_grad(y));
  Val p = tp.param(Tensor(2, 2, 1.0));
  CHECK(tp.requires_grad(ad::add(y, p)));
}

TEST_CASE("optimizer follows the frozen two-step trace") {
  Tensor p(1, 1, 1.0);
  ad::Adam opt;
  opt.init({&p});
  Tensor g1(1, 1, 0.5), g2(1, 1, -0.25);
  opt.step({&p}, {&g1});
  CHECK(p.v[0] == doctest::Approx(0.9900000002).epsilon(1e-12));
  opt.step({&p}, {&g2});
  CHECK(p.v[0] == doctest::Approx(0.9873366298707846).epsilon(1e-12));
}

TEST_CASE("batch normalization: frozen forward, stats and gradients") {
  ad::BatchNorm bn;
  bn.init(1);
  bn.gamma.v[0] = 2.0;
  bn.beta.v[0] = 0.5;
  Tensor x(2, 1);
  x.v = {1.0, 3.0};
  Tape tp;
  Val xv = tp.param(x);
  Val gv = tp.param(bn.gamma);
  Val bv = tp.param(bn.beta);
  Val out = ad::batch_norm_train(xv, gv, bv, bn);
  CHECK(tp.val(out).v[0] == doctest::Approx(-1.4999900000749995).epsilon(1e-12));
  CHECK(tp.val(out).v[1] == doctest::Approx(2.4999900000749995).epsilon(1e-12));
  CHECK(bn.run_mean.v[0] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(bn.run_var.v[0] == doctest::Approx(1.0).epsilon(1e-12));

  // inference route reproduces the affine map from the stored stats
  Tape tp2;
  Val xi = tp2.constant(x);
  Val oi = ad::batch_norm_infer(xi, bn);
  double sd = std::sqrt(1.0 + 1e-5);
  CHECK(tp2.val(oi).v[0] ==
        doctest::Approx(2.0 * (1.0 - 0.2) / sd + 0.5).epsilon(1e-12));

  // gradient through the training route
  ad::BatchNorm bn2;
  bn2.init(3);
  auto xb = rand_t(5, 3, 22);
  auto gm = rand_t(1, 3, 23, 0.5, 1.5);
  auto bt = rand_t(1, 3, 24);
  CHECK(max_fd_err({xb, gm, bt}, [&bn2](Tape&, const std::vector<Val>& v) {
          return ad::batch_norm_train(v[0], v[1], v[2], bn2);
        }) < 1e-4);
}

TEST_CASE("glorot draws stay inside the fan bound") {
  auto w = ad::glorot_uniform(8, 8, 99);
  const double a = std::sqrt(6.0 / 16.0);
  double mx = 0.0;
  for (double x : w.v) {
    CHECK(std::abs(x) <= a);
    mx = std::max(mx, std::abs(x));
  }
  CHECK(mx > 0.5 * a);  // actually spreads over the interval
  auto w2 = ad::glorot_uniform(8, 8, 99);
  CHECK(w2.v == w.v);
  auto w3 = ad::glorot_uniform(8, 8, 100);
  CHECK(w3.v != w.v);
}

TEST_CASE("composite chain mixing many ops") {
  auto a = rand_t(3, 4, 25);
  auto b = rand_t(4, 3, 26);
  CHECK(max_fd_err({a, b}, [](Tape&, const std::vector<Val>& v) {
          Val m = ad::matmul(v[0], v[1]);           // 3x3
          Val t = ad::tanh_op(m);
          Val sm = ad::softmax_cols(ad::add(t, ad::transpose(m)));
          Val lg = ad::log_clamped(sm);
          return ad::mul_scalar(ad::sum_cols(lg), ad::sum_all(v[1]));
        }) < 1e-4);
}
