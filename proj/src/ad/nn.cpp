#include "cfmimo/ad/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "cfmimo/rng.hpp"

namespace cfmimo::ad {

void Adam::init(const std::vector<Tensor*>& params) {
  t = 0;
  m.clear();
  v.clear();
  m.reserve(params.size());
  v.reserve(params.size());
  for (const Tensor* p : params) {
    m.push_back(Tensor(p->rows, p->cols));
    v.push_back(Tensor(p->rows, p->cols));
  }
}

void Adam::step(const std::vector<Tensor*>& params,
                const std::vector<const Tensor*>& grads) {
  if (params.size() != m.size() || grads.size() != m.size())
    throw std::invalid_argument("adam: slot count mismatch");
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, t);
  const double bc2 = 1.0 - std::pow(beta2, t);
  for (std::size_t s = 0; s < params.size(); ++s) {
    Tensor& p = *params[s];
    const Tensor& g = *grads[s];
    if ((int)g.v.size() != (int)p.v.size())
      throw std::invalid_argument("adam: grad shape mismatch");
    for (std::size_t i = 0; i < p.v.size(); ++i) {
      m[s].v[i] = beta1 * m[s].v[i] + (1.0 - beta1) * g.v[i];
      v[s].v[i] = beta2 * v[s].v[i] + (1.0 - beta2) * g.v[i] * g.v[i];
      const double mhat = m[s].v[i] / bc1;
      const double vhat = v[s].v[i] / bc2;
      p.v[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

void BatchNorm::init(int F) {
  gamma = Tensor(1, F);
  beta = Tensor(1, F);
  run_mean = Tensor(1, F);
  run_var = Tensor(1, F);
  for (int f = 0; f < F; ++f) {
    gamma.v[f] = 1.0;
    run_var.v[f] = 1.0;
  }
}

Val batch_norm_train(Val x, Val gamma, Val beta, BatchNorm& bn) {
  Tape& tp = *x.tape;
  const int E = tp.rows(x);
  const int F = tp.cols(x);
  if (E < 2) throw std::invalid_argument("batch_norm_train: needs >= 2 rows");
  if ((int)bn.run_mean.v.size() != F)
    throw std::invalid_argument("batch_norm_train: feature width mismatch");
  Val mu = scale_const(sum_rows(x), 1.0 / E);
  Val xc = sub_rowvec(x, mu);
  Val var = scale_const(sum_rows(mul(xc, xc)), 1.0 / E);
  Val stdv = sqrt_op(add_const(var, bn.eps));
  Val xn = div_rowvec(xc, stdv);
  // EMA side effect on the buffers (biased batch variance, matching the
  // normalization above).
  const Tensor& muv = tp.val(mu);
  const Tensor& varv = tp.val(var);
  for (int f = 0; f < F; ++f) {
    bn.run_mean.v[f] =
        (1.0 - bn.momentum) * bn.run_mean.v[f] + bn.momentum * muv.v[f];
    bn.run_var.v[f] =
        (1.0 - bn.momentum) * bn.run_var.v[f] + bn.momentum * varv.v[f];
  }
  return add_rowvec(mul_rowvec(xn, gamma), beta);
}

Val batch_norm_infer(Val x, const BatchNorm& bn) {
  Tape& tp = *x.tape;
  const int F = tp.cols(x);
  if ((int)bn.run_mean.v.size() != F)
    throw std::invalid_argument("batch_norm_infer: feature width mismatch");
  Tensor stdv(1, F);
  for (int f = 0; f < F; ++f) stdv.v[f] = std::sqrt(bn.run_var.v[f] + bn.eps);
  Val mu = tp.constant(bn.run_mean);
  Val sd = tp.constant(stdv);
  Val g = tp.constant(bn.gamma);
  Val b = tp.constant(bn.beta);
  return add_rowvec(mul_rowvec(div_rowvec(sub_rowvec(x, mu), sd), g), b);
}

Tensor glorot_uniform(int rows, int cols, std::uint64_t seed) {
  Tensor t(rows, cols);
  const double a = std::sqrt(6.0 / (double)(rows + cols));
  Rng rng(seed);
  for (double& x : t.v) x = (2.0 * rng.uniform() - 1.0) * a;
  return t;
}

}  // namespace cfmimo::ad
