#include "cfmimo/pilot.hpp"

#include <cstdint>
#include <stdexcept>

#include "cfmimo/rng.hpp"
#include "json.hpp"

namespace cfmimo {

using nlohmann::json;

bool is_binary_assignment(const Mat& X, double tol) {
  for (int k = 0; k < X.cols; ++k) {
    int ones = 0;
    for (int g = 0; g < X.rows; ++g) {
      double v = X.at(g, k);
      if (std::abs(v - 1.0) <= tol)
        ++ones;
      else if (std::abs(v) > tol)
        return false;
    }
    if (ones != 1) return false;
  }
  return true;
}

double psi(const Mat& X) {
  double s = 0.0;
  for (int g = 0; g < X.rows; ++g) {
    double prod = 1.0;
    for (int k = 0; k < X.cols; ++k) prod *= 1.0 - X.at(g, k);
    s += 1.0 - prod;
  }
  return s;
}

Mat psi_grad(const Mat& X) {
  Mat G(X.rows, X.cols);
  std::vector<double> pre(X.cols + 1), suf(X.cols + 1);
  for (int g = 0; g < X.rows; ++g) {
    pre[0] = 1.0;
    for (int k = 0; k < X.cols; ++k) pre[k + 1] = pre[k] * (1.0 - X.at(g, k));
    suf[X.cols] = 1.0;
    for (int k = X.cols - 1; k >= 0; --k)
      suf[k] = suf[k + 1] * (1.0 - X.at(g, k));
    // d/dx_gk [1 - prod_j (1-x_gj)] = prod_{j != k} (1-x_gj)
    for (int k = 0; k < X.cols; ++k) G.at(g, k) = pre[k] * suf[k + 1];
  }
  return G;
}

CompactAssignment compact(const Mat& X) {
  if (!is_binary_assignment(X))
    throw std::invalid_argument(
        "compact: X is not a binary assignment with unit column sums");
  std::vector<int> keep;
  for (int g = 0; g < X.rows; ++g) {
    bool nonzero = false;
    for (int k = 0; k < X.cols; ++k)
      if (X.at(g, k) != 0.0) nonzero = true;
    if (nonzero) keep.push_back(g);
  }
  CompactAssignment ca;
  ca.tau_p = static_cast<int>(keep.size());
  ca.X_o = Mat(ca.tau_p, X.cols);
  for (int r = 0; r < ca.tau_p; ++r)
    for (int k = 0; k < X.cols; ++k) ca.X_o.at(r, k) = X.at(keep[r], k);
  return ca;
}

Mat expand(const CompactAssignment& ca, int n_rows) {
  if (n_rows < ca.tau_p)
    throw std::invalid_argument("expand: n_rows smaller than tau_p");
  Mat X(n_rows, ca.X_o.cols);
  for (int r = 0; r < ca.tau_p; ++r)
    for (int k = 0; k < ca.X_o.cols; ++k) X.at(r, k) = ca.X_o.at(r, k);
  return X;
}

Mat discretize(const Mat& X_soft) {
  Mat X(X_soft.rows, X_soft.cols, 0.0);
  for (int k = 0; k < X_soft.cols; ++k) {
    int best = 0;
    for (int g = 1; g < X_soft.rows; ++g)
      if (X_soft.at(g, k) > X_soft.at(best, k)) best = g;
    X.at(best, k) = 1.0;
  }
  return X;
}

static json mat_to_json_rows(const Mat& X) {
  json rows = json::array();
  for (int g = 0; g < X.rows; ++g) {
    json row = json::array();
    for (int k = 0; k < X.cols; ++k) row.push_back(X.at(g, k));
    rows.push_back(row);
  }
  return rows;
}

static Mat mat_from_json_rows(const json& rows) {
  int r = static_cast<int>(rows.size());
  if (r == 0) throw std::invalid_argument("assignment: empty matrix");
  int c = static_cast<int>(rows.at(0).size());
  Mat X(r, c);
  for (int g = 0; g < r; ++g) {
    if (static_cast<int>(rows.at(g).size()) != c)
      throw std::invalid_argument("assignment: ragged matrix");
    for (int k = 0; k < c; ++k) X.at(g, k) = rows.at(g).at(k).get<double>();
  }
  return X;
}

std::string assignment_to_json(const Mat& X) {
  json j;
  j["K"] = X.cols;
  j["X"] = mat_to_json_rows(X);
  return j.dump(2);
}

Mat assignment_from_json(const std::string& text) {
  json j = json::parse(text);
  Mat X = mat_from_json_rows(j.at("X"));
  if (j.contains("K") && j.at("K").get<int>() != X.cols)
    throw std::invalid_argument("assignment: K does not match X columns");
  return X;
}

std::string compact_to_json(const CompactAssignment& ca) {
  json j;
  j["tau_p"] = ca.tau_p;
  j["X_o"] = mat_to_json_rows(ca.X_o);
  return j.dump(2);
}

CompactAssignment compact_from_json(const std::string& text) {
  json j = json::parse(text);
  CompactAssignment ca;
  ca.X_o = mat_from_json_rows(j.at("X_o"));
  ca.tau_p = j.at("tau_p").get<int>();
  if (ca.tau_p != ca.X_o.rows)
    throw std::invalid_argument("assignment: tau_p does not match X_o rows");
  return ca;
}

std::vector<int> identity_permutation(int n) {
  std::vector<int> p(n);
  for (int i = 0; i < n; ++i) p[i] = i;
  return p;
}

std::vector<int> random_permutation(int n, std::uint64_t seed) {
  std::vector<int> p = identity_permutation(n);
  Rng rng(seed);
  for (int i = n - 1; i > 0; --i) {
    int j = rng.uniform_int(i + 1);
    std::swap(p[i], p[j]);
  }
  return p;
}

Mat permute_rows_cols(const Mat& in, const std::vector<int>& row_sigma,
                      const std::vector<int>& col_sigma) {
  Mat out(in.rows, in.cols);
  for (int i = 0; i < in.rows; ++i)
    for (int j = 0; j < in.cols; ++j)
      out.at(i, j) = in.at(row_sigma[i], col_sigma[j]);
  return out;
}

std::vector<int> an_permutation(const std::vector<int>& sigma_ap,
                                const std::vector<int>& sigma_ue, int K) {
  std::vector<int> p(sigma_ap.size() * K);
  for (size_t m = 0; m < sigma_ap.size(); ++m)
    for (int k = 0; k < K; ++k)
      p[m * K + k] = sigma_ap[m] * K + sigma_ue[k];
  return p;
}

}  // namespace cfmimo
