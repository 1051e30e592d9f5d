#pragma once

#include <array>
#include <string>
#include <vector>

#include "linalg.hpp"

namespace osep {

// Ginibre matrix, QR, then fix the phases of R's diagonal so the law is Haar.
inline UnitaryMatrix sample_haar_unitary(Index d, Engine& g) {
  require(d >= 1, "sample_haar_unitary: d must be positive");
  CMatrix z(d, d);
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < d; ++i) z(i, j) = complex_normal(g);
  Eigen::HouseholderQR<CMatrix> qr(z);
  CMatrix q = qr.householderQ();
  const CMatrix& r = qr.matrixQR();
  for (Index j = 0; j < d; ++j) {
    cplx rjj = r(j, j);
    double a = std::abs(rjj);
    q.col(j) *= (a > 0 ? rjj / a : cplx(1.0));
  }
  return UnitaryMatrix::unchecked(std::move(q));
}

inline UnitaryMatrix sample_haar_unitary(Index d, const SeedPath& seed) {
  Engine g = make_engine(seed);
  return sample_haar_unitary(d, g);
}

inline PureState sample_haar_state(Index d, Engine& g) {
  require(d >= 1, "sample_haar_state: d must be positive");
  CVector v(d);
  for (Index i = 0; i < d; ++i) v(i) = complex_normal(g);
  v.normalize();
  return PureState::unchecked(std::move(v));
}

inline PureState sample_haar_state(Index d, const SeedPath& seed) {
  Engine g = make_engine(seed);
  return sample_haar_state(d, g);
}

inline DensityMatrix random_density(Index dim, Index rank, Engine& g) {
  CMatrix z(dim, rank);
  for (Index j = 0; j < rank; ++j)
    for (Index i = 0; i < dim; ++i) z(i, j) = complex_normal(g);
  CMatrix rho = z * z.adjoint();
  rho /= rho.trace().real();
  return DensityMatrix::unchecked(0.5 * (rho + rho.adjoint()));
}

inline CMatrix random_hermitian(Index dim, Engine& g) {
  CMatrix z(dim, dim);
  for (Index j = 0; j < dim; ++j)
    for (Index i = 0; i < dim; ++i) z(i, j) = complex_normal(g);
  return 0.5 * (z + z.adjoint());
}

inline CMatrix tensor_power(const CMatrix& u, int ell) {
  CMatrix out = CMatrix::Identity(1, 1);
  for (int i = 0; i < ell; ++i) out = tensor(out, u);
  return out;
}

inline DensityMatrix state_moment_exact(Index d, int ell) {
  CMatrix p = sym_projector(d, ell);
  return DensityMatrix::unchecked(p / binomial(d + ell - 1, ell));
}

// Operator sum_pi R_pi (x) Y_pi on (C^d)^{(x) ell} (x) C^B. Haar twirls land
// in this span, so they are stored in this form and only densified on demand.
struct PermutationExpansion {
  Index d = 0;
  int ell = 0;
  Index bystander = 1;
  std::vector<Perm> perms;
  std::vector<std::vector<Index>> maps;
  std::vector<CMatrix> coeffs;

  Index twirled_dim() const { return ipow(d, ell); }
  Index dim() const { return twirled_dim() * bystander; }

  CMatrix dense() const {
    check_dense_size(dim(), "PermutationExpansion::dense");
    const Index da = twirled_dim(), b = bystander;
    CMatrix out = CMatrix::Zero(dim(), dim());
    for (size_t k = 0; k < perms.size(); ++k)
      for (Index x = 0; x < da; ++x) out.block(maps[k][x] * b, x * b, b, b) += coeffs[k];
    return out;
  }

  CVector apply(const CVector& v) const {
    require(v.size() == dim(), "PermutationExpansion::apply: dimension mismatch");
    const Index da = twirled_dim(), b = bystander;
    Eigen::Map<const CMatrix> m(v.data(), b, da);
    CVector out = CVector::Zero(dim());
    Eigen::Map<CMatrix> om(out.data(), b, da);
    for (size_t k = 0; k < perms.size(); ++k) {
      CMatrix w = coeffs[k] * m;
      for (Index x = 0; x < da; ++x) om.col(maps[k][x]) += w.col(x);
    }
    return out;
  }

  double expectation(const CVector& v) const { return v.dot(apply(v)).real(); }

  double trace() const {
    double t = 0;
    for (size_t k = 0; k < perms.size(); ++k)
      t += std::pow(double(d), cycle_count(perms[k])) * coeffs[k].trace().real();
    return t;
  }
};

inline PermutationExpansion make_expansion(Index d, int ell, Index bystander) {
  PermutationExpansion e;
  e.d = d;
  e.ell = ell;
  e.bystander = bystander;
  e.perms = all_permutations(ell);
  for (const auto& p : e.perms) e.maps.push_back(perm_index_map(p, d, ell));
  e.coeffs.assign(e.perms.size(), CMatrix::Zero(bystander, bystander));
  return e;
}

// Pseudo-inverse of the Gram matrix G_{pi,sigma} = d^{#cycles(pi^-1 sigma)}.
inline Eigen::MatrixXd weingarten_pinv(Index d, const std::vector<Perm>& perms) {
  const Index k = Index(perms.size());
  Eigen::MatrixXd g(k, k);
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < k; ++j)
      g(i, j) = std::pow(double(d), cycle_count(perm_compose(perm_inverse(perms[i]), perms[j])));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  Eigen::VectorXd inv = es.eigenvalues();
  double top = inv.cwiseAbs().maxCoeff();
  for (Index i = 0; i < k; ++i) inv(i) = std::abs(inv(i)) > 1e-10 * top ? 1.0 / inv(i) : 0.0;
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

inline Index bystander_dim(const CMatrix& rho, Index d, int ell) {
  Index da = ipow(d, ell);
  require(rho.rows() == rho.cols() && rho.rows() % da == 0, "twirl: rho does not contain ell registers of dimension d");
  return rho.rows() / da;
}

// Tr_A[(R_pi^dagger (x) I) rho] for each permutation.
inline std::vector<CMatrix> permutation_marginals(const CMatrix& rho, const PermutationExpansion& e) {
  const Index da = e.twirled_dim(), b = e.bystander;
  std::vector<CMatrix> out;
  for (size_t k = 0; k < e.perms.size(); ++k) {
    CMatrix x = CMatrix::Zero(b, b);
    for (Index a = 0; a < da; ++a) x += rho.block(e.maps[k][a] * b, a * b, b, b);
    out.push_back(x);
  }
  return out;
}

inline PermutationExpansion twirl_exact_expansion(const CMatrix& rho, Index d, int ell) {
  require(d >= 1 && ell >= 1, "twirl_exact: d and ell must be positive");
  require_size(ell <= 4, "twirl_exact: ell above 4 exceeds the Gram budget");
  check_twirl_size(d, ell, "twirl_exact");
  PermutationExpansion e = make_expansion(d, ell, bystander_dim(rho, d, ell));
  auto marg = permutation_marginals(rho, e);
  Eigen::MatrixXd w = weingarten_pinv(d, e.perms);
  for (size_t p = 0; p < e.perms.size(); ++p)
    for (size_t s = 0; s < e.perms.size(); ++s) e.coeffs[p] += w(Index(p), Index(s)) * marg[s];
  return e;
}

inline DensityMatrix twirl_exact(const DensityMatrix& rho, Index d, int ell) {
  return DensityMatrix::unchecked(twirl_exact_expansion(rho.matrix(), d, ell).dense());
}

inline CMatrix conjugate_first(const CMatrix& rho, const CMatrix& u_ell) {
  const Index b = rho.rows() / u_ell.rows();
  if (b == 1) return u_ell * rho * u_ell.adjoint();
  CMatrix full = tensor(u_ell, CMatrix::Identity(b, b));
  return full * rho * full.adjoint();
}

// Each sample draws from its own seed path, so the merged sum does not depend
// on how samples are split into chunks.
inline DensityMatrix twirl_mc(const DensityMatrix& rho, Index d, int ell, int samples, const SeedPath& seed) {
  bystander_dim(rho.matrix(), d, ell);
  require(samples >= 1, "twirl_mc: samples must be positive");
  CMatrix acc = CMatrix::Zero(rho.dim(), rho.dim());
  const int chunk = 256;
  for (int c0 = 0; c0 < samples; c0 += chunk) {
    CMatrix part = CMatrix::Zero(rho.dim(), rho.dim());
    for (int i = c0; i < std::min(samples, c0 + chunk); ++i) {
      UnitaryMatrix u = sample_haar_unitary(d, seed.child("sample", i));
      part += conjugate_first(rho.matrix(), tensor_power(u.matrix(), ell));
    }
    acc += part;
  }
  acc /= double(samples);
  return DensityMatrix::unchecked(0.5 * (acc + acc.adjoint()));
}

inline DensityMatrix ensemble_twirl(const std::vector<UnitaryMatrix>& us, int ell, const DensityMatrix& rho) {
  require(!us.empty(), "ensemble_twirl: empty ensemble");
  const Index d = us.front().dim();
  for (const auto& u : us) require(u.dim() == d, "ensemble_twirl: members differ in dimension");
  bystander_dim(rho.matrix(), d, ell);
  CMatrix acc = CMatrix::Zero(rho.dim(), rho.dim());
  for (const auto& u : us) acc += conjugate_first(rho.matrix(), tensor_power(u.matrix(), ell));
  acc /= double(us.size());
  return DensityMatrix::unchecked(0.5 * (acc + acc.adjoint()));
}

// Choi state of the ell-fold Haar isometry map lambda -> lambda+s qubits. The
// permutation marginals of the input are R_sigma / 2^{lambda ell} on the
// reference, so the expansion is written down directly.
inline PermutationExpansion haar_isometry_choi_expansion(int lambda, int s, int ell) {
  require(lambda >= 1 && s >= 0 && ell >= 1, "haar_isometry_choi: invalid parameters");
  const Index dout = Index(1) << (lambda + s), din = Index(1) << lambda;
  check_twirl_size(dout, ell, "haar_isometry_choi");
  require_size((2 * lambda + s) * ell <= budget().max_total_qubits, "haar_isometry_choi: register exceeds budget");
  PermutationExpansion e = make_expansion(dout, ell, ipow(din, ell));
  Eigen::MatrixXd w = weingarten_pinv(dout, e.perms);
  const double norm = 1.0 / double(ipow(din, ell));
  std::vector<CMatrix> refs;
  for (const auto& p : e.perms) refs.push_back(permutation_operator(p, din, ell).matrix() * norm);
  for (size_t p = 0; p < e.perms.size(); ++p)
    for (size_t q = 0; q < e.perms.size(); ++q) e.coeffs[p] += w(Index(p), Index(q)) * refs[q];
  return e;
}

inline PermutationExpansion haar_choi_expansion(int lambda, int ell) {
  return haar_isometry_choi_expansion(lambda, 0, ell);
}

inline DensityMatrix haar_choi(int lambda, int ell) {
  return DensityMatrix::unchecked(haar_choi_expansion(lambda, ell).dense());
}

inline DensityMatrix haar_isometry_choi(int lambda, int s, int ell) {
  return DensityMatrix::unchecked(haar_isometry_choi_expansion(lambda, s, ell).dense());
}

// E|psi><psi|^{(x) ell} over states on C^{dout (x) din}, written in the Choi
// ordering (all outputs first, then all references).
inline PermutationExpansion moment_choi_expansion(Index dout, Index din, int ell) {
  PermutationExpansion e = make_expansion(dout, ell, ipow(din, ell));
  const double norm = 1.0 / (factorial(ell) * binomial(dout * din + ell - 1, ell));
  for (size_t p = 0; p < e.perms.size(); ++p) e.coeffs[p] = permutation_operator(e.perms[p], din, ell).matrix() * norm;
  return e;
}

inline DensityMatrix twirl_permutation_approx(const DensityMatrix& rho, int n, int ell) {
  const Index d = Index(1) << n;
  check_twirl_size(d, ell, "twirl_permutation_approx");
  PermutationExpansion e = make_expansion(d, ell, bystander_dim(rho.matrix(), d, ell));
  auto marg = permutation_marginals(rho.matrix(), e);
  const double w = 1.0 / double(ipow(d, ell));
  for (size_t p = 0; p < e.perms.size(); ++p) e.coeffs[p] = w * marg[p];
  return DensityMatrix::unchecked(e.dense());
}

// Two-copy operators c00 I + c01 F_B + c10 F_A + c11 F_A F_B where F_A swaps
// the two dA-dimensional registers and F_B the two dB-dimensional ones. The
// four products commute, so the spectrum is known in closed form.
struct TwoCopyOperator {
  Index dA = 1, dB = 1;
  std::array<std::array<double, 2>, 2> c{};  // c[a][b]: coefficient of F_A^a F_B^b

  static double multiplicity(Index d, int sign) { return double(d) * double(d + sign) / 2.0; }

  double eigenvalue(int sa, int sb) const { return c[0][0] + c[0][1] * sb + c[1][0] * sa + c[1][1] * sa * sb; }

  double trace_norm() const {
    double t = 0;
    for (int sa : {1, -1})
      for (int sb : {1, -1}) t += multiplicity(dA, sa) * multiplicity(dB, sb) * std::abs(eigenvalue(sa, sb));
    return t;
  }

  double trace() const {
    double t = 0;
    for (int sa : {1, -1})
      for (int sb : {1, -1}) t += multiplicity(dA, sa) * multiplicity(dB, sb) * eigenvalue(sa, sb);
    return t;
  }

  TwoCopyOperator operator-(const TwoCopyOperator& o) const {
    TwoCopyOperator r = *this;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) r.c[a][b] -= o.c[a][b];
    return r;
  }

  PermutationExpansion expansion() const {
    PermutationExpansion e = make_expansion(dA, 2, dB * dB);
    CMatrix fb = permutation_operator({1, 0}, dB, 2).matrix();
    CMatrix id = CMatrix::Identity(dB * dB, dB * dB);
    e.coeffs[0] = c[0][0] * id + c[0][1] * fb;
    e.coeffs[1] = c[1][0] * id + c[1][1] * fb;
    return e;
  }
};

inline TwoCopyOperator two_copy_haar_choi(Index dout, Index din) {
  const double g0 = double(dout) * dout, g1 = double(dout);
  const double det = g0 * g0 - g1 * g1;
  const double w0 = g0 / det, w1 = -g1 / det;  // inverse of [[g0,g1],[g1,g0]]
  const double n = 1.0 / (double(din) * din);
  TwoCopyOperator t{dout, din, {}};
  t.c[0][0] = w0 * n;
  t.c[0][1] = w1 * n;
  t.c[1][0] = w1 * n;
  t.c[1][1] = w0 * n;
  return t;
}

inline TwoCopyOperator two_copy_moment(Index dout, Index din) {
  const double b = binomial(dout * din + 1, 2);
  TwoCopyOperator t{dout, din, {}};
  t.c[0][0] = 0.5 / b;
  t.c[1][1] = 0.5 / b;
  return t;
}

inline TwoCopyOperator two_copy_permutation_approx(Index d) {
  TwoCopyOperator t{d, d, {}};
  t.c[0][0] = 1.0 / double(d * d * d * d);
  t.c[1][1] = t.c[0][0];
  return t;
}

// 1/2 || Haar isometry Choi - moment ||_1, dense when it fits, otherwise via
// the two-copy closed form.
inline double haar_moment_distance(int lambda, int s, int ell) {
  const Index dout = Index(1) << (lambda + s), din = Index(1) << lambda;
  if ((2 * lambda + s) * ell <= 10) {
    CMatrix h = haar_isometry_choi_expansion(lambda, s, ell).dense();
    CMatrix m = moment_choi_expansion(dout, din, ell).dense();
    return trace_distance(h, m);
  }
  require_size(ell == 2, "haar_moment_distance: only ell = 2 is available above 10 qubits");
  return 0.5 * (two_copy_haar_choi(dout, din) - two_copy_moment(dout, din)).trace_norm();
}

}  // namespace osep
