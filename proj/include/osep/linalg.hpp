#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <utility>
#include <vector>

#include "budget.hpp"
#include "seed.hpp"

namespace osep {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
using Index = Eigen::Index;

inline bool is_pow2(Index d) { return d > 0 && (d & (d - 1)) == 0; }

inline int log2_exact(Index d) {
  if (!is_pow2(d)) throw UsageError("dimension " + std::to_string(d) + " is not a power of two");
  int k = 0;
  while ((Index(1) << k) < d) ++k;
  return k;
}

inline Index ipow(Index base, int e) {
  Index r = 1;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

inline bool all_finite(const CMatrix& m) {
  for (Index i = 0; i < m.size(); ++i)
    if (!std::isfinite(m.data()[i].real()) || !std::isfinite(m.data()[i].imag())) return false;
  return true;
}

inline void check_dense_size(Index dim, const std::string& what) {
  require_size(dim <= (Index(1) << budget().max_dense_qubits),
               what + ": dense dimension " + std::to_string(dim) + " exceeds budget");
}

inline double hermitian_defect(const CMatrix& m) { return (m - m.adjoint()).cwiseAbs().maxCoeff(); }

inline double unitarity_residual(const CMatrix& u) {
  if (u.rows() != u.cols()) return INFINITY;
  CMatrix g = u.adjoint() * u;
  g.diagonal().array() -= 1.0;
  return g.norm();  // Frobenius dominates the operator norm
}

class UnitaryMatrix {
 public:
  UnitaryMatrix() = default;
  explicit UnitaryMatrix(CMatrix m, double tol = kUnitaryTol) : m_(std::move(m)) {
    if (m_.rows() != m_.cols()) throw NumericError("unitary must be square");
    if (!all_finite(m_)) throw NumericError("unitary has non-finite entries");
    double r = unitarity_residual(m_);
    if (r > tol) throw NumericError("matrix is not unitary (residual " + std::to_string(r) + ")");
  }
  static UnitaryMatrix unchecked(CMatrix m) {
    UnitaryMatrix u;
    u.m_ = std::move(m);
    return u;
  }
  static UnitaryMatrix identity(Index dim) { return unchecked(CMatrix::Identity(dim, dim)); }

  const CMatrix& matrix() const { return m_; }
  Index dim() const { return m_.rows(); }
  int qubits() const { return log2_exact(dim()); }
  UnitaryMatrix adjoint() const { return unchecked(m_.adjoint()); }
  friend UnitaryMatrix operator*(const UnitaryMatrix& a, const UnitaryMatrix& b) {
    return unchecked(a.m_ * b.m_);
  }

 private:
  CMatrix m_;
};

class DensityMatrix;

class PureState {
 public:
  PureState() = default;
  explicit PureState(CVector v, double tol = 1e-9) : v_(std::move(v)) {
    if (!all_finite(v_)) throw NumericError("state has non-finite amplitudes");
    if (std::abs(v_.norm() - 1.0) > tol) throw NumericError("state is not normalized");
  }
  static PureState unchecked(CVector v) {
    PureState s;
    s.v_ = std::move(v);
    return s;
  }
  static PureState basis(Index dim, Index idx) {
    CVector v = CVector::Zero(dim);
    v(idx) = 1.0;
    return unchecked(std::move(v));
  }
  const CVector& amplitudes() const { return v_; }
  Index dim() const { return v_.size(); }
  int qubits() const { return log2_exact(dim()); }
  CMatrix projector() const { return v_ * v_.adjoint(); }

 private:
  CVector v_;
};

class DensityMatrix {
 public:
  DensityMatrix() = default;
  explicit DensityMatrix(CMatrix m, double tol = 1e-9) : m_(std::move(m)) {
    if (m_.rows() != m_.cols()) throw NumericError("density matrix must be square");
    if (!all_finite(m_)) throw NumericError("density matrix has non-finite entries");
    if (hermitian_defect(m_) > tol) throw NumericError("density matrix is not Hermitian");
    m_ = (0.5 * (m_ + m_.adjoint())).eval();
    if (std::abs(m_.trace().real() - 1.0) > 1e-8) throw NumericError("density matrix trace is not 1");
    // the spectral check is skipped above 2^10 where it dominates runtime
    if (m_.rows() <= 1024) {
      Eigen::SelfAdjointEigenSolver<CMatrix> es(m_);
      const RVector& ev = es.eigenvalues();
      if (ev.minCoeff() < -tol) throw NumericError("density matrix has a negative eigenvalue");
      if (ev.minCoeff() < 0) {
        RVector clipped = ev.cwiseMax(0.0);
        m_ = es.eigenvectors() * clipped.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
      }
    }
  }
  static DensityMatrix unchecked(CMatrix m) {
    DensityMatrix d;
    d.m_ = std::move(m);
    return d;
  }
  static DensityMatrix from_pure(const PureState& s) { return unchecked(s.projector()); }
  static DensityMatrix maximally_mixed(Index dim) {
    return unchecked(CMatrix::Identity(dim, dim) / double(dim));
  }

  const CMatrix& matrix() const { return m_; }
  Index dim() const { return m_.rows(); }
  int qubits() const { return log2_exact(dim()); }

 private:
  CMatrix m_;
};

// Kronecker product, a's indices most significant.
inline CMatrix tensor(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline CVector tensor(const CVector& a, const CVector& b) {
  CVector out(a.size() * b.size());
  for (Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

// Partial trace over subsystems with arbitrary dimensions.
inline CMatrix partial_trace_dims(const CMatrix& rho, const std::vector<Index>& dims,
                                  const std::vector<int>& keep) {
  Index total = 1;
  for (Index d : dims) total *= d;
  require(rho.rows() == total && rho.cols() == total, "partial_trace: dimension mismatch");
  std::vector<bool> kept(dims.size(), false);
  for (int k : keep) {
    require(k >= 0 && k < int(dims.size()), "partial_trace: keep index out of range");
    kept[k] = true;
  }
  Index kdim = 1, tdim = 1;
  for (size_t i = 0; i < dims.size(); ++i) (kept[i] ? kdim : tdim) *= dims[i];

  std::vector<Index> kidx(total), tidx(total);
  for (Index x = 0; x < total; ++x) {
    Index rem = x, ki = 0, ti = 0, kmul = 1, tmul = 1;
    for (int i = int(dims.size()) - 1; i >= 0; --i) {
      Index digit = rem % dims[i];
      rem /= dims[i];
      if (kept[i]) {
        ki += digit * kmul;
        kmul *= dims[i];
      } else {
        ti += digit * tmul;
        tmul *= dims[i];
      }
    }
    kidx[x] = ki;
    tidx[x] = ti;
  }
  std::vector<std::vector<Index>> groups(tdim);
  for (Index x = 0; x < total; ++x) groups[tidx[x]].push_back(x);
  CMatrix out = CMatrix::Zero(kdim, kdim);
  for (const auto& g : groups)
    for (Index x : g)
      for (Index y : g) out(kidx[x], kidx[y]) += rho(x, y);
  return out;
}

inline DensityMatrix partial_trace(const DensityMatrix& rho, const std::vector<int>& qubit_dims,
                                   const std::vector<int>& keep) {
  int sum = std::accumulate(qubit_dims.begin(), qubit_dims.end(), 0);
  require(sum == rho.qubits(), "partial_trace: subsystem sizes do not sum to the register size");
  std::vector<Index> dims;
  for (int q : qubit_dims) dims.push_back(Index(1) << q);
  return DensityMatrix::unchecked(partial_trace_dims(rho.matrix(), dims, keep));
}

inline RVector singular_values(const CMatrix& a) {
  if (a.size() == 0) return RVector();
  return Eigen::BDCSVD<CMatrix>(a).singularValues();
}

inline RVector hermitian_eigenvalues(const CMatrix& h) {
  return Eigen::SelfAdjointEigenSolver<CMatrix>(h, Eigen::EigenvaluesOnly).eigenvalues();
}

// p in {1, 2, inf}; pass INFINITY for the operator norm.
inline double schatten_norm(const CMatrix& a, double p) {
  if (p == 2) return a.norm();
  RVector s = singular_values(a);
  if (s.size() == 0) return 0.0;
  if (p == 1) return s.sum();
  if (std::isinf(p)) return s.maxCoeff();
  throw UsageError("schatten_norm: p must be 1, 2 or infinity");
}

inline double trace_norm_hermitian(const CMatrix& h) { return hermitian_eigenvalues(h).cwiseAbs().sum(); }

inline double trace_distance(const CMatrix& rho, const CMatrix& sigma) {
  require(rho.rows() == sigma.rows() && rho.cols() == sigma.cols(), "trace_distance: dimension mismatch");
  return 0.5 * trace_norm_hermitian(rho - sigma);
}

inline double trace_distance(const DensityMatrix& rho, const DensityMatrix& sigma) {
  return trace_distance(rho.matrix(), sigma.matrix());
}

inline double pure_trace_distance(const CVector& a, const CVector& b) {
  double ov = std::norm(a.dot(b));
  return std::sqrt(std::max(0.0, 1.0 - ov));
}

inline PureState max_entangled(Index d) {
  require(d >= 1, "max_entangled: d must be positive");
  CVector v = CVector::Zero(d * d);
  for (Index x = 0; x < d; ++x) v(x * d + x) = 1.0 / std::sqrt(double(d));
  return PureState::unchecked(std::move(v));
}

// ---- permutations ----------------------------------------------------------

using Perm = std::vector<int>;

inline std::vector<Perm> all_permutations(int ell) {
  Perm p(ell);
  std::iota(p.begin(), p.end(), 0);
  std::vector<Perm> out;
  do out.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  return out;
}

inline Perm perm_inverse(const Perm& p) {
  Perm inv(p.size());
  for (size_t i = 0; i < p.size(); ++i) inv[p[i]] = int(i);
  return inv;
}

// (a*b)(i) = a(b(i))
inline Perm perm_compose(const Perm& a, const Perm& b) {
  Perm c(a.size());
  for (size_t i = 0; i < a.size(); ++i) c[i] = a[b[i]];
  return c;
}

inline int cycle_count(const Perm& p) {
  std::vector<bool> seen(p.size(), false);
  int cycles = 0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (seen[i]) continue;
    ++cycles;
    for (size_t j = i; !seen[j]; j = p[j]) seen[j] = true;
  }
  return cycles;
}

// map[x] = y with R_pi|x> = |y>; the entry in slot i moves to slot pi(i).
inline std::vector<Index> perm_index_map(const Perm& pi, Index d, int ell) {
  require(int(pi.size()) == ell, "permutation length must equal ell");
  Index total = ipow(d, ell);
  std::vector<Index> map(total);
  std::vector<Index> digits(ell), out(ell);
  for (Index x = 0; x < total; ++x) {
    Index rem = x;
    for (int j = ell - 1; j >= 0; --j) {
      digits[j] = rem % d;
      rem /= d;
    }
    for (int i = 0; i < ell; ++i) out[pi[i]] = digits[i];
    Index y = 0;
    for (int j = 0; j < ell; ++j) y = y * d + out[j];
    map[x] = y;
  }
  return map;
}

inline UnitaryMatrix permutation_operator(const Perm& pi, Index d, int ell) {
  auto map = perm_index_map(pi, d, ell);
  CMatrix r = CMatrix::Zero(Index(map.size()), Index(map.size()));
  for (Index x = 0; x < Index(map.size()); ++x) r(map[x], x) = 1.0;
  return UnitaryMatrix::unchecked(std::move(r));
}

inline void check_twirl_size(Index d, int ell, const std::string& what) {
  double lg = ell * std::log2(double(d));
  require_size(lg <= budget().max_twirl_log2 + 1e-9, what + ": d^ell exceeds the twirl budget");
}

inline double binomial(std::int64_t n, std::int64_t k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (std::int64_t i = 1; i <= k; ++i) r = r * double(n - k + i) / double(i);
  return r;
}

inline double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

inline CMatrix sym_projector(Index d, int ell) {
  check_twirl_size(d, ell, "sym_projector");
  Index total = ipow(d, ell);
  CMatrix p = CMatrix::Zero(total, total);
  auto perms = all_permutations(ell);
  double w = 1.0 / double(perms.size());
  for (const auto& pi : perms) {
    auto map = perm_index_map(pi, d, ell);
    for (Index x = 0; x < total; ++x) p(map[x], x) += w;
  }
  return p;
}

// ---- state-vector gate application ----------------------------------------

// Applies `gate` to the listed wires; wire 0 is the most significant qubit and
// wires[0] is the most significant qubit of the gate.
inline void apply_gate(CVector& state, int nqubits, const CMatrix& gate, const std::vector<int>& wires) {
  const int k = int(wires.size());
  const Index gd = Index(1) << k;
  require(gate.rows() == gd && gate.cols() == gd, "apply_gate: gate size does not match wire count");
  require(state.size() == (Index(1) << nqubits), "apply_gate: state size mismatch");
  std::vector<Index> offs(gd, 0);
  Index mask = 0;
  for (int j = 0; j < k; ++j) {
    require(wires[j] >= 0 && wires[j] < nqubits, "apply_gate: wire out of range");
    Index bit = Index(1) << (nqubits - 1 - wires[j]);
    require(!(mask & bit), "apply_gate: repeated wire");
    mask |= bit;
  }
  for (Index g = 0; g < gd; ++g)
    for (int j = 0; j < k; ++j)
      if ((g >> (k - 1 - j)) & 1) offs[g] |= Index(1) << (nqubits - 1 - wires[j]);
  CVector buf(gd), res(gd);
  for (Index base = 0; base < state.size(); ++base) {
    if (base & mask) continue;
    for (Index g = 0; g < gd; ++g) buf(g) = state(base + offs[g]);
    res.noalias() = gate * buf;
    for (Index g = 0; g < gd; ++g) state(base + offs[g]) = res(g);
  }
}

// Reorders qubits: output qubit i is input qubit order[i].
inline std::vector<Index> qubit_permutation_map(const std::vector<int>& order) {
  const int n = int(order.size());
  std::vector<Index> map(Index(1) << n);
  for (Index x = 0; x < Index(map.size()); ++x) {
    Index y = 0;
    for (int i = 0; i < n; ++i) {
      Index bit = (x >> (n - 1 - order[i])) & 1;
      y |= bit << (n - 1 - i);
    }
    map[x] = y;
  }
  return map;
}

inline CMatrix permute_qubits(const CMatrix& m, const std::vector<int>& order) {
  auto map = qubit_permutation_map(order);
  CMatrix out(m.rows(), m.cols());
  for (Index x = 0; x < m.rows(); ++x)
    for (Index y = 0; y < m.cols(); ++y) out(map[x], map[y]) = m(x, y);
  return out;
}

// ---- channels --------------------------------------------------------------

struct ChannelRep {
  UnitaryMatrix stinespring;
  int ancilla_in_qubits = 0;
  int traced_out_qubits = 0;

  Index input_dim() const { return stinespring.dim() >> ancilla_in_qubits; }
  Index output_dim() const { return stinespring.dim() >> traced_out_qubits; }

  static ChannelRep unitary(const UnitaryMatrix& u) { return {u, 0, 0}; }

  // (id_R (x) E)(|psi><psi|) for psi on R (x) input, R first.
  CMatrix apply_extended(const CVector& psi, Index ref_dim) const {
    const Index din = input_dim(), dan = Index(1) << ancilla_in_qubits;
    require(psi.size() == ref_dim * din, "channel input dimension mismatch");
    const CMatrix& w = stinespring.matrix();
    // columns of w with ancilla |0>: ancillas are the least significant input qubits
    CMatrix iso(w.rows(), din);
    for (Index x = 0; x < din; ++x) iso.col(x) = w.col(x * dan);
    Eigen::Map<const CMatrix> psim(psi.data(), din, ref_dim);  // column r holds slice for ref r
    CMatrix out_slices = iso * psim;                          // rows: out (x) traced
    const Index dout = output_dim(), dtr = Index(1) << traced_out_qubits;
    CMatrix rho = CMatrix::Zero(ref_dim * dout, ref_dim * dout);
    for (Index t = 0; t < dtr; ++t) {
      CVector v(ref_dim * dout);
      for (Index r = 0; r < ref_dim; ++r)
        for (Index o = 0; o < dout; ++o) v(r * dout + o) = out_slices(o * dtr + t, r);
      rho.noalias() += v * v.adjoint();
    }
    return rho;
  }
};

inline double diamond_distance_unitary(const UnitaryMatrix& u, const UnitaryMatrix& v) {
  require(u.dim() == v.dim(), "diamond_distance_unitary: dimension mismatch");
  CMatrix w = u.matrix().adjoint() * v.matrix();
  Eigen::ComplexEigenSolver<CMatrix> es(w, false);
  std::vector<double> ang;
  for (Index i = 0; i < es.eigenvalues().size(); ++i) ang.push_back(std::arg(es.eigenvalues()(i)));
  std::sort(ang.begin(), ang.end());
  double gap = 2 * M_PI - (ang.back() - ang.front());
  for (size_t i = 1; i < ang.size(); ++i) gap = std::max(gap, ang[i] - ang[i - 1]);
  if (gap <= M_PI) return 2.0;
  double arc = 2 * M_PI - gap;
  return 2.0 * std::sin(arc / 2);
}

inline double diamond_distance_lb(const ChannelRep& a, const ChannelRep& b, int trials, Engine& rng) {
  require(a.input_dim() == b.input_dim(), "diamond_distance_lb: input dimension mismatch");
  const Index din = a.input_dim();
  double best = 0.0;
  for (int t = 0; t < trials; ++t) {
    CVector psi(din * din);
    for (Index i = 0; i < psi.size(); ++i) psi(i) = complex_normal(rng);
    psi.normalize();
    double val = trace_norm_hermitian(a.apply_extended(psi, din) - b.apply_extended(psi, din));
    best = std::max(best, val);
  }
  return best;
}

inline double diamond_distance_choi_ub(const ChannelRep& a, const ChannelRep& b) {
  const Index din = a.input_dim();
  CVector omega = max_entangled(din).amplitudes();
  return double(din) * trace_norm_hermitian(a.apply_extended(omega, din) - b.apply_extended(omega, din));
}

// ---- spectral tools --------------------------------------------------------

inline CMatrix support_projector(const CMatrix& rho, double tau = kSupportTau) {
  require(tau > 0 && tau < 1, "support_projector: tau must lie in (0,1)");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(rho);
  const RVector& ev = es.eigenvalues();
  CMatrix q = CMatrix::Zero(rho.rows(), rho.cols());
  double top = ev.size() ? ev.maxCoeff() : 0.0;
  if (top <= 0) return q;
  for (Index i = 0; i < ev.size(); ++i)
    if (ev(i) > tau * top) q.noalias() += es.eigenvectors().col(i) * es.eigenvectors().col(i).adjoint();
  return q;
}

inline CMatrix psd_sqrt(const CMatrix& m) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m);
  RVector s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * s.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}

struct GentleResult {
  DensityMatrix residual;
  double distance = 0;
  double accept = 0;
};

inline GentleResult gentle_residual(const CMatrix& m, const DensityMatrix& rho) {
  require(m.rows() == rho.dim(), "gentle_residual: dimension mismatch");
  double p = (m * rho.matrix()).trace().real();
  if (p <= 1e-15) throw NumericError("gentle_residual: Tr[M rho] is zero");
  CMatrix s = psd_sqrt(m);
  CMatrix res = s * rho.matrix() * s / p;
  res = 0.5 * (res + res.adjoint());
  GentleResult out;
  out.residual = DensityMatrix::unchecked(res);
  out.distance = trace_distance(res, rho.matrix());
  out.accept = p;
  return out;
}

// ---- low-rank states -------------------------------------------------------

// rho = F F^dagger with the columns of F unnormalized pure components. Used
// for Choi states whose dense form would not fit the budget.
struct LowRankState {
  CMatrix factors;

  Index dim() const { return factors.rows(); }
  int qubits() const { return log2_exact(dim()); }
  double trace() const { return factors.squaredNorm(); }
  double expectation(const CVector& v) const { return (factors.adjoint() * v).squaredNorm(); }

  CMatrix dense() const {
    check_dense_size(dim(), "LowRankState::dense");
    return factors * factors.adjoint();
  }

  struct Spectrum {
    RVector values;   // descending
    CMatrix vectors;  // orthonormal columns
  };

  // Eigenpairs through the Gram matrix F^dagger F.
  Spectrum spectrum(double rel_tol = 1e-13) const {
    Spectrum sp;
    if (factors.cols() == 0) {
      sp.vectors = CMatrix::Zero(dim(), 0);
      return sp;
    }
    CMatrix g = factors.adjoint() * factors;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(g);
    const RVector& ev = es.eigenvalues();
    double top = ev.maxCoeff();
    std::vector<Index> keep;
    for (Index i = ev.size() - 1; i >= 0; --i)
      if (ev(i) > rel_tol * top && ev(i) > 0) keep.push_back(i);
    sp.values.resize(Index(keep.size()));
    sp.vectors.resize(dim(), Index(keep.size()));
    for (size_t j = 0; j < keep.size(); ++j) {
      sp.values(Index(j)) = ev(keep[j]);
      CVector v = factors * es.eigenvectors().col(keep[j]);
      sp.vectors.col(Index(j)) = v / v.norm();
    }
    return sp;
  }

  int rank(double rel_tol = 1e-10) const { return int(spectrum(rel_tol).values.size()); }
};

inline double trace_norm_difference(const LowRankState& a, const LowRankState& b) {
  require(a.dim() == b.dim(), "trace_norm_difference: dimension mismatch");
  CMatrix joint(a.dim(), a.factors.cols() + b.factors.cols());
  joint << a.factors, b.factors;
  if (joint.cols() == 0) return 0.0;
  Eigen::ColPivHouseholderQR<CMatrix> qr(joint);
  Index r = std::max<Index>(qr.rank(), 1);
  CMatrix q = qr.householderQ() * CMatrix::Identity(a.dim(), r);
  CMatrix fa = q.adjoint() * a.factors, fb = q.adjoint() * b.factors;
  CMatrix diff = fa * fa.adjoint() - fb * fb.adjoint();
  return trace_norm_hermitian(diff);
}

}  // namespace osep
