#pragma once

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <string>
#include <vector>

#include "oracle.hpp"

namespace osep {

// Every classical diagonalization the distinguisher relies on goes through
// here and is logged; in the quantum setting these steps would be handed to
// an oracle for a hard unitary class.
struct BoundaryLog {
  std::vector<std::string> crossings;
  void record(std::string what) { crossings.push_back(std::move(what)); }
};

// ---- block encodings -------------------------------------------------------

// W|0,0> = sum_i sqrt(p_i)|e_i>|i> with p_0 the largest weight, completed to
// a unitary by one Householder reflection. System register first.
inline UnitaryMatrix purify(const DensityMatrix& rho) {
  const Index d = rho.dim();
  check_dense_size(d * d, "purify");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(rho.matrix());
  CVector w = CVector::Zero(d * d);
  for (Index i = 0; i < d; ++i) {
    double p = std::max(0.0, es.eigenvalues()(i));
    if (p == 0) continue;
    const Index j = d - 1 - i;  // eigenvalues come ascending
    for (Index a = 0; a < d; ++a) w(a * d + j) = std::sqrt(p) * es.eigenvectors()(a, i);
  }
  w.normalize();
  double phi = std::arg(w(0));
  cplx ph = std::polar(1.0, phi);
  CVector y = w / ph;  // y(0) real and nonnegative
  CVector u = -y;
  u(0) += 1.0;
  CMatrix h = CMatrix::Identity(d * d, d * d);
  double un = u.squaredNorm();
  if (un > 1e-28) h -= (2.0 / un) * u * u.adjoint();
  return UnitaryMatrix::unchecked(ph * h);
}

struct BlockEncoding {
  OracleCircuit circuit;  // oracle-free; ancillas are the leading wires
  int ancillas = 0;
  double alpha = 1.0;
  double eps = 0.0;
  Index block_dim = 1;

  UnitaryMatrix unitary() const { return circuit_unitary(circuit, {}); }
};

inline CMatrix swap_matrix() {
  CMatrix s = CMatrix::Zero(4, 4);
  s(0, 0) = s(3, 3) = 1.0;
  s(1, 2) = s(2, 1) = 1.0;
  return s;
}

// V = (W^dagger (x) I_C) SWAP_{A,C} (W (x) I_C); <0_{AB}|V|0_{AB}> = Tr_B[W|0><0|W^dagger].
inline BlockEncoding block_encode_density(const UnitaryMatrix& purifier, int n, int m) {
  require(purifier.dim() == (Index(1) << (n + m)), "block_encode_density: purifier must act on n + m qubits");
  const int total = 2 * n + m;
  require_size(total <= budget().max_total_qubits, "block_encode_density: register exceeds budget");
  BlockEncoding be;
  be.circuit.total_qubits = total;
  be.ancillas = n + m;
  be.block_dim = Index(1) << n;
  std::vector<int> ab(n + m);
  std::iota(ab.begin(), ab.end(), 0);
  be.circuit.steps.push_back(FixedGate{purifier.matrix(), ab});
  for (int i = 0; i < n; ++i) be.circuit.steps.push_back(FixedGate{swap_matrix(), {i, n + m + i}});
  be.circuit.steps.push_back(FixedGate{purifier.matrix().adjoint(), ab});
  return be;
}

// Unitary dilation of a contraction: one ancilla, M in the top-left block.
inline BlockEncoding dilation_block_encoding(const CMatrix& m, double alpha = 1.0, double eps = 0.0) {
  require(m.rows() == m.cols() && is_pow2(m.rows()), "dilation: square power-of-two block required");
  if (schatten_norm(m, INFINITY) > 1.0 + 1e-12) throw NumericError("dilation: block is not a contraction");
  const Index d = m.rows();
  CMatrix id = CMatrix::Identity(d, d);
  CMatrix v(2 * d, 2 * d);
  v.topLeftCorner(d, d) = m;
  v.topRightCorner(d, d) = psd_sqrt(id - m * m.adjoint());
  v.bottomLeftCorner(d, d) = psd_sqrt(id - m.adjoint() * m);
  v.bottomRightCorner(d, d) = -m.adjoint();
  BlockEncoding be;
  const int n = log2_exact(d);
  be.circuit.total_qubits = n + 1;
  std::vector<int> all(n + 1);
  std::iota(all.begin(), all.end(), 0);
  be.circuit.steps.push_back(FixedGate{v, all});
  be.ancillas = 1;
  be.alpha = alpha;
  be.eps = eps;
  be.block_dim = d;
  return be;
}

inline CMatrix extract_block(const BlockEncoding& be) {
  const Index dim = Index(1) << be.circuit.total_qubits;
  require(be.block_dim << be.ancillas == dim, "extract_block: ancilla count does not match the register");
  CMatrix block(be.block_dim, be.block_dim);
  for (Index j = 0; j < be.block_dim; ++j) {
    CVector v = CVector::Zero(dim);
    v(j) = 1.0;
    run_circuit(be.circuit, {}, v);
    block.col(j) = v.head(be.block_dim);
  }
  return be.alpha * block;
}

inline double verify_block_encoding(const BlockEncoding& be, const CMatrix& target) {
  require(target.rows() == be.block_dim && target.cols() == be.block_dim, "verify_block_encoding: dimension mismatch");
  return schatten_norm(target - extract_block(be), INFINITY);
}

// ---- threshold polynomial --------------------------------------------------

inline double erfc_inverse(double y) {
  require(y > 0 && y < 2, "erfc_inverse: argument must lie in (0,2)");
  double lo = -30, hi = 30;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (std::erfc(mid) > y) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

inline constexpr double kDegreeConstant = 8.0;

inline std::int64_t threshold_degree_bound(double a, double b, double eta) {
  return std::int64_t(std::ceil(kDegreeConstant / (b - a) * std::log(4.0 / eta)));
}

// Even polynomial in Chebyshev form: p = (g_trunc + delta) / (1 + 2 delta)
// with g(x) = erfc(kappa(theta - x))/2 + erfc(kappa(theta + x))/2.
struct ThresholdPoly {
  std::vector<double> coefficients;
  std::int64_t degree = 0;
  double a = 0, b = 1, eta = 0.1;
  double kappa = 0, theta = 0, delta = 0;

  double operator()(double x) const {
    double b1 = 0, b2 = 0;
    for (std::int64_t j = degree; j >= 1; --j) {
      double t = 2 * x * b1 - b2 + coefficients[size_t(j)];
      b2 = b1;
      b1 = t;
    }
    double g = x * b1 - b2 + coefficients[0];
    return (g + delta) / (1 + 2 * delta);
  }
};

namespace detail {

inline std::vector<double> chebyshev_coefficients(const std::function<double(double)>& f, Index n) {
  // DCT-I through a real FFT of the even extension
  std::vector<double> ext(size_t(2 * n));
  for (Index k = 0; k <= n; ++k) ext[size_t(k)] = f(std::cos(M_PI * double(k) / double(n)));
  for (Index k = 1; k < n; ++k) ext[size_t(2 * n - k)] = ext[size_t(k)];
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, ext);
  std::vector<double> c(size_t(n) + 1);
  for (Index j = 0; j <= n; ++j) c[size_t(j)] = spec[size_t(j)].real() / double(n);
  c[0] *= 0.5;
  c[size_t(n)] *= 0.5;
  return c;
}

}  // namespace detail

inline ThresholdPoly threshold_poly(double a, double b, double eta) {
  require(a >= 0 && a < b && b <= 1, "threshold_poly: need 0 <= a < b <= 1");
  require(eta > 0 && eta < 0.5, "threshold_poly: eta must lie in (0, 1/2)");
  require(b - a >= 1e-12, "threshold_poly: degenerate gap");
  const std::int64_t bound = threshold_degree_bound(a, b, eta);
  ThresholdPoly p;
  p.a = a;
  p.b = b;
  p.eta = eta;
  p.theta = 0.5 * (a + b);
  p.kappa = erfc_inverse(eta / 2) / (0.5 * (b - a));
  auto g = [&](double x) {
    return 0.5 * std::erfc(p.kappa * (p.theta - x)) + 0.5 * std::erfc(p.kappa * (p.theta + x));
  };
  // a tight truncation keeps p within 1e-6 of 1 far above the threshold; the
  // looser one is the fallback when the degree budget is short
  for (double delta : {1e-7, eta / 8}) {
    double est = p.kappa * std::sqrt(2 * std::log(2 / delta)) * 1.3 + 16;
    require_size(est <= double(budget().max_poly_degree), "threshold_poly: degree exceeds budget");
    Index n = 64;
    while (double(n) < 2 * est) n *= 2;
    std::vector<double> c;
    for (;;) {
      c = detail::chebyshev_coefficients(g, n);
      double far = 0;
      for (Index j = 3 * n / 4; j <= n; ++j) far += std::abs(c[size_t(j)]);
      if (far <= 1e-3 * delta || n >= 4 * budget().max_poly_degree) break;
      n *= 2;
    }
    double tail = 0;
    Index deg = n;
    for (Index j = n; j >= 1; --j) {
      if (tail + std::abs(c[size_t(j)]) > 0.5 * delta) break;
      tail += std::abs(c[size_t(j)]);
      deg = j - 1;
    }
    if (deg % 2 == 1) ++deg;  // even function: odd coefficients vanish anyway
    if (deg > bound && delta != eta / 8) continue;
    c.resize(size_t(deg) + 1);
    for (Index j = 1; j <= deg; j += 2) c[size_t(j)] = 0.0;
    p.coefficients = std::move(c);
    p.degree = deg;
    p.delta = delta;
    return p;
  }
  return p;  // unreachable
}

// ---- singular-value discrimination -----------------------------------------

inline CMatrix sv_projector(const CMatrix& m, double theta) {
  require(theta >= 0, "sv_projector: theta must be nonnegative");
  Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeFullV);
  const RVector& s = svd.singularValues();
  const CMatrix& v = svd.matrixV();
  CMatrix p = CMatrix::Zero(m.cols(), m.cols());
  for (Index i = 0; i < v.cols(); ++i) {
    double si = i < s.size() ? s(i) : 0.0;
    if (si >= theta && si > 0) p.noalias() += v.col(i) * v.col(i).adjoint();
  }
  return p;
}

enum class Backend { Ideal, Polynomial };

inline std::string backend_name(Backend b) { return b == Backend::Ideal ? "ideal" : "poly"; }

struct Decision {
  bool bit = false;
  double acceptance = 0;
  std::int64_t degree = 0;
  std::int64_t degree_bound = 0;
};

// Acceptance weight of one singular value.
struct AcceptRule {
  Backend backend = Backend::Ideal;
  double theta = 0;
  const ThresholdPoly* poly = nullptr;
  double operator()(double sigma) const {
    if (backend == Backend::Ideal) return sigma >= theta ? 1.0 : 0.0;
    return (*poly)(sigma);
  }
};

inline Decision svd_discriminate(const BlockEncoding& be, const DensityMatrix& xi, double a, double b, double eta,
                                 Backend backend, Engine& rng, BoundaryLog* log = nullptr) {
  require(xi.dim() == be.block_dim, "svd_discriminate: input dimension mismatch");
  CMatrix m = extract_block(be);
  if (log) log->record("svd(dim=" + std::to_string(m.rows()) + ")");
  Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeFullV);
  const RVector& s = svd.singularValues();
  const CMatrix& v = svd.matrixV();
  Decision d;
  d.degree_bound = threshold_degree_bound(a, b, eta);
  ThresholdPoly poly;
  if (backend == Backend::Polynomial) {
    poly = threshold_poly(a, b, eta);
    d.degree = poly.degree;
  }
  AcceptRule rule{backend, 0.5 * (a + b), &poly};
  double acc = 0;
  for (Index i = 0; i < v.cols(); ++i) {
    double si = i < s.size() ? s(i) : 0.0;
    acc += rule(si) * v.col(i).dot(xi.matrix() * v.col(i)).real();
  }
  d.acceptance = std::clamp(acc, 0.0, 1.0);
  d.bit = bernoulli(rng, d.acceptance);
  return d;
}

}  // namespace osep
