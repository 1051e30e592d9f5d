#pragma once

#include <functional>
#include <random>

#include "linalg.hpp"

namespace osep {

// Black-box access to a unitary channel: maps an input vector to its image.
using UnitaryAccess = std::function<CVector(const CVector&)>;

inline UnitaryAccess access_of(const UnitaryMatrix& u) {
  return [m = u.matrix()](const CVector& v) -> CVector { return m * v; };
}

enum class TomographyMode { Exact, Sampled };

inline std::string tomography_mode_name(TomographyMode m) { return m == TomographyMode::Exact ? "exact" : "sampled"; }

struct TomographyResult {
  UnitaryMatrix estimate;
  TomographyMode mode = TomographyMode::Exact;
  std::int64_t shots_used = 0;
  double claimed_eps = 0;
  double claimed_eta = 0;
};

// Polar factor U W^dagger of M = U S W^dagger.
inline UnitaryMatrix nearest_unitary(const CMatrix& m) {
  require(m.rows() == m.cols(), "nearest_unitary: square matrix required");
  Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const RVector& s = svd.singularValues();
  if (s.size() == 0 || s(s.size() - 1) <= 1e-12 * std::max(1.0, s(0)))
    throw NumericError("nearest_unitary: matrix is rank deficient");
  return UnitaryMatrix::unchecked(svd.matrixU() * svd.matrixV().adjoint());
}

// Global phase fixed so the first largest-modulus entry of column 0 is real positive.
inline UnitaryMatrix canonical_phase(const UnitaryMatrix& u) {
  const CMatrix& m = u.matrix();
  Index best = 0;
  double top = -1;
  for (Index i = 0; i < m.rows(); ++i) {
    double a = std::abs(m(i, 0));
    if (a > top * (1 + 1e-12) + 1e-300) {
      top = a;
      best = i;
    }
  }
  if (top <= 0) return u;
  cplx ph = m(best, 0) / top;
  return UnitaryMatrix::unchecked(m / ph);
}

inline TomographyResult process_tomography_exact(const UnitaryAccess& channel, Index dim) {
  check_dense_size(dim, "process_tomography_exact");
  CMatrix z(dim, dim);
  for (Index j = 0; j < dim; ++j) {
    CVector e = CVector::Zero(dim);
    e(j) = 1.0;
    CVector col = channel(e);
    require(col.size() == dim, "process_tomography_exact: channel changed the dimension");
    z.col(j) = col;
  }
  if ((z.adjoint() * z - CMatrix::Identity(dim, dim)).cwiseAbs().maxCoeff() > 1e-6)
    throw NumericError("process_tomography_exact: channel is not unitary");
  TomographyResult r{canonical_phase(nearest_unitary(z)), TomographyMode::Exact, std::int64_t(dim), 1e-9, 0.0};
  return r;
}

inline double kTomographyConstant = 25.0;

inline std::int64_t tomography_shots(Index dim, double eps, double eta) {
  require(eps > 0 && eps < 1 && eta > 0 && eta < 1, "tomography: eps and eta must lie in (0,1)");
  double d = double(dim);
  return std::int64_t(std::ceil(kTomographyConstant * d * d * d / (eps * eps) * std::log(d / eta)));
}

inline std::int64_t tomography_settings(Index dim) {
  const std::int64_t d2 = std::int64_t(dim) * std::int64_t(dim);
  return 1 + d2 * (d2 - 1);
}

// Finite-shot estimate of the Choi state from one computational-basis
// setting and two two-outcome settings per off-diagonal pair; the top
// eigenvector is reshaped and projected back to the unitaries.
inline TomographyResult process_tomography_shots(const UnitaryAccess& channel, Index dim, std::int64_t shots,
                                                 Engine& rng) {
  require(shots >= tomography_settings(dim), "tomography: fewer shots than measurement settings");
  const Index d2 = dim * dim;
  require_size(d2 <= 256, "tomography: sampled mode limited to D <= 16");
  // Choi vector z(a*D + x) = Z(a, x) / sqrt(D)
  CVector z(d2);
  for (Index x = 0; x < dim; ++x) {
    CVector e = CVector::Zero(dim);
    e(x) = 1.0;
    CVector col = channel(e);
    for (Index a = 0; a < dim; ++a) z(a * dim + x) = col(a) / std::sqrt(double(dim));
  }
  const std::int64_t settings = tomography_settings(dim);
  const std::int64_t per = shots / settings;
  std::int64_t extra = shots % settings;
  auto take = [&]() { return per + (extra-- > 0 ? 1 : 0); };

  CMatrix j = CMatrix::Zero(d2, d2);
  {
    std::int64_t left = take();
    double mass = 1.0;
    for (Index p = 0; p < d2; ++p) {
      double pr = std::norm(z(p));
      std::int64_t k = 0;
      if (p == d2 - 1) k = left;
      else if (left > 0 && mass > 0) k = std::binomial_distribution<std::int64_t>(left, std::clamp(pr / mass, 0.0, 1.0))(rng);
      j(p, p) = double(k);
      left -= k;
      mass -= pr;
    }
    double n = j.diagonal().real().sum();
    j.diagonal() /= std::max(n, 1.0);
  }
  for (Index p = 0; p < d2; ++p) {
    for (Index q = p + 1; q < d2; ++q) {
      cplx exact = z(p) * std::conj(z(q));
      double half = 0.5 * (std::norm(z(p)) + std::norm(z(q)));
      double pre = std::clamp(half + exact.real(), 0.0, 1.0);
      double pim = std::clamp(half - exact.imag(), 0.0, 1.0);
      std::int64_t nr = take(), ni = take();
      double fr = double(std::binomial_distribution<std::int64_t>(nr, pre)(rng)) / double(nr);
      double fi = double(std::binomial_distribution<std::int64_t>(ni, pim)(rng)) / double(ni);
      double hest = 0.5 * (j(p, p).real() + j(q, q).real());
      cplx est(fr - hest, hest - fi);
      j(p, q) = est;
      j(q, p) = std::conj(est);
    }
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> es(j);
  CVector top = es.eigenvectors().col(d2 - 1);
  CMatrix zm(dim, dim);
  for (Index a = 0; a < dim; ++a)
    for (Index x = 0; x < dim; ++x) zm(a, x) = top(a * dim + x) * std::sqrt(double(dim));
  TomographyResult r{canonical_phase(nearest_unitary(zm)), TomographyMode::Sampled, shots, 0.0, 0.0};
  return r;
}

inline TomographyResult process_tomography_sampled(const UnitaryAccess& channel, Index dim, double eps, double eta,
                                                   const SeedPath& seed) {
  Engine rng = make_engine(seed);
  std::int64_t shots = std::max(tomography_shots(dim, eps, eta), tomography_settings(dim));
  TomographyResult r = process_tomography_shots(channel, dim, shots, rng);
  r.claimed_eps = eps;
  r.claimed_eta = eta;
  return r;
}

}  // namespace osep
