#pragma once

#include <chrono>
#include <map>

#include "adversary.hpp"

namespace osep {

struct LemmaCheckResult {
  std::string lemma_id;
  std::map<std::string, double> parameters;
  double lhs = 0;
  double bound = 0;
  double ratio = 0;
  double calibration = 1;
  bool pass = false;
  std::string seed;
  std::int64_t runtime_ms = 0;
  std::map<std::string, double> extras;
};

class Params {
 public:
  Params() = default;
  explicit Params(std::map<std::string, double> m) : m_(std::move(m)) {}

  double get(const std::string& k, double def) {
    auto it = m_.find(k);
    if (it == m_.end()) {
      used_[k] = def;
      return def;
    }
    used_[k] = it->second;
    return it->second;
  }
  int geti(const std::string& k, int def) {
    double v = get(k, def);
    if (v != std::floor(v)) throw UsageError("parameter '" + k + "' must be an integer");
    used_[k] = v;
    return int(v);
  }
  bool has(const std::string& k) const { return m_.count(k) > 0; }
  const std::map<std::string, double>& used() const { return used_; }
  const std::map<std::string, double>& given() const { return m_; }

 private:
  std::map<std::string, double> m_;
  std::map<std::string, double> used_;
};

namespace detail {

// Keeps the instance with the largest lhs/bound ratio.
struct Worst {
  double lhs = 0, bound = 0, ratio = -1;
  int violations = 0;
  void add(double l, double b, double tol = 1e-12) {
    double r = b > 0 ? l / b : (l > tol ? INFINITY : 0.0);
    if (l > b + tol) ++violations;
    if (r > ratio) {
      ratio = r;
      lhs = l;
      bound = b;
    }
  }
};

inline LemmaCheckResult finish(LemmaCheckResult r, double lhs, double bound, double c) {
  r.lhs = lhs;
  r.bound = bound;
  r.ratio = bound > 0 ? lhs / bound : (lhs > 0 ? INFINITY : 0.0);
  r.calibration = c;
  r.pass = r.ratio <= c;
  return r;
}

inline CMatrix ginibre(Index rows, Index cols, Engine& g) {
  CMatrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = complex_normal(g);
  return m;
}

inline CMatrix expi_hermitian(const CMatrix& h, double t) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  CVector ph(h.rows());
  for (Index i = 0; i < ph.size(); ++i) ph(i) = std::polar(1.0, t * es.eigenvalues()(i));
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

// V close to or far from U, so both the local and global regimes get probed.
inline CMatrix nearby_unitary(const CMatrix& u, Engine& g, int trial) {
  if (trial % 2 == 1) return sample_haar_unitary(u.rows(), g).matrix();
  double t = std::pow(10.0, -3.0 * uniform01(g));
  return u * expi_hermitian(random_hermitian(u.rows(), g), t);
}

inline CMatrix random_isometry(Index out, Index in, Engine& g) {
  return sample_haar_unitary(out, g).matrix().leftCols(in);
}

}  // namespace detail

// ---- core-linalg -----------------------------------------------------------

inline LemmaCheckResult check_gentle(Params& p, const SeedPath& seed) {
  const int d = p.geti("d", 4), trials = p.geti("trials", 50);
  Engine g = make_engine(seed.child("gentle", 0));
  detail::Worst w;
  for (int t = 0; t < trials; ++t) {
    DensityMatrix rho = random_density(d, d, g);
    PureState v = sample_haar_state(d, g);
    CMatrix m = CMatrix::Identity(d, d) - v.projector();
    GentleResult r = gentle_residual(m, rho);
    w.add(r.distance, std::sqrt(std::max(0.0, 1.0 - r.accept)));
  }
  LemmaCheckResult r;
  r.extras["violations"] = w.violations;
  return detail::finish(r, w.lhs, w.bound, 1.0);
}

inline LemmaCheckResult check_holder(Params& p, const SeedPath& seed) {
  const int d = p.geti("d", 4), trials = p.geti("trials", 100);
  Engine g = make_engine(seed.child("holder", 0));
  detail::Worst w;
  for (int t = 0; t < trials; ++t) {
    CMatrix a = detail::ginibre(d, d, g), b = detail::ginibre(d, d, g);
    w.add(schatten_norm(a * b, 1), schatten_norm(a, 1) * schatten_norm(b, INFINITY));
  }
  LemmaCheckResult r;
  r.extras["violations"] = w.violations;
  return detail::finish(r, w.lhs, w.bound, 1.0);
}

// f(U) = |<0|U G U|0>|^2 makes two queries, so it is 4-Lipschitz.
inline LemmaCheckResult check_lipschitz_frobenius(Params& p, const SeedPath& seed) {
  const int d = p.geti("d", 4), trials = p.geti("trials", 100);
  const int queries = 2;
  Engine g = make_engine(seed.child("lipschitz", 0));
  CMatrix gate = sample_haar_unitary(d, g).matrix();
  auto f = [&](const CMatrix& u) { return std::norm((u * gate * u)(0, 0)); };
  detail::Worst w;
  for (int t = 0; t < trials; ++t) {
    CMatrix u = sample_haar_unitary(d, g).matrix();
    CMatrix v = detail::nearby_unitary(u, g, t);
    w.add(std::abs(f(u) - f(v)), 2.0 * queries * (u - v).norm());
  }
  LemmaCheckResult r;
  r.parameters["T"] = queries;
  r.extras["violations"] = w.violations;
  return detail::finish(r, w.lhs, w.bound, 1.0);
}

inline LemmaCheckResult check_state_perturbation(Params& p, const SeedPath& seed) {
  const int d = p.geti("d", 8), trials = p.geti("trials", 100);
  Engine g = make_engine(seed.child("perturb", 0));
  detail::Worst w;
  for (int t = 0; t < trials; ++t) {
    CMatrix u = sample_haar_unitary(d, g).matrix();
    CMatrix v = detail::nearby_unitary(u, g, t);
    CVector psi = sample_haar_state(d, g).amplitudes();
    CVector a = u * psi, b = v * psi;
    w.add((a * a.adjoint() - b * b.adjoint()).norm(), 2.0 * (u - v).norm());
  }
  LemmaCheckResult r;
  r.extras["violations"] = w.violations;
  return detail::finish(r, w.lhs, w.bound, 1.0);
}

// ---- haar-measure ----------------------------------------------------------

inline double state_moment_gap(int d, int samples, const SeedPath& seed) {
  const int ell = 2;
  check_twirl_size(d, ell, "state moment check");
  CMatrix acc = CMatrix::Zero(Index(d) * d, Index(d) * d);
  for (int i = 0; i < samples; ++i) {
    CVector psi = sample_haar_state(d, seed.child("d", d).child("moment", i)).amplitudes();
    CVector v = tensor(psi, psi);
    acc.noalias() += v * v.adjoint();
  }
  acc /= double(samples);
  return trace_distance(acc, state_moment_exact(d, ell).matrix());
}

// Without an explicit d both d = 2 and d = 4 are run and the worse one kept.
inline LemmaCheckResult check_state_moment(Params& p, const SeedPath& seed) {
  const int samples = p.geti("samples", 100000);
  const double tol = p.get("tolerance", 0.02);
  std::vector<int> dims = p.has("d") ? std::vector<int>{p.geti("d", 2)} : std::vector<int>{2, 4};
  LemmaCheckResult r;
  double worst = 0;
  for (int d : dims) {
    double gap = state_moment_gap(d, samples, seed);
    r.extras["distance_d" + std::to_string(d)] = gap;
    worst = std::max(worst, gap);
  }
  return detail::finish(r, worst, tol, 1.0);
}

// Rate checks: ratio lhs/rate at the base point and after one doubling.
// Both ratios must stay below C and the distance itself must not grow.
inline LemmaCheckResult rate_check(double lhs, double rate, double lhs2, double rate2, double c) {
  LemmaCheckResult r = detail::finish({}, lhs, rate, c);
  double ratio2 = lhs2 / rate2;
  r.extras["lhs_doubled"] = lhs2;
  r.extras["ratio_doubled"] = ratio2;
  r.pass = r.ratio <= c && ratio2 <= c && lhs2 <= lhs + 1e-12;
  return r;
}

inline int lambda_param(Params& p, int def) {
  if (p.has("d")) return log2_exact(Index(p.geti("d", 1 << def)));
  return p.geti("lambda", def);
}

inline LemmaCheckResult check_haar_choi_rate(Params& p, const SeedPath&) {
  const int lambda = lambda_param(p, 2), ell = p.geti("ell", 2);
  const double c = p.get("C", 4.0);
  double l1 = haar_moment_distance(lambda, 0, ell), l2 = haar_moment_distance(lambda + 1, 0, ell);
  LemmaCheckResult r = rate_check(l1, double(ell * ell) / std::ldexp(1.0, lambda), l2,
                                  double(ell * ell) / std::ldexp(1.0, lambda + 1), c);
  r.parameters["lambda"] = lambda;
  return r;
}

inline LemmaCheckResult check_isometry_choi_rate(Params& p, const SeedPath&) {
  const int lambda = p.geti("lambda", 1), s = p.geti("s", 1), ell = p.geti("ell", 2);
  const double c = p.get("C", 4.0);
  double l1 = haar_moment_distance(lambda, s, ell), l2 = haar_moment_distance(lambda, s + 1, ell);
  return rate_check(l1, double(ell * ell) / std::ldexp(1.0, lambda + s), l2,
                    double(ell * ell) / std::ldexp(1.0, lambda + s + 1), c);
}

// Permutation approximation of the twirl, on the Choi input (closed form in
// both n and 2n) and on a random state with a one-qubit bystander.
inline LemmaCheckResult check_twirl_approx_rate(Params& p, const SeedPath& seed) {
  const int n = p.geti("n", 2), ell = p.geti("ell", 2);
  const double c = p.get("C", 4.0);
  auto choi_gap = [&](int nn) {
    const Index d = Index(1) << nn;
    if (ell == 2) return 0.5 * (two_copy_haar_choi(d, d) - two_copy_permutation_approx(d)).trace_norm();
    DensityMatrix omega = DensityMatrix::from_pure(max_entangled(ipow(d, ell)));
    return trace_distance(twirl_exact(omega, d, ell), twirl_permutation_approx(omega, nn, ell));
  };
  LemmaCheckResult r = rate_check(choi_gap(n), double(ell * ell) / std::ldexp(1.0, n), choi_gap(n + 1),
                                  double(ell * ell) / std::ldexp(1.0, n + 1), c);
  Engine g = make_engine(seed.child("twirl_approx", 0));
  const Index da = ipow(Index(1) << n, ell);
  DensityMatrix rho = random_density(da * 2, da * 2, g);
  double rnd = trace_distance(twirl_exact(rho, Index(1) << n, ell), twirl_permutation_approx(rho, n, ell));
  r.extras["random_state_ratio"] = rnd / (double(ell * ell) / std::ldexp(1.0, n));
  r.pass = r.pass && r.extras["random_state_ratio"] <= c;
  return r;
}

// Tail of f(U) = |<0|U|0>|^2 (2-Lipschitz) against the concentration bound.
inline LemmaCheckResult check_concentration(Params& p, const SeedPath& seed) {
  const int d = p.geti("d", 8), draws = p.geti("draws", 500);
  const double lip = 2.0, slack = p.get("slack", 10.0);
  std::vector<double> f;
  for (int i = 0; i < draws; ++i) f.push_back(std::norm(sample_haar_unitary(d, seed.child("draw", i)).matrix()(0, 0)));
  const double mean = 1.0 / d;  // E|U_00|^2
  double worst = 0, wl = 0, wb = 1;
  for (double delta : {0.05, 0.1, 0.15, 0.2, 0.3}) {
    double freq = 0;
    for (double x : f) freq += x >= mean + delta;
    freq /= draws;
    double bound = std::exp(-(d - 2) * delta * delta / (24 * lip * lip));
    if (freq / bound > worst) {
      worst = freq / bound;
      wl = freq;
      wb = bound;
    }
  }
  LemmaCheckResult r;
  r.extras["lipschitz"] = lip;
  return detail::finish(r, wl, wb, slack);
}

// ---- oracle-family ---------------------------------------------------------

// Distance of the shrunk Choi vector, compared against 2^{(1-n)/2} and
// cross-checked through Tr[I - S] = 2^{n+1}.
inline LemmaCheckResult check_choi_shrinkage(Params& p, const SeedPath& seed) {
  std::vector<int> ns;
  if (p.has("n")) ns.push_back(p.geti("n", 3));
  else ns = {1, 2, 3, 4, 5};
  SwapOracleFamily fam(seed);
  LemmaCheckResult r;
  double worst = 0;
  bool trace_ok = true;
  for (int n : ns) {
    UnitaryMatrix s = swap_oracle_dense(fam, n);
    const double dim = double(s.dim());
    CMatrix gap = CMatrix::Identity(s.dim(), s.dim()) - s.matrix();
    double direct = gap.norm() / std::sqrt(dim);
    double trace = gap.trace().real();
    double from_trace = std::sqrt(2.0 * trace / dim);
    double expect = std::pow(2.0, (1.0 - n) / 2.0);
    r.extras["value_n" + std::to_string(n)] = direct;
    worst = std::max({worst, std::abs(direct - expect), std::abs(from_trace - expect)});
    trace_ok = trace_ok && std::abs(trace - std::ldexp(1.0, n + 1)) <= 1e-9;
  }
  // lhs is the norm at the largest n; every n must match 2^{(1-n)/2}
  const int top = ns.back();
  r.extras["max_deviation"] = worst;
  r = detail::finish(r, r.extras["value_n" + std::to_string(top)], std::pow(2.0, (1.0 - top) / 2.0) + 1e-9, 1.0);
  r.pass = r.pass && trace_ok && worst <= 1e-9;
  return r;
}

// |psi> = (U (O (x) I) V (x) I_A')|Omega>_{AA'}|0^{c'}>_B against the same
// without the oracle; the oracle acts on the leading wires of AB.
inline double oracle_insertion_distance(const CMatrix& u, const CMatrix& oracle, const CMatrix& v, int lambda,
                                        int cprime, bool b_first = false) {
  const Index da = Index(1) << lambda, db = Index(1) << cprime, dw = da * db;
  const Index rest = dw / oracle.rows();
  CMatrix w1 = u * tensor(oracle, CMatrix::Identity(rest, rest)) * v;
  CMatrix w0 = u * v;
  // columns of W with B = 0 give the AB state for each A' index
  CVector psi(dw * da), phi(dw * da);
  for (Index x = 0; x < da; ++x)
    for (Index y = 0; y < dw; ++y) {
      const Index col = b_first ? x : x * db;
      psi(y * da + x) = w1(y, col) / std::sqrt(double(da));
      phi(y * da + x) = w0(y, col) / std::sqrt(double(da));
    }
  return pure_trace_distance(psi, phi);
}

inline LemmaCheckResult check_swap_insertion(Params& p, const SeedPath& seed) {
  const int trials = p.geti("trials", 20);
  const double c = p.get("C", 4.0);
  Engine g = make_engine(seed.child("insertion", 0));
  SwapOracleFamily fam(seed.child("family", 0));
  detail::Worst w;
  int count = 0;
  for (int lambda = 1; lambda <= 4; ++lambda)
    for (int cp = 0; cp <= 2; ++cp)
      for (int n = 1; n <= 4; ++n) {
        if (2 * n + 1 > lambda + cp) continue;
        CMatrix s = swap_oracle_dense(fam, n).matrix();
        for (int t = 0; t < trials; ++t) {
          const Index dw = Index(1) << (lambda + cp);
          CMatrix u = sample_haar_unitary(dw, g).matrix(), v = sample_haar_unitary(dw, g).matrix();
          w.add(oracle_insertion_distance(u, s, v, lambda, cp), std::pow(2.0, cp / 2.0) / std::pow(2.0, n / 2.0));
          ++count;
        }
      }
  LemmaCheckResult r;
  r.extras["instances"] = count;
  return detail::finish(r, w.lhs, w.bound, c);
}

inline LemmaCheckResult check_hri_insertion(Params& p, const SeedPath& seed) {
  const int trials = p.geti("trials", 20);
  const double c = p.get("C", 4.0);
  Engine g = make_engine(seed.child("hri_insertion", 0));
  StretchFunction t{"identity"};
  HriOracleFamily fam(seed.child("family", 0), t);
  detail::Worst w;
  int count = 0;
  for (int lambda = 1; lambda <= 4; ++lambda)
    for (int cp = 0; cp <= 3; ++cp)
      for (int n = 1; n <= 3; ++n) {
        if (n + t(n) + 1 > lambda + cp || lambda + cp > 7) continue;
        for (int k = 0; k < trials; ++k) {
          CMatrix h = fam.oracle(n, Bitstring(k) % (Bitstring(1) << n)).matrix();
          const Index dw = Index(1) << (lambda + cp);
          CMatrix u = sample_haar_unitary(dw, g).matrix(), v = sample_haar_unitary(dw, g).matrix();
          w.add(oracle_insertion_distance(u, h, v, lambda, cp, true), std::pow(2.0, cp - t(n) / 2.0));
          ++count;
        }
      }
  LemmaCheckResult r;
  r.extras["instances"] = count;
  return detail::finish(r, w.lhs, w.bound, c);
}

inline LemmaCheckResult check_hri_trace(Params& p, const SeedPath& seed) {
  const int n = p.geti("n", 2), t = p.geti("t", 2);
  UnitaryMatrix u = sample_haar_unitary(Index(1) << (n + t), seed.child("hri_trace", 0));
  CMatrix h = hri_unitary(t, n, u).matrix();
  const double dim = double(h.rows());
  cplx tr = h.trace();
  double direct = std::sqrt(std::max(0.0, 1.0 - std::norm(tr) / (dim * dim)));
  double closed = std::sqrt(1.0 - std::pow(1.0 - std::ldexp(1.0, -t), 2));
  LemmaCheckResult r;
  r.extras["trace"] = tr.real();
  r.extras["trace_expected"] = std::ldexp(1.0, n + t + 1) - std::ldexp(1.0, n + 1);
  r.extras["distance"] = direct;
  r.extras["closed_form"] = closed;
  r = detail::finish(r, std::abs(direct - closed), 1e-9, 1.0);
  r.pass = r.pass && std::abs(tr.real() - r.extras["trace_expected"]) <= 1e-9 && std::abs(tr.imag()) <= 1e-9;
  return r;
}

// ---- PRFSG security game ---------------------------------------------------

struct GameOutcome {
  int lambda = 0, draws = 0, queries = 2;
  std::vector<double> advantages;
  double mean = 0;
  double exceed_threshold = 0;
  double exceed_frequency = 0;
  double lemma45_bound = 0;
  double c = 0.25;
};

// Guess-key distinguisher: query the challenge oracle on x = 0, query the
// swap oracle on (k' = 0, x = 0), swap-test the two states.
inline GameOutcome prfsg_game(int lambda, int draws, const SeedPath& seed, double c = 0.25) {
  require(lambda >= 1 && draws >= 1, "prfsg game: invalid parameters");
  GameOutcome out;
  out.lambda = lambda;
  out.draws = draws;
  out.c = c;
  const Bitstring nkeys = Bitstring(1) << lambda;
  const double ideal = 0.5 * (1.0 + std::ldexp(1.0, -2 * lambda));
  for (int i = 0; i < draws; ++i) {
    SwapOracleFamily fam(seed.child("draw", i));
    CVector ref = prfsg_eval(fam, lambda, 0, 0).amplitudes();
    double keyed = 0;
    for (Bitstring k = 0; k < nkeys; ++k) {
      CVector a = prfsg_eval(fam, lambda, k, 0).amplitudes();
      keyed += 0.5 * (1.0 + std::norm(a.dot(ref)));
    }
    keyed /= double(nkeys);
    out.advantages.push_back(keyed - ideal);
  }
  for (double a : out.advantages) out.mean += a;
  out.mean /= draws;
  out.exceed_threshold = std::pow(2.0, -lambda / 2.0);
  for (double a : out.advantages) out.exceed_frequency += std::abs(a) >= out.exceed_threshold;
  out.exceed_frequency /= draws;
  const double t2 = double(out.queries * out.queries);
  const double gap = out.exceed_threshold - c * t2 / std::ldexp(1.0, lambda);
  out.lemma45_bound =
      gap >= 0 ? std::min(1.0, 2.0 * std::exp(-(std::ldexp(1.0, 2 * lambda) - 2) * gap * gap / (6144.0 * t2))) : 1.0;
  return out;
}

inline LemmaCheckResult check_game_mean(Params& p, const SeedPath& seed) {
  const int lambda = p.geti("lambda", 2), draws = p.geti("draws", 200);
  const double c = p.get("C", 0.25);
  GameOutcome g = prfsg_game(lambda, draws, seed, c);
  LemmaCheckResult r;
  r.parameters["T"] = g.queries;
  r.extras["mean_advantage"] = g.mean;
  return detail::finish(r, std::abs(g.mean), g.queries * g.queries / std::ldexp(1.0, lambda), c);
}

inline LemmaCheckResult check_game_tail(Params& p, const SeedPath& seed) {
  const int lambda = p.geti("lambda", 2), draws = p.geti("draws", 200);
  const double c = p.get("C", 0.25), slack = p.get("slack", 10.0);
  GameOutcome g = prfsg_game(lambda, draws, seed, c);
  LemmaCheckResult r;
  r.parameters["T"] = g.queries;
  r.extras["threshold"] = g.exceed_threshold;
  r.extras["mean_advantage"] = g.mean;
  return detail::finish(r, g.exceed_frequency, g.lemma45_bound, slack);
}

// Two-query procedure over S~_n(U): |+^n>|0>|0^n> -> S~ -> G -> S~ -> P(0...0).
inline double lipschitz_procedure(const std::vector<CMatrix>& us, const CMatrix& gate, int n) {
  const int nq = 2 * n + 1;
  CVector v = CVector::Zero(Index(1) << nq);
  for (Index m = 0; m < (Index(1) << n); ++m) v(m << (n + 1)) = 1.0 / std::sqrt(double(Index(1) << n));
  std::vector<int> control(n), target(n + 1);
  std::iota(control.begin(), control.end(), 0);
  std::iota(target.begin(), target.end(), n);
  auto oracle = [&]() {
    for_each_controlled_block(v, nq, control, target,
                              [&](Bitstring m, CVector& sub) { swap_block(sub, us[size_t(m)].col(0)); });
  };
  oracle();
  v = gate * v;
  oracle();
  return std::norm(v(0));
}

inline LemmaCheckResult check_lipschitz_l2sum(Params& p, const SeedPath& seed) {
  const int n = p.geti("n", 2), trials = p.geti("trials", 100), queries = 2;
  Engine g = make_engine(seed.child("l2sum", 0));
  const Index d = Index(1) << n;
  CMatrix gate = sample_haar_unitary(Index(1) << (2 * n + 1), g).matrix();
  detail::Worst w;
  for (int t = 0; t < trials; ++t) {
    std::vector<CMatrix> us, vs;
    double sum = 0;
    for (Index m = 0; m < d; ++m) {
      us.push_back(sample_haar_unitary(d, g).matrix());
      vs.push_back(detail::nearby_unitary(us.back(), g, t));
      sum += (us.back() - vs.back()).squaredNorm();
    }
    w.add(std::abs(lipschitz_procedure(us, gate, n) - lipschitz_procedure(vs, gate, n)), 8.0 * queries * std::sqrt(sum));
  }
  LemmaCheckResult r;
  r.parameters["T"] = queries;
  r.extras["violations"] = w.violations;
  return detail::finish(r, w.lhs, w.bound, 1.0);
}

// ---- blockenc-qsvt ---------------------------------------------------------

// Block rho + E with ||E||_inf = 0.9 * 2^-p, embedded by unitary dilation.
inline BlockEncoding perturbed_encoding(const DensityMatrix& rho, int p, Engine& g) {
  CMatrix e = detail::ginibre(rho.dim(), rho.dim(), g);
  e *= 0.9 * std::ldexp(1.0, -p) / schatten_norm(e, INFINITY);
  CMatrix m = rho.matrix() + e;
  double nm = schatten_norm(m, INFINITY);
  if (nm > 1.0) m /= nm;  // rho has rank >= 2, so this never triggers in practice
  return dilation_block_encoding(m, 1.0, std::ldexp(1.0, -p));
}

inline DensityMatrix density_with_kernel(int n, Engine& g) {
  const Index d = Index(1) << n;
  return random_density(d, std::max<Index>(2, d / 2), g);
}

inline LemmaCheckResult check_support_retention(Params& p, const SeedPath& seed) {
  const int instances = p.geti("instances", 50), max_n = p.geti("max_n", 4);
  Engine g = make_engine(seed.child("retention", 0));
  detail::Worst w;
  for (int i = 0; i < instances; ++i) {
    const int n = 1 + i % max_n, pp = 4 * n;
    DensityMatrix rho = density_with_kernel(n, g);
    BlockEncoding be = perturbed_encoding(rho, pp, g);
    CMatrix block = extract_block(be);
    for (double eps : {std::ldexp(1.0, -2 * n), std::ldexp(1.0, -3 * n)}) {
      double kept = (sv_projector(block, eps) * rho.matrix()).trace().real();
      w.add(1.0 - kept, std::ldexp(1.0, n - pp + 1) + std::ldexp(eps, n));
    }
  }
  LemmaCheckResult r;
  r.extras["violations"] = w.violations;
  return detail::finish(r, w.lhs, w.bound, 1.0);
}

inline LemmaCheckResult check_kernel_leakage(Params& p, const SeedPath& seed) {
  const int instances = p.geti("instances", 50), max_n = p.geti("max_n", 4);
  Engine g = make_engine(seed.child("leakage", 0));
  detail::Worst w;
  for (int i = 0; i < instances; ++i) {
    const int n = 2 + i % std::max(1, max_n - 1), pp = 4 * n;
    DensityMatrix rho = density_with_kernel(n, g);
    BlockEncoding be = perturbed_encoding(rho, pp, g);
    CMatrix block = extract_block(be);
    CMatrix q = support_projector(rho.matrix());
    CVector psi = (CMatrix::Identity(rho.dim(), rho.dim()) - q) * sample_haar_state(rho.dim(), g).amplitudes();
    psi.normalize();
    for (double eps : {std::ldexp(1.0, -2 * n), std::ldexp(1.0, -3 * n)})
      w.add((sv_projector(block, eps) * psi).norm(), std::ldexp(1.0, -pp) / eps);
  }
  LemmaCheckResult r;
  r.extras["violations"] = w.violations;
  return detail::finish(r, w.lhs, w.bound, 1.0);
}

// ---- adversary -------------------------------------------------------------

inline LemmaCheckResult check_transpose_identity(Params& p, const SeedPath& seed) {
  const int trials = p.geti("trials", 50);
  Engine g = make_engine(seed.child("transpose", 0));
  double worst = 0;
  for (int t = 0; t < trials; ++t) {
    const int in = 1 + t % 3, out = in + (t / 3) % (6 - in);
    const Index din = Index(1) << in, dout = Index(1) << out;
    CMatrix a = detail::random_isometry(dout, din, g);
    CVector lhs = tensor(a, CMatrix(CMatrix::Identity(din, din))) * max_entangled(din).amplitudes();
    CVector rhs = std::sqrt(double(dout) / double(din)) * (tensor(CMatrix(CMatrix::Identity(dout, dout)), CMatrix(a.transpose())) *
                                                           max_entangled(dout).amplitudes());
    worst = std::max(worst, (lhs - rhs).norm());
  }
  return detail::finish({}, worst, 1e-10, 1.0);
}

struct SupportPoint {
  double trace = 0, chain = 0;
  int rank = 0;
  double rank_bound = 0;
};

inline SupportPoint support_point(int lambda, int s, int c, int ell, int keys, int queries, const SeedPath& seed) {
  PriCandidate cand = make_toy_candidate(lambda, s, c, keys, queries, CallKind::Swap, {}, seed.child("candidate", lambda));
  SwapOracleFamily fam(seed.child("oracle", 0));
  Oracles o{&fam, nullptr};
  AttackConfig cfg;
  cfg.seed = seed;
  const int d = 64;
  LearnedOracles learned = learn_oracles(cand, o, AttackKind::Pri, d, cfg);
  SurrogateFamily sf = build_surrogates(cand, learned, d);
  auto sp = surrogate_choi(sf, cand, ell).spectrum(1e-10);
  PermutationExpansion haar = haar_isometry_choi_expansion(lambda, s, ell);
  SupportPoint out;
  for (Index i = 0; i < sp.vectors.cols(); ++i) out.trace += haar.expectation(sp.vectors.col(i));
  out.rank = int(sp.values.size());
  out.rank_bound = std::ldexp(1.0, (1 + c) * ell);
  out.chain = out.rank_bound / binomial(std::int64_t(1) << (2 * lambda + s), ell) + haar_moment_distance(lambda, s, ell);
  return out;
}

// Tr[Q rho_haar] for the support projector Q of the surrogate Choi state.
// Without an explicit lambda the sweep lambda = 1, 2, 3 must also decrease.
inline LemmaCheckResult check_support_bound(Params& p, const SeedPath& seed) {
  const int ell = p.geti("ell", 2), c = p.geti("c", 0), s = p.geti("s", 0);
  const int keys = p.geti("keys", 1 << ell), queries = p.geti("queries", 3);
  std::vector<int> lambdas;
  if (p.has("lambda")) lambdas.push_back(p.geti("lambda", 2));
  else lambdas = {1, 2, 3};
  LemmaCheckResult r;
  detail::Worst w;
  bool rank_ok = true, decreasing = true;
  double prev = INFINITY;
  for (int lambda : lambdas) {
    SupportPoint pt = support_point(lambda, s, c, ell, keys, queries, seed);
    w.add(pt.trace, pt.chain);
    rank_ok = rank_ok && pt.rank <= pt.rank_bound;
    decreasing = decreasing && pt.trace < prev;
    prev = pt.trace;
    r.extras["trace_lambda" + std::to_string(lambda)] = pt.trace;
    r.extras["chain_lambda" + std::to_string(lambda)] = pt.chain;
    r.extras["rank_lambda" + std::to_string(lambda)] = pt.rank;
  }
  r.extras["decreasing"] = decreasing;
  r = detail::finish(r, w.lhs, w.bound, 1.0);
  r.pass = r.pass && rank_ok && decreasing;
  return r;
}

// ---- module-level contracts --------------------------------------------------

// S = S^dagger per block, S^2 = I and S|0,0^n> = |1,psi> on the full register.
inline LemmaCheckResult check_swap_identities(Params& p, const SeedPath& seed) {
  const int seeds = p.geti("seeds", 100), max_n = p.geti("max_n", 6);
  double herm = 0, square = 0, image = 0;
  for (int k = 0; k < seeds; ++k) {
    SwapOracleFamily fam(seed.child("family", k));
    Engine g = make_engine(seed.child("vectors", k));
    for (int n = 1; n <= max_n; ++n) {
      const Index half = Index(1) << n;
      for (Bitstring m = 0; m < Bitstring(half); ++m) {
        PureState psi = fam.lookup(n, m);
        CMatrix sm = swap_unitary(n, psi).matrix();
        herm = std::max(herm, (sm - sm.adjoint()).cwiseAbs().maxCoeff());
        CVector sub = CVector::Zero(2 * half);
        sub(0) = 1.0;
        swap_block(sub, psi.amplitudes());
        CVector want = CVector::Zero(2 * half);
        want.tail(half) = psi.amplitudes();
        image = std::max(image, (sub - want).norm());
      }
      const int nq = 2 * n + 1;
      std::vector<int> wires(nq);
      std::iota(wires.begin(), wires.end(), 0);
      CVector v = sample_haar_state(Index(1) << nq, g).amplitudes(), u = v;
      apply_swap_call(fam, n, u, nq, wires);
      apply_swap_call(fam, n, u, nq, wires);
      square = std::max(square, (u - v).norm());
    }
  }
  LemmaCheckResult r;
  r.extras["hermitian_residual"] = herm;
  r.extras["square_residual"] = square;
  r.extras["image_residual"] = image;
  return detail::finish(r, std::max({herm, square, image}), 1e-10, 1.0);
}

inline LemmaCheckResult check_block_encoding(Params& p, const SeedPath& seed) {
  const int instances = p.geti("instances", 50), max_n = p.geti("max_n", 4);
  Engine g = make_engine(seed.child("block_encoding", 0));
  double worst = 0;
  for (int i = 0; i < instances; ++i) {
    const int n = 1 + i % max_n;
    const Index d = Index(1) << n;
    DensityMatrix rho = random_density(d, 1 + Index(uniform01(g) * double(d)) % d, g);
    BlockEncoding be = block_encode_density(purify(rho), n, n);
    worst = std::max(worst, verify_block_encoding(be, rho.matrix()));
  }
  return detail::finish({}, worst, 1e-9, 1.0);
}

// Promise instances: the input lies on right singular vectors with sigma >= b
// (yes) or sigma <= a (no). Bits are sampled from the polynomial backend.
inline LemmaCheckResult check_discrimination(Params& p, const SeedPath& seed) {
  const int instances = p.geti("instances", 1000);
  const double eta = p.get("eta", 0.05), a = p.get("a", 0.25), b = p.get("b", 0.5);
  require(0 <= a && a < b && b <= 1, "discrimination check: need 0 <= a < b <= 1");
  Engine g = make_engine(seed.child("discrimination", 0));
  int errors = 0;
  double agree = 0;
  std::int64_t degree = 0, degree_bound = 0;
  for (int i = 0; i < instances; ++i) {
    const int n = 1 + i % 3;
    const Index d = Index(1) << n;
    RVector sv(d);
    for (Index j = 0; j < d; ++j) sv(j) = (j % 2 == 0) ? b + (1 - b) * uniform01(g) : a * uniform01(g);
    CMatrix u = sample_haar_unitary(d, g).matrix(), v = sample_haar_unitary(d, g).matrix();
    BlockEncoding be = dilation_block_encoding(u * sv.cast<cplx>().asDiagonal() * v.adjoint());
    const bool yes = i % 2 == 0;
    CVector xi = CVector::Zero(d);
    for (Index j = 0; j < d; ++j)
      if ((sv(j) >= b) == yes) xi += complex_normal(g) * v.col(j);
    xi.normalize();
    DensityMatrix rho = DensityMatrix::from_pure(PureState::unchecked(xi));
    Decision poly = svd_discriminate(be, rho, a, b, eta, Backend::Polynomial, g);
    Decision ideal = svd_discriminate(be, rho, a, b, eta, Backend::Ideal, g);
    errors += poly.bit != yes;
    agree = std::max(agree, std::abs(poly.acceptance - ideal.acceptance));
    degree = std::max(degree, poly.degree);
    degree_bound = poly.degree_bound;
  }
  const double rate = double(errors) / instances;
  LemmaCheckResult r;
  r.extras["error_rate"] = rate;
  r.extras["backend_gap"] = agree;
  r.extras["degree"] = double(degree);
  r.extras["degree_bound"] = double(degree_bound);
  r = detail::finish(r, rate, eta + 3 * std::sqrt(eta / instances), 1.0);
  r.pass = r.pass && degree <= degree_bound && agree <= std::max(eta, 1e-6);
  return r;
}

// Exact mode at D = 2..16, then the sampled success rate at one dimension.
inline LemmaCheckResult check_tomography(Params& p, const SeedPath& seed) {
  const int runs = p.geti("runs", 100), dim = p.geti("dim", 2);
  const double eps = p.get("eps", 0.1), eta = p.get("eta", 0.1), target = p.get("success", 0.85);
  double exact = 0;
  for (Index d = 2; d <= 16; d *= 2) {
    UnitaryMatrix u = sample_haar_unitary(d, seed.child("exact", d));
    exact = std::max(exact, diamond_distance_unitary(process_tomography_exact(access_of(u), d).estimate, u));
  }
  int ok = 0;
  std::int64_t shots = 0;
  for (int i = 0; i < runs; ++i) {
    UnitaryMatrix u = sample_haar_unitary(dim, seed.child("target", i));
    TomographyResult t = process_tomography_sampled(access_of(u), dim, eps, eta, seed.child("shots", i));
    ok += diamond_distance_unitary(t.estimate, u) <= eps;
    shots = t.shots_used;
  }
  const double rate = double(ok) / runs;
  LemmaCheckResult r;
  r.extras["exact_error"] = exact;
  r.extras["success_rate"] = rate;
  r.extras["shots"] = double(shots);
  // lhs is the failure rate, bounded by 1 - target
  r = detail::finish(r, 1.0 - rate, 1.0 - target, 1.0);
  r.pass = r.pass && exact <= 1e-9;
  return r;
}

}  // namespace osep
