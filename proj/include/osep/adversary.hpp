#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <set>

#include "haar.hpp"
#include "oracle.hpp"
#include "qsvt.hpp"
#include "tomography.hpp"

namespace osep {

enum class AttackKind { Pru, Pri, PriVsHri };

inline std::string attack_name(AttackKind k) {
  switch (k) {
    case AttackKind::Pru: return "pru";
    case AttackKind::Pri: return "pri";
    default: return "pri-vs-hri";
  }
}

inline AttackKind parse_attack(const std::string& s) {
  if (s == "pru") return AttackKind::Pru;
  if (s == "pri") return AttackKind::Pri;
  if (s == "pri-vs-hri") return AttackKind::PriVsHri;
  throw UsageError("unknown attack '" + s + "' (expected pru, pri or pri-vs-hri)");
}

struct Challenge {
  enum Kind { None, Keyed, Haar } kind = None;
  int key_index = 0;
  SeedPath haar_seed;
};

struct AttackConfig {
  int p = 20;
  std::optional<int> ell_override;
  Backend backend = Backend::Ideal;
  TomographyMode tomography_mode = TomographyMode::Exact;
  SeedPath seed{7};
  double exponent_a = 1.0;
  std::optional<double> eta_override;  // distinguisher error, default 2^-lambda
  std::optional<int> d_override;
  double tomo_eps = 0.1;
  double tomo_eta = 0.1;
  double calibration_c = 4.0;
  Challenge challenge;
};

struct AttackReport {
  std::string kind;
  int lambda = 0, ell = 0, queries = 0, ancillas = 0, stretch = 0, d = 0, p = 0;
  int num_keys = 0;
  int choi_qubits = 0;
  int tomography_max_n = 0;
  double keyed_acceptance = 0;
  double surrogate_acceptance = 0;
  double haar_acceptance = 0;
  double advantage = 0;
  double threshold_a = 0, threshold_b = 0, eta = 0;
  std::int64_t poly_degree = 0, poly_degree_bound = 0;
  std::string backend, tomography_mode;
  bool exact_probabilities = true;
  bool tomography_exact = true;
  bool materialized_block_encoding = false;
  std::string seed;
  double wall_ms = 0;
  double replacement_eps = 0;
  std::int64_t tomography_shots = 0;
  double hybrid_distance = 0;   // ||rho_keyed - rho_surrogate||_1
  double hybrid_bound = 0;
  double deletion_distance = 0;  // ||rho_keyed - rho_exact_small||_1
  double deletion_bound = 0;
  double circuit_distance = 0;   // max_k diamond(V_k, V~_k)
  double circuit_bound = 0;
  double ancilla_defect = 0;
  double composition_lower = 0;
  bool hybrid_ok = false;
  bool composition_ok = false;
  std::vector<std::string> boundary_crossings;
  std::string challenge = "none";
  double challenge_acceptance = 0;
  bool challenge_bit = false;
};

// ---- Choi states -----------------------------------------------------------

// Kraus operators of x -> W(|x>|0^{s+c}>) with the trailing c wires traced.
inline std::vector<CMatrix> circuit_kraus(const UnitaryMatrix& w, int lambda, int s, int c) {
  const Index din = Index(1) << lambda, dout = Index(1) << (lambda + s), dc = Index(1) << c;
  require(w.dim() == dout * dc, "circuit_kraus: width mismatch");
  std::vector<CMatrix> ks(size_t(dc), CMatrix(dout, din));
  for (Index j = 0; j < dc; ++j)
    for (Index x = 0; x < din; ++x)
      for (Index y = 0; y < dout; ++y) ks[size_t(j)](y, x) = w.matrix()(y * dc + j, x << (s + c));
  return ks;
}

// Appends vec(K_{j1} (x) ... (x) K_{jell}) * scale for all Kraus tuples.
inline void append_choi_factors(std::vector<CVector>& cols, const std::vector<CMatrix>& ks, int ell, double scale) {
  const size_t r = ks.size();
  size_t tuples = 1;
  for (int i = 0; i < ell; ++i) tuples *= r;
  for (size_t t = 0; t < tuples; ++t) {
    CMatrix prod = CMatrix::Identity(1, 1);
    size_t rest = t;
    for (int i = 0; i < ell; ++i) {
      prod = tensor(prod, ks[rest % r]);
      rest /= r;
    }
    CMatrix pt = prod.transpose();  // column-major storage of the transpose is row-major vec
    CVector v = Eigen::Map<const CVector>(pt.data(), pt.size()) * scale;
    if (v.squaredNorm() > 0) cols.push_back(std::move(v));
  }
}

inline void check_choi_budget(int lambda, int s, int ell) {
  require_size((2 * lambda + s) * ell <= budget().max_total_qubits,
               "Choi state on " + std::to_string((2 * lambda + s) * ell) + " qubits exceeds the budget");
}

inline LowRankState choi_from_unitaries(const std::vector<UnitaryMatrix>& ws, int lambda, int s, int c, int ell) {
  require(!ws.empty(), "choi: empty family");
  check_choi_budget(lambda, s, ell);
  const double scale = 1.0 / std::sqrt(double(ws.size()) * double(ipow(Index(1) << lambda, ell)));
  std::vector<CVector> cols;
  for (const auto& w : ws) append_choi_factors(cols, circuit_kraus(w, lambda, s, c), ell, scale);
  LowRankState st;
  const Index dim = Index(1) << ((2 * lambda + s) * ell);
  st.factors.resize(dim, Index(cols.size()));
  for (size_t i = 0; i < cols.size(); ++i) st.factors.col(Index(i)) = cols[i];
  return st;
}

// E_k (W_k^{(x) ell} (x) id)|Omega><Omega| with ancillas traced; outputs first, references last.
inline LowRankState keyed_choi(const PriCandidate& cand, const Oracles& o, int ell) {
  cand.validate();
  check_choi_budget(cand.lambda, cand.stretch, ell);
  std::vector<UnitaryMatrix> ws;
  for (const auto& circ : cand.circuits) ws.push_back(circuit_unitary(circ, o));
  return choi_from_unitaries(ws, cand.lambda, cand.stretch, cand.ancillas, ell);
}

inline LowRankState keyed_choi(const PruCandidate& cand, const Oracles& o, int ell) {
  return keyed_choi(cand.as_isometry(), o, ell);
}

inline LowRankState low_rank_of(const DensityMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(rho.matrix());
  std::vector<Index> keep;
  for (Index i = 0; i < rho.dim(); ++i)
    if (es.eigenvalues()(i) > 1e-14) keep.push_back(i);
  LowRankState st;
  st.factors.resize(rho.dim(), Index(keep.size()));
  for (size_t j = 0; j < keep.size(); ++j)
    st.factors.col(Index(j)) = es.eigenvectors().col(keep[j]) * std::sqrt(es.eigenvalues()(keep[j]));
  return st;
}

// ---- surrogates ------------------------------------------------------------

struct LearnedOracles {
  Replacements replacements;
  std::map<std::string, double> errors;  // diamond distance per replaced oracle
  double eps_max = 0;
  std::int64_t shots = 0;
  int max_n = 0;
};

inline int largest_fitting_n(int width, AttackKind kind, const StretchFunction& t) {
  int best = 0;
  for (int n = 1; n <= width; ++n) {
    int need = kind == AttackKind::PriVsHri ? n + t(n) + 1 : 2 * n + 1;
    if (need <= width) best = n;
  }
  return best;
}

// Tomography of every oracle the rewritten circuits may need: swap oracles
// S_n, or HRI_{t,n,m} for every m, for n up to min(d, largest fitting n).
inline LearnedOracles learn_oracles(const PriCandidate& cand, const Oracles& o, AttackKind kind, int d,
                                    const AttackConfig& cfg) {
  LearnedOracles out;
  const StretchFunction stretch = o.hri ? o.hri->stretch() : StretchFunction{};
  const int top = std::min(d, largest_fitting_n(cand.total_qubits(), kind, stretch));
  out.max_n = std::max(top, 0);
  auto learn = [&](const UnitaryMatrix& truth, const SeedPath& sp) {
    if (cfg.tomography_mode == TomographyMode::Exact) return process_tomography_exact(access_of(truth), truth.dim());
    return process_tomography_sampled(access_of(truth), truth.dim(), cfg.tomo_eps, cfg.tomo_eta, sp);
  };
  for (int n = 1; n <= top; ++n) {
    if (kind == AttackKind::PriVsHri) {
      require(o.hri != nullptr, "attack: HRI oracle family not supplied");
      for (Bitstring m = 0; m < (Bitstring(1) << n); ++m) {
        UnitaryMatrix truth = o.hri->oracle(n, m);
        TomographyResult r = learn(truth, cfg.seed.child("tomo_hri_n", n).child("m", std::int64_t(m)));
        double e = diamond_distance_unitary(truth, r.estimate);
        out.errors["hri_n" + std::to_string(n) + "_m" + std::to_string(m)] = e;
        out.eps_max = std::max(out.eps_max, e);
        out.shots += r.shots_used;
        out.replacements.hri_exact[{n, m}] = truth.matrix();
        out.replacements.hri_estimate[{n, m}] = r.estimate.matrix();
      }
    } else {
      require(o.swap != nullptr, "attack: swap oracle family not supplied");
      require_size(n <= budget().max_dense_oracle_n, "attack: swap oracle above the dense cutoff");
      UnitaryMatrix truth = swap_oracle_dense(*o.swap, n);
      TomographyResult r = learn(truth, cfg.seed.child("tomo_swap_n", n));
      double e = diamond_distance_unitary(truth, r.estimate);
      out.errors["swap_n" + std::to_string(n)] = e;
      out.eps_max = std::max(out.eps_max, e);
      out.shots += r.shots_used;
      out.replacements.swap_exact[n] = truth.matrix();
      out.replacements.swap_estimate[n] = r.estimate.matrix();
    }
  }
  return out;
}

struct SurrogateFamily {
  std::vector<OracleCircuit> surrogate;    // V_k
  std::vector<OracleCircuit> exact_small;  // V~_k
  int d_cutoff = 0;
  std::map<std::string, double> replacement_errors;
  double eps = 0;
};

inline SurrogateFamily build_surrogates(const PriCandidate& cand, const LearnedOracles& learned, int d_cutoff) {
  SurrogateFamily sf;
  sf.d_cutoff = d_cutoff;
  sf.replacement_errors = learned.errors;
  sf.eps = learned.eps_max;
  for (const auto& circ : cand.circuits) {
    sf.surrogate.push_back(rewrite_surrogate(circ, d_cutoff, learned.replacements, RewriteMode::Surrogate));
    sf.exact_small.push_back(rewrite_surrogate(circ, d_cutoff, learned.replacements, RewriteMode::ExactSmall));
  }
  return sf;
}

inline LowRankState surrogate_choi(const SurrogateFamily& sf, const PriCandidate& shape, int ell,
                                   bool exact_small = false) {
  const auto& circs = exact_small ? sf.exact_small : sf.surrogate;
  std::vector<UnitaryMatrix> ws;
  for (const auto& c : circs) {
    require(c.oracle_free(), "surrogate_choi: surrogate circuits must be oracle free");
    ws.push_back(circuit_unitary(c, {}));
  }
  return choi_from_unitaries(ws, shape.lambda, shape.stretch, shape.ancillas, ell);
}

// ---- distinguisher ---------------------------------------------------------

// Read access to a state through its expectation values.
struct StateView {
  std::function<double(const CVector&)> expectation;
  double trace = 1.0;

  static StateView of(const LowRankState& s) {
    auto p = std::make_shared<LowRankState>(s);
    return {[p](const CVector& v) { return p->expectation(v); }, p->trace()};
  }
  static StateView of(const PermutationExpansion& e) {
    auto p = std::make_shared<PermutationExpansion>(e);
    return {[p](const CVector& v) { return p->expectation(v); }, p->trace()};
  }
  static StateView of(const DensityMatrix& rho) {
    auto p = std::make_shared<CMatrix>(rho.matrix());
    return {[p](const CVector& v) { return v.dot(*p * v).real(); }, rho.matrix().trace().real()};
  }
};

// Singular-value discrimination against the block encoding of rho_surrogate
// with a = 2^{-3n}, b = 2^{-2n}. Registers up to a third of the dense budget
// go through the purification circuit; above that the block is rho itself and
// its spectrum is read directly, logged as a boundary crossing.
class Distinguisher {
 public:
  Distinguisher(const LowRankState& rho, int lambda, Backend backend, std::optional<double> eta = {},
                BoundaryLog* log = nullptr)
      : backend_(backend) {
    n_ = rho.qubits();
    a_ = std::ldexp(1.0, -3 * n_);
    b_ = std::ldexp(1.0, -2 * n_);
    eta_ = eta.value_or(std::min(0.25, std::ldexp(1.0, -lambda)));
    require(eta_ > 0 && eta_ < 0.5, "distinguisher: eta must lie in (0, 1/2)");
    degree_bound_ = threshold_degree_bound(a_, b_, eta_);
    if (backend_ == Backend::Polynomial) {
      poly_ = threshold_poly(a_, b_, eta_);
      degree_ = poly_.degree;
    }
    if (3 * n_ <= budget().max_dense_qubits) {
      materialized_ = true;
      DensityMatrix dense(rho.dense(), 1e-8);
      BlockEncoding be = block_encode_density(purify(dense), n_, n_);
      CMatrix m = extract_block(be);
      if (log) log->record("svd of extracted block (dim " + std::to_string(m.rows()) + ")");
      Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeFullV);
      vectors_ = svd.matrixV();
      sigma_ = RVector::Zero(vectors_.cols());
      sigma_.head(svd.singularValues().size()) = svd.singularValues();
    } else {
      if (log)
        log->record("spectrum of surrogate Choi state (dim " + std::to_string(rho.dim()) + ", rank " +
                    std::to_string(rho.factors.cols()) + ")");
      auto sp = rho.spectrum();
      sigma_ = sp.values;
      vectors_ = sp.vectors;
    }
  }

  double weight(double sigma) const { return AcceptRule{backend_, 0.5 * (a_ + b_), &poly_}(sigma); }

  double acceptance(const StateView& xi) const {
    double acc = materialized_ ? 0.0 : weight(0.0) * xi.trace;
    const double w0 = materialized_ ? 0.0 : weight(0.0);
    for (Index i = 0; i < vectors_.cols(); ++i) acc += (weight(sigma_(i)) - w0) * xi.expectation(vectors_.col(i));
    return std::clamp(acc, 0.0, 1.0);
  }

  int n() const { return n_; }
  double a() const { return a_; }
  double b() const { return b_; }
  double eta() const { return eta_; }
  bool materialized() const { return materialized_; }
  std::int64_t degree() const { return degree_; }
  std::int64_t degree_bound() const { return degree_bound_; }

 private:
  Backend backend_;
  int n_ = 0;
  double a_ = 0, b_ = 0, eta_ = 0;
  ThresholdPoly poly_;
  std::int64_t degree_ = 0, degree_bound_ = 0;
  bool materialized_ = false;
  RVector sigma_;
  CMatrix vectors_;
};

inline Decision distinguisher(const DensityMatrix& rho_surrogate, const DensityMatrix& input, int n_qubits, int lambda,
                              Backend backend, Engine& rng, BoundaryLog* log = nullptr) {
  require(rho_surrogate.dim() == input.dim(), "distinguisher: dimension mismatch");
  require(rho_surrogate.dim() == (Index(1) << n_qubits), "distinguisher: n_qubits does not match the states");
  Distinguisher dist(low_rank_of(rho_surrogate), lambda, backend, {}, log);
  Decision d;
  d.acceptance = dist.acceptance(StateView::of(input));
  d.degree = dist.degree();
  d.degree_bound = dist.degree_bound();
  d.bit = bernoulli(rng, d.acceptance);
  return d;
}

// ---- attacks ---------------------------------------------------------------

inline int default_ell(size_t num_keys) {
  int ell = 0;
  while ((size_t(1) << ell) < num_keys) ++ell;
  return std::max(ell, 1);
}

inline int attack_cutoff(AttackKind kind, int ell, int queries, int p, int s, int c, double exponent_a) {
  const double base = 2.0 * std::log2(double(ell) * double(std::max(queries, 1)) * double(p));
  switch (kind) {
    case AttackKind::Pru: return int(std::ceil(base - 1e-12)) + c;
    case AttackKind::Pri: return int(std::ceil(base - 1e-12)) + 3 * c + 2 * s;
    default: return int(std::ceil(std::pow(base + 2.0 * s + 3.0 * c, 1.0 / exponent_a) - 1e-12));
  }
}

inline LowRankState haar_challenge_choi(int lambda, int s, int ell, const SeedPath& seed) {
  // the first din columns of a Haar unitary form a Haar isometry
  UnitaryMatrix u = sample_haar_unitary(Index(1) << (lambda + s), seed);
  const Index din = Index(1) << lambda;
  std::vector<CMatrix> k{u.matrix().leftCols(din)};
  std::vector<CVector> cols;
  append_choi_factors(cols, k, ell, 1.0 / std::sqrt(double(ipow(din, ell))));
  LowRankState st;
  st.factors = cols[0];
  return st;
}

inline AttackReport run_attack(const PriCandidate& cand, const Oracles& o, const AttackConfig& cfg, AttackKind kind) {
  auto t0 = std::chrono::steady_clock::now();
  require(cfg.p >= 2, "attack: p must be at least 2");
  require(cfg.exponent_a >= 1.0, "attack: exponent a must be at least 1");
  cand.validate();
  if (kind == AttackKind::Pru) require(cand.stretch == 0, "attack pru: candidate has stretch");
  AttackReport rep;
  rep.kind = attack_name(kind);
  rep.lambda = cand.lambda;
  rep.stretch = cand.stretch;
  rep.ancillas = cand.ancillas;
  rep.num_keys = int(cand.keys.size());
  rep.p = cfg.p;
  rep.ell = cfg.ell_override.value_or(default_ell(cand.keys.size()));
  require(rep.ell >= 1, "attack: ell must be positive");
  check_choi_budget(cand.lambda, cand.stretch, rep.ell);
  rep.choi_qubits = (2 * cand.lambda + cand.stretch) * rep.ell;
  rep.queries = cand.max_queries();
  rep.d = cfg.d_override.value_or(
      attack_cutoff(kind, rep.ell, rep.queries, cfg.p, cand.stretch, cand.ancillas, cfg.exponent_a));
  rep.backend = backend_name(cfg.backend);
  rep.tomography_mode = tomography_mode_name(cfg.tomography_mode);
  rep.tomography_exact = cfg.tomography_mode == TomographyMode::Exact;
  rep.seed = cfg.seed.str();

  // step 1: learn the small oracles and rewrite every keyed circuit
  LearnedOracles learned = learn_oracles(cand, o, kind, rep.d, cfg);
  rep.tomography_max_n = learned.max_n;
  rep.replacement_eps = learned.eps_max;
  rep.tomography_shots = learned.shots;
  SurrogateFamily sf = build_surrogates(cand, learned, rep.d);

  // step 2: Choi states
  LowRankState rho_keyed = keyed_choi(cand, o, rep.ell);
  LowRankState rho_surr = surrogate_choi(sf, cand, rep.ell);
  LowRankState rho_small = surrogate_choi(sf, cand, rep.ell, true);
  PermutationExpansion rho_haar = haar_isometry_choi_expansion(cand.lambda, cand.stretch, rep.ell);

  // step 3: distinguisher
  BoundaryLog log;
  Distinguisher dist(rho_surr, cand.lambda, cfg.backend, cfg.eta_override, &log);
  rep.threshold_a = dist.a();
  rep.threshold_b = dist.b();
  rep.eta = dist.eta();
  rep.poly_degree = dist.degree();
  rep.poly_degree_bound = dist.degree_bound();
  rep.materialized_block_encoding = dist.materialized();
  rep.keyed_acceptance = dist.acceptance(StateView::of(rho_keyed));
  rep.surrogate_acceptance = dist.acceptance(StateView::of(rho_surr));
  rep.haar_acceptance = dist.acceptance(StateView::of(rho_haar));
  rep.advantage = std::abs(rep.keyed_acceptance - rep.haar_acceptance);

  if (cfg.challenge.kind != Challenge::None) {
    Engine rng = make_engine(cfg.seed.child("challenge", cfg.challenge.kind));
    if (cfg.challenge.kind == Challenge::Keyed) {
      require(cfg.challenge.key_index >= 0 && cfg.challenge.key_index < rep.num_keys, "attack: challenge key out of range");
      PriCandidate one = cand;
      one.keys = {cand.keys[size_t(cfg.challenge.key_index)]};
      one.circuits = {cand.circuits[size_t(cfg.challenge.key_index)]};
      rep.challenge = "keyed:" + std::to_string(cfg.challenge.key_index);
      rep.challenge_acceptance = dist.acceptance(StateView::of(keyed_choi(one, o, rep.ell)));
    } else {
      rep.challenge = "haar:" + cfg.challenge.haar_seed.str();
      rep.challenge_acceptance =
          dist.acceptance(StateView::of(haar_challenge_choi(cand.lambda, cand.stretch, rep.ell, cfg.challenge.haar_seed)));
    }
    rep.challenge_bit = bernoulli(rng, rep.challenge_acceptance);
  }

  // hybrid bookkeeping
  const double ell = rep.ell, tq = rep.queries, c = cand.ancillas, s = cand.stretch;
  double pref = kind == AttackKind::Pru ? std::pow(2.0, c / 2) : std::pow(2.0, s + 1.5 * c);
  double dd = kind == AttackKind::PriVsHri ? double(o.hri ? o.hri->t(std::max(rep.d, 1)) : rep.d) : double(rep.d);
  double decay = pref * ell * tq / std::pow(2.0, dd / 2);
  rep.hybrid_distance = trace_norm_difference(rho_keyed, rho_surr);
  rep.hybrid_bound = cfg.calibration_c * (ell * tq * rep.replacement_eps + decay);
  rep.deletion_distance = trace_norm_difference(rho_keyed, rho_small);
  rep.deletion_bound = cfg.calibration_c * decay;
  for (size_t k = 0; k < sf.surrogate.size(); ++k) {
    double dk = diamond_distance_unitary(circuit_unitary(sf.surrogate[k], {}), circuit_unitary(sf.exact_small[k], {}));
    rep.circuit_distance = std::max(rep.circuit_distance, dk);
  }
  rep.circuit_bound = tq * rep.replacement_eps;
  rep.hybrid_ok = rep.hybrid_distance <= rep.hybrid_bound + 1e-9 && rep.deletion_distance <= rep.deletion_bound + 1e-9 &&
                  rep.circuit_distance <= rep.circuit_bound + 1e-9;
  rep.composition_lower =
      1.0 - 0.5 * rep.hybrid_distance - ((1.0 - rep.surrogate_acceptance) + rep.haar_acceptance);
  rep.composition_ok = rep.advantage >= rep.composition_lower - 1e-9;
  rep.ancilla_defect = ancilla_defect(cand, o, 4, cfg.seed.child("ancilla", 0));
  rep.boundary_crossings = log.crossings;
  rep.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

inline AttackReport attack_pru(const PruCandidate& cand, const Oracles& o, const AttackConfig& cfg) {
  return run_attack(cand.as_isometry(), o, cfg, AttackKind::Pru);
}

inline AttackReport attack_pri(const PriCandidate& cand, const Oracles& o, const AttackConfig& cfg) {
  return run_attack(cand, o, cfg, AttackKind::Pri);
}

inline AttackReport attack_pri_vs_hri(const PriCandidate& cand, const Oracles& o, const AttackConfig& cfg) {
  require(o.hri != nullptr, "attack pri-vs-hri: HRI oracle family not supplied");
  return run_attack(cand, o, cfg, AttackKind::PriVsHri);
}

inline double advantage_exact(const PriCandidate& cand, const Oracles& o, const AttackConfig& cfg, AttackKind kind) {
  return run_attack(cand, o, cfg, kind).advantage;
}

}  // namespace osep
