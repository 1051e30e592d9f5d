#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "haar.hpp"

namespace osep {

using Bitstring = std::uint64_t;  // n-bit value, first bit most significant

// ---- swap oracle -----------------------------------------------------------

// S = I + |1,psi><0,0^n| + |0,0^n><1,psi| - |0,0^n><0,0^n| - |1,psi><1,psi|
inline UnitaryMatrix swap_unitary(int n, const PureState& psi) {
  const Index half = Index(1) << n;
  require(psi.dim() == half, "swap_unitary: psi must have n qubits");
  if (std::abs(psi.amplitudes().norm() - 1.0) > 1e-9) throw NumericError("swap_unitary: psi is not normalized");
  CMatrix s = CMatrix::Identity(2 * half, 2 * half);
  CVector e1 = CVector::Zero(2 * half);
  e1.tail(half) = psi.amplitudes();
  s.col(0) += e1;
  s.row(0) += e1.adjoint();
  s(0, 0) -= 1.0;
  s -= e1 * e1.adjoint();
  return UnitaryMatrix::unchecked(std::move(s));
}

inline UnitaryMatrix t_theta_unitary(const PureState& theta) {
  return swap_unitary(theta.qubits(), theta);
}

// In-place S_{n,m} on a (flag, psi-register) block of size 2^{n+1}.
inline void swap_block(CVector& sub, const CVector& psi) {
  const Index half = psi.size();
  cplx a = sub(0);
  cplx b = psi.dot(sub.tail(half));
  sub(0) += b - a;
  sub.tail(half) += psi * (a - b);
}

// In-place HRI_{t,n,m} on a (flag, t-register, n-register) block.
inline void hri_block(CVector& sub, const CMatrix& u, Index head) {
  const Index k = u.rows();
  CVector upper = sub.tail(k);
  CVector w = u.adjoint() * upper;
  CVector delta = sub.head(head) - w.head(head);
  sub.head(head) = w.head(head);
  sub.tail(k) = upper + u.leftCols(head) * delta;
}

// Enumerates the blocks selected by `control` (classical index m) and
// `target` wires, handing each target block to fn(m, block).
inline void for_each_controlled_block(CVector& state, int nqubits, const std::vector<int>& control,
                                      const std::vector<int>& target,
                                      const std::function<void(Bitstring, CVector&)>& fn) {
  require(state.size() == (Index(1) << nqubits), "oracle application: state size mismatch");
  auto offsets = [&](const std::vector<int>& wires, Index& mask) {
    const int k = int(wires.size());
    std::vector<Index> off(Index(1) << k, 0);
    for (int w : wires) {
      require(w >= 0 && w < nqubits, "oracle application: wire out of range");
      Index bit = Index(1) << (nqubits - 1 - w);
      require(!(mask & bit), "oracle application: repeated wire");
      mask |= bit;
    }
    for (Index g = 0; g < Index(off.size()); ++g)
      for (int j = 0; j < k; ++j)
        if ((g >> (k - 1 - j)) & 1) off[g] |= Index(1) << (nqubits - 1 - wires[j]);
    return off;
  };
  Index mask = 0;
  auto coff = offsets(control, mask);
  auto toff = offsets(target, mask);
  CVector sub(Index(toff.size()));
  for (Index base = 0; base < state.size(); ++base) {
    if (base & mask) continue;
    for (Index m = 0; m < Index(coff.size()); ++m) {
      Index b = base + coff[m];
      for (Index g = 0; g < sub.size(); ++g) sub(g) = state(b + toff[g]);
      fn(Bitstring(m), sub);
      for (Index g = 0; g < sub.size(); ++g) state(b + toff[g]) = sub(g);
    }
  }
}

// Lazily sampled {psi_{n,m}}; only queried entries are ever drawn.
class SwapOracleFamily {
 public:
  explicit SwapOracleFamily(SeedPath root = SeedPath(0)) : root_(std::move(root)) {}

  const SeedPath& root() const { return root_; }

  PureState lookup(int n, Bitstring m) const {
    require(n >= 1 && n < 63, "swap family: n out of range");
    require(m < (Bitstring(1) << n), "swap family: m has more than n bits");
    std::lock_guard<std::mutex> lock(mu_);
    auto key = std::make_pair(n, m);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    require_size(n <= budget().max_total_qubits, "swap family: psi register exceeds budget");
    PureState psi = sample_haar_state(Index(1) << n, root_.child("swap_n", n).child("m", std::int64_t(m)));
    cache_.emplace(key, psi);
    return psi;
  }

  size_t cache_size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return cache_.size();
  }

 private:
  SeedPath root_;
  mutable std::mutex mu_;
  mutable std::map<std::pair<int, Bitstring>, PureState> cache_;
};

inline PureState family_lookup(const SwapOracleFamily& fam, int n, Bitstring m) { return fam.lookup(n, m); }

inline void apply_swap_call(const SwapOracleFamily& fam, int n, CVector& state, int nqubits,
                            const std::vector<int>& wires) {
  require(int(wires.size()) == 2 * n + 1, "swap call: expected 2n+1 wires");
  std::vector<int> control(wires.begin(), wires.begin() + n);
  std::vector<int> target(wires.begin() + n, wires.end());
  for_each_controlled_block(state, nqubits, control, target, [&](Bitstring m, CVector& sub) {
    swap_block(sub, fam.lookup(n, m).amplitudes());
  });
}

// The daggered flag is accepted for interface symmetry; S_n is self-inverse.
inline PureState apply_oracle_call(const SwapOracleFamily& fam, int n, const PureState& state,
                                   const std::vector<int>& wires, bool daggered = false) {
  (void)daggered;
  CVector v = state.amplitudes();
  apply_swap_call(fam, n, v, state.qubits(), wires);
  return PureState::unchecked(std::move(v));
}

// S_n = sum_m |m><m| (x) S_{n,m} as a dense (2n+1)-qubit matrix.
inline UnitaryMatrix swap_oracle_dense(const SwapOracleFamily& fam, int n) {
  require_size(n <= budget().max_dense_oracle_n, "swap_oracle_dense: n above the dense cutoff");
  const Index blk = Index(1) << (n + 1);
  const Index dim = blk << n;
  CMatrix s = CMatrix::Zero(dim, dim);
  for (Bitstring m = 0; m < (Bitstring(1) << n); ++m)
    s.block(Index(m) * blk, Index(m) * blk, blk, blk) = swap_unitary(n, fam.lookup(n, m)).matrix();
  return UnitaryMatrix::unchecked(std::move(s));
}

// |psi_{2 lambda,(k,x)}>: query |(k,x)>|0>|0^{2 lambda}> to S_{2 lambda} and
// read the last register off the flag = 1 branch.
inline PureState prfsg_eval(const SwapOracleFamily& fam, int lambda, Bitstring k, Bitstring x) {
  const int n = 2 * lambda, nq = 2 * n + 1;
  require_size(nq <= budget().max_total_qubits, "prfsg_eval: register exceeds budget");
  const Bitstring m = (k << lambda) | x;
  CVector v = CVector::Zero(Index(1) << nq);
  v(Index(m) << (n + 1)) = 1.0;
  std::vector<int> wires(nq);
  std::iota(wires.begin(), wires.end(), 0);
  apply_swap_call(fam, n, v, nq, wires);
  const Index half = Index(1) << n;
  CVector out = v.segment((Index(m) << (n + 1)) + half, half);
  return PureState::unchecked(std::move(out));
}

// ---- HRI oracle ------------------------------------------------------------

struct StretchFunction {
  std::string id = "identity";  // identity | linear | const | power
  double a = 1.0;
  double b = 0.0;

  int operator()(int n) const {
    if (id == "identity") return n;
    if (id == "linear") return int(std::llround(a * n + b));
    if (id == "const") return int(std::llround(b));
    if (id == "power") return int(std::ceil(std::pow(double(n), a) - 1e-12));
    throw UsageError("unknown stretch function id '" + id + "'");
  }
};

inline UnitaryMatrix hri_unitary(int t, int n, const UnitaryMatrix& u) {
  const Index k = Index(1) << (n + t);
  require(u.dim() == k, "hri_unitary: U must act on n + t qubits");
  if (unitarity_residual(u.matrix()) > kUnitaryTol) throw NumericError("hri_unitary: U is not unitary");
  CMatrix h = CMatrix::Identity(2 * k, 2 * k);
  for (Index j = 0; j < 2 * k; ++j) {
    CVector col = h.col(j);
    hri_block(col, u.matrix(), Index(1) << n);
    h.col(j) = col;
  }
  return UnitaryMatrix::unchecked(std::move(h));
}

class HriOracleFamily {
 public:
  HriOracleFamily(SeedPath root = SeedPath(0), StretchFunction t = {}) : root_(std::move(root)), t_(std::move(t)) {}

  const SeedPath& root() const { return root_; }
  const StretchFunction& stretch() const { return t_; }
  int t(int n) const { return t_(n); }

  UnitaryMatrix lookup(int n, Bitstring m) const {
    require(n >= 1 && m < (Bitstring(1) << n), "hri family: bad (n, m)");
    std::lock_guard<std::mutex> lock(mu_);
    auto key = std::make_pair(n, m);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const int tn = t_(n);
    require(tn >= 0, "hri family: negative stretch");
    require_size(n + tn + 1 <= budget().max_dense_qubits, "hri family: U_{n,m} exceeds budget");
    UnitaryMatrix u = sample_haar_unitary(Index(1) << (n + tn), root_.child("hri_n", n).child("m", std::int64_t(m)));
    cache_.emplace(key, u);
    return u;
  }

  UnitaryMatrix oracle(int n, Bitstring m) const { return hri_unitary(t_(n), n, lookup(n, m)); }

  size_t cache_size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return cache_.size();
  }

 private:
  SeedPath root_;
  StretchFunction t_;
  mutable std::mutex mu_;
  mutable std::map<std::pair<int, Bitstring>, UnitaryMatrix> cache_;
};

inline void apply_hri_call(const HriOracleFamily& fam, int n, Bitstring m, CVector& state, int nqubits,
                           const std::vector<int>& wires) {
  const int tn = fam.t(n);
  require(int(wires.size()) == n + tn + 1, "HRI call: expected n + t(n) + 1 wires");
  UnitaryMatrix u = fam.lookup(n, m);
  for_each_controlled_block(state, nqubits, {}, wires, [&](Bitstring, CVector& sub) {
    hri_block(sub, u.matrix(), Index(1) << n);
  });
}

struct PriEvalResult {
  PureState output;   // on t + lambda qubits
  double flag_one = 0;  // probability that the flag reads |1>
};

// U_{lambda,k}(|0^t>|psi>) from one HRI query on |0>|0^t>|psi>.
inline PriEvalResult pri_eval(const HriOracleFamily& fam, int lambda, Bitstring k, const PureState& psi) {
  require(psi.dim() == (Index(1) << lambda), "pri_eval: psi must have lambda qubits");
  const int t = fam.t(lambda), nq = 1 + t + lambda;
  CVector v = CVector::Zero(Index(1) << nq);
  v.head(psi.dim()) = psi.amplitudes();
  std::vector<int> wires(nq);
  std::iota(wires.begin(), wires.end(), 0);
  apply_hri_call(fam, lambda, k, v, nq, wires);
  const Index half = Index(1) << (t + lambda);
  PriEvalResult r{PureState::unchecked(v.tail(half)), v.tail(half).squaredNorm()};
  return r;
}

// ---- circuits --------------------------------------------------------------

struct FixedGate {
  CMatrix matrix;
  std::vector<int> wires;
};

struct OracleCall {
  int n = 1;
  std::vector<int> wires;  // m register, flag, psi register
  bool daggered = false;
};

struct HriCall {
  int n = 1;
  Bitstring m = 0;
  std::vector<int> wires;  // flag, t register, n register
  bool daggered = false;
};

using Step = std::variant<FixedGate, OracleCall, HriCall>;

struct OracleCircuit {
  int total_qubits = 0;
  std::vector<Step> steps;

  int query_count() const {
    int q = 0;
    for (const auto& s : steps)
      if (!std::holds_alternative<FixedGate>(s)) ++q;
    return q;
  }

  bool oracle_free() const { return query_count() == 0; }

  void validate() const {
    for (const auto& s : steps) {
      const std::vector<int>& w = std::visit([](const auto& x) -> const std::vector<int>& { return x.wires; }, s);
      for (int q : w) require(q >= 0 && q < total_qubits, "circuit: wire index out of range");
      if (auto g = std::get_if<FixedGate>(&s)) {
        require(g->matrix.rows() == (Index(1) << g->wires.size()), "circuit: gate size does not match wires");
        if (unitarity_residual(g->matrix) > 1e-8) throw NumericError("circuit: fixed gate is not unitary");
      }
      if (auto c = std::get_if<OracleCall>(&s))
        require(int(c->wires.size()) == 2 * c->n + 1, "circuit: swap call needs 2n+1 wires");
    }
  }
};

struct Oracles {
  const SwapOracleFamily* swap = nullptr;
  const HriOracleFamily* hri = nullptr;
};

inline void run_circuit(const OracleCircuit& circ, const Oracles& o, CVector& v) {
  require(v.size() == (Index(1) << circ.total_qubits), "evaluate_circuit: input size mismatch");
  for (const auto& s : circ.steps) {
    if (auto g = std::get_if<FixedGate>(&s)) {
      apply_gate(v, circ.total_qubits, g->matrix, g->wires);
    } else if (auto c = std::get_if<OracleCall>(&s)) {
      require(o.swap != nullptr, "evaluate_circuit: swap oracle not supplied");
      apply_swap_call(*o.swap, c->n, v, circ.total_qubits, c->wires);
    } else {
      const auto& h = std::get<HriCall>(s);
      require(o.hri != nullptr, "evaluate_circuit: HRI oracle not supplied");
      apply_hri_call(*o.hri, h.n, h.m, v, circ.total_qubits, h.wires);
    }
  }
}

inline PureState evaluate_circuit(const OracleCircuit& circ, const Oracles& o, const PureState& input) {
  CVector v = input.amplitudes();
  run_circuit(circ, o, v);
  return PureState::unchecked(std::move(v));
}

inline UnitaryMatrix circuit_unitary(const OracleCircuit& circ, const Oracles& o) {
  require_size(circ.total_qubits <= budget().max_dense_qubits, "circuit_unitary: register exceeds budget");
  const Index dim = Index(1) << circ.total_qubits;
  CMatrix u(dim, dim);
  for (Index j = 0; j < dim; ++j) {
    CVector v = CVector::Zero(dim);
    v(j) = 1.0;
    run_circuit(circ, o, v);
    u.col(j) = v;
  }
  return UnitaryMatrix::unchecked(std::move(u));
}

enum class RewriteMode { Surrogate, ExactSmall };

struct Replacements {
  std::map<int, CMatrix> swap_estimate, swap_exact;
  std::map<std::pair<int, Bitstring>, CMatrix> hri_estimate, hri_exact;
};

// Calls with n <= d_cutoff become fixed gates, calls above it are deleted.
inline OracleCircuit rewrite_surrogate(const OracleCircuit& circ, int d_cutoff, const Replacements& rep,
                                       RewriteMode mode) {
  OracleCircuit out{circ.total_qubits, {}};
  const bool est = mode == RewriteMode::Surrogate;
  for (const auto& s : circ.steps) {
    if (auto g = std::get_if<FixedGate>(&s)) {
      out.steps.push_back(*g);
    } else if (auto c = std::get_if<OracleCall>(&s)) {
      if (c->n > d_cutoff) continue;
      const auto& table = est ? rep.swap_estimate : rep.swap_exact;
      auto it = table.find(c->n);
      require(it != table.end(), "rewrite_surrogate: no replacement for swap oracle n = " + std::to_string(c->n));
      out.steps.push_back(FixedGate{it->second, c->wires});
    } else {
      const auto& h = std::get<HriCall>(s);
      if (h.n > d_cutoff) continue;
      const auto& table = est ? rep.hri_estimate : rep.hri_exact;
      auto it = table.find({h.n, h.m});
      require(it != table.end(), "rewrite_surrogate: no replacement for HRI oracle n = " + std::to_string(h.n));
      out.steps.push_back(FixedGate{it->second, h.wires});
    }
  }
  return out;
}

// ---- candidates ------------------------------------------------------------

// Keyed isometry family lambda -> lambda + s qubits on lambda + s + c wires.
// A PRU candidate is the s = 0 case.
struct PriCandidate {
  int lambda = 1;
  int stretch = 0;
  int ancillas = 0;
  std::vector<Bitstring> keys;
  std::vector<OracleCircuit> circuits;

  int total_qubits() const { return lambda + stretch + ancillas; }
  int output_qubits() const { return lambda + stretch; }
  int max_queries() const {
    int t = 0;
    for (const auto& c : circuits) t = std::max(t, c.query_count());
    return t;
  }
  void validate() const {
    require(!keys.empty() && keys.size() == circuits.size(), "candidate: one circuit per key is required");
    for (const auto& c : circuits) {
      require(c.total_qubits == total_qubits(), "candidate: circuit width must be lambda + s + c");
      c.validate();
    }
  }
};

struct PruCandidate {
  int lambda = 1;
  int ancillas = 0;
  std::vector<Bitstring> keys;
  std::vector<OracleCircuit> circuits;

  int max_queries() const { return as_isometry().max_queries(); }
  PriCandidate as_isometry() const { return PriCandidate{lambda, 0, ancillas, keys, circuits}; }
};

// Largest amplitude mass left outside |0^c> on the ancillas, over random inputs.
inline double ancilla_defect(const PriCandidate& cand, const Oracles& o, int trials, const SeedPath& seed) {
  if (cand.ancillas == 0) return 0.0;
  double worst = 0.0;
  const int out = cand.output_qubits(), tot = cand.total_qubits();
  for (size_t k = 0; k < cand.circuits.size(); ++k) {
    for (int t = 0; t < trials; ++t) {
      PureState psi = sample_haar_state(Index(1) << cand.lambda, seed.child("key", Index(k)).child("trial", t));
      CVector v = CVector::Zero(Index(1) << tot);
      for (Index x = 0; x < psi.dim(); ++x) v(x << (tot - cand.lambda)) = psi.amplitudes()(x);
      run_circuit(cand.circuits[k], o, v);
      double clean = 0;
      for (Index y = 0; y < (Index(1) << out); ++y) clean += std::norm(v(y << cand.ancillas));
      worst = std::max(worst, 1.0 - clean);
    }
  }
  return worst;
}

enum class CallKind { Swap, Hri };

// Toy keyed family: key-dependent Haar layers interleaved with oracle calls on
// the leading wires. Calls are only placed when one fits the register.
inline PriCandidate make_toy_candidate(int lambda, int s, int c, int num_keys, int queries, CallKind kind,
                                       const StretchFunction& t, const SeedPath& seed) {
  require(lambda >= 1 && s >= 0 && c >= 0 && num_keys >= 1 && queries >= 0, "toy candidate: invalid parameters");
  PriCandidate cand;
  cand.lambda = lambda;
  cand.stretch = s;
  cand.ancillas = c;
  const int width = lambda + s + c;
  require_size(width <= budget().max_dense_qubits, "toy candidate: register exceeds budget");
  std::vector<int> fitting;
  for (int n = 1; n <= width; ++n) {
    int need = kind == CallKind::Swap ? 2 * n + 1 : n + t(n) + 1;
    if (need <= width) fitting.push_back(n);
  }
  const int placed = fitting.empty() ? 0 : queries;
  std::vector<int> all(width);
  std::iota(all.begin(), all.end(), 0);
  for (int k = 0; k < num_keys; ++k) {
    OracleCircuit circ{width, {}};
    SeedPath ks = seed.child("key", k);
    for (int j = 0; j <= placed; ++j) {
      circ.steps.push_back(FixedGate{sample_haar_unitary(Index(1) << width, ks.child("layer", j)).matrix(), all});
      if (j == placed) break;
      int n = fitting[size_t(j) % fitting.size()];
      if (kind == CallKind::Swap) {
        std::vector<int> w(2 * n + 1);
        std::iota(w.begin(), w.end(), 0);
        circ.steps.push_back(OracleCall{n, w, false});
      } else {
        std::vector<int> w(n + t(n) + 1);
        std::iota(w.begin(), w.end(), 0);
        Bitstring m = Bitstring(k + j) % (Bitstring(1) << n);
        circ.steps.push_back(HriCall{n, m, w, false});
      }
    }
    cand.keys.push_back(Bitstring(k));
    cand.circuits.push_back(std::move(circ));
  }
  cand.validate();
  return cand;
}

inline PruCandidate make_toy_pru(int lambda, int c, int num_keys, int queries, const SeedPath& seed) {
  PriCandidate p = make_toy_candidate(lambda, 0, c, num_keys, queries, CallKind::Swap, {}, seed);
  return PruCandidate{p.lambda, p.ancillas, p.keys, p.circuits};
}

struct OracleManifest {
  std::uint64_t master_seed = 0;
  StretchFunction stretch;
  int dense_cutoff = 5;
};

}  // namespace osep
