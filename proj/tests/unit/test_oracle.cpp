#include <gtest/gtest.h>

#include "osep/oracle.hpp"

using namespace osep;

namespace {

std::vector<int> iota_wires(int n, int from = 0) {
  std::vector<int> w(n);
  std::iota(w.begin(), w.end(), from);
  return w;
}

}  // namespace

TEST(SwapUnitary, ActionAndInvolution) {
  Engine g(1);
  for (int n = 1; n <= 4; ++n) {
    PureState psi = sample_haar_state(Index(1) << n, g);
    CMatrix s = swap_unitary(n, psi).matrix();
    const Index half = Index(1) << n;
    CVector want = CVector::Zero(2 * half);
    want.tail(half) = psi.amplitudes();
    EXPECT_LT((s.col(0) - want).norm(), 1e-12);
    EXPECT_LT((s - s.adjoint()).norm(), 1e-12);
    EXPECT_TRUE((s * s).isIdentity(1e-12));
    // fixes vectors orthogonal to |0,0> and |1,psi>
    CVector phi = sample_haar_state(2 * half, g).amplitudes();
    phi(0) = 0;
    phi.tail(half) -= psi.amplitudes() * psi.amplitudes().dot(phi.tail(half));
    EXPECT_LT((s * phi - phi).norm(), 1e-12);
  }
  EXPECT_THROW(swap_unitary(2, sample_haar_state(2, g)), UsageError);
}

TEST(SwapFamily, LazyAndDeterministic) {
  SwapOracleFamily fam(SeedPath(5));
  PureState a = fam.lookup(3, 5);
  EXPECT_EQ(fam.cache_size(), 1u);
  EXPECT_EQ((a.amplitudes() - fam.lookup(3, 5).amplitudes()).norm(), 0.0);
  EXPECT_EQ(fam.cache_size(), 1u);
  fam.lookup(3, 6);
  EXPECT_EQ(fam.cache_size(), 2u);
  SwapOracleFamily other(SeedPath(5));
  EXPECT_EQ((other.lookup(3, 5).amplitudes() - a.amplitudes()).norm(), 0.0);
  EXPECT_THROW(fam.lookup(2, 4), UsageError);
}

TEST(SwapFamily, DistinctEntriesNearlyOrthogonal) {
  SwapOracleFamily fam(SeedPath(6));
  const int n = 3;
  double mean = 0;
  int count = 0;
  for (int k = 0; k < 40; ++k) {
    SwapOracleFamily f(SeedPath(6).child("f", k));
    for (Bitstring m = 0; m + 1 < 8; ++m) {
      mean += std::norm(f.lookup(n, m).amplitudes().dot(f.lookup(n, m + 1).amplitudes()));
      ++count;
    }
  }
  EXPECT_NEAR(mean / count, 1.0 / 8, 0.03);
}

TEST(OracleCall, ControlledActionMatchesDense) {
  SwapOracleFamily fam(SeedPath(7));
  for (int n = 1; n <= 3; ++n) {
    const int nq = 2 * n + 1;
    const Index dim = Index(1) << nq;
    CMatrix dense = swap_oracle_dense(fam, n).matrix();
    Engine g(n);
    PureState in = sample_haar_state(dim, g);
    PureState out = apply_oracle_call(fam, n, in, iota_wires(nq));
    EXPECT_LT((out.amplitudes() - dense * in.amplitudes()).norm(), 1e-12);
    PureState back = apply_oracle_call(fam, n, out, iota_wires(nq));
    EXPECT_LT((back.amplitudes() - in.amplitudes()).norm(), 1e-12);
    // |m>|0>|0^n> -> |m>|1>|psi_m>
    const Bitstring m = Bitstring(1) << (n - 1);
    PureState e = PureState::basis(dim, Index(m) << (n + 1));
    CVector want = CVector::Zero(dim);
    want.segment((Index(m) << (n + 1)) + (Index(1) << n), Index(1) << n) = fam.lookup(n, m).amplitudes();
    EXPECT_LT((apply_oracle_call(fam, n, e, iota_wires(nq)).amplitudes() - want).norm(), 1e-12);
  }
}

TEST(Prfsg, EvalIsFamilyEntry) {
  SwapOracleFamily fam(SeedPath(8));
  const int lambda = 2;
  for (Bitstring k = 0; k < 4; ++k) {
    PureState out = prfsg_eval(fam, lambda, k, 3);
    EXPECT_NEAR(out.amplitudes().norm(), 1.0, 1e-12);
    EXPECT_LT((out.amplitudes() - fam.lookup(2 * lambda, (k << lambda) | 3).amplitudes()).norm(), 1e-12);
  }
  PureState th = fam.lookup(4, 9);
  EXPECT_LT((t_theta_unitary(th).matrix() - swap_unitary(4, th).matrix()).norm(), 0.0 + 1e-15);
}

TEST(Hri, ActionHermitianTrace) {
  Engine g(9);
  for (int n = 1; n <= 2; ++n)
    for (int t = 1; t <= 2; ++t) {
      UnitaryMatrix u = sample_haar_unitary(Index(1) << (n + t), g);
      CMatrix h = hri_unitary(t, n, u).matrix();
      const Index k = Index(1) << (n + t);
      EXPECT_LT((h - h.adjoint()).norm(), 1e-12);
      EXPECT_TRUE((h * h).isIdentity(1e-10));
      EXPECT_NEAR(h.trace().real(), std::ldexp(1.0, n + t + 1) - std::ldexp(1.0, n + 1), 1e-10);
      for (Index x = 0; x < (Index(1) << n); ++x) {
        CVector want = CVector::Zero(2 * k);
        want.tail(k) = u.matrix().col(x);
        EXPECT_LT((h.col(x) - want).norm(), 1e-12);
      }
    }
}

TEST(Hri, PriEvalMatchesDirect) {
  StretchFunction t{"identity"};
  HriOracleFamily fam(SeedPath(10), t);
  const int lambda = 2;
  Engine g(11);
  for (Bitstring k = 0; k < 4; ++k) {
    PureState a = sample_haar_state(4, g), b = sample_haar_state(4, g);
    PriEvalResult ra = pri_eval(fam, lambda, k, a), rb = pri_eval(fam, lambda, k, b);
    CVector padded = CVector::Zero(16);
    padded.head(4) = a.amplitudes();
    EXPECT_LT((ra.output.amplitudes() - fam.lookup(lambda, k).matrix() * padded).norm(), 1e-12);
    EXPECT_NEAR(ra.flag_one, 1.0, 1e-12);
    EXPECT_NEAR(std::abs(ra.output.amplitudes().dot(rb.output.amplitudes()) - a.amplitudes().dot(b.amplitudes())), 0,
                1e-12);
  }
}

TEST(Stretch, Functions) {
  EXPECT_EQ((StretchFunction{"identity"})(3), 3);
  EXPECT_EQ((StretchFunction{"linear", 2, 1})(3), 7);
  EXPECT_EQ((StretchFunction{"const", 0, 2})(5), 2);
  EXPECT_EQ((StretchFunction{"power", 1.5, 0})(4), 8);
  EXPECT_THROW((StretchFunction{"bogus"})(1), UsageError);
}

TEST(Circuit, EvaluateAndUnitary) {
  SwapOracleFamily fam(SeedPath(12));
  Oracles o{&fam, nullptr};
  OracleCircuit empty{3, {}};
  Engine g(13);
  PureState in = sample_haar_state(8, g);
  EXPECT_LT((evaluate_circuit(empty, o, in).amplitudes() - in.amplitudes()).norm(), 0.0 + 1e-15);
  EXPECT_TRUE(circuit_unitary(empty, o).matrix().isIdentity());

  OracleCircuit one{3, {OracleCall{1, iota_wires(3), false}}};
  EXPECT_EQ(one.query_count(), 1);
  EXPECT_LT((evaluate_circuit(one, o, in).amplitudes() - apply_oracle_call(fam, 1, in, iota_wires(3)).amplitudes())
                .norm(),
            1e-12);

  OracleCircuit mixed{4,
                      {FixedGate{sample_haar_unitary(4, g).matrix(), {1, 3}}, OracleCall{1, {3, 0, 2}, false},
                       FixedGate{sample_haar_unitary(16, g).matrix(), iota_wires(4)}}};
  mixed.validate();
  CMatrix u = circuit_unitary(mixed, o).matrix();
  EXPECT_LT(unitarity_residual(u), 1e-8);
  for (Index j = 0; j < 16; ++j)
    EXPECT_LT((evaluate_circuit(mixed, o, PureState::basis(16, j)).amplitudes() - u.col(j)).norm(), 1e-12);

  OracleCircuit bad{2, {OracleCall{1, {0, 1, 2}, false}}};
  EXPECT_THROW(bad.validate(), UsageError);
}

TEST(Circuit, RewriteRules) {
  SwapOracleFamily fam(SeedPath(14));
  Oracles o{&fam, nullptr};
  PriCandidate cand = make_toy_candidate(3, 0, 1, 1, 3, CallKind::Swap, {}, SeedPath(15));
  const OracleCircuit& circ = cand.circuits[0];
  ASSERT_EQ(circ.query_count(), 3);
  Replacements rep;
  rep.swap_exact[1] = swap_oracle_dense(fam, 1).matrix();
  rep.swap_estimate[1] = rep.swap_exact[1];
  OracleCircuit same = rewrite_surrogate(circ, 4, rep, RewriteMode::Surrogate);
  EXPECT_TRUE(same.oracle_free());
  EXPECT_LT(diamond_distance_unitary(circuit_unitary(same, {}), circuit_unitary(circ, o)), 1e-7);
  OracleCircuit none = rewrite_surrogate(circ, 0, rep, RewriteMode::Surrogate);
  EXPECT_EQ(none.steps.size(), circ.steps.size() - 3);

  // per-call error eps gives at most T * eps between surrogate and exact-small
  Engine g(16);
  CMatrix h = CMatrix::Zero(8, 8);
  for (Index i = 0; i < 8; ++i) h(i, i) = std::polar(1.0, 0.01 * std_normal(g));
  rep.swap_estimate[1] = rep.swap_exact[1] * h;
  double eps = diamond_distance_unitary(UnitaryMatrix::unchecked(rep.swap_estimate[1]),
                                        UnitaryMatrix::unchecked(rep.swap_exact[1]));
  double dist = diamond_distance_unitary(circuit_unitary(rewrite_surrogate(circ, 4, rep, RewriteMode::Surrogate), {}),
                                         circuit_unitary(rewrite_surrogate(circ, 4, rep, RewriteMode::ExactSmall), {}));
  EXPECT_LE(dist, 3 * eps + 1e-9);
}

TEST(Candidate, ToyShapes) {
  PriCandidate c = make_toy_candidate(2, 1, 1, 3, 2, CallKind::Swap, {}, SeedPath(17));
  EXPECT_EQ(c.total_qubits(), 4);
  EXPECT_EQ(c.output_qubits(), 3);
  EXPECT_EQ(c.keys.size(), 3u);
  EXPECT_EQ(c.max_queries(), 2);
  PriCandidate none = make_toy_candidate(2, 0, 0, 2, 3, CallKind::Swap, {}, SeedPath(18));
  EXPECT_EQ(none.max_queries(), 0);  // no swap call fits two wires
  PruCandidate pru = make_toy_pru(3, 0, 2, 2, SeedPath(19));
  EXPECT_EQ(pru.max_queries(), 2);
  EXPECT_THROW(make_toy_candidate(6, 4, 4, 1, 1, CallKind::Swap, {}, SeedPath(20)), SizingError);
  SwapOracleFamily fam(SeedPath(21));
  EXPECT_GE(ancilla_defect(c, Oracles{&fam, nullptr}, 2, SeedPath(22)), 0.0);
  EXPECT_EQ(ancilla_defect(none, Oracles{&fam, nullptr}, 2, SeedPath(22)), 0.0);
}
