#include <gtest/gtest.h>

#include "osep/haar.hpp"

using namespace osep;

namespace {

CMatrix pauli_x() {
  CMatrix x(2, 2);
  x << 0, 1, 1, 0;
  return x;
}

CMatrix swap2(Index d) { return permutation_operator({1, 0}, d, 2).matrix(); }

CMatrix ginibre(Index n, Engine& g) {
  CMatrix m(n, n);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = complex_normal(g);
  return m;
}

}  // namespace

// ---- seeds -------------------------------------------------------------------

TEST(SeedPath, SamePathSameDraws) {
  SeedPath a = SeedPath(3).child("x", 1).child("y", 2);
  SeedPath b = SeedPath(3).child("x", 1).child("y", 2);
  Engine ga = make_engine(a), gb = make_engine(b);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(ga(), gb());
  EXPECT_NE(a.derive(), SeedPath(3).child("x", 2).child("y", 1).derive());
  EXPECT_EQ(a.str(), "3/x=1/y=2");
}

TEST(SeedPath, OrderOfOtherPathsIrrelevant) {
  SeedPath root(9);
  UnitaryMatrix u1 = sample_haar_unitary(4, root.child("u", 1));
  sample_haar_unitary(4, root.child("u", 2));
  UnitaryMatrix again = sample_haar_unitary(4, root.child("u", 1));
  EXPECT_EQ((u1.matrix() - again.matrix()).cwiseAbs().maxCoeff(), 0.0);
}

// ---- types --------------------------------------------------------------------

TEST(Types, ValidationRejectsBadInputs) {
  EXPECT_THROW(UnitaryMatrix(CMatrix::Ones(2, 2)), NumericError);
  EXPECT_THROW(PureState(CVector::Ones(2)), NumericError);
  CMatrix neg = CMatrix::Zero(2, 2);
  neg(0, 0) = 1.5;
  neg(1, 1) = -0.5;
  EXPECT_THROW(DensityMatrix{neg}, NumericError);
  CMatrix nan = CMatrix::Identity(2, 2);
  nan(0, 1) = NAN;
  EXPECT_THROW(UnitaryMatrix{nan}, NumericError);
  EXPECT_NO_THROW(DensityMatrix(CMatrix::Identity(4, 4) / 4.0));
}

TEST(Tensor, Basics) {
  EXPECT_TRUE(tensor(CMatrix(CMatrix::Identity(2, 2)), CMatrix(CMatrix::Identity(2, 2))).isIdentity());
  CVector v = tensor(pauli_x(), CMatrix(CMatrix::Identity(2, 2))) * PureState::basis(4, 0).amplitudes();
  EXPECT_NEAR(std::abs(v(2)), 1.0, 1e-15);  // |00> -> |10>
  Engine g(1);
  for (int i = 0; i < 5; ++i) {
    CMatrix a = ginibre(3, g), b = ginibre(3, g);
    EXPECT_NEAR(std::abs(tensor(a, b).trace() - a.trace() * b.trace()), 0.0, 1e-10);
  }
}

TEST(PartialTrace, MaxEntangledAndProducts) {
  DensityMatrix omega = DensityMatrix::from_pure(max_entangled(4));
  DensityMatrix marg = partial_trace(omega, {2, 2}, {0});
  EXPECT_LT((marg.matrix() - CMatrix::Identity(4, 4) / 4.0).norm(), 1e-12);
  Engine g(2);
  DensityMatrix ra = random_density(2, 2, g), rb = random_density(4, 3, g);
  DensityMatrix prod = DensityMatrix::unchecked(tensor(ra.matrix(), rb.matrix()));
  EXPECT_LT((partial_trace(prod, {1, 2}, {0}).matrix() - ra.matrix()).norm(), 1e-12);
  EXPECT_LT((partial_trace(prod, {1, 2}, {1}).matrix() - rb.matrix()).norm(), 1e-12);
}

TEST(PartialTrace, MatchesKrausSum) {
  Engine g(3);
  UnitaryMatrix w = sample_haar_unitary(8, g);
  CVector out = w.matrix().col(0);  // system 1 qubit, environment 2 qubits
  DensityMatrix full = DensityMatrix::from_pure(PureState::unchecked(out));
  CMatrix reduced = partial_trace(full, {1, 2}, {0}).matrix();
  CMatrix kraus = CMatrix::Zero(2, 2);
  for (Index e = 0; e < 4; ++e) {
    CVector k(2);
    k << out(e), out(4 + e);
    kraus += k * k.adjoint();
  }
  EXPECT_LT((reduced - kraus).norm(), 1e-12);
  EXPECT_NEAR(reduced.trace().real(), 1.0, 1e-12);
}

TEST(Norms, SchattenAndTraceDistance) {
  EXPECT_NEAR(schatten_norm(CMatrix::Identity(4, 4), 1), 4.0, 1e-12);
  CMatrix e01 = CMatrix::Zero(2, 2);
  e01(0, 1) = 1;
  EXPECT_NEAR(schatten_norm(e01, 2), 1.0, 1e-12);
  EXPECT_THROW(schatten_norm(e01, 3), UsageError);
  CMatrix z = PureState::basis(2, 0).projector(), o = PureState::basis(2, 1).projector();
  CVector plus = CVector::Ones(2) / std::sqrt(2.0);
  EXPECT_NEAR(trace_distance(z, z), 0.0, 1e-12);
  EXPECT_NEAR(trace_distance(z, o), 1.0, 1e-12);
  EXPECT_NEAR(trace_distance(z, CMatrix(plus * plus.adjoint())), std::sqrt(0.5), 1e-12);
  EXPECT_NEAR(pure_trace_distance(PureState::basis(2, 0).amplitudes(), plus), std::sqrt(0.5), 1e-12);
}

TEST(Norms, HolderOnRandomPairs) {
  Engine g(4);
  for (int i = 0; i < 20; ++i) {
    CMatrix a = ginibre(4, g), b = ginibre(4, g);
    EXPECT_LE(schatten_norm(a * b, 1), schatten_norm(a, 1) * schatten_norm(b, INFINITY) + 1e-10);
  }
}

TEST(MaxEntangled, Structure) {
  CVector w = max_entangled(2).amplitudes();
  EXPECT_NEAR(w(0).real(), 1 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(w(3).real(), 1 / std::sqrt(2.0), 1e-15);
  Engine g(5);
  CMatrix a = ginibre(4, g);
  CVector v = tensor(a, CMatrix(CMatrix::Identity(4, 4))) * max_entangled(4).amplitudes();
  EXPECT_NEAR(v.squaredNorm(), (a.adjoint() * a).trace().real() / 4.0, 1e-10);
}

TEST(Permutations, OperatorsCompose) {
  EXPECT_TRUE(permutation_operator({0, 1, 2}, 2, 3).matrix().isIdentity());
  CMatrix sw = CMatrix::Zero(4, 4);
  sw(0, 0) = sw(3, 3) = sw(1, 2) = sw(2, 1) = 1;
  EXPECT_LT((swap2(2) - sw).norm(), 1e-15);
  auto perms = all_permutations(3);
  for (const auto& p : perms)
    for (const auto& q : perms) {
      CMatrix lhs = permutation_operator(p, 2, 3).matrix() * permutation_operator(q, 2, 3).matrix();
      EXPECT_LT((lhs - permutation_operator(perm_compose(p, q), 2, 3).matrix()).norm(), 1e-12);
    }
}

TEST(SymProjector, Traces) {
  CMatrix p = sym_projector(2, 2);
  EXPECT_LT((p - 0.5 * (CMatrix::Identity(4, 4) + swap2(2))).norm(), 1e-12);
  EXPECT_NEAR(p.trace().real(), 3.0, 1e-12);
  EXPECT_TRUE(sym_projector(3, 1).isIdentity(1e-12));
  EXPECT_NEAR(sym_projector(2, 3).trace().real(), 4.0, 1e-12);
  EXPECT_NEAR(binomial(5, 2), 10.0, 0);
}

TEST(Diamond, UnitaryHull) {
  Engine g(6);
  UnitaryMatrix u = sample_haar_unitary(4, g);
  EXPECT_NEAR(diamond_distance_unitary(u, u), 0.0, 1e-7);
  UnitaryMatrix ph = UnitaryMatrix::unchecked(CMatrix::Identity(2, 2) * std::polar(1.0, 0.7));
  EXPECT_NEAR(diamond_distance_unitary(UnitaryMatrix::identity(2), ph), 0.0, 1e-7);
  CMatrix z = CMatrix::Identity(2, 2);
  z(1, 1) = -1;
  EXPECT_NEAR(diamond_distance_unitary(UnitaryMatrix::identity(2), UnitaryMatrix(z)), 2.0, 1e-12);
}

TEST(Diamond, LowerBoundBelowExact) {
  Engine g(7);
  UnitaryMatrix u = sample_haar_unitary(2, g), v = sample_haar_unitary(2, g);
  double exact = diamond_distance_unitary(u, v);
  Engine r1(8), r2(8);
  double lb10 = diamond_distance_lb(ChannelRep::unitary(u), ChannelRep::unitary(v), 10, r1);
  double lb50 = diamond_distance_lb(ChannelRep::unitary(u), ChannelRep::unitary(v), 50, r2);
  EXPECT_LE(lb10, exact + 1e-9);
  EXPECT_LE(lb50, exact + 1e-9);
  EXPECT_GE(lb50, lb10 - 1e-12);
  Engine r3(9);
  EXPECT_NEAR(diamond_distance_lb(ChannelRep::unitary(u), ChannelRep::unitary(u), 10, r3), 0.0, 1e-12);
}

TEST(SupportProjector, Cases) {
  Engine g(10);
  PureState psi = sample_haar_state(4, g);
  EXPECT_LT((support_projector(psi.projector()) - psi.projector()).norm(), 1e-10);
  EXPECT_TRUE(support_projector(CMatrix::Identity(4, 4) / 4.0).isIdentity(1e-10));
  CMatrix half = CMatrix::Zero(4, 4);
  half(0, 0) = half(1, 1) = 0.5;
  EXPECT_NEAR(support_projector(half).trace().real(), 2.0, 1e-10);
}

TEST(Gentle, TrivialAndRandomCases) {
  Engine g(11);
  DensityMatrix rho = random_density(4, 2, g);
  EXPECT_NEAR(gentle_residual(CMatrix::Identity(4, 4), rho).distance, 0.0, 1e-7);
  EXPECT_NEAR(gentle_residual(support_projector(rho.matrix()), rho).distance, 0.0, 1e-7);
  for (int i = 0; i < 20; ++i) {
    DensityMatrix r = random_density(4, 4, g);
    PureState v = sample_haar_state(4, g);
    GentleResult res = gentle_residual(CMatrix::Identity(4, 4) - v.projector(), r);
    EXPECT_LE(res.distance, std::sqrt(1 - res.accept) + 1e-12);
  }
}

TEST(LowRank, SpectrumAndTraceNorm) {
  Engine g(12);
  LowRankState a, b;
  a.factors = ginibre(8, g).leftCols(2) / 4.0;
  b.factors = ginibre(8, g).leftCols(3) / 4.0;
  auto sp = a.spectrum();
  EXPECT_EQ(sp.values.size(), 2);
  EXPECT_NEAR(sp.values.sum(), a.trace(), 1e-12);
  double dense = trace_norm_hermitian(a.dense() - b.dense());
  EXPECT_NEAR(trace_norm_difference(a, b), dense, 1e-10);
}

// ---- Haar sampling and moments -----------------------------------------------------

TEST(Haar, UnitaryAndDeterministic) {
  UnitaryMatrix u = sample_haar_unitary(8, SeedPath(1));
  EXPECT_LE(unitarity_residual(u.matrix()), 1e-10);
  EXPECT_EQ((u.matrix() - sample_haar_unitary(8, SeedPath(1)).matrix()).cwiseAbs().maxCoeff(), 0.0);
  PureState s = sample_haar_state(8, SeedPath(2));
  EXPECT_NEAR(s.amplitudes().norm(), 1.0, 1e-10);
}

TEST(Haar, FirstMoments) {
  CMatrix acc = CMatrix::Zero(4, 4);
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    CVector c = sample_haar_unitary(4, SeedPath(3).child("u", i)).matrix().col(0);
    acc += c * c.adjoint();
  }
  EXPECT_LT(trace_distance(CMatrix(acc / n), CMatrix(CMatrix::Identity(4, 4) / 4.0)), 0.02);
  std::vector<double> ov;
  for (int i = 0; i < n; ++i)
    ov.push_back(std::norm(sample_haar_state(8, SeedPath(4).child("a", i))
                               .amplitudes()
                               .dot(sample_haar_state(8, SeedPath(4).child("b", i)).amplitudes())));
  double mean = std::accumulate(ov.begin(), ov.end(), 0.0) / n, var = 0;
  for (double x : ov) var += (x - mean) * (x - mean);
  double se = std::sqrt(var / (n - 1) / n);
  EXPECT_NEAR(mean, 1.0 / 8, 3 * se);
}

TEST(Haar, StateMomentExact) {
  EXPECT_LT((state_moment_exact(2, 2).matrix() - (CMatrix::Identity(4, 4) + swap2(2)) / 6.0).norm(), 1e-12);
  EXPECT_TRUE((state_moment_exact(3, 1).matrix() * 3.0).isIdentity(1e-12));
}

TEST(Twirl, ExactProperties) {
  Engine g(13);
  DensityMatrix rho = random_density(3, 3, g);
  EXPECT_LT((twirl_exact(rho, 3, 1).matrix() - CMatrix::Identity(3, 3) / 3.0).norm(), 1e-10);
  DensityMatrix r2 = random_density(9, 9, g);
  CMatrix t = twirl_exact(r2, 3, 2).matrix();
  // lies in span{I, SWAP}
  CMatrix sw = swap2(3);
  Eigen::Matrix2cd gram;
  gram << 9.0, sw.trace(), sw.trace(), 9.0;
  Eigen::Vector2cd rhs(t.trace(), (sw * t).trace());
  Eigen::Vector2cd coef = gram.lu().solve(rhs);
  EXPECT_LT((t - coef(0) * CMatrix::Identity(9, 9) - coef(1) * sw).norm(), 1e-8);
  EXPECT_NEAR(t.trace().real(), 1.0, 1e-10);
}

TEST(Twirl, MonteCarloAgreesWithExact) {
  Engine g(14);
  DensityMatrix rho = random_density(4, 4, g);
  DensityMatrix mc = twirl_mc(rho, 2, 2, 10000, SeedPath(15));
  EXPECT_LT((mc.matrix() - twirl_exact(rho, 2, 2).matrix()).cwiseAbs().maxCoeff(), 0.02);
  DensityMatrix r3 = random_density(9, 9, g);
  EXPECT_LT(trace_distance(twirl_mc(r3, 3, 2, 4000, SeedPath(16)), twirl_exact(r3, 3, 2)), 0.05);
  // ell = 1 with a bystander: I/d (x) marginal
  DensityMatrix rb = random_density(4, 4, g);
  CMatrix want = tensor(CMatrix(CMatrix::Identity(2, 2) / 2.0), partial_trace(rb, {1, 1}, {1}).matrix());
  EXPECT_LT(trace_distance(twirl_mc(rb, 2, 1, 4000, SeedPath(17)).matrix(), want), 0.05);
}

TEST(Twirl, EnsembleBasics) {
  Engine g(18);
  DensityMatrix rho = random_density(4, 4, g);
  UnitaryMatrix u = sample_haar_unitary(2, g);
  CMatrix uu = tensor(u.matrix(), u.matrix());
  EXPECT_LT((ensemble_twirl({u}, 2, rho).matrix() - uu * rho.matrix() * uu.adjoint()).norm(), 1e-12);
  auto id = UnitaryMatrix::identity(2);
  EXPECT_LT((ensemble_twirl({id, id}, 2, rho).matrix() - rho.matrix()).norm(), 1e-12);
  std::vector<UnitaryMatrix> us;
  for (int i = 0; i < 5; ++i) us.push_back(sample_haar_unitary(2, g));
  CMatrix t = ensemble_twirl(us, 2, rho).matrix();
  EXPECT_LT(hermitian_defect(t), 1e-12);
  EXPECT_NEAR(t.trace().real(), 1.0, 1e-12);
}

TEST(HaarChoi, SmallCases) {
  EXPECT_LT((haar_choi(1, 1).matrix() - CMatrix::Identity(4, 4) / 4.0).norm(), 1e-10);
  CMatrix h = haar_choi(2, 2).matrix();
  EXPECT_NEAR(h.trace().real(), 1.0, 1e-10);
  EXPECT_LT(hermitian_defect(h), 1e-10);
  EXPECT_GT(hermitian_eigenvalues(h).minCoeff(), -1e-10);
  EXPECT_LT((haar_isometry_choi(2, 0, 2).matrix() - h).norm(), 1e-12);
  CMatrix hi = haar_isometry_choi(1, 1, 2).matrix();
  EXPECT_NEAR(hi.trace().real(), 1.0, 1e-10);
  EXPECT_LT(hermitian_defect(hi), 1e-10);
}

TEST(HaarChoi, RatesCalibrated) {
  double l212 = trace_distance(haar_choi(2, 2).matrix(), moment_choi_expansion(4, 4, 2).dense());
  EXPECT_LE(l212 / (4.0 / 4), 4.0);
  EXPECT_NEAR(haar_moment_distance(2, 0, 2), l212, 1e-10);
  double l611 = trace_distance(haar_isometry_choi(1, 1, 2).matrix(), moment_choi_expansion(4, 2, 2).dense());
  EXPECT_LE(l611 / (4.0 / 4), 4.0);
  EXPECT_NEAR(haar_moment_distance(1, 1, 2), l611, 1e-10);
  // closed form used above the dense cutoff agrees with the dense value where both apply
  EXPECT_NEAR((two_copy_haar_choi(4, 4) - two_copy_moment(4, 4)).trace_norm() / 2, l212, 1e-10);
}

TEST(TwirlApprox, RateAndTrace) {
  Engine g(19);
  DensityMatrix rho = random_density(16, 16, g);
  DensityMatrix approx = twirl_permutation_approx(rho, 2, 2);
  // the permutation sum is only trace preserving up to the same rate
  EXPECT_LE(std::abs(approx.matrix().trace().real() - 1.0), 4.0 / 4);
  DensityMatrix sym = DensityMatrix::unchecked(tensor(state_moment_exact(4, 2).matrix(), CMatrix(CMatrix::Identity(1, 1))));
  EXPECT_NEAR(twirl_permutation_approx(sym, 2, 2).matrix().trace().real(), 1.0 + 1.0 / 4, 1e-10);
  EXPECT_LE(trace_distance(approx, twirl_exact(rho, 4, 2)) / (4.0 / 4), 4.0);
  DensityMatrix r1 = random_density(8, 8, g);
  CMatrix want = tensor(CMatrix(CMatrix::Identity(4, 4) / 4.0), partial_trace(r1, {2, 1}, {1}).matrix());
  EXPECT_LT((twirl_permutation_approx(r1, 2, 1).matrix() - want).norm(), 1e-12);
}

TEST(Budget, SizingFaults) {
  EXPECT_THROW(check_twirl_size(64, 3, "test"), SizingError);
  EXPECT_THROW(haar_isometry_choi_expansion(4, 0, 2), SizingError);
  EXPECT_THROW(twirl_exact(DensityMatrix::maximally_mixed(2), 2, 0), UsageError);
}
