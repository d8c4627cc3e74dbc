#include <gtest/gtest.h>

#include <cmath>

#include "eegsim/filters.hpp"
#include "test_support.hpp"

using namespace eegsim;
using eegsim::testkit::random_instance;
using eegsim::testkit::random_spd;

namespace {

Matrix diag3(double a, double b, double c) { return Vector(Eigen::Vector3d(a, b, c)).asDiagonal(); }

double output_power(const Matrix& w, const Matrix& r) { return (w * r * w.transpose()).trace(); }

}  // namespace

TEST(Lcmv, SquareLeadfieldGivesInverse) {
  Rng rng(1);
  const Matrix h = rng.normal_matrix(4, 4);
  const SpatialFilter f = lcmv(h, random_spd(4, rng));
  EXPECT_LT((f.W - h.inverse()).norm(), 1e-9);
}

TEST(Lcmv, OrthonormalLeadfieldWhiteCovarianceGivesTranspose) {
  Rng rng(2);
  const Matrix q = Eigen::HouseholderQR<Matrix>(rng.normal_matrix(6, 3)).householderQ() * Matrix::Identity(6, 3);
  const SpatialFilter f = lcmv(q, Matrix::Identity(6, 6));
  EXPECT_LT((f.W - q.transpose()).norm(), 1e-12);
}

TEST(Lcmv, UnitGainAndMinimumVariance) {
  Rng rng(3);
  const auto inst = random_instance(32, 5, 3, rng);
  const SpatialFilter f = lcmv(inst.lf.H_f, inst.cov.R);
  EXPECT_LE(f.constraint_residual, 1e-8);
  const double best = output_power(f.W, inst.cov.R);
  const Matrix h_pinv = linalg::pinv(inst.lf.H_f);
  const Matrix proj = Matrix::Identity(32, 32) - inst.lf.H_f * h_pinv;
  for (int t = 0; t < 100; ++t) {
    // any other left inverse: pinv(H) + Z (I - H pinv(H))
    const Matrix other = h_pinv + rng.normal_matrix(5, 32) * proj;
    ASSERT_LT((other * inst.lf.H_f - Matrix::Identity(5, 5)).norm(), 1e-8);
    EXPECT_GE(output_power(other, inst.cov.R), best - 1e-10);
  }
}

TEST(Lcmv, RankDeficientLeadfieldRejected) {
  Rng rng(4);
  Matrix h = rng.normal_matrix(8, 3);
  h.col(2) = h.col(0);
  EXPECT_THROW(lcmv(h, random_spd(8, rng)), RankDeficientLeadfield);
}

TEST(Nulling, UnitGainAndNulls) {
  Rng rng(5);
  const auto inst = random_instance(32, 5, 3, rng);
  const SpatialFilter f = nulling(inst.lf.H_c, inst.cov.R, 5);
  EXPECT_LE((f.W * inst.lf.H_f - Matrix::Identity(5, 5)).norm(), 1e-8);
  EXPECT_LE((f.W * inst.lf.Hi_f).norm(), 1e-8);
}

TEST(Nulling, WithoutInterferenceEqualsLcmv) {
  Rng rng(6);
  const auto inst = random_instance(20, 4, 0, rng);
  const SpatialFilter nl = nulling(inst.lf.H_c, inst.cov.R, 4);
  const SpatialFilter lc = lcmv(inst.lf.H_f, inst.cov.R);
  EXPECT_LT((nl.W - lc.W).norm(), 1e-10 * lc.W.norm());
}

TEST(Nulling, SquareCompositeGivesInverseRows) {
  Rng rng(7);
  const Matrix hc = rng.normal_matrix(5, 5);
  const SpatialFilter f = nulling(hc, random_spd(5, rng), 3);
  EXPECT_LT((f.W - hc.inverse().topRows(3)).norm(), 1e-9);
}

TEST(Wiener, ZeroSourcePowerGivesZeroFilter) {
  Rng rng(8);
  auto inst = random_instance(10, 3, 2, rng);
  inst.cov.Q.setZero();
  inst.cov.Q_cross.setZero();
  EXPECT_EQ(wiener(inst.cov, inst.lf, WienerVariant::InterferenceFree).W, Matrix::Zero(3, 10));
  EXPECT_EQ(wiener(inst.cov, inst.lf, WienerVariant::WithInterference).W, Matrix::Zero(3, 10));
}

TEST(Wiener, ScalarCase) {
  const double h = 2.0, q = 3.0, n = 0.5;
  LeadfieldSet lf;
  lf.H_f = Matrix::Constant(1, 1, h);
  lf.Hi_f = Matrix(1, 0);
  lf.H_c = lf.H_f;
  CovarianceSet cov;
  cov.R = Matrix::Constant(1, 1, h * h * q + n);
  cov.Q = Matrix::Constant(1, 1, q);
  cov.Q_cross = cov.Q;
  const SpatialFilter f = wiener(cov, lf, WienerVariant::InterferenceFree);
  EXPECT_NEAR(f.W(0, 0), q * h / (h * h * q + n), 1e-15);
  // with no interference both variants agree
  EXPECT_NEAR(wiener(cov, lf, WienerVariant::WithInterference).W(0, 0), f.W(0, 0), 1e-15);
}

TEST(ZeroForcing, KnownExamples) {
  Matrix h(3, 2);
  h << 2, 0, 0, 1, 0, 0;
  Matrix want(2, 3);
  want << 0.5, 0, 0, 0, 1, 0;
  EXPECT_LT((zero_forcing(h).W - want).norm(), 1e-15);
  Rng rng(9);
  const Matrix sq = rng.normal_matrix(4, 4);
  EXPECT_LT((zero_forcing(sq).W - sq.inverse()).norm(), 1e-9);
}

TEST(EigLcmv, FullSignalDimensionEqualsBase) {
  Rng rng(10);
  const auto inst = random_instance(12, 3, 2, rng);
  const SpatialFilter base = lcmv(inst.lf.H_f, inst.cov.R);
  EXPECT_LT((eig_lcmv(base, inst.cov.R, 12, inst.lf.H_f).W - base.W).norm(), 1e-10);
  EXPECT_THROW(eig_lcmv(base, inst.cov.R, 0, inst.lf.H_f), InvalidValue);
}

TEST(EigLcmv, ProjectsOntoDominantEigenvectors) {
  const Matrix h = Matrix::Identity(3, 3);
  const Matrix r = diag3(3, 2, 1);
  const SpatialFilter base = lcmv(h, r);
  const SpatialFilter f = eig_lcmv(base, r, 2, h);
  EXPECT_LT((f.W - diag3(1, 1, 0)).norm(), 1e-12);
  EXPECT_EQ(f.spec.kind, FilterKind::EIG_LCMV_R);
  EXPECT_EQ(eig_lcmv(base, Matrix::Identity(3, 3), 2, h).W,
            eig_lcmv(base, Matrix::Identity(3, 3), 2, h).W);
}

TEST(MvPure, FullRankIsDegenerate) {
  Rng rng(11);
  const auto inst = random_instance(32, 5, 3, rng);
  const SpatialFilter r = lcmv(inst.lf.H_f, inst.cov.R, FilterKind::LCMV_R);
  const SpatialFilter n = lcmv(inst.lf.H_f, inst.cov.N, FilterKind::LCMV_N);
  const SpatialFilter nl = nulling(inst.lf.H_c, inst.cov.R, 5);
  for (int v = 1; v <= 3; ++v) {
    const Matrix& paired = v == 3 ? n.W : r.W;
    EXPECT_LT((mv_pure(r, n, nl, inst.cov, MvPureFamily::F, v, 5, inst.lf.H_f).W - paired).norm(), 1e-8);
    EXPECT_LT((mv_pure(r, n, nl, inst.cov, MvPureFamily::I, v, 5, inst.lf.H_f).W - nl.W).norm(), 1e-8);
  }
}

TEST(MvPure, ReducedRank) {
  Rng rng(12);
  const auto inst = random_instance(32, 5, 3, rng);
  const SpatialFilter r = lcmv(inst.lf.H_f, inst.cov.R, FilterKind::LCMV_R);
  const SpatialFilter n = lcmv(inst.lf.H_f, inst.cov.N, FilterKind::LCMV_N);
  const SpatialFilter nl = nulling(inst.lf.H_c, inst.cov.R, 5);
  for (Eigen::Index rank = 1; rank < 5; ++rank) {
    const SpatialFilter f = mv_pure(r, n, nl, inst.cov, MvPureFamily::I, 1, rank, inst.lf.H_f);
    EXPECT_LE(f.numerical_rank, rank);
    EXPECT_EQ(f.spec.kind, FilterKind::MVP_I_1);
    EXPECT_EQ(f.spec.rank, rank);
  }
  EXPECT_THROW(mv_pure(r, n, nl, inst.cov, MvPureFamily::F, 2, 6, inst.lf.H_f), InvalidValue);
  EXPECT_THROW(mv_pure(r, n, nl, inst.cov, MvPureFamily::F, 4, 2, inst.lf.H_f), InvalidValue);
}

TEST(MvPure, ProjectsOntoSmallestEigenvectors) {
  // H = I and R = diag(5, 3, 1): W_R R W_R^t = diag(5, 3, 1)
  const Matrix h = Matrix::Identity(3, 3);
  CovarianceSet cov;
  cov.R = diag3(5, 3, 1);
  cov.N = Matrix::Identity(3, 3);
  cov.Q = Matrix::Identity(3, 3);
  const SpatialFilter r = lcmv(h, cov.R, FilterKind::LCMV_R);
  const SpatialFilter n = lcmv(h, cov.N, FilterKind::LCMV_N);
  const SpatialFilter f = mv_pure(r, n, r, cov, MvPureFamily::F, 2, 1, h);
  EXPECT_LT((f.W - diag3(0, 0, 1)).norm(), 1e-12);
  const Matrix p = f.W * f.W;
  EXPECT_LT((p - f.W).norm(), 1e-12);
}

TEST(Randn, DeterministicAndScaled) {
  Rng a(13), b(13), c(14);
  const SpatialFilter fa = randn_baseline(3, 400, a);
  EXPECT_EQ(fa.W, randn_baseline(3, 400, b).W);
  EXPECT_NE(fa.W, randn_baseline(3, 400, c).W);
  EXPECT_NEAR(fa.W.mean(), 0.0, 0.01);
  EXPECT_NEAR(fa.W.squaredNorm() / 1200.0, 1.0 / 400.0, 0.2 / 400.0);
}

TEST(Reconstruct, ShapesAndNoiselessRecovery) {
  Rng rng(15);
  const Matrix h = rng.normal_matrix(16, 3);
  const Matrix q = rng.normal_matrix(3, 50);
  const SpatialFilter f = lcmv(h, random_spd(16, rng));
  EXPECT_LT((reconstruct(f, h * q) - q).norm(), 1e-9 * q.norm());
  SpatialFilter zero = f;
  zero.W.setZero();
  EXPECT_EQ(reconstruct(zero, h * q), Matrix::Zero(3, 50));
  EXPECT_THROW(reconstruct(f, Matrix::Zero(15, 50)), ShapeMismatch);
}

TEST(FilterSpecs, ParseAndName) {
  EXPECT_EQ(parse_filter_spec("LCMV_R").kind, FilterKind::LCMV_R);
  const FilterSpec s = parse_filter_spec("MVP_I_1_r2");
  EXPECT_EQ(s.kind, FilterKind::MVP_I_1);
  EXPECT_EQ(s.rank, 2);
  EXPECT_EQ(s.name(), "MVP_I_1_r2");
  EXPECT_THROW(parse_filter_spec("LCMV_X"), InvalidValue);
  EXPECT_THROW(parse_filter_spec("ZF_r2"), InvalidValue);
  EXPECT_EQ(all_filter_specs().size(), 15u);
}

TEST(FilterBank, BuildsRequestedFiltersInOrder) {
  Rng rng(16);
  const auto inst = random_instance(32, 5, 3, rng);
  std::vector<FilterSpec> specs = all_filter_specs();
  specs.push_back(parse_filter_spec("MVP_F_3_r2"));
  const auto filters = build_filters(specs, inst.cov, inst.lf, {}, rng);
  ASSERT_EQ(filters.size(), specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    EXPECT_EQ(filters[i].spec.kind, specs[i].kind);
    EXPECT_EQ(filters[i].W.rows(), 5);
    EXPECT_EQ(filters[i].W.cols(), 32);
  }
  EXPECT_EQ(filters.back().spec.rank, 2);
  // default MV-PURE rank is l - 1
  EXPECT_EQ(filters[9].spec.rank, 4);
}

TEST(FilterBank, RandomBaselineTrailsLcmv) {
  // noiseless recovery ability, averaged over seeds
  double lcmv_err = 0.0, randn_err = 0.0;
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(static_cast<std::uint64_t>(100 + seed));
    const auto inst = random_instance(32, 5, 3, rng);
    const Matrix q = rng.normal_matrix(5, 200);
    const Matrix y = inst.lf.H_f * q + 0.1 * rng.normal_matrix(32, 200);
    lcmv_err += (reconstruct(lcmv(inst.lf.H_f, inst.cov.R), y) - q).norm() / q.norm();
    randn_err += (reconstruct(randn_baseline(5, 32, rng), y) - q).norm() / q.norm();
  }
  EXPECT_LT(lcmv_err, randn_err);
}
