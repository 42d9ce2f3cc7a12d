#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "support/convert.hpp"
#include "support/oracles.hpp"
#include "w2s/error.hpp"
#include "w2s/losses.hpp"

namespace w2s {
namespace {

using testing::to_matrix;
using testing::to_oracle;

PrototypeMatrix protos(std::initializer_list<std::vector<double>> rows) {
  const std::size_t d = rows.begin()->size();
  std::vector<double> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return PrototypeMatrix(Matrix(rows.size(), d, std::move(flat)));
}

// Random well-conditioned instance: unit-scale Gaussian entries.
struct Instance {
  oracle::Mat c, batch, zw;
  double tau;
};

Instance random_instance(std::mt19937_64& gen, std::size_t k, std::size_t d, std::size_t n,
                         double tau) {
  return {oracle::random_mat(k, d, gen), oracle::random_mat(n, d, gen),
          oracle::random_mat(n, k, gen, 2.0), tau};
}

// --- types -----------------------------------------------------------------------

TEST(TypesTest, TemperatureMustBePositive) {
  EXPECT_THROW(Temperature(0.0), DomainError);
  EXPECT_THROW(Temperature(-1.0), DomainError);
  EXPECT_THROW(Temperature(std::nan("")), DomainError);
  EXPECT_DOUBLE_EQ(Temperature().value(), 2.0);
}

TEST(TypesTest, PrototypeMatrixRejectsZeroRowAndNamesIt) {
  try {
    protos({{1, 0}, {0, 0}, {0, 1}});
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_EQ(e.index(), 1u);
  }
  EXPECT_THROW(protos({{1, 0}}), DomainError);  // k < 2
}

TEST(TypesTest, EmbeddingMatrixRejectsNonFinite) {
  EXPECT_THROW(EmbeddingMatrix(Matrix(1, 2, {1.0, INFINITY})), DomainError);
  EXPECT_THROW(EmbeddingMatrix(Matrix(0, 2)), DomainError);
}

// --- cosine_logits ---------------------------------------------------------------

TEST(CosineLogitsTest, OrthonormalAxes) {
  const auto z = cosine_logits(protos({{1, 0}, {0, 1}}), std::vector<double>{1, 0});
  EXPECT_DOUBLE_EQ(z[0], 1.0);
  EXPECT_DOUBLE_EQ(z[1], 0.0);
}

TEST(CosineLogitsTest, ScaledPrototypeGivesOne) {
  const auto c = protos({{0.3, -1.7, 2.2}, {1, 1, 1}});
  const std::vector<double> r{1.5, -8.5, 11.0};  // 5 * row 0
  EXPECT_DOUBLE_EQ(cosine_logits(c, r)[0], 1.0);
}

TEST(CosineLogitsTest, HandArithmetic) {
  const auto z = cosine_logits(protos({{3, 4}, {1, 0}}), std::vector<double>{4, 3});
  EXPECT_NEAR(z[0], 0.96, 1e-15);
}

TEST(CosineLogitsTest, ZeroEmbeddingIsDomainError) {
  const auto c = protos({{1, 0}, {0, 1}});
  EXPECT_THROW(cosine_logits(c, std::vector<double>{0, 0}), DomainError);
  EXPECT_THROW(cosine_logits(c, std::vector<double>{1, 0, 0}), ShapeError);
}

TEST(CosineLogitsTest, BatchReportsOffendingSample) {
  const auto c = protos({{1, 0}, {0, 1}});
  // EmbeddingMatrix accepts zero rows; the cosine head does not.
  const EmbeddingMatrix x(Matrix(3, 2, {1, 0, 0, 0, 0, 1}));
  try {
    cosine_logits(c, x);
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_EQ(e.index(), 1u);
  }
}

TEST(CosineLogitsTest, BoundedAndScaleInvariant) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = PrototypeMatrix(to_matrix(oracle::random_mat(5, 7, gen)));
    const auto r = to_matrix(oracle::random_mat(1, 7, gen));
    const auto z = cosine_logits(c, r.row(0));
    std::vector<double> scaled(r.row(0).begin(), r.row(0).end());
    const double s = scale(gen);
    for (double& v : scaled) v *= s;
    const auto zs = cosine_logits(c, scaled);
    for (std::size_t j = 0; j < z.size(); ++j) {
      EXPECT_LE(std::abs(z[j]), 1.0);
      EXPECT_NEAR(z[j], zs[j], 1e-12);
    }
  }
}

// --- soften ----------------------------------------------------------------------

TEST(SoftenTest, ConstantLogitsAreUniform) {
  for (double c : {-50.0, 0.0, 3.0, 1e3}) {
    for (double tau : {0.1, 1.0, 7.0}) {
      for (double p : soften(std::vector<double>{c, c, c}, Temperature(tau))) {
        EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
      }
    }
  }
}

TEST(SoftenTest, TwoClassReference) {
  // mpmath: e / (e + 1)
  const auto p = soften(std::vector<double>{1, 0}, Temperature(1.0));
  EXPECT_NEAR(p[0], 0.7310585786300049, 1e-15);
  EXPECT_NEAR(p[1], 0.2689414213699951, 1e-15);
}

TEST(SoftenTest, InfiniteTemperatureLimit) {
  const auto p = soften(std::vector<double>{1, 0}, Temperature(1e6));
  EXPECT_NEAR(p[0], 0.5, 1e-6);
  EXPECT_NEAR(p[1], 0.5, 1e-6);
}

TEST(SoftenTest, ExtremeLogitsStayFinite) {
  const auto p = soften(std::vector<double>{1e308, -1e308, 0}, Temperature(0.5));
  EXPECT_DOUBLE_EQ(p[0], 1.0);
  const auto lp = log_soften(std::vector<double>{800, 0}, Temperature(1.0));
  EXPECT_TRUE(std::isfinite(lp[1]));
  EXPECT_NEAR(lp[1], -800.0, 1e-9);
}

TEST(SoftenTest, ShiftInvarianceAndNormalisation) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> n(0.0, 3.0);
  std::uniform_real_distribution<double> t(0.05, 10.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> z(6);
    for (double& v : z) v = n(gen);
    const Temperature tau(t(gen));
    const double shift = n(gen) * 10;
    auto shifted = z;
    for (double& v : shifted) v += shift;
    const auto p = soften(z, tau);
    const auto q = soften(shifted, tau);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
    for (std::size_t i = 0; i < p.size(); ++i) {
      EXPECT_NEAR(p[i], q[i], 1e-12);
      EXPECT_GE(p[i], 0.0);
      EXPECT_LE(p[i], 1.0);
    }
  }
}

// --- cpl_loss / kd_loss ----------------------------------------------------------

TEST(CplLossTest, ZeroWhenWeakMatchesStrong) {
  const auto c = protos({{1, 2, 0}, {0, 1, -1}, {3, 0, 1}});
  const std::vector<double> r{0.5, -0.2, 0.9};
  const auto zw = cosine_logits(c, r);
  EXPECT_NEAR(cpl_loss(c, r, zw, Temperature(2.0)), 0.0, 1e-12);
}

TEST(CplLossTest, NearPointMassAgainstUniform) {
  const double eps = 1e-12;
  const double tau = 2.0;
  // soften(zw, tau) = (1 - eps, eps); cosine logits tie, so p^s = (0.5, 0.5).
  const std::vector<double> zw{tau * std::log1p(-eps), tau * std::log(eps)};
  const auto c = protos({{1, 1}, {1, -1}});
  const double loss = cpl_loss(c, std::vector<double>{1, 0}, zw, Temperature(tau));
  EXPECT_NEAR(loss, 0.6931471805599453, 1e-4);
  EXPECT_NEAR(loss, 0.6931471805313143, 1e-9);  // mpmath, exact KL at eps
}

TEST(CplLossTest, MatchesDirectSummationOracle) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto inst = random_instance(gen, 5, 6, 1, 1.5);
    const PrototypeMatrix c(to_matrix(inst.c));
    const auto r = to_matrix(inst.batch);
    const auto zw = to_matrix(inst.zw);
    const long double expected = oracle::kl(oracle::softmax(inst.zw[0], inst.tau),
                                            oracle::softmax(oracle::cosine(inst.c, inst.batch[0]), inst.tau));
    EXPECT_NEAR(cpl_loss(c, r.row(0), zw.row(0), Temperature(inst.tau)),
                static_cast<double>(expected), 1e-10);
  }
}

TEST(CplLossTest, InvariantToEmbeddingScale) {
  const auto c = protos({{1, 2, 0}, {0, 1, -1}});
  const std::vector<double> r{0.5, -0.2, 0.9}, r10{5, -2, 9}, zw{0.3, -1.0};
  EXPECT_NEAR(cpl_loss(c, r, zw, Temperature(2.0)), cpl_loss(c, r10, zw, Temperature(2.0)),
              1e-12);
}

TEST(KdLossTest, IdenticalLogitsGiveZero) {
  const std::vector<double> z{0.1, 2.0, -3.0};
  EXPECT_EQ(kd_loss(z, z, Temperature(2.0)), 0.0);
  EXPECT_EQ(kd_loss(z, z, Temperature(2.0), KlDirection::kStrongToWeak), 0.0);
}

TEST(KdLossTest, EqualsCplLossOnCosineLogits) {
  const auto c = protos({{1, 2, 0}, {0, 1, -1}, {3, 0, 1}});
  const std::vector<double> r{0.5, -0.2, 0.9}, zw{1.0, -0.5, 0.25};
  EXPECT_EQ(kd_loss(cosine_logits(c, r), zw, Temperature(0.7)),
            cpl_loss(c, r, zw, Temperature(0.7)));
}

TEST(KdLossTest, BothDirectionsMatchOracle) {
  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 100; ++trial) {
    const auto zs = oracle::random_mat(1, 6, gen, 2.0)[0];
    const auto zw = oracle::random_mat(1, 6, gen, 2.0)[0];
    const double tau = 0.5 + trial % 4;
    const auto ps = oracle::softmax(zs, tau), pw = oracle::softmax(zw, tau);
    const std::vector<double> s(zs.begin(), zs.end()), w(zw.begin(), zw.end());
    EXPECT_NEAR(kd_loss(s, w, Temperature(tau)), static_cast<double>(oracle::kl(pw, ps)), 1e-10);
    EXPECT_NEAR(kd_loss(s, w, Temperature(tau), KlDirection::kStrongToWeak),
                static_cast<double>(oracle::kl(ps, pw)), 1e-10);
  }
}

TEST(KdLossTest, NonNegativeOnRandomPairs) {
  std::mt19937_64 gen(21);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto zs = oracle::random_mat(1, 4, gen, 5.0)[0];
    const auto zw = oracle::random_mat(1, 4, gen, 5.0)[0];
    const std::vector<double> s(zs.begin(), zs.end()), w(zw.begin(), zw.end());
    EXPECT_GE(kd_loss(s, w, Temperature(1.0)), 0.0);
  }
}

// --- gradients -------------------------------------------------------------------

double rel_err(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

TEST(CplGradTest, StationaryWhenDistributionsMatch) {
  const auto c = protos({{1, 2, 0}, {0, 1, -1}, {3, 0, 1}});
  const EmbeddingMatrix batch(Matrix(2, 3, {0.5, -0.2, 0.9, 1, 1, 1}));
  const LogitMatrix zw = cosine_logits(c, batch);
  const Matrix g = cpl_grad(c, batch, zw, Temperature(2.0));
  for (double v : g.values()) EXPECT_NEAR(v, 0.0, 1e-10);
}

TEST(CplGradTest, RowsOrthogonalToPrototypes) {
  std::mt19937_64 gen(4);
  const auto inst = random_instance(gen, 4, 5, 10, 1.0);
  const PrototypeMatrix c(to_matrix(inst.c));
  const Matrix g = cpl_grad(c, EmbeddingMatrix(to_matrix(inst.batch)),
                            {to_matrix(inst.zw), LogitSource::kWeak}, Temperature(1.0));
  for (std::size_t j = 0; j < c.classes(); ++j) {
    EXPECT_LE(std::abs(dot(g.row(j), c.row(j))), 1e-8 * norm(g.row(j)) * norm(c.row(j)));
  }
}

TEST(CplGradTest, SeedZeroInstanceMatchesFiniteDifferences) {
  std::mt19937_64 gen(0);
  const auto inst = random_instance(gen, 3, 4, 8, 2.0);
  const Matrix g = cpl_grad(PrototypeMatrix(to_matrix(inst.c)),
                            EmbeddingMatrix(to_matrix(inst.batch)),
                            {to_matrix(inst.zw), LogitSource::kWeak}, Temperature(inst.tau));
  const auto fd = oracle::fd_cpl_grad(inst.c, inst.batch, inst.zw, inst.tau, 1e-3L);
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t m = 0; m < 4; ++m)
      EXPECT_LE(rel_err(g(j, m), static_cast<double>(fd[j][m])), 1e-4) << j << "," << m;
}

TEST(CplGradTest, ReverseDirectionMatchesFiniteDifferences) {
  std::mt19937_64 gen(1);
  const auto inst = random_instance(gen, 3, 4, 6, 1.0);
  const PrototypeMatrix c(to_matrix(inst.c));
  const EmbeddingMatrix batch(to_matrix(inst.batch));
  const LogitMatrix zw{to_matrix(inst.zw), LogitSource::kWeak};
  const Matrix g = cpl_grad(c, batch, zw, Temperature(1.0), KlDirection::kStrongToWeak);
  const double h = 1e-5;
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t m = 0; m < 4; ++m) {
      Matrix up = c.matrix(), down = c.matrix();
      up(j, m) += h;
      down(j, m) -= h;
      const double fd =
          (cpl_batch_loss(PrototypeMatrix(up), batch, zw, Temperature(1.0), KlDirection::kStrongToWeak) -
           cpl_batch_loss(PrototypeMatrix(down), batch, zw, Temperature(1.0), KlDirection::kStrongToWeak)) /
          (2 * h);
      EXPECT_NEAR(g(j, m), fd, 1e-8);
    }
  }
}

// Finite differences of a logit loss with respect to z_s.
template <typename Loss>
void expect_logit_grad(Loss loss, std::vector<double> z, const std::vector<double>& grad) {
  const double h = 1e-6;
  for (std::size_t j = 0; j < z.size(); ++j) {
    const double saved = z[j];
    z[j] = saved + h;
    const double up = loss(z);
    z[j] = saved - h;
    const double down = loss(z);
    z[j] = saved;
    EXPECT_NEAR(grad[j], (up - down) / (2 * h), 1e-7) << "component " << j;
  }
}

TEST(LogitGradTest, BaselineLossGradients) {
  const std::vector<double> zs{0.4, -1.2, 2.0, 0.1};
  const std::vector<double> zw{1.0, 0.5, -0.3, 0.0};
  const Temperature tau(1.5);
  expect_logit_grad([&](const auto& z) { return ce_loss_grad(z, 1, tau).value; }, zs,
                    ce_loss_grad(zs, 1, tau).grad);
  expect_logit_grad([&](const auto& z) { return kd_loss(z, zw, tau); }, zs,
                    kd_loss_grad(zs, zw, tau).grad);
  expect_logit_grad(
      [&](const auto& z) { return kd_loss(z, zw, tau, KlDirection::kStrongToWeak); }, zs,
      kd_loss_grad(zs, zw, tau, KlDirection::kStrongToWeak).grad);
  // Pseudo-labels and the gate are held fixed: away from argmax ties the
  // hard labels do not move under a small perturbation, but the gate does, so
  // compare AdaptConf against the frozen-gate mixture.
  expect_logit_grad([&](const auto& z) { return aux_conf_loss_grad(z, 0, 0.3, tau).value; }, zs,
                    aux_conf_loss_grad(zs, 0, 0.3, tau).grad);
  const double beta = adapt_conf_beta(zs, zw);
  expect_logit_grad(
      [&](const auto& z) {
        return beta * ce_loss_grad(z, 2, tau).value + (1 - beta) * kd_loss(z, zw, tau);
      },
      zs, adapt_conf_loss_grad(zs, zw, tau).grad);
}

// --- linear probe and baselines --------------------------------------------------

TEST(LinearProbeTest, ZeroProbeIsUniform) {
  const auto p = lp_forward(LinearProbe::zeros(4, 3), std::vector<double>{1, 2, 3});
  for (double v : p) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(LinearProbeTest, SaturatesOnLargeAlignedInput) {
  Matrix eye(3, 3);
  for (std::size_t i = 0; i < 3; ++i) eye(i, i) = 1.0;
  const auto p = lp_forward(LinearProbe(eye, {0, 0, 0}), std::vector<double>{50, 0, 0});
  EXPECT_NEAR(p[0], 1.0, 1e-6);
}

TEST(LinearProbeTest, MatchesOracle) {
  std::mt19937_64 gen(8);
  const auto w = oracle::random_mat(4, 5, gen);
  const auto b = oracle::random_mat(1, 4, gen)[0];
  const auto r = oracle::random_mat(1, 5, gen)[0];
  oracle::Vec z(4);
  for (std::size_t j = 0; j < 4; ++j) {
    z[j] = b[j];
    for (std::size_t m = 0; m < 5; ++m) z[j] += w[j][m] * r[m];
  }
  const auto expected = oracle::softmax(z, 1.0L);
  const auto p = lp_forward(LinearProbe(to_matrix(w), std::vector<double>(b.begin(), b.end())),
                            std::vector<double>(r.begin(), r.end()));
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(p[j], static_cast<double>(expected[j]), 1e-14);
}

TEST(CeLossTest, ClosedForms) {
  EXPECT_EQ(ce_loss(std::vector<double>{0, 1, 0}, 1), 0.0);
  EXPECT_NEAR(ce_loss(std::vector<double>{0.25, 0.25, 0.25, 0.25}, 2), 1.3862943611198906, 1e-15);
  EXPECT_NEAR(ce_loss(std::vector<double>{0.5, 0.5}, 0), 0.6931471805599453, 1e-15);
  EXPECT_THROW(ce_loss(std::vector<double>{0.5, 0.5}, 2), IndexError);
}

TEST(AuxConfLossTest, RampEndpointsAndCoincidence) {
  const std::vector<double> p{0.05, 0.9, 0.05};
  EXPECT_EQ(aux_conf_loss(p, 0, 0.0), ce_loss(p, 0));
  EXPECT_NEAR(aux_conf_loss(p, 0, 1.0), 0.10536051565782630, 1e-15);
  EXPECT_NEAR(aux_conf_loss(p, 1, 0.5), ce_loss(p, 1), 1e-15);
  EXPECT_THROW(aux_conf_loss(p, 0, 1.5), DomainError);
  EXPECT_THROW(aux_conf_loss(p, 0, -0.1), DomainError);
}

TEST(AdaptConfLossTest, EqualLogitsGiveHalfGate) {
  const std::vector<double> z{0.3, 1.1, -0.4};
  const Temperature tau(2.0);
  EXPECT_DOUBLE_EQ(adapt_conf_beta(z, z), 0.5);
  EXPECT_NEAR(adapt_conf_loss(z, z, tau), 0.5 * ce_loss(soften(z, tau), 1), 1e-15);
}

TEST(AdaptConfLossTest, ConfidentStrongApproachesSigmoidOne) {
  std::vector<double> zs(1000, 0.0), zw(1000, 0.0);
  zs[7] = 100.0;  // max p_s -> 1, max p_w = 1/1000
  EXPECT_NEAR(adapt_conf_beta(zs, zw), 0.7310585786300049, 1e-3);
}

TEST(AdaptConfLossTest, MatchesDirectRecomputation) {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 50; ++trial) {
    const auto zs = oracle::random_mat(1, 5, gen, 2.0)[0];
    const auto zw = oracle::random_mat(1, 5, gen, 2.0)[0];
    const long double tau = 2.0L;
    const auto ps1 = oracle::softmax(zs, 1.0L), pw1 = oracle::softmax(zw, 1.0L);
    const long double gap = *std::max_element(ps1.begin(), ps1.end()) -
                            *std::max_element(pw1.begin(), pw1.end());
    const long double beta = 1.0L / (1.0L + std::exp(-gap));
    const auto ps = oracle::softmax(zs, tau), pw = oracle::softmax(zw, tau);
    const std::size_t top = std::max_element(zs.begin(), zs.end()) - zs.begin();
    const long double expected = beta * -std::log(ps[top]) + (1 - beta) * oracle::kl(pw, ps);
    const std::vector<double> s(zs.begin(), zs.end()), w(zw.begin(), zw.end());
    EXPECT_NEAR(adapt_conf_loss(s, w, Temperature(2.0)), static_cast<double>(expected), 1e-10);
  }
}

TEST(ArgmaxTest, TemperatureDoesNotChangeArgmax) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> t(0.01, 100.0);
  for (int trial = 0; trial < 500; ++trial) {
    const auto z = oracle::random_mat(1, 8, gen)[0];
    const std::vector<double> zd(z.begin(), z.end());
    EXPECT_EQ(argmax(soften(zd, Temperature(t(gen)))), argmax(zd));
  }
}

TEST(ArgmaxTest, TiesGoToLowestIndex) {
  EXPECT_EQ(argmax(std::vector<double>{0.2, 0.7, 0.7, 0.1}), 1u);
}

}  // namespace
}  // namespace w2s
