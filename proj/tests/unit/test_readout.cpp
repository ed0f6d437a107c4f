#include <array>
#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "tlsspec/errors.hpp"
#include "tlsspec/readout.hpp"

using namespace tlsspec;

namespace {

IqBlobModel blobs(const std::array<Eigen::Vector2d, 3>& means, double sigma = 1.0) {
  IqBlobModel m;
  for (int k = 0; k < 3; ++k) {
    m.blobs[k].mean = means[k];
    m.blobs[k].covariance = Eigen::Matrix2d::Identity() * sigma * sigma;
  }
  return m;
}

// Column-stochastic, diagonally dominant, hence invertible.
ConfusionMatrix random_confusion(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ConfusionMatrix cm;
  for (int k = 0; k < 3; ++k) {
    double col[3];
    double off = 0.0;
    for (int j = 0; j < 3; ++j) {
      col[j] = j == k ? 0.0 : u(rng);
      off += col[j];
    }
    const double diag = 0.55 + 0.45 * u(rng);
    for (int j = 0; j < 3; ++j) cm.m(j, k) = j == k ? diag : (1.0 - diag) * col[j] / off;
    // exact column sum
    cm.m(k, k) = 1.0 - (cm.m((k + 1) % 3, k) + cm.m((k + 2) % 3, k));
  }
  return cm;
}

PopulationState random_population(std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  const double a = e(rng), b = e(rng), c = e(rng);
  const double s = a + b + c;
  return {a / s, b / s, c / s};
}

ConfusionMatrix device_a_like() {
  ConfusionMatrix cm;
  cm.m << 0.93, 0.07, 0.043, 0.05, 0.88, 0.07, 0.02, 0.05, 0.887;
  return cm;
}

}  // namespace

TEST_CASE("classification by maximum likelihood") {
  const IqBlobModel m = blobs({Eigen::Vector2d(0, 0), Eigen::Vector2d(10, 0), Eigen::Vector2d(0, 10)});
  CHECK(classify(m, Eigen::Vector2d(10, 0)) == 1);
  CHECK(classify(m, Eigen::Vector2d(6, 1)) == 1);

  // Oracle: evaluate the three isotropic log-likelihoods directly.
  const Eigen::Vector2d p(6, 1);
  double best = -1e300;
  int arg = -1;
  for (int k = 0; k < 3; ++k) {
    const double ll = -0.5 * (p - m.blobs[k].mean).squaredNorm();
    if (ll > best) {
      best = ll;
      arg = k;
    }
  }
  CHECK(arg == 1);
}

TEST_CASE("classification ties go to the lower index") {
  const IqBlobModel m = blobs({Eigen::Vector2d(-1, 0), Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 50)});
  CHECK(classify(m, Eigen::Vector2d(0, 0)) == 0);
  const IqBlobModel same = blobs({Eigen::Vector2d(2, 3), Eigen::Vector2d(2, 3), Eigen::Vector2d(2, 3)});
  CHECK(classify(same, Eigen::Vector2d(-4, 7)) == 0);
}

TEST_CASE("classification is permutation equivariant") {
  IqBlobModel m;
  m.blobs[0].mean = {0, 0};
  m.blobs[1].mean = {2.5, 0.3};
  m.blobs[2].mean = {1.0, 2.2};
  m.blobs[1].covariance << 1.3, 0.2, 0.2, 0.9;
  m.blobs[2].covariance << 1.6, -0.3, -0.3, 1.1;
  const std::array<int, 3> perm{2, 0, 1};
  IqBlobModel q;
  for (int k = 0; k < 3; ++k) q.blobs[perm[k]] = m.blobs[k];
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(1.0, 2.0);
  for (int i = 0; i < 2000; ++i) {
    const Eigen::Vector2d p(n(rng), n(rng));
    CHECK(classify(q, p) == perm[classify(m, p)]);
  }
}

TEST_CASE("invalid blob models") {
  IqBlobModel m;
  m.blobs[1].covariance << 1.0, 0.0, 0.0, 0.0;
  CHECK_THROWS_AS(validate(m), InvalidParameter);
  CHECK_THROWS_AS(Discriminator{m}, InvalidParameter);
  m.blobs[1].covariance << 1.0, 0.5, 0.4, 1.0;
  CHECK_THROWS_AS(validate(m), InvalidParameter);
}

TEST_CASE("simulated confusion matrices") {
  const IqBlobModel far = blobs({Eigen::Vector2d(0, 0), Eigen::Vector2d(1e3, 0), Eigen::Vector2d(0, 1e3)});
  const ConfusionMatrix id = simulate_confusion_matrix(far, 2000, 3);
  CHECK((id.m - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() == 0.0);

  const IqBlobModel same = blobs({Eigen::Vector2d(0, 0), Eigen::Vector2d(0, 0), Eigen::Vector2d(0, 0)});
  const ConfusionMatrix tie = simulate_confusion_matrix(same, 500, 3);
  for (int k = 0; k < 3; ++k) {
    CHECK(tie.m(0, k) == 1.0);
    CHECK(tie.m(1, k) == 0.0);
    CHECK(tie.m(2, k) == 0.0);
  }
  CHECK(assignment_fidelity(tie) == doctest::Approx(1.0 / 3.0));

  const IqBlobModel near = blobs({Eigen::Vector2d(0, 0), Eigen::Vector2d(1.2, 0), Eigen::Vector2d(0.6, 1.0)});
  const ConfusionMatrix a = simulate_confusion_matrix(near, 5000, 17);
  const ConfusionMatrix b = simulate_confusion_matrix(near, 5000, 17);
  CHECK(a.m == b.m);
  CHECK_THROWS_AS(simulate_confusion_matrix(near, 0, 1), InvalidParameter);
}

TEST_CASE("simulated matrices are column stochastic with bounded fidelity") {
  const IqBlobModel near = blobs({Eigen::Vector2d(0, 0), Eigen::Vector2d(0.8, 0), Eigen::Vector2d(0.4, 0.7)}, 1.1);
  for (long shots : {1L, 7L, 100L, 3000L}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const ConfusionMatrix cm = simulate_confusion_matrix(near, shots, seed);
      CHECK_NOTHROW(validate(cm));
      for (int k = 0; k < 3; ++k) CHECK(std::abs(cm.m.col(k).sum() - 1.0) <= 1e-12);
      const double f = assignment_fidelity(cm);
      CHECK(f <= 1.0);
      // The lower bound is a statement about the discriminator, so it needs
      // enough shots for the empirical rates to settle.
      if (shots >= 100) CHECK(f >= 1.0 / 3.0);
    }
  }
}

TEST_CASE("assignment fidelity") {
  CHECK(assignment_fidelity(ConfusionMatrix{}) == 1.0);
  ConfusionMatrix uniform;
  uniform.m.setConstant(1.0 / 3.0);
  CHECK(assignment_fidelity(uniform) == doctest::Approx(1.0 / 3.0));
  CHECK(assignment_fidelity(device_a_like()) == doctest::Approx(0.899).epsilon(1e-12));
}

TEST_CASE("mitigation with the identity is a no-op") {
  const PopulationState p{0.2, 0.5, 0.3};
  const PopulationState q = mitigate(ConfusionMatrix{}, p);
  CHECK(q.p0 == p.p0);
  CHECK(q.p1 == p.p1);
  CHECK(q.p2 == p.p2);
}

TEST_CASE("mitigation inverts the confusion matrix") {
  std::mt19937_64 rng(2024);
  const MitigationOptions raw{false, 1e6};
  for (int i = 0; i < 200; ++i) {
    const ConfusionMatrix cm = random_confusion(rng);
    const PopulationState p = random_population(rng);
    const PopulationState q = mitigate(cm, apply_confusion(cm, p), raw);
    CHECK(std::abs(q.p0 - p.p0) <= 1e-10);
    CHECK(std::abs(q.p1 - p.p1) <= 1e-10);
    CHECK(std::abs(q.p2 - p.p2) <= 1e-10);
  }
}

TEST_CASE("mitigation agrees with an elimination solve") {
  const ConfusionMatrix cm = device_a_like();
  std::array<std::array<double, 3>, 3> a{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) a[r][c] = cm.m(r, c);
  }
  const auto ref = oracle::gauss_solve(a, {0.4, 0.35, 0.25});
  const PopulationState q = mitigate(cm, PopulationState{0.4, 0.35, 0.25}, MitigationOptions{false, 1e6});
  CHECK(q.p0 == doctest::Approx(ref[0]).epsilon(1e-13));
  CHECK(q.p1 == doctest::Approx(ref[1]).epsilon(1e-13));
  CHECK(q.p2 == doctest::Approx(ref[2]).epsilon(1e-13));
}

TEST_CASE("negative mitigated components are clipped") {
  const ConfusionMatrix cm = device_a_like();
  const PopulationState observed{0.95, 0.04, 0.01};
  const PopulationState raw = mitigate(cm, observed, MitigationOptions{false, 1e6});
  CHECK(std::min({raw.p0, raw.p1, raw.p2}) < 0.0);
  CHECK(raw.sum() == doctest::Approx(1.0).epsilon(1e-12));
  const PopulationState q = mitigate(cm, observed);
  CHECK(q.p0 >= 0.0);
  CHECK(q.p1 >= 0.0);
  CHECK(q.p2 >= 0.0);
  CHECK(q.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("near-singular matrices are refused") {
  ConfusionMatrix cm;
  cm.m << 0.5, 0.5 - 1e-9, 0.0, 0.5, 0.5 + 1e-9, 0.0, 0.0, 0.0, 1.0;
  try {
    mitigate(cm, PopulationState{0.3, 0.3, 0.4});
    FAIL("expected MitigationUnstable");
  } catch (const MitigationUnstable& e) {
    CHECK(e.condition_number() >= 1e6);
  }
}

TEST_CASE("trace mitigation keeps delays and shots") {
  PopulationTrace tr;
  tr.delays = {0.0, 1.0, 2.0};
  tr.states = {{0.1, 0.1, 0.8}, {0.2, 0.3, 0.5}, {0.5, 0.3, 0.2}};
  tr.shots = {100, 100, 100};
  const PopulationTrace q = mitigate(device_a_like(), tr);
  CHECK(q.delays == tr.delays);
  CHECK(q.shots == tr.shots);
  CHECK(q.states[1].sum() == doctest::Approx(1.0));
}
