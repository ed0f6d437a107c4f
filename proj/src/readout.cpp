#include "tlsspec/readout.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "tlsspec/errors.hpp"

namespace tlsspec {

void validate(const IqBlobModel& model) {
  for (int k = 0; k < 3; ++k) {
    const IqBlob& b = model.blobs[k];
    if (!b.mean.allFinite() || !b.covariance.allFinite()) {
      throw InvalidParameter("blob " + std::to_string(k) + ": non-finite parameters");
    }
    const Eigen::Matrix2d& c = b.covariance;
    if (std::abs(c(0, 1) - c(1, 0)) > 1e-12 * (std::abs(c(0, 0)) + std::abs(c(1, 1)))) {
      throw InvalidParameter("blob " + std::to_string(k) + ": covariance not symmetric");
    }
    const double det = c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0);
    if (!(c(0, 0) > 0.0) || !(det > 0.0)) {
      throw InvalidParameter("blob " + std::to_string(k) + ": covariance not positive definite");
    }
  }
}

Discriminator::Discriminator(const IqBlobModel& model) : model_(model) {
  validate(model_);
  for (int k = 0; k < 3; ++k) {
    const Eigen::Matrix2d& c = model_.blobs[k].covariance;
    precision_[k] = c.inverse();
    log_norm_[k] = -0.5 * std::log(c.determinant()) - std::log(2.0 * std::numbers::pi);
    Eigen::LLT<Eigen::Matrix2d> llt(c);
    chol_[k] = llt.matrixL();
  }
}

double Discriminator::log_likelihood(int state, const Eigen::Vector2d& point) const {
  const Eigen::Vector2d d = point - model_.blobs[state].mean;
  return log_norm_[state] - 0.5 * d.dot(precision_[state] * d);
}

int Discriminator::classify(const Eigen::Vector2d& point) const {
  int best = 0;
  double best_ll = log_likelihood(0, point);
  for (int k = 1; k < 3; ++k) {
    const double ll = log_likelihood(k, point);
    if (ll > best_ll) {
      best = k;
      best_ll = ll;
    }
  }
  return best;
}

Eigen::Vector2d Discriminator::sample(int state, Rng& rng) const {
  std::normal_distribution<double> normal;
  const double z0 = normal(rng);
  const double z1 = normal(rng);
  return model_.blobs[state].mean + chol_[state] * Eigen::Vector2d(z0, z1);
}

int classify(const IqBlobModel& model, const Eigen::Vector2d& point) {
  return Discriminator(model).classify(point);
}

double ConfusionMatrix::fidelity() const { return m.trace() / 3.0; }

double ConfusionMatrix::condition_number() const {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m);
  const auto& s = svd.singularValues();
  return s(2) > 0.0 ? s(0) / s(2) : std::numeric_limits<double>::infinity();
}

void validate(const ConfusionMatrix& cm, double tol) {
  if (!cm.m.allFinite()) throw InvalidParameter("confusion matrix has non-finite entries");
  for (int k = 0; k < 3; ++k) {
    for (int j = 0; j < 3; ++j) {
      if (cm.m(j, k) < -tol || cm.m(j, k) > 1.0 + tol) {
        throw InvalidParameter("confusion matrix entry outside [0, 1]");
      }
    }
    if (std::abs(cm.m.col(k).sum() - 1.0) > tol) {
      throw InvalidParameter("confusion matrix column " + std::to_string(k) + " does not sum to 1");
    }
  }
}

ConfusionMatrix simulate_confusion_matrix(const IqBlobModel& model, long shots_per_state,
                                          std::uint64_t seed) {
  if (shots_per_state < 1) throw InvalidParameter("shots_per_state must be at least 1");
  const Discriminator disc(model);
  ConfusionMatrix cm;
  cm.m.setZero();
  for (int k = 0; k < 3; ++k) {
    Rng rng(derive_seed(seed, "confusion", static_cast<std::uint64_t>(k)));
    std::array<long, 3> counts{0, 0, 0};
    for (long s = 0; s < shots_per_state; ++s) {
      ++counts[disc.classify(disc.sample(k, rng))];
    }
    for (int j = 0; j < 3; ++j) {
      cm.m(j, k) = static_cast<double>(counts[j]) / static_cast<double>(shots_per_state);
    }
  }
  return cm;
}

double assignment_fidelity(const ConfusionMatrix& cm) { return cm.fidelity(); }

PopulationState apply_confusion(const ConfusionMatrix& cm, const PopulationState& ideal) {
  const Eigen::Vector3d p = cm.m * Eigen::Vector3d(ideal.p0, ideal.p1, ideal.p2);
  return {p(0), p(1), p(2)};
}

PopulationState mitigate(const ConfusionMatrix& cm, const PopulationState& observed,
                         const MitigationOptions& options) {
  const double cond = cm.condition_number();
  if (!(cond < options.max_condition_number)) {
    throw MitigationUnstable("confusion matrix is near-singular (condition number " +
                                 std::to_string(cond) + ")",
                             cond);
  }
  Eigen::Vector3d p = cm.m.partialPivLu().solve(Eigen::Vector3d(observed.p0, observed.p1, observed.p2));
  if (options.clip && p.minCoeff() < 0.0) {
    p = p.cwiseMax(0.0);
    const double total = p.sum();
    if (total > 0.0) p /= total;
  }
  return {p(0), p(1), p(2)};
}

PopulationTrace mitigate(const ConfusionMatrix& cm, const PopulationTrace& observed,
                         const MitigationOptions& options) {
  PopulationTrace out = observed;
  for (auto& s : out.states) s = mitigate(cm, s, options);
  return out;
}

}  // namespace tlsspec
