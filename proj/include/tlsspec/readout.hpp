#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "tlsspec/dynamics.hpp"
#include "tlsspec/random.hpp"

namespace tlsspec {

struct IqBlob {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Identity();
};

/// Gaussian IQ response of the readout for prepared states |0>, |1>, |2>.
struct IqBlobModel {
  std::array<IqBlob, 3> blobs;
};

void validate(const IqBlobModel& model);

/// Equal-prior maximum-likelihood (quadratic) discriminant over three blobs.
class Discriminator {
 public:
  explicit Discriminator(const IqBlobModel& model);

  // Ties go to the lower state index.
  int classify(const Eigen::Vector2d& point) const;
  double log_likelihood(int state, const Eigen::Vector2d& point) const;

  // Draws one IQ point from blob `state`.
  Eigen::Vector2d sample(int state, Rng& rng) const;

 private:
  IqBlobModel model_;
  std::array<Eigen::Matrix2d, 3> precision_;
  std::array<Eigen::Matrix2d, 3> chol_;
  std::array<double, 3> log_norm_{};
};

int classify(const IqBlobModel& model, const Eigen::Vector2d& point);

/// m(j, k) = P(assigned j | prepared k); columns sum to one.
struct ConfusionMatrix {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();

  double fidelity() const;
  double condition_number() const;
};

void validate(const ConfusionMatrix& cm, double tol = 1e-12);

ConfusionMatrix simulate_confusion_matrix(const IqBlobModel& model, long shots_per_state,
                                          std::uint64_t seed);

/// Mean of the diagonal.
double assignment_fidelity(const ConfusionMatrix& cm);

// Observed distribution for an ideal one: M p.
PopulationState apply_confusion(const ConfusionMatrix& cm, const PopulationState& ideal);

struct MitigationOptions {
  bool clip = true;                  // clip negatives to 0 and renormalize
  double max_condition_number = 1e6;
};

/// Solves M p_ideal = p_observed. Throws MitigationUnstable when M is too
/// ill-conditioned to invert.
PopulationState mitigate(const ConfusionMatrix& cm, const PopulationState& observed,
                         const MitigationOptions& options = {});

// Per-delay mitigation of a whole trace; delays and shots are kept.
PopulationTrace mitigate(const ConfusionMatrix& cm, const PopulationTrace& observed,
                         const MitigationOptions& options = {});

struct ShotRecord {
  double delay_us = 0.0;
  int assigned_state = 0;
  long repetition = 0;
};

}  // namespace tlsspec
