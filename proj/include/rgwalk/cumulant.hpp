#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "environment.hpp"

namespace rgwalk {

/// A set partition of {0..m-1} as a list of blocks, each a bit mask.
using Partition = std::vector<std::uint32_t>;

/// All set partitions of {0..m-1}, each exactly once. Throws TooLarge for m > 8.
std::vector<Partition> partitions(int m);
/// All set partitions of the elements of `mask`.
std::vector<Partition> partitions_of_mask(std::uint32_t mask);

/// Moebius inversion on the partition lattice:
///   <X_A>^c = sum_Pi (-1)^(|Pi|-1) (|Pi|-1)! prod_{B in Pi} <X_B>.
/// `moment(mask)` returns the raw moment of the product over mask.
double connected_correlation(int m, const std::function<double(std::uint32_t)>& moment);

/// Whole-table transforms indexed by mask (entry 0 unused). The pair is an
/// exact inverse: <X_A> = sum_Pi prod_{B in Pi} <X_B>^c.
std::vector<double> cumulants_from_moments(int m, std::span<const double> moments);
std::vector<double> moments_from_cumulants(int m, std::span<const double> cumulants);

/// One factor b(t, u, v) of b_A(z); `group` is the index i of A_i.
struct Factor {
  int group = 0;
  int t = 0;
  Offset u{};
  Offset v{};
};

/// A = disjoint union of A_1..A_m with endpoint assignment z. Times are
/// distinct within a group and may repeat across groups.
struct IndexFamily {
  int dim = 1;
  std::vector<Factor> factors;

  [[nodiscard]] int size() const noexcept { return static_cast<int>(factors.size()); }
  [[nodiscard]] int groups() const noexcept;
  /// d(A): diameter of the union of times.
  [[nodiscard]] int diameter() const noexcept;
  /// Throws std::invalid_argument unless 1 <= |A| <= max_size, groups <= n0 <= 4
  /// and times are distinct within each group.
  void validate(int max_size = 6, int n0 = 4) const;
};

/// tau_A(z) = sum_t |u_t - v_t| + tau(S(z)), positions divided by `scale`
/// (cells per unit length).
double tau_weight(const IndexFamily& family, double scale = 1.0);

struct CumulantValue {
  double value = 0.0;
  double stderr_ = 0.0;
};

/// Cumulant of m variables from samples laid out [sample][m], with a
/// leave-one-block-out jackknife over `blocks` (block_of[i] in [0, blocks)).
CumulantValue sample_cumulant(std::span<const double> data, int m, std::span<const int> block_of, int blocks);

struct CumulantEstimate {
  IndexFamily family;
  CumulantValue value;
  double tau = 0.0;
  double weighted = 0.0;  // e^(lambda tau) |value|
  double weighted_stderr = 0.0;
  int replicas = 0;
};

struct DecayScanConfig {
  int level = 0;          // RG level of the scanned field
  int L = 2;
  std::vector<int> orders{2};
  int max_sep = 6;        // separations d(A) = 0..max_sep in level-n time units
  int replicas = 2000;
  int anchors = 8;        // space-time translations per replica
  Offset jump{1, 0};      // v - u of every factor in level-0 lattice units
  double lambda = std::numeric_limits<double>::quiet_NaN();  // weight rate; NaN: environment's nominal lambda
  int n0 = 4;
  int max_order = 6;
  int jackknife_blocks = 50;
};

struct DecayRow {
  int order = 0;
  int separation = 0;
  CumulantEstimate estimate;
  bool resolved = false;  // |value| > 2 stderr
};

struct DecayFit {
  double rate = std::numeric_limits<double>::infinity();  // lambda-hat
  double rate_stderr = 0.0;
  double eps_hat = 0.0;
  int points = 0;
  bool super_exponential = true;  // fewer than two resolved separations >= 0 with d >= 1 present
  double log_inv_delta = 0.0;     // log(1 / delta_n) for comparison
};

struct DecayScan {
  int level = 0;
  double lambda = 0.0;
  std::vector<DecayRow> rows;
  std::map<int, DecayFit> fits;  // per order
  double integrated_norm = 0.0;  // d(A) = 0, order 2: sum over v of e^(lambda tau) |<b(t,u,v)^2>^c|
  double integrated_norm_stderr = 0.0;
  int replicas = 0;
};

/// Estimates e^(lambda tau_A(z)) |<b_nA(z)>^c| for families with every factor
/// at the same cell u and jump v - u = jump, times spread evenly over [0, sep].
/// Level n > 0 uses b_n = R_{L^n} p - T_n; values are densities (mass times
/// cells per unit volume) so that levels are comparable. Replicas are drawn
/// from the prototype's parameters with derived seeds. Throws
/// InsufficientReplicas below 100 replicas or if fewer than half of the
/// d(A) = 0 configurations are resolved on a random field.
DecayScan decay_scan(const EnvField& prototype, const DecayScanConfig& cfg);

}  // namespace rgwalk
