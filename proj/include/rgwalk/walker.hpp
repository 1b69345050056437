#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "environment.hpp"
#include "stats.hpp"

namespace rgwalk {

/// Walks started at the origin, stored at checkpoint times only. Positions
/// are absolute cell coordinates, [path][checkpoint].
struct WalkEnsemble {
  int dim = 1;
  int horizon = 0;        // T
  int L = 2;
  int level = 0;          // T = L^(2 level) when the horizon is a level time, else -1
  std::uint64_t seed = 0;
  std::vector<int> checkpoints;  // sorted, starts at 0, ends at T
  std::vector<Offset> positions;
  long max_excursion = 0;        // max |omega_t|_inf seen while sampling

  [[nodiscard]] std::size_t count() const noexcept {
    return checkpoints.empty() ? 0 : positions.size() / checkpoints.size();
  }
  [[nodiscard]] Offset at(std::size_t path, std::size_t checkpoint) const noexcept {
    return positions[path * checkpoints.size() + checkpoint];
  }
  /// Index of checkpoint time t, or -1.
  [[nodiscard]] long checkpoint_index(int t) const noexcept;
};

struct WalkOptions {
  /// Checkpoint times in (0, T]; empty: T/4, T/2, 3T/4, T (rounded) plus T.
  std::vector<int> checkpoints;
  bool full_paths = false;  // store every time 0..T
  int L = 2;
};

/// Samples `count` independent walks in the fixed environment, step t drawn
/// from p(t, omega_t, .) by inverse CDF on the row. Path i uses the stream
/// derive_seed(seed, i), so results do not depend on the worker count.
/// Throws BoundaryContamination if a walk comes within one row radius of the
/// periodic wrap.
WalkEnsemble sample_walks(const EnvField& field, int T, std::size_t count, std::uint64_t seed,
                          const WalkOptions& opts = {});

/// Drop-in generator of the reference law: omega at each checkpoint is
/// round(sqrt(T) B(t)) for a Brownian motion with covariance D t / d per
/// coordinate, so marginals follow the discretized Wiener measure exactly.
WalkEnsemble synthetic_wiener(int dim, int T, std::size_t count, double D, std::uint64_t seed,
                              const WalkOptions& opts = {});

/// omega(t) = T^(-1/2) (omega_(i-1) + (T t - i + 1)(omega_i - omega_(i-1))) for
/// t in [(i-1)/T, i/T]. Needs checkpoints at both i - 1 and i unless T t is an
/// integer checkpoint.
struct RescaledPaths {
  const WalkEnsemble* ensemble = nullptr;

  [[nodiscard]] std::size_t count() const noexcept { return ensemble->count(); }
  [[nodiscard]] int dim() const noexcept { return ensemble->dim; }
  [[nodiscard]] double at(std::size_t path, double t, int coordinate) const;
  /// Values of one coordinate of omega(t) over all paths.
  [[nodiscard]] std::vector<double> marginal(double t, int coordinate) const;
};

RescaledPaths rescale_paths(const WalkEnsemble& ensemble);

struct DiffusionEstimate {
  double D = 0.0;
  double stderr_ = 0.0;
  stats::Interval ci;  // 95%
};

/// MC mode: mean of |omega(1)|^2 over paths with a bootstrap 95% interval.
/// Throws InsufficientReplicas below 100 paths.
DiffusionEstimate estimate_diffusion(const WalkEnsemble& ensemble, int resamples = 1000);
/// Kernel mode: exact second moment of a time-1 kernel in rescaled units.
DiffusionEstimate estimate_diffusion(const Kernel& kernel);

}  // namespace rgwalk
