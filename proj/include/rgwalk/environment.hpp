#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kernel.hpp"

namespace rgwalk {

enum class EnvModel { iid, markov_field, cml };

EnvModel parse_model(const std::string& name);
std::string model_name(EnvModel model);

struct EnvParams {
  EnvModel model = EnvModel::iid;
  double epsilon = 0.0;
  double lambda = 1.0;   // nominal mixing rate; markov_field refreshes a spin with probability 1 - e^-lambda
  int time_extent = 1;
  int box_radius = 1;    // periodic box of side 2 * box_radius + 1 per axis
  std::uint64_t seed = 0;
  double coupling = 0.2;  // markov_field heat-bath coupling J (high temperature)
  double cml_gamma = 0.05;  // cml diffusive coupling
  double cml_nonlinearity = 0.2;  // cml map 2x + a/(2 pi) sin(2 pi x)
  int burn_in = 64;       // markov_field / cml sweeps discarded before t = 0
  bool antithetic = false;  // negate the driving field: same law, opposite sign of every perturbation
};

/// One realization of the random part of p(t, u, v) = T(v - u) + b(t, u, v) on a
/// periodic space-time box. b(t, u, u + w) = T(w) * eps * (g(t, u, w) - gbar(t, u))
/// with |g| <= 1/2 and gbar the T-weighted row mean of g, so every row is a
/// probability vector and sums of b vanish row by row.
class EnvField {
 public:
  EnvField(Kernel base, EnvParams params, std::vector<double> perturbations);

  [[nodiscard]] int dim() const noexcept { return base_.dim(); }
  [[nodiscard]] const Kernel& base() const noexcept { return base_; }
  [[nodiscard]] const EnvParams& params() const noexcept { return params_; }
  [[nodiscard]] int time_extent() const noexcept { return params_.time_extent; }
  [[nodiscard]] int box_radius() const noexcept { return params_.box_radius; }
  [[nodiscard]] int row_radius() const noexcept { return base_.radius(); }
  [[nodiscard]] std::size_t sites() const noexcept { return window_size(dim(), params_.box_radius); }
  [[nodiscard]] std::size_t row_size() const noexcept { return base_.size(); }
  /// True when no perturbation rows are stored (epsilon = 0).
  [[nodiscard]] bool deterministic() const noexcept { return perturbations_.empty(); }

  [[nodiscard]] std::size_t site_index(Offset site) const noexcept {
    return window_index(dim(), params_.box_radius, wrap(dim(), params_.box_radius, site));
  }
  /// b(t, u, u + w) as a row over w in the base window.
  [[nodiscard]] std::span<const double> beta_row(int t, std::size_t site) const noexcept;
  [[nodiscard]] double beta(int t, Offset u, Offset w) const noexcept;
  [[nodiscard]] double p(int t, Offset u, Offset w) const noexcept { return base_(w) + beta(t, u, w); }
  [[nodiscard]] std::span<const double> raw() const noexcept { return perturbations_; }

 private:
  Kernel base_;
  EnvParams params_;
  std::vector<double> perturbations_;  // [t][site][w], empty when deterministic
  std::vector<double> zero_row_;
};

/// Deterministic in (base, params): the same seed reproduces the field bit for bit.
/// Throws InvalidDisorder unless 0 <= epsilon < 1.
EnvField gen_environment(const Kernel& base, const EnvParams& params);

/// The driving field g(t, x) in [-1/2, 1/2] read by rows of the markov_field and
/// cml models, exposed for diagnostics. Layout [t][site]. Empty for iid.
std::vector<double> driving_field(const Kernel& base, const EnvParams& params);

struct MixingRow {
  int separation = 0;
  double value = 0.0;
  double stderr_ = 0.0;
};

struct ExpFit {
  double rate = 0.0;
  double rate_lo = 0.0;
  double rate_hi = 0.0;
  double r2 = 0.0;
  int points = 0;
};

struct MixingTable {
  Offset displacement{};
  std::vector<MixingRow> rows;
  double direct_variance = 0.0;  // two-pass sample variance of the same samples
  double direct_variance_stderr = 0.0;
  std::optional<ExpFit> fit;     // only for temporally correlated models
};

/// Two-point connected correlations <b(t, u, u+w) b(t+s, u, u+w)>^c for
/// s = 0..max_sep, pooled over replicas generated from `prototype.params()` with
/// derived seeds and over space-time translations. Standard errors come from the
/// spread of per-replica estimates. Throws InsufficientReplicas if replicas < 100
/// or no separation is resolved.
MixingTable env_mixing_probe(const EnvField& prototype, int max_sep, int replicas, Offset w = {1, 0});

/// Binary container: "RGWENV01", uint64 header length, JSON header, then the
/// perturbation rows as little-endian doubles.
void write_env(const EnvField& field, const std::string& path);
EnvField read_env(const std::string& path);

}  // namespace rgwalk
