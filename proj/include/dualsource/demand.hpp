#pragma once

#include <cstdint>
#include <istream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "dualsource/rng.hpp"

namespace dualsource {

struct DiscreteUniform {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
};

/// Finite-support pmf; support sorted ascending.
struct Empirical {
  std::vector<std::pair<std::int64_t, double>> pmf;
};

/// Per-period truncated normal demand N+(mu_t, sigma_t, trunc_lo, trunc_hi).
struct TruncatedNormalProcess {
  std::vector<double> mu;
  std::vector<double> sigma;
  double trunc_lo = 0.0;
  double trunc_hi = 1e8;

  std::size_t horizon() const { return mu.size(); }
};

/// Thrown for invalid models, unsupported operations, or malformed input.
class DemandError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DemandModel {
public:
  using Variant = std::variant<DiscreteUniform, Empirical, TruncatedNormalProcess>;

  DemandModel(DiscreteUniform u);
  DemandModel(Empirical e);
  DemandModel(TruncatedNormalProcess p);

  const Variant& variant() const { return model_; }

  bool is_discrete() const { return !std::holds_alternative<TruncatedNormalProcess>(model_); }
  bool is_time_varying() const { return !is_discrete(); }

  /// Single-period pmf of a discrete model; throws for continuous models.
  std::vector<std::pair<std::int64_t, double>> pmf() const;

  std::int64_t max_demand() const;
  std::int64_t min_demand() const;
  double mean(std::size_t t = 0) const;

  /// Draws one demand for period t.
  double sample(std::size_t t, Rng& rng) const;

private:
  Variant model_;
};

/// Exact pmf of the k-fold convolution of a discrete single-period model.
std::vector<std::pair<std::int64_t, double>> convolve_pmf(const DemandModel& model, int k);

/// Smallest x with Pr(D_1 + ... + D_k <= x) >= p, by exact convolution.
std::int64_t quantile(const DemandModel& model, int k, double p);

/// Smallest sample value x whose empirical CDF reaches p.
double empirical_quantile(std::vector<double> samples, double p);

/// One-period draw from N(mu, sigma) truncated to (lo, hi).
double sample_truncated_normal(double mu, double sigma, double lo, double hi, Rng& rng);

struct DemandRow {
  std::size_t period = 0;
  std::string series_id;
  double demand = 0.0;
};

/// Per-period cross-series mean and sample standard deviation (n - 1).
TruncatedNormalProcess ingest_empirical(const std::vector<DemandRow>& rows);

/// Parses `period,series_id,demand` CSV with a header line.
std::vector<DemandRow> read_demand_csv(std::istream& in);
void write_demand_csv(std::ostream& out, const std::vector<DemandRow>& rows);

/// Synthetic product-lifecycle demand: `n_series` hump-shaped traces over
/// `weeks` periods with the mean peaking near week 70 at about 3e5 units.
std::vector<DemandRow> synthetic_lifecycle_demand(std::size_t n_series, std::size_t weeks,
                                                  std::uint64_t seed);

}  // namespace dualsource
