#include "dualsource/demand.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "dualsource/normal.hpp"

namespace dualsource {

namespace {

void validate(const DiscreteUniform& u) {
  if (u.lo < 0 || u.lo > u.hi) throw DemandError("DiscreteUniform requires 0 <= lo <= hi");
}

void validate(const Empirical& e) {
  if (e.pmf.empty()) throw DemandError("Empirical pmf is empty");
  double total = 0.0;
  for (std::size_t i = 0; i < e.pmf.size(); ++i) {
    if (e.pmf[i].second < 0.0) throw DemandError("Empirical pmf has a negative probability");
    if (e.pmf[i].first < 0) throw DemandError("Empirical support must be non-negative");
    if (i > 0 && e.pmf[i].first <= e.pmf[i - 1].first)
      throw DemandError("Empirical support must be strictly ascending");
    total += e.pmf[i].second;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DemandError("Empirical probabilities must sum to 1");
}

void validate(const TruncatedNormalProcess& p) {
  if (p.mu.size() != p.sigma.size())
    throw DemandError("TruncatedNormalProcess mu/sigma length mismatch");
  if (!(p.trunc_lo < p.trunc_hi)) throw DemandError("TruncatedNormalProcess requires lo < hi");
  for (double s : p.sigma)
    if (!(s >= 0.0)) throw DemandError("TruncatedNormalProcess sigma must be >= 0");
}

}  // namespace

DemandModel::DemandModel(DiscreteUniform u) : model_(u) { validate(u); }
DemandModel::DemandModel(Empirical e) : model_(std::move(e)) {
  validate(std::get<Empirical>(model_));
}
DemandModel::DemandModel(TruncatedNormalProcess p) : model_(std::move(p)) {
  validate(std::get<TruncatedNormalProcess>(model_));
}

std::vector<std::pair<std::int64_t, double>> DemandModel::pmf() const {
  if (const auto* u = std::get_if<DiscreteUniform>(&model_)) {
    std::vector<std::pair<std::int64_t, double>> out;
    const double p = 1.0 / static_cast<double>(u->hi - u->lo + 1);
    for (std::int64_t v = u->lo; v <= u->hi; ++v) out.emplace_back(v, p);
    return out;
  }
  if (const auto* e = std::get_if<Empirical>(&model_)) return e->pmf;
  throw DemandError("pmf is only defined for discrete demand models");
}

std::int64_t DemandModel::max_demand() const {
  if (const auto* u = std::get_if<DiscreteUniform>(&model_)) return u->hi;
  if (const auto* e = std::get_if<Empirical>(&model_)) return e->pmf.back().first;
  throw DemandError("max_demand is only defined for discrete demand models");
}

std::int64_t DemandModel::min_demand() const {
  if (const auto* u = std::get_if<DiscreteUniform>(&model_)) return u->lo;
  if (const auto* e = std::get_if<Empirical>(&model_)) return e->pmf.front().first;
  throw DemandError("min_demand is only defined for discrete demand models");
}

double DemandModel::mean(std::size_t t) const {
  if (const auto* p = std::get_if<TruncatedNormalProcess>(&model_)) {
    if (t >= p->horizon()) throw DemandError("period index beyond demand horizon");
    return p->mu[t];
  }
  double m = 0.0;
  for (const auto& [v, q] : pmf()) m += static_cast<double>(v) * q;
  return m;
}

double DemandModel::sample(std::size_t t, Rng& rng) const {
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, DiscreteUniform>) {
          return static_cast<double>(rng.uniform_int(m.lo, m.hi));
        } else if constexpr (std::is_same_v<T, Empirical>) {
          const double u = rng.uniform();
          double acc = 0.0;
          for (const auto& [v, q] : m.pmf) {
            acc += q;
            if (u < acc) return static_cast<double>(v);
          }
          return static_cast<double>(m.pmf.back().first);
        } else {
          if (t >= m.horizon()) throw DemandError("period index beyond demand horizon");
          return sample_truncated_normal(m.mu[t], m.sigma[t], m.trunc_lo, m.trunc_hi, rng);
        }
      },
      model_);
}

double sample_truncated_normal(double mu, double sigma, double lo, double hi, Rng& rng) {
  if (sigma == 0.0) return std::clamp(mu, lo, hi);
  const double a = (lo - mu) / sigma;
  const double b = (hi - mu) / sigma;
  // Interval mass computed on the tail that keeps precision.
  const double mass = (a > 0.0) ? normal::ccdf(a) - normal::ccdf(b) : normal::cdf(b) - normal::cdf(a);
  if (mass > 0.05) {
    for (;;) {
      const double z = normal::quantile(rng.uniform_open());
      if (z > a && z < b) return mu + sigma * z;
    }
  }
  // Inverse CDF, mirrored so the interval sits in the lower tail.
  const bool mirror = a > 0.0;
  const double lo_z = mirror ? -b : a;
  const double hi_z = mirror ? -a : b;
  const double p_lo = normal::cdf(lo_z);
  const double p_hi = normal::cdf(hi_z);
  const double p = p_lo + rng.uniform_open() * (p_hi - p_lo);
  double z = normal::quantile(std::clamp(p, 1e-300, 1.0 - 1e-16));
  z = std::clamp(z, std::nextafter(lo_z, hi_z), std::nextafter(hi_z, lo_z));
  if (mirror) z = -z;
  return mu + sigma * z;
}

std::vector<std::pair<std::int64_t, double>> convolve_pmf(const DemandModel& model, int k) {
  if (k < 1) throw DemandError("convolution order must be >= 1");
  const auto base = model.pmf();
  std::map<std::int64_t, double> acc(base.begin(), base.end());
  for (int i = 1; i < k; ++i) {
    std::map<std::int64_t, double> next;
    for (const auto& [x, p] : acc)
      for (const auto& [y, q] : base) next[x + y] += p * q;
    acc = std::move(next);
  }
  return {acc.begin(), acc.end()};
}

std::int64_t quantile(const DemandModel& model, int k, double p) {
  if (!(p > 0.0 && p < 1.0)) throw DemandError("quantile requires 0 < p < 1");
  if (!model.is_discrete()) throw DemandError("exact quantile unsupported for continuous demand");
  const auto pmf = convolve_pmf(model, k);
  double cdf = 0.0;
  for (const auto& [x, q] : pmf) {
    cdf += q;
    // Relative slack absorbs rounding in the summed probabilities.
    if (cdf >= p * (1.0 - 1e-12)) return x;
  }
  return pmf.back().first;
}

double empirical_quantile(std::vector<double> samples, double p) {
  if (samples.empty()) throw DemandError("empirical_quantile of an empty sample");
  if (!(p > 0.0 && p < 1.0)) throw DemandError("quantile requires 0 < p < 1");
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<double>(samples.size());
  auto idx = static_cast<std::size_t>(std::ceil(p * n - 1e-9));
  idx = std::clamp<std::size_t>(idx, 1, samples.size());
  return samples[idx - 1];
}

TruncatedNormalProcess ingest_empirical(const std::vector<DemandRow>& rows) {
  std::map<std::string, std::map<std::size_t, double>> series;
  for (const auto& r : rows) {
    if (r.demand < 0.0) throw DemandError("negative demand in row for series " + r.series_id);
    if (!series[r.series_id].emplace(r.period, r.demand).second)
      throw DemandError("duplicate period " + std::to_string(r.period) + " in series " + r.series_id);
  }
  if (series.size() < 2) throw DemandError("at least two series are required to estimate sigma");
  const auto& first = series.begin()->second;
  const std::size_t horizon = first.size();
  for (const auto& [id, s] : series) {
    if (s.size() != horizon) throw DemandError("ragged series: " + id);
    std::size_t expect = 0;
    for (const auto& [t, d] : s) {
      if (t != expect) throw DemandError("series " + id + " periods are not consecutive from 0");
      ++expect;
    }
  }
  TruncatedNormalProcess out;
  out.trunc_lo = 0.0;
  out.trunc_hi = 1e8;
  out.mu.resize(horizon);
  out.sigma.resize(horizon);
  const auto n = static_cast<double>(series.size());
  for (std::size_t t = 0; t < horizon; ++t) {
    double sum = 0.0;
    for (const auto& [id, s] : series) sum += s.at(t);
    const double m = sum / n;
    double ss = 0.0;
    for (const auto& [id, s] : series) ss += (s.at(t) - m) * (s.at(t) - m);
    out.mu[t] = m;
    out.sigma[t] = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

std::vector<DemandRow> read_demand_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DemandError("empty demand CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "period,series_id,demand")
    throw DemandError("demand CSV header must be 'period,series_id,demand'");
  std::vector<DemandRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string period, id, demand;
    if (!std::getline(ss, period, ',') || !std::getline(ss, id, ',') || !std::getline(ss, demand))
      throw DemandError("malformed CSV line " + std::to_string(lineno));
    try {
      std::size_t used = 0;
      const long long p = std::stoll(period, &used);
      if (used != period.size() || p < 0) throw std::invalid_argument("period");
      const double d = std::stod(demand, &used);
      if (used != demand.size()) throw std::invalid_argument("demand");
      rows.push_back({static_cast<std::size_t>(p), id, d});
    } catch (const std::exception&) {
      throw DemandError("malformed CSV line " + std::to_string(lineno));
    }
  }
  return rows;
}

void write_demand_csv(std::ostream& out, const std::vector<DemandRow>& rows) {
  out << "period,series_id,demand\n";
  out.precision(17);
  for (const auto& r : rows) out << r.period << ',' << r.series_id << ',' << r.demand << '\n';
}

std::vector<DemandRow> synthetic_lifecycle_demand(std::size_t n_series, std::size_t weeks,
                                                  std::uint64_t seed) {
  const Rng root(seed);
  std::vector<DemandRow> rows;
  rows.reserve(n_series * weeks);
  auto smoothstep = [](double x) {
    x = std::clamp(x, 0.0, 1.0);
    return x * x * (3.0 - 2.0 * x);
  };
  const double scale = static_cast<double>(weeks) / 115.0;
  for (std::size_t i = 0; i < n_series; ++i) {
    Rng rng = root.substream(i);
    const double start = scale * (4.0 + 8.0 * rng.uniform());
    const double peak = scale * (64.0 + 10.0 * rng.uniform());
    const double plateau = scale * (3.0 + 6.0 * rng.uniform());
    const double end = std::min(static_cast<double>(weeks) + 2.0,
                                peak + plateau + scale * (30.0 + 12.0 * rng.uniform()));
    const double amplitude = 3.2e5 * std::exp(0.25 * normal::quantile(rng.uniform_open()) - 0.03);
    const std::string id = "S" + std::to_string(i);
    for (std::size_t t = 0; t < weeks; ++t) {
      const double x = static_cast<double>(t);
      double shape;
      if (x < start) {
        shape = 0.0;
      } else if (x < peak) {
        shape = smoothstep((x - start) / (peak - start));
      } else if (x < peak + plateau) {
        shape = 1.0 - 0.05 * (x - peak) / plateau;
      } else {
        shape = 0.95 * (1.0 - smoothstep((x - peak - plateau) / (end - peak - plateau)));
      }
      const double noise = std::exp(0.15 * normal::quantile(rng.uniform_open()));
      rows.push_back({t, id, shape > 0.0 ? amplitude * shape * noise : 0.0});
    }
  }
  return rows;
}

}  // namespace dualsource
