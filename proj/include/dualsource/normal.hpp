#pragma once

namespace dualsource::normal {

/// Standard normal CDF.
double cdf(double x);

/// Upper tail 1 - cdf(x), accurate for large x.
double ccdf(double x);

/// Standard normal quantile for p in (0, 1). Acklam's rational approximation
/// refined by one Halley step; relative error is below 1e-12 over the range.
double quantile(double p);

}  // namespace dualsource::normal
