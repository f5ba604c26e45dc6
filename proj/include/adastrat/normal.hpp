#pragma once

namespace adastrat {

// Standard normal density.
double std_normal_pdf(double x);

// Standard normal CDF, accurate in both tails (erfc based).
double std_normal_cdf(double x);

// Inverse standard normal CDF. Rational initial guess refined with one
// Newton step on the CDF; absolute error below 1e-9 on [1e-12, 1-1e-12].
// Throws std::domain_error unless 0 < u < 1.
double std_normal_quantile(double u);

}  // namespace adastrat
