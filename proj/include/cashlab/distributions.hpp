#ifndef CASHLAB_DISTRIBUTIONS_HPP
#define CASHLAB_DISTRIBUTIONS_HPP

namespace cashlab {

// Regularized incomplete beta I_x(a, b), continued fraction (modified Lentz).
double incomplete_beta(double a, double b, double x);

// Regularized upper incomplete gamma Q(a, x): series below x = a + 1,
// continued fraction above.
double incomplete_gamma_upper(double a, double x);

// P(F > x) for an F(d1, d2) variable.
double f_tail(double x, double d1, double d2);

// P(X > x) for a chi-squared variable with k degrees of freedom.
double chi2_tail(double x, double k);

double normal_cdf(double z);

}  // namespace cashlab

#endif  // CASHLAB_DISTRIBUTIONS_HPP
