#pragma once

#include <functional>

namespace relkit::special {

double normal_cdf(double x);
// Upper tail 1 - Phi(x), accurate far into the tail.
double normal_sf(double x);

// Regularized lower/upper incomplete gamma P(a, x), Q(a, x); a > 0, x >= 0.
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Regularized incomplete beta I_x(a, b); a, b > 0, 0 <= x <= 1.
double beta_inc(double a, double b, double x);

double chi_square_sf(double x, double df);
double f_sf(double f, double df1, double df2);

// Distribution of the range of k iid standard normals (studentized range with
// infinite degrees of freedom).
double studentized_range_cdf(double q, int k);
double studentized_range_sf(double q, int k);

// Adaptive 15-point Gauss-Kronrod quadrature to absolute tolerance `tol`.
double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-13);

}  // namespace relkit::special
