#pragma once

namespace cogstat::stats {

/// Regularized incomplete beta function I_x(a, b) for a, b > 0 and x in [0, 1].
double incomplete_beta(double a, double b, double x);

/// P(|T| >= |t|) for Student's t with `dof` degrees of freedom.
double student_t_two_sided_p(double t, double dof);

/// P(T <= t).
double student_t_cdf(double t, double dof);

}  // namespace cogstat::stats
