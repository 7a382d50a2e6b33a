#pragma once

#include <Eigen/Dense>

#include "rmsmtc/conic.hpp"

namespace rmsmtc {

// First-order expansion of c*d/(T - t) at (d0, t0), exactly:
//   c*d0/(T-t0) + c/(T-t0)*(d - d0) + c*d0/(T-t0)^2 * (t - t0)
double taylor_ratio_upper(double d0, double t0, double d, double t, double c, double T);

// First-order expansion of c*d/t at (d0, t0), exactly:
//   c*d0/t0 + c/t0*(d - d0) - c*d0/t0^2 * (t - t0)
double taylor_ratio_upper_mec(double d0, double t0, double d, double t, double c);

// Affine global lower bound on the spectral norm, built at S_prev:
//   ||S||_2 >= ||S_prev||_2 + tr(u u^H (S - S_prev)),  u = top unit eigenvector.
struct SpectralLinearization {
  Eigen::VectorXcd u;
  double offset = 0.0;  // value minus tr(u u^H S); zero up to roundoff

  double value(const Eigen::MatrixXcd& S) const {
    return (u.adjoint() * S * u).real()(0, 0) + offset;
  }
};

SpectralLinearization linearize_spectral_norm(const Eigen::MatrixXcd& S_prev);

// Epigraph u >= coeff * d^3 / denom^2 as a 3-d power cone over affine
// arguments (u, denom, cbrt(coeff)*d). denom may be a variable expression
// such as T - t1; it must stay positive.
int add_cubic_over_square_epigraph(conic::ConicProgram& prog, conic::LinExpr u,
                                   double coeff, conic::LinExpr d, conic::LinExpr denom);

// Rate constraint d <= t * a * W * log2(1 + p*gain/(a*noise)).
//  * "P2 mode": t is a positive constant, (a, p) may be variable; encoded as
//    one exponential cone.
//  * "P3 mode": a and p constant; reduces to the linear row d <= t * R.
// Bit/time units are whatever the caller uses for d and t (d per second of t).
// Rejects the bilinear combination (variable t with variable a or p).
int add_perspective_rate_constraint(conic::ConicProgram& prog, conic::LinExpr d,
                                    conic::LinExpr t, conic::LinExpr a,
                                    conic::LinExpr p_tilde, double gain, double noise,
                                    double W, bool phase1_shiftable = false);

}  // namespace rmsmtc
