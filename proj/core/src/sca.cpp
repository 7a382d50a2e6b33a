#include "rmsmtc/sca.hpp"

#include <cmath>
#include <stdexcept>

namespace rmsmtc {

double taylor_ratio_upper(double d0, double t0, double d, double t, double c, double T) {
  const double rem = T - t0;
  return c * d0 / rem + c / rem * (d - d0) + c * d0 / (rem * rem) * (t - t0);
}

double taylor_ratio_upper_mec(double d0, double t0, double d, double t, double c) {
  return c * d0 / t0 + c / t0 * (d - d0) - c * d0 / (t0 * t0) * (t - t0);
}

SpectralLinearization linearize_spectral_norm(const Eigen::MatrixXcd& S_prev) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(S_prev);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("eigendecomposition failed");
  const Eigen::Index top = S_prev.rows() - 1;  // eigenvalues ascending
  SpectralLinearization lin;
  lin.u = eig.eigenvectors().col(top);
  const double lmax = eig.eigenvalues()(top);
  lin.offset = lmax - (lin.u.adjoint() * S_prev * lin.u).real()(0, 0);
  return lin;
}

int add_cubic_over_square_epigraph(conic::ConicProgram& prog, conic::LinExpr u,
                                   double coeff, conic::LinExpr d,
                                   conic::LinExpr denom) {
  if (!(coeff > 0.0)) throw std::invalid_argument("cubic epigraph needs coeff > 0");
  conic::LinExpr z = std::move(d);
  z *= std::cbrt(coeff);
  // u^(1/3) * denom^(2/3) >= |cbrt(coeff) d|  <=>  u * denom^2 >= coeff d^3
  return prog.add_pow_cone(std::move(u), std::move(denom), std::move(z), 1.0 / 3.0);
}

int add_perspective_rate_constraint(conic::ConicProgram& prog, conic::LinExpr d,
                                    conic::LinExpr t, conic::LinExpr a,
                                    conic::LinExpr p_tilde, double gain, double noise,
                                    double W, bool phase1_shiftable) {
  const bool t_var = !t.is_constant();
  const bool ap_var = !a.is_constant() || !p_tilde.is_constant();
  if (t_var && ap_var)
    throw std::invalid_argument(
        "rate constraint: time and (share, power) cannot both be variable");

  if (!ap_var) {
    // rate is a constant R; linear row d - t*R <= 0
    const double snr = (a.constant > 0.0)
                           ? p_tilde.constant * gain / (a.constant * noise)
                           : 0.0;
    const double R = (a.constant > 0.0) ? a.constant * W * std::log2(1.0 + snr) : 0.0;
    conic::LinExpr row = std::move(d);
    t *= -R;
    row += t;
    return prog.add_lin_le(std::move(row), 0.0, phase1_shiftable);
  }

  // t constant: d <= t*a*W*log2(1 + p*gain/(a*noise))
  //   <=>  a * exp( d*ln2/(W*t*a) ) <= a + p*gain/noise
  const double tc = t.constant;
  if (!(tc > 0.0))
    throw std::invalid_argument("rate constraint: need a positive constant time slot");
  conic::LinExpr x = std::move(d);
  x *= std::log(2.0) / (W * tc);
  conic::LinExpr z = a;
  conic::LinExpr ps = std::move(p_tilde);
  ps *= gain / noise;
  z += ps;
  return prog.add_exp_cone(std::move(x), std::move(a), std::move(z));
}

}  // namespace rmsmtc
