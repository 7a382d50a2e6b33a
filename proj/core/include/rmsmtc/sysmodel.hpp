#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rmsmtc/channel.hpp"
#include "rmsmtc/params.hpp"

namespace rmsmtc {

// One full decision point. Subcarrier shares A/B live in [0,1] (binary after
// rounding); P1..P3 are the actual per-carrier transmit powers, so the
// auxiliary relaxed powers are a.*P implicitly.
struct Allocation {
  Eigen::MatrixXd A, B;            // K x N shares
  Eigen::MatrixXd P1, P2, P3;      // K x N powers, W (slots I, II, III)
  Eigen::VectorXd d_l, d_r, d_m;   // task bits
  Eigen::VectorXd t1, t2, t3, t4;  // slot durations, s
  Eigen::VectorXcd s_vec;          // M transmissive coefficients
  Eigen::MatrixXcd S_mat;          // M x M transmissive covariance

  static Allocation zeros(const SystemParams& params);
  void sync_S_from_s();  // S = s s^H
};

struct ResidualEntry {
  std::string name;  // constraint family
  double value;      // signed relative residual; > 0 means violated
};

struct FeasibilityReport {
  std::vector<ResidualEntry> residuals;
  double max_violation = 0.0;
  bool feasible = false;
  double tol = 0.0;

  double residual(const std::string& name) const;  // max over entries with this name
  std::string to_text() const;                     // diagnostic block
};

// Shannon-type subcarrier rate a * W * log2(1 + p*gain2/noise), bits/s.
// Power p is the actual per-carrier power; with shares in [0,1] this equals
// the perspective form of the relaxed program evaluated at p_tilde = a*p.
double rate_term(double a, double W, double p, double gain2, double noise);

// Perspective form over the auxiliary power p_tilde: a*W*log2(1 +
// p_tilde*gain2/(a*noise)), continuously extended to 0 at a = 0.
double rate_term_perspective(double a, double W, double p_tilde, double gain2, double noise);

double rate_slot1(const SystemParams& params, double h_gain2, double a, double p);
double rate_slot2(const SystemParams& params, double h_gain2, double a, double p);
double rate_slot3(const SystemParams& params, const ChannelSet& ch, double b, double p,
                  const Eigen::VectorXcd& s_vec, int n);
// tr(S V_n) in place of |v_n^H s|^2
double rate_slot3_cov(const SystemParams& params, const ChannelSet& ch, double b,
                      double p, const Eigen::MatrixXcd& S, int n);

// Per-user sums of the three slot rates at the allocation's shares/powers.
Eigen::VectorXd slot1_rates(const SystemParams& p, const ChannelSet& ch, const Allocation& a);
Eigen::VectorXd slot2_rates(const SystemParams& p, const ChannelSet& ch, const Allocation& a);
Eigen::VectorXd slot3_rates(const SystemParams& p, const ChannelSet& ch, const Allocation& a);

Eigen::VectorXd offload_energy(const Allocation& alloc, const SystemParams& params);

double local_compute_energy(const SystemParams& params, double d_l, double T);
bool local_cpu_ok(const SystemParams& params, double d_l, double T);

// alpha_r (c_r d_r)^3 / (T - t1)^2; throws std::domain_error for t1 >= T.
double cn_compute_energy(const SystemParams& params, double d_r, double t1);

double mec_slot_time(const SystemParams& params, double d_m, double f);

double total_objective(const Allocation& alloc, const SystemParams& params);

FeasibilityReport check_feasibility(const Allocation& alloc, const SystemParams& params,
                                    const ChannelSet& ch, double tol);

}  // namespace rmsmtc
