#include "rmsmtc/sysmodel.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rmsmtc {

namespace {
constexpr double kLn2 = 0.6931471805599453;

double log2p1(double x) { return std::log1p(x) / kLn2; }
}  // namespace

Allocation Allocation::zeros(const SystemParams& params) {
  const int K = params.K, N = params.N, M = params.M();
  Allocation a;
  a.A = Eigen::MatrixXd::Zero(K, N);
  a.B = Eigen::MatrixXd::Zero(K, N);
  a.P1 = Eigen::MatrixXd::Zero(K, N);
  a.P2 = Eigen::MatrixXd::Zero(K, N);
  a.P3 = Eigen::MatrixXd::Zero(K, N);
  a.d_l = Eigen::VectorXd::Zero(K);
  a.d_r = Eigen::VectorXd::Zero(K);
  a.d_m = Eigen::VectorXd::Zero(K);
  a.t1 = Eigen::VectorXd::Zero(K);
  a.t2 = Eigen::VectorXd::Zero(K);
  a.t3 = Eigen::VectorXd::Zero(K);
  a.t4 = Eigen::VectorXd::Zero(K);
  a.s_vec = Eigen::VectorXcd::Zero(M);
  a.S_mat = Eigen::MatrixXcd::Zero(M, M);
  return a;
}

void Allocation::sync_S_from_s() { S_mat = s_vec * s_vec.adjoint(); }

double rate_term(double a, double W, double p, double gain2, double noise) {
  if (a <= 0.0 || p <= 0.0 || gain2 <= 0.0) return 0.0;
  return a * W * log2p1(p * gain2 / noise);
}

double rate_term_perspective(double a, double W, double p_tilde, double gain2,
                             double noise) {
  if (a <= 0.0) return 0.0;  // closure of the perspective function
  if (p_tilde <= 0.0 || gain2 <= 0.0) return 0.0;
  return a * W * log2p1(p_tilde * gain2 / (a * noise));
}

double rate_slot1(const SystemParams& params, double h_gain2, double a, double p) {
  return rate_term(a, params.W, p, h_gain2, params.sigma2);
}

double rate_slot2(const SystemParams& params, double h_gain2, double a, double p) {
  return rate_term(a, params.W, p, h_gain2, params.sigma2);
}

double rate_slot3(const SystemParams& params, const ChannelSet& ch, double b, double p,
                  const Eigen::VectorXcd& s_vec, int n) {
  const Complex cascade = ch.v.col(n).adjoint() * s_vec;
  return rate_term(b, params.W, p, std::norm(cascade), params.delta2);
}

double rate_slot3_cov(const SystemParams& params, const ChannelSet& ch, double b,
                      double p, const Eigen::MatrixXcd& S, int n) {
  const double gain2 = (S * ch.V[static_cast<std::size_t>(n)]).trace().real();
  return rate_term(b, params.W, p, gain2, params.delta2);
}

Eigen::VectorXd slot1_rates(const SystemParams& p, const ChannelSet& ch,
                            const Allocation& a) {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(p.K);
  for (int k = 0; k < p.K; k++)
    for (int n = 0; n < p.N; n++)
      r(k) += rate_slot1(p, std::norm(ch.h_r(k, n)), a.A(k, n), a.P1(k, n));
  return r;
}

Eigen::VectorXd slot2_rates(const SystemParams& p, const ChannelSet& ch,
                            const Allocation& a) {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(p.K);
  for (int k = 0; k < p.K; k++)
    for (int n = 0; n < p.N; n++)
      r(k) += rate_slot2(p, std::norm(ch.h_r(k, n)), a.A(k, n), a.P2(k, n));
  return r;
}

Eigen::VectorXd slot3_rates(const SystemParams& p, const ChannelSet& ch,
                            const Allocation& a) {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(p.K);
  for (int k = 0; k < p.K; k++)
    for (int n = 0; n < p.N; n++)
      r(k) += rate_slot3(p, ch, a.B(k, n), a.P3(k, n), a.s_vec, n);
  return r;
}

Eigen::VectorXd offload_energy(const Allocation& alloc, const SystemParams& params) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(params.K);
  for (int k = 0; k < params.K; k++)
    for (int n = 0; n < params.N; n++)
      e(k) += alloc.A(k, n) * alloc.P1(k, n) * alloc.t1(k) +
              alloc.A(k, n) * alloc.P2(k, n) * alloc.t2(k) +
              alloc.B(k, n) * alloc.P3(k, n) * alloc.t3(k);
  return e;
}

double local_compute_energy(const SystemParams& params, double d_l, double T) {
  const double cycles = params.c_t * d_l;
  return params.alpha_t * cycles * cycles * cycles / (T * T);
}

bool local_cpu_ok(const SystemParams& params, double d_l, double T) {
  return params.c_t * d_l / T <= params.f_t_max * (1.0 + 1e-12);
}

double cn_compute_energy(const SystemParams& params, double d_r, double t1) {
  if (d_r == 0.0) return 0.0;
  const double rem = params.T - t1;
  if (rem <= 0.0) throw std::domain_error("cn_compute_energy: no compute time left (t1 >= T)");
  const double cycles = params.c_r * d_r;
  return params.alpha_r * cycles * cycles * cycles / (rem * rem);
}

double mec_slot_time(const SystemParams& params, double d_m, double f) {
  if (d_m == 0.0) return 0.0;
  if (f <= 0.0) throw std::domain_error("mec_slot_time: nonpositive CPU frequency");
  return params.c_m * d_m / f;
}

double total_objective(const Allocation& alloc, const SystemParams& params) {
  double total = offload_energy(alloc, params).sum();
  for (int k = 0; k < params.K; k++) {
    total += local_compute_energy(params, alloc.d_l(k), params.T);
    total += cn_compute_energy(params, alloc.d_r(k), alloc.t1(k));
  }
  return total;
}

double FeasibilityReport::residual(const std::string& name) const {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& r : residuals)
    if (r.name == name) worst = std::max(worst, r.value);
  return worst;
}

std::string FeasibilityReport::to_text() const {
  std::ostringstream os;
  os.precision(6);
  os << "feasible=" << (feasible ? "yes" : "no") << " max_violation=" << max_violation
     << " tol=" << tol << '\n';
  for (const auto& r : residuals) os << "  " << r.name << " = " << r.value << '\n';
  return os.str();
}

FeasibilityReport check_feasibility(const Allocation& alloc, const SystemParams& params,
                                    const ChannelSet& ch, double tol) {
  FeasibilityReport rep;
  rep.tol = tol;
  const int K = params.K, N = params.N, M = params.M();

  auto push = [&rep](const std::string& name, double lhs_minus_rhs, double scale) {
    rep.residuals.push_back({name, lhs_minus_rhs / std::max(scale, 1e-300)});
  };

  const Eigen::VectorXd r1 = slot1_rates(params, ch, alloc);
  const Eigen::VectorXd r2 = slot2_rates(params, ch, alloc);
  const Eigen::VectorXd r3 = slot3_rates(params, ch, alloc);

  double cpu_cn_sum = 0.0, cpu_mec_sum = 0.0;
  for (int k = 0; k < K; k++) {
    const double D = params.D[static_cast<std::size_t>(k)];
    const double bit_scale = std::max(D, 1.0);

    push("task_split", std::abs(alloc.d_l(k) + alloc.d_r(k) + alloc.d_m(k) - D), bit_scale);
    push("time_budget",
         alloc.t1(k) + alloc.t2(k) + alloc.t3(k) + alloc.t4(k) - params.T, params.T);
    push("cn_offload_bits", alloc.d_r(k) - alloc.t1(k) * r1(k), bit_scale);
    push("mec_offload_bits_hop1", alloc.d_m(k) - alloc.t2(k) * r2(k), bit_scale);
    push("mec_offload_bits_hop2", alloc.d_m(k) - alloc.t3(k) * r3(k), bit_scale);

    double p1 = 0.0, p2 = 0.0;
    for (int n = 0; n < N; n++) {
      p1 += alloc.A(k, n) * alloc.P1(k, n);
      p2 += alloc.A(k, n) * alloc.P2(k, n);
    }
    push("power_cap_tn_slot1", p1 - params.P_t_max, params.P_t_max);
    push("power_cap_tn_slot2", p2 - params.P_t_max, params.P_t_max);

    push("cpu_cap_tn", params.c_t * alloc.d_l(k) / params.T - params.f_t_max, params.f_t_max);
    if (alloc.d_r(k) > 0.0) {
      const double rem = params.T - alloc.t1(k);
      if (rem <= 0.0)
        push("cpu_cap_cn", 1.0, 1e-6);  // no compute time left
      else
        cpu_cn_sum += params.c_r * alloc.d_r(k) / rem;
    }
    if (alloc.d_m(k) > 0.0) {
      if (alloc.t4(k) <= 0.0)
        push("cpu_cap_mec", 1.0, 1e-6);
      else
        cpu_mec_sum += params.c_m * alloc.d_m(k) / alloc.t4(k);
    }

    push("bits_nonneg", -std::min({alloc.d_l(k), alloc.d_r(k), alloc.d_m(k)}), bit_scale);
    push("time_nonneg", -std::min({alloc.t1(k), alloc.t2(k), alloc.t3(k), alloc.t4(k)}),
         params.T);
  }

  push("cpu_cap_cn", cpu_cn_sum - params.f_r_max, params.f_r_max);
  push("cpu_cap_mec", cpu_mec_sum - params.f_m_max, params.f_m_max);

  double p3 = 0.0;
  for (int k = 0; k < K; k++)
    for (int n = 0; n < N; n++) p3 += alloc.B(k, n) * alloc.P3(k, n);
  push("power_cap_relay", p3 - params.P_r_max, params.P_r_max);

  for (int n = 0; n < N; n++) {
    push("subcarrier_share_a", alloc.A.col(n).sum() - 1.0, 1.0);
    push("subcarrier_share_b", alloc.B.col(n).sum() - 1.0, 1.0);
  }
  push("share_range",
       std::max(alloc.A.maxCoeff() - 1.0, alloc.B.maxCoeff() - 1.0), 1.0);
  push("share_range", -std::min(alloc.A.minCoeff(), alloc.B.minCoeff()), 1.0);
  push("power_nonneg",
       -std::min({alloc.P1.minCoeff(), alloc.P2.minCoeff(), alloc.P3.minCoeff()}),
       params.P_t_max);

  double smax = 0.0;
  for (int m = 0; m < M; m++) smax = std::max(smax, std::abs(alloc.s_vec(m)));
  push("transmissive_magnitude", smax - 1.0, 1.0);

  rep.max_violation = -std::numeric_limits<double>::infinity();
  for (const auto& r : rep.residuals) rep.max_violation = std::max(rep.max_violation, r.value);
  rep.feasible = rep.max_violation <= tol;
  return rep;
}

}  // namespace rmsmtc
