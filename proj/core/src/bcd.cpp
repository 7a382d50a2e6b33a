#include "rmsmtc/bcd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "rmsmtc/sca.hpp"

namespace rmsmtc {

namespace {

using conic::ConicProgram;
using conic::LinExpr;
using conic::SolveOutcome;
using conic::SolveStatus;
using conic::StartHint;

constexpr double kMb = 1e6;       // bits per Mbit; conic programs use Mbit
constexpr double kBitTol = 1e-6;  // "no demand" threshold, bits
constexpr double kShareTol = 1e-9;

double perspective_rate(const SystemParams& p, double a, double p_aux, double gain2,
                        double noise) {
  return rate_term_perspective(a, p.W, p_aux, gain2, noise);
}

// ---------------------------------------------------------------------------
// subproblem-1 builders: relaxed shares + powers (slots I/II on the TN side,
// slot III on the relay side). With shares_fixed the same machinery becomes
// the post-rounding power repair.

struct TnSideBuild {
  ConicProgram prog;
  std::vector<double> x0;
  Eigen::MatrixXi a_var, p1_var, p2_var;
  bool any = false;
  bool dead_leg = false;  // demand present but no usable carrier
};

TnSideBuild build_tn_side(const SystemParams& par, const ChannelSet& ch,
                          const Allocation& fixed, const PipelineOptions& opts,
                          bool shares_fixed, const Eigen::MatrixXd& A_fix) {
  const int K = par.K, N = par.N;
  TnSideBuild b;
  b.a_var = Eigen::MatrixXi::Constant(K, N, -1);
  b.p1_var = Eigen::MatrixXi::Constant(K, N, -1);
  b.p2_var = Eigen::MatrixXi::Constant(K, N, -1);

  auto push_var = [&b](double lo, double hi, int group, double start) {
    const int id = b.prog.add_var(lo, hi, group);
    b.x0.push_back(start);
    return id;
  };

  const double p_floor = 1e-5 * par.P_t_max / N;

  for (int k = 0; k < K; k++) {
    const bool s1 = opts.enable_cn_leg && fixed.d_r(k) > kBitTol && fixed.t1(k) > 1e-12;
    const bool s2 = opts.enable_mec_leg && fixed.d_m(k) > kBitTol && fixed.t2(k) > 1e-12;
    if (!s1 && !s2) continue;
    b.any = true;

    Eigen::VectorXd a0(N);
    for (int n = 0; n < N; n++)
      a0(n) = std::clamp(shares_fixed ? A_fix(k, n) : fixed.A(k, n), 1e-4, 1.0 - 1e-3);

    if (!shares_fixed)
      for (int n = 0; n < N; n++) b.a_var(k, n) = push_var(0.0, 1.0, k, a0(n));

    for (int slot = 0; slot < 2; slot++) {
      if (slot == 0 && !s1) continue;
      if (slot == 1 && !s2) continue;
      const Eigen::MatrixXd& P_prev = slot == 0 ? fixed.P1 : fixed.P2;
      const double t_slot = slot == 0 ? fixed.t1(k) : fixed.t2(k);
      const double demand_mb = (slot == 0 ? fixed.d_r(k) : fixed.d_m(k)) / kMb;
      Eigen::MatrixXi& p_var = slot == 0 ? b.p1_var : b.p2_var;

      // previous powers scaled into the cap, floored away from zero
      Eigen::VectorXd p0(N);
      double tot = 0.0;
      for (int n = 0; n < N; n++) {
        const double share = shares_fixed ? A_fix(k, n) : fixed.A(k, n);
        p0(n) = std::max(share * P_prev(k, n), p_floor);
        tot += p0(n);
      }
      if (tot > 0.98 * par.P_t_max) p0 *= 0.98 * par.P_t_max / tot;

      LinExpr cap_row, rate_row;
      for (int n = 0; n < N; n++) {
        const double share_fix = shares_fixed ? A_fix(k, n) : 0.0;
        if (shares_fixed && share_fix <= kShareTol) continue;
        const double gain2 = std::norm(ch.h_r(k, n));
        if (gain2 <= 0.0) continue;
        const double rho_hi =
            par.W / kMb * std::log2(1.0 + par.P_t_max * gain2 / par.sigma2) + 1.0;

        p_var(k, n) = push_var(0.0, conic::kInf, k, p0(n));
        const double a_start = shares_fixed ? share_fix : a0(n);
        const double rate0 =
            perspective_rate(par, a_start, p0(n), gain2, par.sigma2) * (1.0 - 1e-3);
        const int rv = push_var(-1.0, rho_hi, k, std::max(rate0 / kMb, -0.5));

        LinExpr a_expr = shares_fixed ? LinExpr(share_fix) : LinExpr::var(b.a_var(k, n));
        add_perspective_rate_constraint(b.prog, LinExpr::var(rv, kMb), LinExpr(1.0),
                                        a_expr, LinExpr::var(p_var(k, n)), gain2,
                                        par.sigma2, par.W);
        cap_row.add(p_var(k, n), 1.0);
        rate_row.add(rv, -t_slot);
      }
      if (rate_row.terms.empty()) {
        b.dead_leg = true;
        continue;
      }
      b.prog.add_lin_le(std::move(cap_row), par.P_t_max);
      b.prog.add_lin_le(std::move(rate_row), -demand_mb, /*phase1_shiftable=*/true);
    }
  }

  if (!shares_fixed)
    for (int n = 0; n < N; n++) {
      LinExpr col;
      for (int k = 0; k < K; k++)
        if (b.a_var(k, n) >= 0) col.add(b.a_var(k, n), 1.0);
      if (!col.terms.empty()) b.prog.add_lin_le(std::move(col), 1.0);
    }

  LinExpr obj;
  for (int k = 0; k < K; k++)
    for (int n = 0; n < N; n++) {
      if (b.p1_var(k, n) >= 0) obj.add(b.p1_var(k, n), fixed.t1(k));
      if (b.p2_var(k, n) >= 0) obj.add(b.p2_var(k, n), fixed.t2(k));
    }
  b.prog.set_objective(std::move(obj));
  return b;
}

struct RelaySideBuild {
  ConicProgram prog;
  std::vector<double> x0;
  Eigen::MatrixXi b_var, p3_var;
  bool any = false;
  bool dead_leg = false;
};

RelaySideBuild build_relay_side(const SystemParams& par, const ChannelSet& ch,
                                const Allocation& fixed, const PipelineOptions& opts,
                                bool shares_fixed, const Eigen::MatrixXd& B_fix) {
  const int K = par.K, N = par.N;
  RelaySideBuild b;
  b.b_var = Eigen::MatrixXi::Constant(K, N, -1);
  b.p3_var = Eigen::MatrixXi::Constant(K, N, -1);

  auto push_var = [&b](double lo, double hi, int group, double start) {
    const int id = b.prog.add_var(lo, hi, group);
    b.x0.push_back(start);
    return id;
  };

  Eigen::VectorXd gain3(N);
  for (int n = 0; n < N; n++)
    gain3(n) = std::norm((ch.v.col(n).adjoint() * fixed.s_vec)(0, 0));

  const double p_floor = 1e-5 * par.P_r_max / N;
  LinExpr relay_cap;
  double relay_tot0 = 0.0;
  std::vector<int> p3_ids;

  for (int k = 0; k < K; k++) {
    const bool act = opts.enable_mec_leg && fixed.d_m(k) > kBitTol && fixed.t3(k) > 1e-12;
    if (!act) continue;
    b.any = true;

    LinExpr rate_row;
    for (int n = 0; n < N; n++) {
      const double share_fix = shares_fixed ? B_fix(k, n) : 0.0;
      if (shares_fixed && share_fix <= kShareTol) continue;
      if (gain3(n) <= 0.0) continue;
      const double b0 =
          std::clamp(shares_fixed ? share_fix : fixed.B(k, n), 1e-4, 1.0 - 1e-3);
      if (!shares_fixed) b.b_var(k, n) = push_var(0.0, 1.0, k, b0);

      const double p0 =
          std::max((shares_fixed ? share_fix : fixed.B(k, n)) * fixed.P3(k, n), p_floor);
      b.p3_var(k, n) = push_var(0.0, conic::kInf, k, p0);
      relay_tot0 += p0;
      p3_ids.push_back(b.p3_var(k, n));

      const double rho_hi =
          par.W / kMb * std::log2(1.0 + par.P_r_max * gain3(n) / par.delta2) + 1.0;
      const double a_start = shares_fixed ? share_fix : b0;
      const double rate0 =
          perspective_rate(par, a_start, p0, gain3(n), par.delta2) * (1.0 - 1e-3);
      const int rv = push_var(-1.0, rho_hi, k, std::max(rate0 / kMb, -0.5));

      LinExpr b_expr = shares_fixed ? LinExpr(share_fix) : LinExpr::var(b.b_var(k, n));
      add_perspective_rate_constraint(b.prog, LinExpr::var(rv, kMb), LinExpr(1.0),
                                      b_expr, LinExpr::var(b.p3_var(k, n)), gain3(n),
                                      par.delta2, par.W);
      rate_row.add(rv, -fixed.t3(k));
      relay_cap.add(b.p3_var(k, n), 1.0);
    }
    if (rate_row.terms.empty()) {
      b.dead_leg = true;
      continue;
    }
    b.prog.add_lin_le(std::move(rate_row), -fixed.d_m(k) / kMb, true);
  }

  if (!relay_cap.terms.empty()) {
    if (relay_tot0 > 0.98 * par.P_r_max) {
      const double f = 0.98 * par.P_r_max / relay_tot0;
      for (int idx : p3_ids) b.x0[static_cast<std::size_t>(idx)] *= f;
    }
    b.prog.add_lin_le(std::move(relay_cap), par.P_r_max);
  }

  if (!shares_fixed)
    for (int n = 0; n < N; n++) {
      LinExpr col;
      for (int k = 0; k < K; k++)
        if (b.b_var(k, n) >= 0) col.add(b.b_var(k, n), 1.0);
      if (!col.terms.empty()) b.prog.add_lin_le(std::move(col), 1.0);
    }

  LinExpr obj;
  for (int k = 0; k < K; k++)
    for (int n = 0; n < N; n++)
      if (b.p3_var(k, n) >= 0) obj.add(b.p3_var(k, n), fixed.t3(k));
  b.prog.set_objective(std::move(obj));
  return b;
}

bool solved(const SolveOutcome& out) { return out.status == SolveStatus::Optimal; }

Eigen::VectorXd to_vec(std::vector<double>& v) {
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

P2Result solve_p2(const SystemParams& par, const ChannelSet& ch, const Allocation& fixed,
                  const BcdSettings& settings, const PipelineOptions& opts) {
  P2Result res;
  const int K = par.K, N = par.N;
  res.A_shares = Eigen::MatrixXd::Zero(K, N);
  res.B_shares = Eigen::MatrixXd::Zero(K, N);
  res.P1_aux = Eigen::MatrixXd::Zero(K, N);
  res.P2_aux = Eigen::MatrixXd::Zero(K, N);
  res.P3_aux = Eigen::MatrixXd::Zero(K, N);

  TnSideBuild tn = build_tn_side(par, ch, fixed, opts, false, {});
  if (tn.dead_leg) {
    res.message = "tn-side: demanded bits but no usable subcarrier";
    return res;
  }
  if (tn.any) {
    Eigen::VectorXd x0 = to_vec(tn.x0);
    StartHint hint{x0};
    const SolveOutcome out = conic::solve(tn.prog, settings.conic, &hint);
    if (!solved(out)) {
      res.message = "tn-side: " + out.message;
      return res;
    }
    for (int k = 0; k < K; k++)
      for (int n = 0; n < N; n++) {
        if (tn.a_var(k, n) >= 0)
          res.A_shares(k, n) = std::clamp(out.x(tn.a_var(k, n)), 0.0, 1.0);
        if (tn.p1_var(k, n) >= 0) res.P1_aux(k, n) = std::max(out.x(tn.p1_var(k, n)), 0.0);
        if (tn.p2_var(k, n) >= 0) res.P2_aux(k, n) = std::max(out.x(tn.p2_var(k, n)), 0.0);
      }
    res.transmit_energy += out.objective;
  }

  RelaySideBuild rl = build_relay_side(par, ch, fixed, opts, false, {});
  if (rl.dead_leg) {
    res.message = "relay-side: demanded bits but no usable subcarrier";
    return res;
  }
  if (rl.any) {
    Eigen::VectorXd x0 = to_vec(rl.x0);
    StartHint hint{x0};
    const SolveOutcome out = conic::solve(rl.prog, settings.conic, &hint);
    if (!solved(out)) {
      res.message = "relay-side: " + out.message;
      return res;
    }
    for (int k = 0; k < K; k++)
      for (int n = 0; n < N; n++) {
        if (rl.b_var(k, n) >= 0)
          res.B_shares(k, n) = std::clamp(out.x(rl.b_var(k, n)), 0.0, 1.0);
        if (rl.p3_var(k, n) >= 0) res.P3_aux(k, n) = std::max(out.x(rl.p3_var(k, n)), 0.0);
      }
    res.transmit_energy += out.objective;
  }

  res.ok = true;
  return res;
}

void round_subcarriers(const Eigen::MatrixXd& A_shares, const Eigen::MatrixXd& B_shares,
                       Eigen::MatrixXd& A, Eigen::MatrixXd& B) {
  auto round_one = [](const Eigen::MatrixXd& S, Eigen::MatrixXd& out) {
    out = Eigen::MatrixXd::Zero(S.rows(), S.cols());
    for (Eigen::Index n = 0; n < S.cols(); n++) {
      Eigen::Index best = 0;
      double best_v = -1.0;
      for (Eigen::Index k = 0; k < S.rows(); k++)
        if (S(k, n) > best_v + 1e-15) {  // strict improvement: ties keep lowest k
          best_v = S(k, n);
          best = k;
        }
      if (best_v > 1e-9) out(best, n) = 1.0;  // all-zero columns stay unassigned
    }
  };
  round_one(A_shares, A);
  round_one(B_shares, B);
}

RepairResult repair_powers_after_rounding(const SystemParams& par, const ChannelSet& ch,
                                          const Eigen::MatrixXd& A,
                                          const Eigen::MatrixXd& B,
                                          const Allocation& fixed,
                                          const BcdSettings& settings,
                                          const PipelineOptions& opts) {
  RepairResult res;
  const int K = par.K, N = par.N;
  res.P1 = Eigen::MatrixXd::Zero(K, N);
  res.P2 = Eigen::MatrixXd::Zero(K, N);
  res.P3 = Eigen::MatrixXd::Zero(K, N);

  TnSideBuild tn = build_tn_side(par, ch, fixed, opts, true, A);
  if (tn.dead_leg) {
    res.message = "tn-side repair: user lost all its subcarriers";
    return res;
  }
  if (tn.any) {
    Eigen::VectorXd x0 = to_vec(tn.x0);
    StartHint hint{x0};
    const SolveOutcome out = conic::solve(tn.prog, settings.conic, &hint);
    if (!solved(out)) {
      res.message = "tn-side repair: " + out.message;
      return res;
    }
    for (int k = 0; k < K; k++)
      for (int n = 0; n < N; n++) {
        if (tn.p1_var(k, n) >= 0)
          res.P1(k, n) =
              std::max(out.x(tn.p1_var(k, n)), 0.0) / std::max(A(k, n), kShareTol);
        if (tn.p2_var(k, n) >= 0)
          res.P2(k, n) =
              std::max(out.x(tn.p2_var(k, n)), 0.0) / std::max(A(k, n), kShareTol);
      }
  }

  RelaySideBuild rl = build_relay_side(par, ch, fixed, opts, true, B);
  if (rl.dead_leg) {
    res.message = "relay-side repair: user lost all its subcarriers";
    return res;
  }
  if (rl.any) {
    Eigen::VectorXd x0 = to_vec(rl.x0);
    StartHint hint{x0};
    const SolveOutcome out = conic::solve(rl.prog, settings.conic, &hint);
    if (!solved(out)) {
      res.message = "relay-side repair: " + out.message;
      return res;
    }
    for (int k = 0; k < K; k++)
      for (int n = 0; n < N; n++)
        if (rl.p3_var(k, n) >= 0)
          res.P3(k, n) =
              std::max(out.x(rl.p3_var(k, n)), 0.0) / std::max(B(k, n), kShareTol);
  }

  res.ok = true;
  return res;
}

P3Result solve_p3_sca(const SystemParams& par, const ChannelSet& ch,
                      const Allocation& fixed, const BcdSettings& settings,
                      const PipelineOptions& opts) {
  P3Result res;
  const int K = par.K;
  const double T = par.T;

  const Eigen::VectorXd R1 = slot1_rates(par, ch, fixed);
  const Eigen::VectorXd R2 = slot2_rates(par, ch, fixed);
  const Eigen::VectorXd R3 = slot3_rates(par, ch, fixed);

  std::vector<char> cn(static_cast<std::size_t>(K)), mec(static_cast<std::size_t>(K));
  for (int k = 0; k < K; k++) {
    cn[static_cast<std::size_t>(k)] = opts.enable_cn_leg && R1(k) > 1.0;
    mec[static_cast<std::size_t>(k)] = opts.enable_mec_leg && R2(k) > 1.0 && R3(k) > 1.0;
  }

  // offload-energy slopes at the fixed powers
  Eigen::VectorXd E1 = Eigen::VectorXd::Zero(K), E2 = E1, E3 = E1;
  for (int k = 0; k < K; k++)
    for (int n = 0; n < par.N; n++) {
      E1(k) += fixed.A(k, n) * fixed.P1(k, n);
      E2(k) += fixed.A(k, n) * fixed.P2(k, n);
      E3(k) += fixed.B(k, n) * fixed.P3(k, n);
    }

  Eigen::VectorXd d_l0 = fixed.d_l, d_r0 = fixed.d_r, d_m0 = fixed.d_m;
  Eigen::VectorXd t1_0 = fixed.t1, t2_0 = fixed.t2, t3_0 = fixed.t3, t4_0 = fixed.t4;
  auto clamp_expansion = [&]() {
    for (int k = 0; k < K; k++) {
      t1_0(k) = std::min(t1_0(k), T * (1.0 - 1e-9));
      if (mec[static_cast<std::size_t>(k)]) t4_0(k) = std::max(t4_0(k), 1e-6 * T);
    }
  };
  clamp_expansion();

  double tighten_cn = 1.0, tighten_mec = 1.0;
  const double coeff_l = std::cbrt(par.alpha_t) * par.c_t * kMb;
  const double coeff_r = std::cbrt(par.alpha_r) * par.c_r * kMb;

  auto build_and_solve = [&](SolveOutcome& out, std::vector<int>& ids) -> bool {
    ConicProgram prog;
    std::vector<double> x0;
    auto push_var = [&prog, &x0](double lo, double hi, double start) {
      const int id = prog.add_var(lo, hi);
      x0.push_back(start);
      return id;
    };
    // per user: [d_l, d_r, d_m, t1, t2, t3, t4, u_l, u_r] (-1 when absent)
    ids.assign(static_cast<std::size_t>(9 * K), -1);
    auto id = [&ids](int k, int j) -> int& {
      return ids[static_cast<std::size_t>(9 * k + j)];
    };

    LinExpr cn_cap_row, mec_cap_row, obj;
    double cn_cap_rhs = par.f_r_max * tighten_cn;
    double mec_cap_rhs = par.f_m_max * tighten_mec;
    bool any_cn = false, any_mec = false;

    for (int k = 0; k < K; k++) {
      const double D_mb = par.D[static_cast<std::size_t>(k)] / kMb;
      // d <= D is already implied by the split equality and nonnegativity;
      // boxes stay strictly wider so the pure-local point keeps an interior
      const double dl_hi = T * par.f_t_max / par.c_t / kMb;
      const double d_hi = D_mb * (1.0 + 1e-6) + 1e-9;
      const bool has_cn = cn[static_cast<std::size_t>(k)];
      const bool has_mec = mec[static_cast<std::size_t>(k)];

      id(k, 0) = push_var(0.0, dl_hi,
                          std::clamp(d_l0(k) / kMb, 1e-9, dl_hi * (1 - 1e-9)));
      if (has_cn) {
        // trust region in the t1 direction: the first-order model of
        // c_r d_r/(T - t1) degrades as t1 -> T, so (T - t1) may shrink by at
        // most half per iteration
        const double t1_hi = std::min(T, t1_0(k) + trust * (T - t1_0(k)));
        id(k, 1) = push_var(0.0, d_hi, std::max(d_r0(k) / kMb, 1e-9));
        id(k, 3) = push_var(0.0, t1_hi, std::min(t1_0(k), t1_hi * (1 - 1e-9)));
      }
      if (has_mec) {
        id(k, 2) = push_var(0.0, d_hi, std::max(d_m0(k) / kMb, 1e-9));
        id(k, 4) = push_var(0.0, T, std::clamp(t2_0(k), 1e-9, T));
        id(k, 5) = push_var(0.0, T, std::clamp(t3_0(k), 1e-9, T));
        // same for the model of c_m d_m/t4 as t4 -> 0
        const double t4_lo = (1.0 - trust) * t4_0(k);
        id(k, 6) = push_var(t4_lo, T, std::clamp(t4_0(k), t4_lo + 1e-12, T));
      }

      LinExpr split = LinExpr::var(id(k, 0));
      if (has_cn) split.add(id(k, 1), 1.0);
      if (has_mec) split.add(id(k, 2), 1.0);
      prog.add_lin_eq(std::move(split), D_mb);

      LinExpr budget;
      if (has_cn) budget.add(id(k, 3), 1.0);
      if (has_mec) {
        budget.add(id(k, 4), 1.0);
        budget.add(id(k, 5), 1.0);
        budget.add(id(k, 6), 1.0);
      }
      if (!budget.terms.empty()) prog.add_lin_le(std::move(budget), T, true);

      if (has_cn) {
        LinExpr row = LinExpr::var(id(k, 1));
        row.add(id(k, 3), -R1(k) / kMb);
        prog.add_lin_le(std::move(row), 0.0, true);
      }
      if (has_mec) {
        LinExpr row2 = LinExpr::var(id(k, 2));
        row2.add(id(k, 4), -R2(k) / kMb);
        prog.add_lin_le(std::move(row2), 0.0, true);
        LinExpr row3 = LinExpr::var(id(k, 2));
        row3.add(id(k, 5), -R3(k) / kMb);
        prog.add_lin_le(std::move(row3), 0.0, true);
      }

      // u_l >= alpha_t (c_t d_l)^3 / T^2; the CPU cap bounds the energy, and a
      // finite upper box keeps the barrier sublevel sets bounded
      {
        const double e0 = local_compute_energy(par, d_l0(k), T);
        const double u_hi = 10.0 * (par.alpha_t * std::pow(par.f_t_max, 3) * T + 1e-9);
        id(k, 7) = push_var(-conic::kInf, u_hi, e0 * 1.01 + 1e-9);
        add_cubic_over_square_epigraph(prog, LinExpr::var(id(k, 7)), 1.0,
                                       LinExpr::var(id(k, 0), coeff_l), LinExpr(T));
        obj.add(id(k, 7), 1.0);
      }
      // u_r >= alpha_r (c_r d_r)^3 / (T - t1)^2
      if (has_cn) {
        const double e0 =
            cn_compute_energy(par, d_r0(k), std::min(t1_0(k), T * (1 - 1e-9)));
        const double u_hi = 10.0 * (par.alpha_r * std::pow(par.f_r_max, 3) * T + 1e-9);
        id(k, 8) = push_var(-conic::kInf, u_hi, e0 * 1.01 + 1e-9);
        LinExpr rem(T);
        rem.add(id(k, 3), -1.0);
        add_cubic_over_square_epigraph(prog, LinExpr::var(id(k, 8)), 1.0,
                                       LinExpr::var(id(k, 1), coeff_r), std::move(rem));
        obj.add(id(k, 8), 1.0);
      }

      if (has_cn) obj.add(id(k, 3), E1(k));
      if (has_mec) {
        obj.add(id(k, 4), E2(k));
        obj.add(id(k, 5), E3(k));
      }

      // first-order expansions of the shared CPU caps
      if (has_cn) {
        any_cn = true;
        const double rem0 = T - t1_0(k);
        cn_cap_row.add(id(k, 1), par.c_r / rem0 * kMb);
        cn_cap_row.add(id(k, 3), par.c_r * d_r0(k) / (rem0 * rem0));
        // constant part of the expansion moves to the rhs
        cn_cap_rhs -= par.c_r * d_r0(k) / rem0 - par.c_r / rem0 * d_r0(k) -
                      par.c_r * d_r0(k) / (rem0 * rem0) * t1_0(k);
      }
      if (has_mec) {
        any_mec = true;
        const double t40 = t4_0(k);
        mec_cap_row.add(id(k, 2), par.c_m / t40 * kMb);
        mec_cap_row.add(id(k, 6), -par.c_m * d_m0(k) / (t40 * t40));
        mec_cap_rhs -= par.c_m * d_m0(k) / t40 - par.c_m / t40 * d_m0(k) +
                       par.c_m * d_m0(k) / (t40 * t40) * t4_0(k);
      }
    }

    if (any_cn) prog.add_lin_le(std::move(cn_cap_row), cn_cap_rhs, true);
    if (any_mec) prog.add_lin_le(std::move(mec_cap_row), mec_cap_rhs, true);

    prog.set_objective(std::move(obj));
    Eigen::VectorXd x0v = to_vec(x0);
    StartHint hint{x0v};
    out = conic::solve(prog, settings.conic, &hint);
    return solved(out);
  };

  auto extract = [&](const SolveOutcome& out, const std::vector<int>& ids) {
    res.d_l = Eigen::VectorXd::Zero(K);
    res.d_r = Eigen::VectorXd::Zero(K);
    res.d_m = Eigen::VectorXd::Zero(K);
    res.t1 = Eigen::VectorXd::Zero(K);
    res.t2 = Eigen::VectorXd::Zero(K);
    res.t3 = Eigen::VectorXd::Zero(K);
    res.t4 = Eigen::VectorXd::Zero(K);
    auto id = [&ids](int k, int j) { return ids[static_cast<std::size_t>(9 * k + j)]; };
    for (int k = 0; k < K; k++) {
      const double D = par.D[static_cast<std::size_t>(k)];
      double dr = id(k, 1) >= 0 ? std::max(out.x(id(k, 1)) * kMb, 0.0) : 0.0;
      double dm = id(k, 2) >= 0 ? std::max(out.x(id(k, 2)) * kMb, 0.0) : 0.0;
      if (dr < kBitTol) dr = 0.0;
      if (dm < kBitTol) dm = 0.0;
      // snap the split exactly onto D, absorbing roundoff into d_l
      res.d_r(k) = dr;
      res.d_m(k) = dm;
      res.d_l(k) = D - dr - dm;
      res.t1(k) = id(k, 3) >= 0 ? std::clamp(out.x(id(k, 3)), 0.0, T) : 0.0;
      res.t2(k) = id(k, 4) >= 0 ? std::clamp(out.x(id(k, 4)), 0.0, T) : 0.0;
      res.t3(k) = id(k, 5) >= 0 ? std::clamp(out.x(id(k, 5)), 0.0, T) : 0.0;
      res.t4(k) = id(k, 6) >= 0 ? std::clamp(out.x(id(k, 6)), 0.0, T) : 0.0;
    }
  };

  auto objective_at = [&]() {
    double total = 0.0;
    for (int k = 0; k < K; k++) {
      total += E1(k) * res.t1(k) + E2(k) * res.t2(k) + E3(k) * res.t3(k);
      total += local_compute_energy(par, res.d_l(k), T);
      if (res.d_r(k) > 0) total += cn_compute_energy(par, res.d_r(k), res.t1(k));
    }
    return total;
  };

  auto reexpand = [&]() {
    d_l0 = res.d_l;
    d_r0 = res.d_r;
    d_m0 = res.d_m;
    t1_0 = res.t1;
    t2_0 = res.t2;
    t3_0 = res.t3;
    t4_0 = res.t4;
    clamp_expansion();
  };

  // Inner loop. The expansion is a plain first-order Taylor model, not a
  // certified bound, so an iterate can come out worse than its predecessor;
  // stop there and keep the best point seen.
  P3Result best;
  double best_obj = std::numeric_limits<double>::infinity();
  double prev_obj = std::numeric_limits<double>::infinity();
  for (int it = 0; it < settings.sca_max_iters; it++) {
    SolveOutcome out;
    std::vector<int> ids;
    if (!build_and_solve(out, ids)) {
      res.message = "sca inner: " + out.message;
      res.ok = false;
      return res;
    }
    extract(out, ids);
    const double obj = objective_at();
    if (obj > prev_obj * (1.0 + 1e-9) + 1e-12) break;
    res.inner_trace.push_back(obj);
    if (obj < best_obj) {
      best_obj = obj;
      best = res;
    }
    reexpand();
    if (it > 0 && prev_obj - obj <= settings.sca_tol * std::max(prev_obj, 1e-30)) break;
    prev_obj = obj;
  }
  if (!std::isfinite(best_obj)) {
    res.message = "sca made no progress";
    res.ok = false;
    return res;
  }
  const std::vector<double> trace = res.inner_trace;
  best.inner_trace = trace;
  res = best;
  // re-expand at the returned point for the verification pass below
  reexpand();

  // verify the true ratios; tighten multiplicatively on violation
  for (int repair = 0; repair < 5; repair++) {
    double v_cn = 0.0, v_mec = 0.0;
    for (int k = 0; k < K; k++) {
      if (res.d_r(k) > 0) v_cn += par.c_r * res.d_r(k) / (T - res.t1(k));
      if (res.d_m(k) > 0)
        v_mec += res.t4(k) > 0 ? par.c_m * res.d_m(k) / res.t4(k)
                               : std::numeric_limits<double>::infinity();
    }
    const bool cn_bad = v_cn > par.f_r_max * (1.0 + 0.5 * settings.tol_feas);
    const bool mec_bad = v_mec > par.f_m_max * (1.0 + 0.5 * settings.tol_feas);
    if (std::getenv("RMSMTC_P3_DEBUG"))
      std::fprintf(stderr, "p3 repair %d: cn=%.9f mec=%.9f (rel to caps)\n", repair,
                   v_cn / par.f_r_max, v_mec / par.f_m_max);
    if (!cn_bad && !mec_bad) {
      res.ok = true;
      res.repairs = repair;
      return res;
    }
    if (cn_bad) tighten_cn *= 0.95;
    if (mec_bad) tighten_mec *= 0.95;
    SolveOutcome out;
    std::vector<int> ids;
    if (!build_and_solve(out, ids)) {
      res.message = "sca repair: " + out.message;
      res.ok = false;
      return res;
    }
    extract(out, ids);  // feasibility restoration; not part of the SCA descent
    reexpand();
  }
  res.message = "cpu-sharing caps still violated after tightening";
  res.ok = false;
  return res;
}

namespace {

// Shared lifted-SDP skeleton for subproblem 3: rate epigraphs over tr(S V_n)
// plus unit diagonal caps and the PSD block itself.
struct P4Build {
  ConicProgram prog;
  std::vector<double> x0;
  int block = -1;
  std::vector<int> rate_row_user;  // one rate row per active user
  bool any = false;
  bool dead = false;
};

P4Build build_p4(const SystemParams& par, const ChannelSet& ch, const Allocation& fixed,
                 const Eigen::MatrixXcd& S0, int slack_var_count) {
  const int K = par.K, N = par.N, M = par.M();
  P4Build b;

  // scalar vars first (group 0 = rate epigraphs, slack added by caller)
  std::vector<std::array<int, 2>> cones;  // (k,n) -> rho var
  Eigen::MatrixXi rho_var = Eigen::MatrixXi::Constant(K, N, -1);
  for (int k = 0; k < K; k++) {
    if (fixed.d_m(k) <= kBitTol || fixed.t3(k) <= 1e-12) continue;
    b.any = true;
    bool usable = false;
    for (int n = 0; n < N; n++) {
      if (fixed.B(k, n) <= kShareTol || fixed.P3(k, n) <= 0.0) continue;
      const double vnorm2 = ch.v.col(n).squaredNorm();
      if (vnorm2 <= 0.0) continue;
      const double rho_hi =
          std::log2(1.0 + fixed.P3(k, n) * M * vnorm2 / par.delta2) + 1.0;
      rho_var(k, n) = b.prog.add_var(-1.0, rho_hi, 0);
      b.x0.push_back(0.0);  // placed after S0 is known
      usable = true;
    }
    if (!usable) b.dead = true;
  }
  (void)slack_var_count;

  if (!b.any || b.dead) return b;

  b.block = b.prog.add_hermitian_block(M);
  b.prog.add_psd(b.block);
  const Eigen::VectorXd s0coords = conic::hermitian_coords(S0);
  for (int i = 0; i < s0coords.size(); i++) b.x0.push_back(s0coords(i));

  // diag(S) <= 1
  for (int m = 0; m < M; m++) {
    Eigen::MatrixXcd E = Eigen::MatrixXcd::Zero(M, M);
    E(m, m) = 1.0;
    b.prog.add_lin_le(b.prog.trace_term(b.block, E), 1.0);
  }

  const double ln2 = std::log(2.0);
  for (int k = 0; k < K; k++) {
    if (fixed.d_m(k) <= kBitTol || fixed.t3(k) <= 1e-12) continue;
    LinExpr rate_row;
    for (int n = 0; n < N; n++) {
      if (rho_var(k, n) < 0) continue;
      // rho <= log2(1 + P tr(S V_n)/delta2)
      const double pn = fixed.P3(k, n) / par.delta2;
      LinExpr z(1.0);
      LinExpr tr = b.prog.trace_term(b.block, ch.V[static_cast<std::size_t>(n)]);
      tr *= pn;
      z += tr;
      b.prog.add_exp_cone(LinExpr::var(rho_var(k, n), ln2), LinExpr(1.0), std::move(z));
      // warm rho from S0
      const double g0 = (S0 * ch.V[static_cast<std::size_t>(n)]).trace().real();
      b.x0[static_cast<std::size_t>(rho_var(k, n))] =
          std::log2(1.0 + fixed.P3(k, n) * std::max(g0, 0.0) / par.delta2) *
              (1.0 - 1e-3) -
          1e-6;
      rate_row.add(rho_var(k, n), -fixed.t3(k) * fixed.B(k, n) * par.W / kMb);
    }
    const int row = b.prog.add_lin_le(std::move(rate_row), -fixed.d_m(k) / kMb, true);
    b.rate_row_user.push_back(row);
  }
  return b;
}

double rank_one_gap(const Eigen::MatrixXcd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(S);
  const double tr = S.trace().real();
  return (tr - eig.eigenvalues().maxCoeff()) / std::max(tr, 1e-12);
}

}  // namespace

Eigen::VectorXcd extract_rank_one(const Eigen::MatrixXcd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(S);
  const Eigen::Index top = S.rows() - 1;
  const double lmax = std::max(eig.eigenvalues()(top), 0.0);
  Eigen::VectorXcd s = std::sqrt(lmax) * eig.eigenvectors().col(top);
  for (int m = 0; m < s.size(); m++) {
    const double mag = std::abs(s(m));
    if (mag > 1.0) s(m) /= mag;  // clip magnitude, keep phase
  }
  return s;
}

P4Result solve_p4_dc(const SystemParams& par, const ChannelSet& ch,
                     const Allocation& fixed, const BcdSettings& settings) {
  P4Result res;
  const int M = par.M();

  // interior blend of the incoming covariance
  Eigen::MatrixXcd S0 =
      0.5 * (fixed.s_vec * fixed.s_vec.adjoint()) + 0.45 * Eigen::MatrixXcd::Identity(M, M);

  P4Build b = build_p4(par, ch, fixed, S0, 0);
  if (!b.any) {
    res.ok = true;  // nothing to optimize, keep the incoming vector
    res.S = fixed.S_mat;
    res.s = fixed.s_vec;
    res.rank_gap = 0.0;
    return res;
  }
  if (b.dead) {
    res.message = "demanded MEC bits but no usable slot-III subcarrier";
    return res;
  }

  Eigen::VectorXd x = to_vec(b.x0);
  Eigen::MatrixXcd S = S0;
  for (int it = 0; it < settings.dc_max_iters; it++) {
    // DC objective tr(S) - lb(S) = tr((I - u u^H) S); degenerates to tr(S)
    // when u spans the whole space (M = 1)
    const SpectralLinearization lin = linearize_spectral_norm(S);
    Eigen::MatrixXcd C =
        Eigen::MatrixXcd::Identity(M, M) - lin.u * lin.u.adjoint();
    if (C.norm() < 1e-9) C = Eigen::MatrixXcd::Identity(M, M);
    b.prog.set_objective(b.prog.trace_term(b.block, C));

    StartHint hint{x};
    const SolveOutcome out = conic::solve(b.prog, settings.conic, &hint);
    if (!solved(out)) {
      if (it == 0) {
        res.message = "sdp: " + out.message;
        return res;
      }
      break;  // keep the last good iterate
    }
    x = out.x;
    S = out.block_matrix(b.prog, b.block);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(S);
    res.dc_trace.push_back(S.trace().real() - eig.eigenvalues().maxCoeff());
    res.rank_gap = rank_one_gap(S);
    if (res.rank_gap <= settings.epsilon_rank) break;
  }

  res.S = S;
  res.s = extract_rank_one(S);
  res.ok = true;
  return res;
}

P4Result solve_p4_sdr(const SystemParams& par, const ChannelSet& ch,
                      const Allocation& fixed, const BcdSettings& settings,
                      int randomization_draws) {
  P4Result res;
  const int K = par.K, N = par.N, M = par.M();
  Eigen::MatrixXcd S0 =
      0.5 * (fixed.s_vec * fixed.s_vec.adjoint()) + 0.45 * Eigen::MatrixXcd::Identity(M, M);

  double d_max_mb = 0.0;
  bool any = false, dead = false;
  for (int k = 0; k < K; k++)
    if (fixed.d_m(k) > kBitTol && fixed.t3(k) > 1e-12) {
      any = true;
      d_max_mb = std::max(d_max_mb, fixed.d_m(k) / kMb);
    }
  if (!any) {
    res.ok = true;
    res.S = fixed.S_mat;
    res.s = fixed.s_vec;
    return res;
  }

  // rank-free max-slack relaxation: maximize the worst rate-row slack tau
  ConicProgram prog;
  std::vector<double> x0;
  Eigen::MatrixXi rho_var = Eigen::MatrixXi::Constant(K, N, -1);
  for (int k = 0; k < K; k++) {
    if (fixed.d_m(k) <= kBitTol || fixed.t3(k) <= 1e-12) continue;
    bool usable = false;
    for (int n = 0; n < N; n++) {
      if (fixed.B(k, n) <= kShareTol || fixed.P3(k, n) <= 0.0) continue;
      const double vnorm2 = ch.v.col(n).squaredNorm();
      if (vnorm2 <= 0.0) continue;
      const double rho_hi =
          std::log2(1.0 + fixed.P3(k, n) * M * vnorm2 / par.delta2) + 1.0;
      rho_var(k, n) = prog.add_var(-1.0, rho_hi, 0);
      x0.push_back(0.0);
      usable = true;
    }
    if (!usable) dead = true;
  }
  if (dead) {
    res.message = "demanded MEC bits but no usable slot-III subcarrier";
    return res;
  }

  const int tau = prog.add_var(-2.0 * d_max_mb - 10.0, 1e3, 1);
  x0.push_back(0.0);
  const int block = prog.add_hermitian_block(M);
  prog.add_psd(block);
  const Eigen::VectorXd s0coords = conic::hermitian_coords(S0);
  for (int i = 0; i < s0coords.size(); i++) x0.push_back(s0coords(i));
  for (int m = 0; m < M; m++) {
    Eigen::MatrixXcd E = Eigen::MatrixXcd::Zero(M, M);
    E(m, m) = 1.0;
    prog.add_lin_le(prog.trace_term(block, E), 1.0);
  }

  const double ln2 = std::log(2.0);
  double tau0 = 1e300;
  for (int k = 0; k < K; k++) {
    if (fixed.d_m(k) <= kBitTol || fixed.t3(k) <= 1e-12) continue;
    LinExpr rate_row = LinExpr::var(tau);
    double slack0 = -fixed.d_m(k) / kMb;
    for (int n = 0; n < N; n++) {
      if (rho_var(k, n) < 0) continue;
      const double pn = fixed.P3(k, n) / par.delta2;
      LinExpr z(1.0);
      LinExpr tr = prog.trace_term(block, ch.V[static_cast<std::size_t>(n)]);
      tr *= pn;
      z += tr;
      prog.add_exp_cone(LinExpr::var(rho_var(k, n), ln2), LinExpr(1.0), std::move(z));
      const double g0 = (S0 * ch.V[static_cast<std::size_t>(n)]).trace().real();
      const double rho0 =
          std::log2(1.0 + fixed.P3(k, n) * std::max(g0, 0.0) / par.delta2) *
              (1.0 - 1e-3) -
          1e-6;
      x0[static_cast<std::size_t>(rho_var(k, n))] = rho0;
      const double c = fixed.t3(k) * fixed.B(k, n) * par.W / kMb;
      rate_row.add(rho_var(k, n), -c);
      slack0 += c * rho0;
    }
    // tau - sum c rho <= -d  <=>  sum c rho - d >= tau
    prog.add_lin_le(std::move(rate_row), -fixed.d_m(k) / kMb);
    tau0 = std::min(tau0, slack0);
  }
  x0[static_cast<std::size_t>(tau)] = tau0 - std::max(1e-6, 0.01 * std::abs(tau0));
  prog.set_objective(LinExpr::var(tau, -1.0));

  Eigen::VectorXd x0v = to_vec(x0);
  StartHint hint{x0v};
  const SolveOutcome out = conic::solve(prog, settings.conic, &hint);
  if (!solved(out)) {
    res.message = "sdr: " + out.message;
    return res;
  }
  res.S = out.block_matrix(prog, block);
  res.rank_gap = rank_one_gap(res.S);

  // Gaussian randomization plus the leading-eigenvector candidate
  auto clip = [](Eigen::VectorXcd v) {
    for (int m = 0; m < v.size(); m++) {
      const double mag = std::abs(v(m));
      if (mag > 1.0) v(m) /= mag;
    }
    return v;
  };
  auto min_slack = [&](const Eigen::VectorXcd& s) {
    Allocation tmp = fixed;
    tmp.s_vec = s;
    const Eigen::VectorXd r3 = slot3_rates(par, ch, tmp);
    double worst = 1e300;
    for (int k = 0; k < par.K; k++) {
      if (fixed.d_m(k) <= kBitTol) continue;
      worst = std::min(worst, (fixed.t3(k) * r3(k) - fixed.d_m(k)) /
                                  std::max(fixed.d_m(k), 1.0));
    }
    return worst;
  };

  const Eigen::MatrixXcd Sreg =
      res.S + 1e-12 * std::max(res.S.trace().real(), 1.0) / M *
                  Eigen::MatrixXcd::Identity(M, M);
  const Eigen::MatrixXcd L = Eigen::LLT<Eigen::MatrixXcd>(Sreg).matrixL();
  const CounterRng rng(par.seed);

  Eigen::VectorXcd best;
  double best_slack = -1e300;
  auto consider = [&](const Eigen::VectorXcd& cand) {
    const double sl = min_slack(cand);
    if (sl > best_slack) {
      best_slack = sl;
      best = cand;
    }
  };
  consider(clip(extract_rank_one(res.S)));
  for (int draw = 0; draw < randomization_draws; draw++) {
    Eigen::VectorXcd g(M);
    for (int m = 0; m < M; m++)
      g(m) = rng.complex_normal(CounterRng::kSdrGaussian,
                                static_cast<std::uint64_t>(draw),
                                static_cast<std::uint64_t>(m));
    consider(clip(L * g));
  }

  if (best_slack < -1e-9) {
    res.message = "sdr randomization: no feasible candidate";
    return res;  // keep previous s
  }
  res.s = best;
  res.ok = true;
  return res;
}

namespace {

// local_frac scales how much demand the greedy pass parks on the local CPU
// before filling the offload legs; 1.0 is the plain local-first split.
Allocation make_init(const SystemParams& par, const ChannelSet& ch,
                     const PipelineOptions& opts, double local_frac) {
  const int K = par.K, N = par.N, M = par.M();
  const CounterRng rng(par.seed);
  Allocation a = Allocation::zeros(par);

  // round-robin ownership, both hops
  for (int n = 0; n < N; n++) {
    const int k = n % K;
    a.A(k, n) = 1.0;
    a.B(k, n) = 1.0;
  }

  // equal power on owned subcarriers, kept strictly inside the caps
  const int owned_max = (N + K - 1) / K;
  for (int k = 0; k < K; k++)
    for (int n = 0; n < N; n++) {
      if (a.A(k, n) > 0) {
        a.P1(k, n) = 0.95 * par.P_t_max / owned_max;
        a.P2(k, n) = 0.95 * par.P_t_max / owned_max;
      }
      if (a.B(k, n) > 0) a.P3(k, n) = 0.95 * par.P_r_max / N;
    }

  // slot layout depends on which legs exist
  if (opts.enable_cn_leg && opts.enable_mec_leg) {
    a.t1.setConstant(par.T / 4);
    a.t2.setConstant(par.T / 4);
    a.t3.setConstant(par.T / 4);
    a.t4.setConstant(par.T / 4);
  } else if (opts.enable_cn_leg) {
    a.t1.setConstant(par.T / 2);
  } else if (opts.enable_mec_leg) {
    a.t2.setConstant(par.T / 3);
    a.t3.setConstant(par.T / 3);
    a.t4.setConstant(par.T / 3);
  }

  // random unit-modulus transmissive phases
  for (int m = 0; m < M; m++) {
    const double th =
        2.0 * M_PI * rng.uniform(CounterRng::kInitPhase, static_cast<std::uint64_t>(m), 0, 0);
    a.s_vec(m) = Complex(std::cos(th), std::sin(th));
  }
  a.sync_S_from_s();

  const Eigen::VectorXd R1 = slot1_rates(par, ch, a);
  const Eigen::VectorXd R2 = slot2_rates(par, ch, a);
  const Eigen::VectorXd R3 = slot3_rates(par, ch, a);

  // greedy split: local first (90% of the CPU cap), then relay, then MEC
  for (int k = 0; k < K; k++) {
    const double D = par.D[static_cast<std::size_t>(k)];
    double d_l = std::min(local_frac * D, 0.9 * par.T * par.f_t_max / par.c_t);
    double rem = D - d_l;
    double d_r = 0.0, d_m = 0.0;
    if (rem > 0 && opts.enable_cn_leg) {
      const double cpu_cap = (par.T - a.t1(k)) * par.f_r_max / (par.c_r * K);
      d_r = std::min({rem, a.t1(k) * R1(k), cpu_cap});
      d_r = std::max(d_r, 0.0);
      rem -= d_r;
    }
    if (rem > 0 && opts.enable_mec_leg) {
      const double cpu_cap = a.t4(k) * par.f_m_max / (par.c_m * K);
      d_m = std::min({rem, a.t2(k) * R2(k), a.t3(k) * R3(k), cpu_cap});
      d_m = std::max(d_m, 0.0);
      rem -= d_m;
    }
    if (rem > 0) {
      const double local_headroom = par.T * par.f_t_max / par.c_t - d_l;
      const double extra = std::min(rem, local_headroom);
      d_l += extra;
      rem -= extra;
    }
    if (rem > 1e-9 * std::max(D, 1.0)) {
      std::ostringstream msg;
      msg << "scenario infeasible: user " << k << " cannot place " << rem
          << " of " << D << " demanded bits";
      throw ScenarioInfeasible(msg.str());
    }
    a.d_l(k) = d_l;
    a.d_r(k) = d_r;
    a.d_m(k) = D - d_l - d_r;
  }

  // disabled legs carry nothing; enabled legs keep their idle powers and
  // slots so later blocks always see usable rates
  if (!opts.enable_cn_leg) a.P1.setZero();
  if (!opts.enable_mec_leg) {
    a.P2.setZero();
    a.P3.setZero();
    a.B.setZero();
  }

  return a;
}

}  // namespace

Allocation init_point(const SystemParams& par, const ChannelSet& ch,
                      const PipelineOptions& opts) {
  return make_init(par, ch, opts, 1.0);
}

namespace {

BcdState run_bcd_from(const SystemParams& par, const ChannelSet& ch,
                      const BcdSettings& settings, const PipelineOptions& opts,
                      Allocation start) {
  BcdState state;
  state.alloc = std::move(start);
  double obj = total_objective(state.alloc, par);
  state.trace.push_back(obj);

  auto try_accept = [&](Allocation& cand, const char* block, int outer,
                        SolveStatus status, const std::string& note) {
    SubproblemLog lg;
    lg.outer = outer;
    lg.block = block;
    lg.status = status;
    lg.note = note;
    bool accepted = false;
    if (status == SolveStatus::Optimal) {
      const double cand_obj = total_objective(cand, par);
      if (cand_obj <= obj + 1e-9 &&
          check_feasibility(cand, par, ch, settings.tol_feas).feasible) {
        state.alloc = cand;
        obj = cand_obj;
        accepted = true;
      }
    }
    lg.accepted = accepted;
    lg.objective_after = obj;
    state.log.push_back(std::move(lg));
    return accepted;
  };

  const int outer_limit = opts.single_pass ? 1 : settings.max_outer;
  for (int it = 1; it <= outer_limit; it++) {
    const double obj_before = obj;

    // block 1: subcarrier shares + powers
    {
      const P2Result p2 = solve_p2(par, ch, state.alloc, settings, opts);
      if (p2.ok) {
        Allocation cand = state.alloc;
        bool build_ok = true;
        if (opts.round_shares) {
          round_subcarriers(p2.A_shares, p2.B_shares, cand.A, cand.B);
          const RepairResult rep = repair_powers_after_rounding(
              par, ch, cand.A, cand.B, state.alloc, settings, opts);
          if (rep.ok) {
            cand.P1 = rep.P1;
            cand.P2 = rep.P2;
            cand.P3 = rep.P3;
          } else {
            build_ok = false;
          }
        } else {
          cand.A = p2.A_shares;
          cand.B = p2.B_shares;
          auto actual = [](const Eigen::MatrixXd& aux, const Eigen::MatrixXd& shares) {
            Eigen::MatrixXd P = Eigen::MatrixXd::Zero(aux.rows(), aux.cols());
            for (Eigen::Index i = 0; i < aux.rows(); i++)
              for (Eigen::Index j = 0; j < aux.cols(); j++)
                if (shares(i, j) > 1e-6) P(i, j) = aux(i, j) / shares(i, j);
            return P;
          };
          cand.P1 = actual(p2.P1_aux, p2.A_shares);
          cand.P2 = actual(p2.P2_aux, p2.A_shares);
          cand.P3 = actual(p2.P3_aux, p2.B_shares);
        }
        if (build_ok)
          try_accept(cand, "subcarrier_power", it, SolveStatus::Optimal, "");
        else
          try_accept(state.alloc, "subcarrier_power", it,
                     SolveStatus::NumericalLimit, "repair failed, kept previous");
      } else {
        try_accept(state.alloc, "subcarrier_power", it, SolveStatus::NumericalLimit,
                   p2.message);
      }
    }

    // block 2: task split + slots
    {
      const P3Result p3 = solve_p3_sca(par, ch, state.alloc, settings, opts);
      if (p3.ok) {
        Allocation cand = state.alloc;
        cand.d_l = p3.d_l;
        cand.d_r = p3.d_r;
        cand.d_m = p3.d_m;
        cand.t1 = p3.t1;
        cand.t2 = p3.t2;
        cand.t3 = p3.t3;
        cand.t4 = p3.t4;
        try_accept(cand, "split_slots", it, SolveStatus::Optimal, "");
      } else {
        try_accept(state.alloc, "split_slots", it, SolveStatus::NumericalLimit,
                   p3.message);
      }
    }

    // block 3: transmissive coefficients (+ power refresh under the new s)
    if (opts.optimize_phase) {
      const P4Result p4 = opts.use_sdr_phase
                              ? solve_p4_sdr(par, ch, state.alloc, settings)
                              : solve_p4_dc(par, ch, state.alloc, settings);
      if (p4.ok) {
        Allocation cand = state.alloc;
        cand.s_vec = p4.s;
        cand.S_mat = p4.s * p4.s.adjoint();
        const RepairResult rep = repair_powers_after_rounding(
            par, ch, cand.A, cand.B, cand, settings, opts);
        if (rep.ok) {
          cand.P1 = rep.P1;
          cand.P2 = rep.P2;
          cand.P3 = rep.P3;
          try_accept(cand, "transmissive", it, SolveStatus::Optimal, "");
        } else {
          try_accept(state.alloc, "transmissive", it, SolveStatus::NumericalLimit,
                     "power refresh failed, kept previous");
        }
      } else {
        try_accept(state.alloc, "transmissive", it, SolveStatus::NumericalLimit,
                   p4.message);
      }
    }

    state.iterations = it;
    state.trace.push_back(obj);
    const double frac = (obj_before - obj) / std::max(obj_before, 1e-30);
    if (frac <= settings.epsilon) {
      state.converged = true;
      break;
    }
  }

  if (opts.single_pass) state.converged = false;
  state.feasible = check_feasibility(state.alloc, par, ch, settings.tol_feas).feasible;
  return state;
}

}  // namespace

BcdState run_bcd(const SystemParams& par, const ChannelSet& ch,
                 const BcdSettings& settings, const PipelineOptions& opts) {
  BcdState state = run_bcd_from(par, ch, settings, opts, init_point(par, ch, opts));

  // The local-first start is a fixed point of the block updates whenever the
  // whole demand fits the local CPU: powers collapse to zero, after which no
  // block can re-open the offload legs. Retry once from an offload-seeded
  // split and keep the better converged run.
  if ((opts.enable_cn_leg || opts.enable_mec_leg) && !opts.single_pass) {
    double total_d = 0.0;
    for (double d : par.D) total_d += d;
    const double offloaded = state.alloc.d_r.sum() + state.alloc.d_m.sum();
    if (offloaded <= 1e-6 * total_d) {
      try {
        Allocation seeded = make_init(par, ch, opts, 0.5);
        if (seeded.d_r.sum() + seeded.d_m.sum() > 1e-6 * total_d) {
          BcdState second = run_bcd_from(par, ch, settings, opts, std::move(seeded));
          if (second.feasible && second.trace.back() < state.trace.back() * (1.0 - 1e-12))
            state = std::move(second);
        }
      } catch (const ScenarioInfeasible&) {
        // seeded split unschedulable; keep the first run
      }
    }
  }
  return state;
}

double capacity_search(const SystemParams& par, const ChannelSet& ch,
                       const BcdSettings& settings, const PipelineOptions& opts,
                       bool local_only) {
  if (local_only) return par.T * par.f_t_max / par.c_t;

  auto feasible = [&](double d) {
    SystemParams p2 = par;
    p2.D.assign(static_cast<std::size_t>(par.K), d);
    BcdSettings s2 = settings;
    s2.max_outer = std::min(settings.max_outer, 3);
    try {
      const BcdState st = run_bcd(p2, ch, s2, opts);
      return st.feasible;
    } catch (const ScenarioInfeasible&) {
      return false;
    }
  };

  double hi = par.T * (par.f_t_max / par.c_t + par.f_r_max / par.c_r +
                       par.f_m_max / par.c_m);
  double lo = 0.0;
  if (feasible(hi)) return hi;
  while ((hi - lo) > 1e-2 * std::max(hi, 1.0)) {
    const double mid = 0.5 * (lo + hi);
    if (feasible(mid))
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

}  // namespace rmsmtc
