#include "rmsmtc/oracle.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace rmsmtc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// power grid: {0} plus a geometric ladder up to the cap
std::vector<double> power_grid(double cap, int levels) {
  std::vector<double> g;
  g.push_back(0.0);
  const double lo = cap * 1e-6;
  for (int i = 0; i < levels; i++)
    g.push_back(lo * std::pow(cap / lo, static_cast<double>(i) / (levels - 1)));
  return g;
}

// minimal sum of powers on the owned carriers meeting `bits` within `t`,
// subject to sum p <= cap; gains are linear SNR slopes (gain2/noise)
double min_power_for_bits(const std::vector<double>& snr_slopes, double bits, double t,
                          double cap, double W, int levels) {
  if (bits <= 0.0) return 0.0;
  if (t <= 0.0 || snr_slopes.empty()) return kInf;
  const double need = bits / t;  // rate target, bits/s
  const std::vector<double> grid = power_grid(cap, levels);
  double best = kInf;
  if (snr_slopes.size() == 1) {
    for (double p : grid) {
      if (p > cap) continue;
      if (W * std::log2(1.0 + p * snr_slopes[0]) >= need) {
        best = std::min(best, p);
        break;  // grid is sorted; first feasible power is minimal
      }
    }
    return best;
  }
  for (double p0 : grid)
    for (double p1 : grid) {
      if (p0 + p1 > cap || p0 + p1 >= best) continue;
      const double r = W * std::log2(1.0 + p0 * snr_slopes[0]) +
                       W * std::log2(1.0 + p1 * snr_slopes[1]);
      if (r >= need) best = std::min(best, p0 + p1);
    }
  return best;
}

}  // namespace

double oracle_p2_grid(const SystemParams& par, const ChannelSet& ch,
                      const Allocation& fixed, int grid_levels) {
  const int K = par.K, N = par.N;
  if (K > 2 || N > 2) throw std::invalid_argument("oracle_p2_grid: K <= 2 and N <= 2");
  if (grid_levels < 2 || grid_levels > 400)
    throw std::invalid_argument("oracle_p2_grid: grid_levels in [2, 400]");

  // cascade SNR slopes under the fixed transmissive vector
  Eigen::VectorXd slope3(N);
  for (int n = 0; n < N; n++)
    slope3(n) =
        std::norm((ch.v.col(n).adjoint() * fixed.s_vec)(0, 0)) / par.delta2;

  const int combos = static_cast<int>(std::pow(K + 1, N));

  // TN side: one ownership map serves slots I and II
  double best_tn = kInf;
  for (int combo = 0; combo < combos; combo++) {
    int c = combo;
    std::vector<int> owner(static_cast<std::size_t>(N));
    for (int n = 0; n < N; n++) {
      owner[static_cast<std::size_t>(n)] = c % (K + 1) - 1;  // -1: unassigned
      c /= K + 1;
    }
    double total = 0.0;
    for (int k = 0; k < K && total < kInf; k++) {
      std::vector<double> slopes;
      for (int n = 0; n < N; n++)
        if (owner[static_cast<std::size_t>(n)] == k)
          slopes.push_back(std::norm(ch.h_r(k, n)) / par.sigma2);
      const double p1 = min_power_for_bits(slopes, fixed.d_r(k), fixed.t1(k),
                                           par.P_t_max, par.W, grid_levels);
      const double p2 = min_power_for_bits(slopes, fixed.d_m(k), fixed.t2(k),
                                           par.P_t_max, par.W, grid_levels);
      if (p1 == kInf || p2 == kInf) {
        total = kInf;
        break;
      }
      total += p1 * fixed.t1(k) + p2 * fixed.t2(k);
    }
    best_tn = std::min(best_tn, total);
  }

  // relay side: joint grid over the owned carriers under the shared cap
  double best_relay = kInf;
  const std::vector<double> grid = power_grid(par.P_r_max, grid_levels);
  for (int combo = 0; combo < combos; combo++) {
    int c = combo;
    std::vector<int> owner(static_cast<std::size_t>(N));
    for (int n = 0; n < N; n++) {
      owner[static_cast<std::size_t>(n)] = c % (K + 1) - 1;
      c /= K + 1;
    }
    // carriers that matter: owned by a user with MEC bits
    std::vector<int> act;
    bool demand_uncovered = false;
    for (int k = 0; k < K; k++) {
      if (fixed.d_m(k) <= 0.0) continue;
      bool owns = false;
      for (int n = 0; n < N; n++)
        if (owner[static_cast<std::size_t>(n)] == k) owns = true;
      if (!owns) demand_uncovered = true;
    }
    if (demand_uncovered) continue;
    for (int n = 0; n < N; n++)
      if (owner[static_cast<std::size_t>(n)] >= 0 &&
          fixed.d_m(owner[static_cast<std::size_t>(n)]) > 0.0)
        act.push_back(n);

    if (act.empty()) {
      bool any_demand = false;
      for (int k = 0; k < K; k++) any_demand |= fixed.d_m(k) > 0.0;
      if (!any_demand) best_relay = std::min(best_relay, 0.0);
      continue;
    }

    auto eval = [&](const std::vector<double>& p) {
      double sum = 0.0, energy = 0.0;
      for (std::size_t i = 0; i < act.size(); i++) sum += p[i];
      if (sum > par.P_r_max) return kInf;
      for (int k = 0; k < K; k++) {
        if (fixed.d_m(k) <= 0.0) continue;
        if (fixed.t3(k) <= 0.0) return kInf;
        double rate = 0.0;
        for (std::size_t i = 0; i < act.size(); i++)
          if (owner[static_cast<std::size_t>(act[i])] == k)
            rate += par.W * std::log2(1.0 + p[i] * slope3(act[i]));
        if (rate * fixed.t3(k) < fixed.d_m(k)) return kInf;
      }
      for (std::size_t i = 0; i < act.size(); i++)
        energy += p[i] * fixed.t3(owner[static_cast<std::size_t>(act[i])]);
      return energy;
    };

    if (act.size() == 1) {
      for (double p : grid) {
        const double e = eval({p});
        if (e < best_relay) best_relay = e;
        if (e < kInf) break;  // minimal power found on the sorted grid
      }
    } else {
      for (double p0 : grid)
        for (double p1 : grid) {
          const double e = eval({p0, p1});
          if (e < best_relay) best_relay = e;
        }
    }
  }

  // TN side with no demand at all costs nothing
  bool any_tn_demand = false;
  for (int k = 0; k < K; k++)
    any_tn_demand |= fixed.d_r(k) > 0.0 || fixed.d_m(k) > 0.0;
  if (!any_tn_demand) best_tn = std::min(best_tn, 0.0);

  return best_tn + best_relay;
}

}  // namespace rmsmtc
