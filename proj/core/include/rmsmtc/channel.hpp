#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "rmsmtc/params.hpp"

namespace rmsmtc {

using Complex = std::complex<double>;

// One frozen realization of the three channel groups plus the cascade data
// used by the transmissive-coefficient subproblem. Immutable after
// construction.
struct ChannelSet {
  Eigen::MatrixXcd h_r;  // K x N, TN k -> relay on subcarrier n
  Eigen::MatrixXcd g;    // M x N, relay -> RMS
  Eigen::MatrixXcd h_f;  // M x N, RMS -> feed antenna
  Eigen::MatrixXcd v;    // M x N, cascade vectors: v_n^H = h_n^H diag(g_n)
  std::vector<Eigen::MatrixXcd> V;  // N Hermitian rank-1 matrices v_n v_n^H
};

// TN k -> relay Rician gain on subcarrier n (1-based indices in the model,
// 0-based here).
Complex tn_relay_channel(const SystemParams& params, const Topology& topo, int k,
                         int n, const CounterRng& rng);

// Unit-modulus UPA steering vector; flat layout is column-major over the
// element grid: m = mc * Mr + mr.
Eigen::VectorXcd upa_los_steering(const SystemParams& params, double phi, double psi);

Eigen::VectorXcd relay_rms_channel(const SystemParams& params, const Topology& topo,
                                   int n, const CounterRng& rng);

// Element-to-feed distances r_{mc,mr} = sqrt(r_hat^2 + delta_mc^2 dc^2 +
// delta_mr^2 dr^2), same flat layout as the steering vector.
Eigen::VectorXd nearfield_distances(const SystemParams& params, double r_hat);

Eigen::VectorXcd rms_feed_channel(const SystemParams& params, const Topology& topo, int n);

ChannelSet build_channel_set(const SystemParams& params, const Topology& topo,
                             const CounterRng& rng);

// Columnar channel dump (group,k,n,m,re,im) for cross-checks.
void dump_channels(const ChannelSet& ch, std::ostream& os);

}  // namespace rmsmtc
