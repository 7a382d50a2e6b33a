#include "rmsmtc/channel.hpp"

#include <cmath>
#include <ostream>

namespace rmsmtc {

namespace {
constexpr double kLightSpeed = 299792458.0;

Complex unit_phase(double angle) { return {std::cos(angle), std::sin(angle)}; }
}  // namespace

Complex tn_relay_channel(const SystemParams& params, const Topology& topo, int k,
                         int n, const CounterRng& rng) {
  const double d = topo.d_k(k);
  const double amp = std::sqrt(params.C0 / std::pow(d, params.nu));
  const double los_w = std::sqrt(params.kappa1 / (1.0 + params.kappa1));
  const double nlos_w = std::sqrt(1.0 / (1.0 + params.kappa1));
  // subcarrier phase uses the 1-based subcarrier index
  const Complex los = unit_phase(-2.0 * M_PI * (n + 1) * params.W * d / kLightSpeed);
  const Complex nlos = rng.complex_normal(CounterRng::kTnRelayNlos,
                                          static_cast<std::uint64_t>(k),
                                          static_cast<std::uint64_t>(n));
  return amp * (los_w * los + nlos_w * nlos);
}

Eigen::VectorXcd upa_los_steering(const SystemParams& params, double phi, double psi) {
  const int Mc = params.Mc, Mr = params.Mr;
  const double fc = params.f_c;
  const double col_f = std::sin(phi) * std::sin(psi);  // column axis, spacing dc
  const double row_f = std::sin(phi) * std::cos(psi);  // row axis, spacing dr
  Eigen::VectorXcd out(Mc * Mr);
  for (int mc = 0; mc < Mc; mc++) {
    const Complex a = unit_phase(-2.0 * M_PI * fc * mc * params.dc * col_f / kLightSpeed);
    for (int mr = 0; mr < Mr; mr++) {
      const Complex b = unit_phase(-2.0 * M_PI * fc * mr * params.dr * row_f / kLightSpeed);
      out(mc * Mr + mr) = a * b;
    }
  }
  return out;
}

Eigen::VectorXcd relay_rms_channel(const SystemParams& params, const Topology& topo,
                                   int n, const CounterRng& rng) {
  const int M = params.M();
  const double d = topo.d_relay_rms;
  const double amp = std::sqrt(params.C0 / std::pow(d, params.alpha_pl));
  const double los_w = std::sqrt(params.kappa2 / (1.0 + params.kappa2));
  const double nlos_w = std::sqrt(1.0 / (1.0 + params.kappa2));
  const Complex los_phase = unit_phase(-2.0 * M_PI * (n + 1) * params.W * d / kLightSpeed);

  const Eigen::VectorXcd los = upa_los_steering(params, topo.aoa_phi, topo.aoa_psi);
  Eigen::VectorXcd g(M);
  for (int m = 0; m < M; m++) {
    const Complex nlos = rng.complex_normal(
        CounterRng::kRelayRmsNlos,
        static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(M) +
            static_cast<std::uint64_t>(m),
        0);
    g(m) = amp * (los_w * los_phase * los(m) + nlos_w * nlos);
  }
  return g;
}

Eigen::VectorXd nearfield_distances(const SystemParams& params, double r_hat) {
  const int Mc = params.Mc, Mr = params.Mr;
  Eigen::VectorXd r(Mc * Mr);
  for (int mc = 0; mc < Mc; mc++) {
    const double dmc = (2.0 * (mc + 1) - Mc - 1) / 2.0;
    for (int mr = 0; mr < Mr; mr++) {
      const double dmr = (2.0 * (mr + 1) - Mr - 1) / 2.0;
      r(mc * Mr + mr) = std::sqrt(r_hat * r_hat + dmc * dmc * params.dc * params.dc +
                                  dmr * dmr * params.dr * params.dr);
    }
  }
  return r;
}

Eigen::VectorXcd rms_feed_channel(const SystemParams& params, const Topology& topo, int n) {
  const int M = params.M();
  const double r_hat = topo.r_hat;
  const Eigen::VectorXd r = nearfield_distances(params, r_hat);
  const Complex common =
      params.rho * unit_phase(-2.0 * M_PI * (n + 1) * params.W * r_hat / kLightSpeed);
  Eigen::VectorXcd h(M);
  for (int m = 0; m < M; m++)
    h(m) = common * unit_phase(+2.0 * M_PI * params.f_c * (r(m) - r_hat) / kLightSpeed);
  return h;
}

ChannelSet build_channel_set(const SystemParams& params, const Topology& topo,
                             const CounterRng& rng) {
  const int K = params.K, N = params.N, M = params.M();
  ChannelSet ch;
  ch.h_r.resize(K, N);
  ch.g.resize(M, N);
  ch.h_f.resize(M, N);
  ch.v.resize(M, N);
  ch.V.resize(static_cast<std::size_t>(N));

  for (int k = 0; k < K; k++)
    for (int n = 0; n < N; n++) ch.h_r(k, n) = tn_relay_channel(params, topo, k, n, rng);

  for (int n = 0; n < N; n++) {
    ch.g.col(n) = relay_rms_channel(params, topo, n, rng);
    ch.h_f.col(n) = rms_feed_channel(params, topo, n);
    // v_n^H = h_n^H diag(g_n)  =>  v_n = h_n .* conj(g_n)
    ch.v.col(n) = ch.h_f.col(n).cwiseProduct(ch.g.col(n).conjugate());
    ch.V[static_cast<std::size_t>(n)] = ch.v.col(n) * ch.v.col(n).adjoint();
  }
  return ch;
}

void dump_channels(const ChannelSet& ch, std::ostream& os) {
  os << "group,k,n,m,re,im\n";
  os.precision(17);
  for (Eigen::Index k = 0; k < ch.h_r.rows(); k++)
    for (Eigen::Index n = 0; n < ch.h_r.cols(); n++)
      os << "h_r," << k << ',' << n << ",0," << ch.h_r(k, n).real() << ','
         << ch.h_r(k, n).imag() << '\n';
  auto dump_block = [&os](const char* name, const Eigen::MatrixXcd& X) {
    for (Eigen::Index n = 0; n < X.cols(); n++)
      for (Eigen::Index m = 0; m < X.rows(); m++)
        os << name << ",0," << n << ',' << m << ',' << X(m, n).real() << ','
           << X(m, n).imag() << '\n';
  };
  dump_block("g", ch.g);
  dump_block("h_f", ch.h_f);
  dump_block("v", ch.v);
}

}  // namespace rmsmtc
