#include <doctest.h>

#include <cmath>
#include <sstream>

#include "rmsmtc/channel.hpp"

using namespace rmsmtc;

namespace {
SystemParams small_params() {
  SystemParams p = default_paper_params();
  p.K = 2;
  p.N = 3;
  p.Mc = p.Mr = 2;
  p.D.assign(2, 1e5);
  return p;
}
}  // namespace

TEST_CASE("pure-LoS limit of the TN-relay channel") {
  SystemParams p = small_params();
  p.kappa1 = 1e12;
  const Topology topo = generate_topology(p);
  const CounterRng rng(p.seed);
  const Complex h = tn_relay_channel(p, topo, 0, 0, rng);
  CHECK(std::abs(h) ==
        doctest::Approx(std::sqrt(p.C0 / std::pow(topo.d_k(0), p.nu))).epsilon(1e-6));
}

TEST_CASE("TN-relay second moment matches C0/d^nu (Monte Carlo)") {
  SystemParams p = small_params();
  Topology topo = generate_topology(p);
  topo.d_k(0) = 10.0;
  const CounterRng rng(123);
  const int draws = 100000;
  double acc = 0.0;
  for (int i = 0; i < draws; i++) {
    // reuse the subcarrier slot as the Monte Carlo counter
    const Complex h = tn_relay_channel(p, topo, 0, i, rng);
    acc += std::norm(h);
  }
  const double expected = p.C0 / std::pow(10.0, p.nu);  // 1e-6
  CHECK(expected == doctest::Approx(1e-6).epsilon(1e-12));
  CHECK(acc / draws == doctest::Approx(expected).epsilon(0.02));
}

TEST_CASE("channel determinism under the same seed") {
  SystemParams p = small_params();
  const Topology topo = generate_topology(p);
  const CounterRng rng(p.seed);
  const Complex h1 = tn_relay_channel(p, topo, 1, 2, rng);
  const Complex h2 = tn_relay_channel(p, topo, 1, 2, rng);
  CHECK(h1 == h2);
}

TEST_CASE("steering vector basics") {
  SystemParams p = small_params();

  SUBCASE("zero vertical angle gives all ones") {
    const Eigen::VectorXcd v = upa_los_steering(p, 0.0, 0.7);
    for (int m = 0; m < v.size(); m++) {
      CHECK(v(m).real() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(v(m).imag() == doctest::Approx(0.0).epsilon(1e-12));
    }
  }

  SUBCASE("unit modulus entries, squared norm M") {
    const Eigen::VectorXcd v = upa_los_steering(p, 0.9, -1.3);
    for (int m = 0; m < v.size(); m++)
      CHECK(std::abs(v(m)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(v.squaredNorm() == doctest::Approx(static_cast<double>(p.M())).epsilon(1e-12));
  }

  SUBCASE("half-wavelength row factor at phi=pi/2, psi=0 alternates sign") {
    SystemParams q = small_params();
    q.dr = 299792458.0 / (2.0 * q.f_c);  // lambda/2
    const Eigen::VectorXcd v = upa_los_steering(q, M_PI / 2, 0.0);
    // layout: m = mc*Mr + mr; row phases alternate {1, -1} along mr
    CHECK(v(0).real() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(v(1).real() == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(std::abs(v(1).imag()) < 1e-6);
    CHECK(v(2).real() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(v(3).real() == doctest::Approx(-1.0).epsilon(1e-9));
  }
}

TEST_CASE("relay-RMS channel: LoS limit and moments") {
  SystemParams p = small_params();
  const Topology topo = generate_topology(p);
  const CounterRng rng(5);

  SUBCASE("kappa2 -> inf collapses onto the steering direction") {
    SystemParams q = p;
    q.kappa2 = 1e14;
    const Eigen::VectorXcd g = relay_rms_channel(q, topo, 0, rng);
    const Eigen::VectorXcd los = upa_los_steering(q, topo.aoa_phi, topo.aoa_psi);
    const double amp = std::sqrt(q.C0 / std::pow(topo.d_relay_rms, q.alpha_pl));
    for (int m = 0; m < g.size(); m++)
      CHECK(std::abs(g(m)) == doctest::Approx(amp * std::abs(los(m))).epsilon(1e-6));
  }

  SUBCASE("expected squared norm is M*C0/d^alpha") {
    const double expected =
        p.M() * p.C0 / std::pow(topo.d_relay_rms, p.alpha_pl);
    double acc = 0.0;
    const int draws = 25000;  // 25000 * M = 1e5 scalar draws
    for (int n = 0; n < draws; n++)
      acc += relay_rms_channel(p, topo, n, rng).squaredNorm();
    CHECK(acc / draws == doctest::Approx(expected).epsilon(0.02));
  }

  SUBCASE("subcarriers share the LoS direction") {
    SystemParams q = p;
    q.kappa2 = 1e16;  // residual NLoS weight ~ 1e-8
    const Eigen::VectorXcd g0 = relay_rms_channel(q, topo, 0, rng);
    const Eigen::VectorXcd g1 = relay_rms_channel(q, topo, 1, rng);
    // g1 = phase * g0 elementwise; check the ratio is a common unit scalar
    const Complex ratio = g1(0) / g0(0);
    CHECK(std::abs(ratio) == doctest::Approx(1.0).epsilon(1e-6));
    for (int m = 1; m < g0.size(); m++)
      CHECK(std::abs(g1(m) / g0(m) - ratio) < 1e-6);
  }
}

TEST_CASE("near-field distances") {
  SystemParams p = default_paper_params();  // 5x5 grid
  p.dc = p.dr = 0.05;

  const Eigen::VectorXd r = nearfield_distances(p, 1.0);

  SUBCASE("center element of an odd grid sits at r_hat") {
    // mc = mr = 2 (0-based) is the center; layout m = mc*Mr + mr
    CHECK(r(2 * 5 + 2) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("corner element") {
    CHECK(r(0) == doctest::Approx(1.0099504938362078).epsilon(1e-12));
  }
  SUBCASE("delta offsets") {
    // Mc=3, mc=1 (1-based) => delta = -1; distance (1-based mc) from formula
    SystemParams q = p;
    q.Mc = 3;
    q.Mr = 1;
    const Eigen::VectorXd rr = nearfield_distances(q, 2.0);
    CHECK(rr(0) == doctest::Approx(std::sqrt(4.0 + 1.0 * 0.05 * 0.05)).epsilon(1e-12));
  }
}

TEST_CASE("RMS-feed channel structure") {
  SystemParams p = default_paper_params();
  const Topology topo = generate_topology(p);

  const Eigen::VectorXcd h0 = rms_feed_channel(p, topo, 0);
  const Eigen::VectorXcd h3 = rms_feed_channel(p, topo, 3);

  // constant modulus rho, squared norm rho^2 M
  for (int m = 0; m < h0.size(); m++)
    CHECK(std::abs(h0(m)) == doctest::Approx(p.rho).epsilon(1e-12));
  CHECK(h0.squaredNorm() == doctest::Approx(p.rho * p.rho * p.M()).epsilon(1e-12));

  // center element phase equals the common scalar phase
  const Complex common = h0(2 * 5 + 2);
  CHECK(std::arg(common) ==
        doctest::Approx(-2.0 * M_PI * 1 * p.W * topo.r_hat / 299792458.0).epsilon(1e-9));

  // subcarriers differ by a scalar phase only
  const Complex ratio = h3(0) / h0(0);
  for (int m = 1; m < h0.size(); m++) CHECK(std::abs(h3(m) / h0(m) - ratio) < 1e-9);
}

TEST_CASE("cascade identities") {
  SystemParams p = small_params();
  const Topology topo = generate_topology(p);
  const CounterRng rng(p.seed);
  const ChannelSet ch = build_channel_set(p, topo, rng);

  SUBCASE("tr(V_n) equals ||v_n||^2, V Hermitian PSD rank 1") {
    for (int n = 0; n < p.N; n++) {
      const auto& V = ch.V[static_cast<std::size_t>(n)];
      CHECK(std::abs(V.trace().real() - ch.v.col(n).squaredNorm()) <=
            1e-12 * ch.v.col(n).squaredNorm());
      CHECK((V - V.adjoint()).cwiseAbs().maxCoeff() < 1e-14);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(V);
      CHECK(eig.eigenvalues().minCoeff() > -1e-12 * V.trace().real());
      // rank 1: only the top eigenvalue is nonzero
      for (int i = 0; i < V.rows() - 1; i++)
        CHECK(std::abs(eig.eigenvalues()(i)) < 1e-10 * V.trace().real());
    }
  }

  SUBCASE("all-ones s matches the scalar-loop cascade") {
    const Eigen::VectorXcd s = Eigen::VectorXcd::Ones(p.M());
    for (int n = 0; n < p.N; n++) {
      Complex direct = 0.0;
      for (int m = 0; m < p.M(); m++)
        direct += std::conj(ch.h_f(m, n)) * ch.g(m, n);  // sum_m h*_m g_m s_m
      const Complex via = (ch.v.col(n).adjoint() * s)(0, 0);
      CHECK(std::abs(direct - via) <= 1e-10 * std::max(1.0, std::abs(direct)));
    }
  }

  SUBCASE("|v^H s|^2 = tr(S V) for random s") {
    const CounterRng r2(99);
    Eigen::VectorXcd s(p.M());
    for (int m = 0; m < p.M(); m++)
      s(m) = 0.7 * r2.complex_normal(CounterRng::kInitPhase, m, 0);
    const Eigen::MatrixXcd S = s * s.adjoint();
    for (int n = 0; n < p.N; n++) {
      const double lhs = std::norm((ch.v.col(n).adjoint() * s)(0, 0));
      const double rhs = (S * ch.V[static_cast<std::size_t>(n)]).trace().real();
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
    }
  }

  SUBCASE("M=1 cascade is the scalar product") {
    SystemParams q = small_params();
    q.Mc = q.Mr = 1;
    const Topology t1 = generate_topology(q);
    const ChannelSet c1 = build_channel_set(q, t1, CounterRng(3));
    const Complex s0(0.3, -0.4);
    const double lhs = std::norm(std::conj(c1.v(0, 0)) * s0);
    const double rhs = std::norm(c1.h_f(0, 0)) * std::norm(c1.g(0, 0)) * std::norm(s0);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("channel dump is deterministic") {
  SystemParams p = small_params();
  const Topology topo = generate_topology(p);
  const ChannelSet ch = build_channel_set(p, topo, CounterRng(p.seed));
  std::ostringstream a, b;
  dump_channels(ch, a);
  dump_channels(build_channel_set(p, topo, CounterRng(p.seed)), b);
  CHECK(a.str() == b.str());
  CHECK(a.str().substr(0, 18) == "group,k,n,m,re,im\n");
}
