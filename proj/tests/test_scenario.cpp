#include <doctest.h>

#include "rmsmtc/params.hpp"
#include "rmsmtc/rng.hpp"

using namespace rmsmtc;

TEST_CASE("dB conversions applied once at load") {
  const auto sc = load_params(
      "k = 2\nn = 2\nsigma2_dbm = -70\np_max_dbm = 40\nc0_db = 0\nd = 1e5\n");
  CHECK(sc.params.sigma2 == doctest::Approx(1.0e-10).epsilon(1e-12));
  CHECK(sc.params.P_t_max == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(sc.params.P_r_max == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(sc.params.C0 == doctest::Approx(1.0).epsilon(1e-12));
  // delta2 follows sigma2 when not given
  CHECK(sc.params.delta2 == doctest::Approx(1.0e-10).epsilon(1e-12));
}

TEST_CASE("dB round trip recovers linear values") {
  for (double v : {1e-10, 2.5e-3, 1.0, 42.0, 9.5e6}) {
    CHECK(db_to_linear(linear_to_db(v)) == doctest::Approx(v).epsilon(1e-12));
  }
}

TEST_CASE("config errors name the offending key") {
  CHECK_THROWS_WITH_AS(load_params("k = 2\nbogus = 1\nd = 1e5\n"),
                       "unknown key: bogus", ConfigError);
  CHECK_THROWS_AS(load_params("k = -3\nd = 1e5\n"), ConfigError);
  CHECK_THROWS_AS(load_params("w = banana\n"), ConfigError);
  CHECK_THROWS_AS(load_params("k = 2\nd = 1e5, 2e5, 3e5\n"), ConfigError);
  CHECK_THROWS_AS(load_params("m = 24\n"), ConfigError);  // not a perfect square
  CHECK_THROWS_AS(load_params("epsilon = 0\n"), ConfigError);
}

TEST_CASE("paper defaults") {
  const SystemParams p = default_paper_params();
  CHECK(p.K == 5);
  CHECK(p.N == 20);
  CHECK(p.M() == 25);
  CHECK(p.W == doctest::Approx(1e6));
  CHECK(p.sigma2 == doctest::Approx(1e-10));
  CHECK(p.c_t == doctest::Approx(1e3));
  CHECK(p.c_r == doctest::Approx(1e3));
  CHECK(p.c_m == doctest::Approx(1e3));
  CHECK(p.alpha_t == doctest::Approx(1e-27));
  CHECK(p.alpha_r == doctest::Approx(0.3e-27));
  CHECK(p.P_t_max == doctest::Approx(10.0));
  CHECK(p.P_r_max == doctest::Approx(10.0));
  CHECK(p.f_c == doctest::Approx(3e9));
  CHECK(p.f_t_max == doctest::Approx(2e9));
  CHECK(p.f_r_max == doctest::Approx(3e9));
  CHECK(p.f_m_max == doctest::Approx(5e9));
  CHECK(p.nu == doctest::Approx(3.0));
  CHECK(p.alpha_pl == doctest::Approx(3.0));
  CHECK(p.C0 == doctest::Approx(1e-3));
  CHECK(p.kappa1 == doctest::Approx(1.9952623149688795).epsilon(1e-12));
  CHECK(p.kappa2 == doctest::Approx(p.kappa1).epsilon(1e-12));
  CHECK(p.epsilon == doctest::Approx(1e-3));
  // half wavelength at 3 GHz
  CHECK(p.dc == doctest::Approx(299792458.0 / 6e9).epsilon(1e-12));
}

TEST_CASE("topology geometry and determinism") {
  SystemParams p = default_paper_params();
  p.seed = 42;
  const Topology topo = generate_topology(p);

  CHECK(topo.d_relay_rms == doctest::Approx(35.35533905932738).epsilon(1e-12));
  CHECK(topo.aoa_phi == doctest::Approx(M_PI / 2).epsilon(1e-12));
  CHECK(topo.aoa_psi == doctest::Approx(M_PI / 4).epsilon(1e-12));

  for (int k = 0; k < p.K; k++) {
    CHECK(topo.d_k(k) > 0.0);
    CHECK(topo.user_positions.row(k).head<2>().norm() <= p.user_radius + 1e-9);
    CHECK(topo.user_positions(k, 2) == 0.0);
  }

  const Topology again = generate_topology(p);
  CHECK((topo.user_positions - again.user_positions).cwiseAbs().maxCoeff() == 0.0);
  CHECK((topo.d_k - again.d_k).cwiseAbs().maxCoeff() == 0.0);

  SystemParams p2 = p;
  p2.seed = 43;
  const Topology other = generate_topology(p2);
  CHECK((topo.user_positions - other.user_positions).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("user at relay-projected origin distance") {
  // a user at the origin sits sqrt(25^2+25^2+10^2) from the relay
  SystemParams p = default_paper_params();
  const Eigen::Vector3d relay(p.relay_pos[0], p.relay_pos[1], p.relay_pos[2]);
  CHECK(relay.norm() == doctest::Approx(36.742346141747674).epsilon(1e-12));
}

TEST_CASE("counter rng draws are order-independent and seeded") {
  CounterRng a(7), b(7), c(8);
  const double u1 = a.uniform(CounterRng::kUserPosition, 3, 9, 1);
  (void)a.uniform(CounterRng::kUserPosition, 100, 5, 0);  // unrelated draw
  CHECK(a.uniform(CounterRng::kUserPosition, 3, 9, 1) == u1);
  CHECK(b.uniform(CounterRng::kUserPosition, 3, 9, 1) == u1);
  CHECK(c.uniform(CounterRng::kUserPosition, 3, 9, 1) != u1);

  // mean of uniforms sane
  double acc = 0;
  const int n = 20000;
  for (int i = 0; i < n; i++) acc += a.uniform(CounterRng::kInitPhase, 0, 0, i);
  CHECK(acc / n == doctest::Approx(0.5).epsilon(0.02));
}
