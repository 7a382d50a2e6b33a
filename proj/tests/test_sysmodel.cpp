#include <doctest.h>

#include <cmath>

#include "rmsmtc/channel.hpp"
#include "rmsmtc/rng.hpp"
#include "rmsmtc/sysmodel.hpp"

using namespace rmsmtc;

namespace {

SystemParams paper() { return default_paper_params(); }

// symmetric eigenvalues of a 2x2 matrix
std::pair<double, double> eig2(const Eigen::Matrix2d& H) {
  const double tr = H(0, 0) + H(1, 1);
  const double det = H(0, 0) * H(1, 1) - H(0, 1) * H(1, 0);
  const double disc = std::sqrt(std::max(0.0, tr * tr / 4 - det));
  return {tr / 2 - disc, tr / 2 + disc};
}

}  // namespace

TEST_CASE("slot rates: golden values and edge cases") {
  SystemParams p = paper();

  CHECK(rate_slot1(p, 1e-6, 1.0, 0.0) == 0.0);
  CHECK(rate_slot1(p, 1e-6, 1.0, 0.1) ==
        doctest::Approx(9967226.258835994).epsilon(1e-12));
  CHECK(rate_slot1(p, 1e-6, 0.0, 0.5) == 0.0);

  CHECK(rate_slot2(p, 1e-8, 1.0, 0.0) == 0.0);
  CHECK(rate_slot2(p, 1e-8, 1.0, 1.0) ==
        doctest::Approx(6658211.482751795).epsilon(1e-12));
  CHECK(rate_slot2(p, 1e-8, 0.0, 1.0) == 0.0);

  // perspective form: continuous 0 at a = 0, matches integral form at a = 1
  CHECK(rate_term_perspective(0.0, p.W, 0.0, 1e-6, p.sigma2) == 0.0);
  CHECK(rate_term_perspective(1.0, p.W, 0.1, 1e-6, p.sigma2) ==
        doctest::Approx(rate_slot1(p, 1e-6, 1.0, 0.1)).epsilon(1e-14));
  // p_tilde = a*p reproduces a * (integral rate) on fractional shares
  const double a = 0.37, pw = 0.8;
  CHECK(rate_term_perspective(a, p.W, a * pw, 1e-6, p.sigma2) ==
        doctest::Approx(a * p.W * std::log2(1 + pw * 1e-6 / p.sigma2)).epsilon(1e-12));
}

TEST_CASE("slot-3 rate through the cascade") {
  SystemParams p = paper();
  p.K = 1;
  p.N = 1;
  p.Mc = p.Mr = 1;
  p.D.assign(1, 1e5);
  const Topology topo = generate_topology(p);
  ChannelSet ch = build_channel_set(p, topo, CounterRng(1));

  SUBCASE("null transmissive vector kills the rate") {
    const Eigen::VectorXcd s0 = Eigen::VectorXcd::Zero(1);
    CHECK(rate_slot3(p, ch, 1.0, 3.0, s0, 0) == 0.0);
  }

  SUBCASE("covariance and vector forms agree") {
    Eigen::VectorXcd s(1);
    s << Complex(0.6, 0.5);
    const Eigen::MatrixXcd S = s * s.adjoint();
    CHECK(rate_slot3(p, ch, 1.0, 2.0, s, 0) ==
          doctest::Approx(rate_slot3_cov(p, ch, 1.0, 2.0, S, 0)).epsilon(1e-10));
  }

  SUBCASE("unit scalar cascade gives W at SNR 1") {
    // force |h| = |g| = 1, s = 1, p = 1, delta2 = 1, b = 1
    ch.h_f(0, 0) = 1.0;
    ch.g(0, 0) = 1.0;
    ch.v(0, 0) = 1.0;
    ch.V[0] = Eigen::MatrixXcd::Ones(1, 1);
    SystemParams q = p;
    q.delta2 = 1.0;
    Eigen::VectorXcd s = Eigen::VectorXcd::Ones(1);
    CHECK(rate_slot3(q, ch, 1.0, 1.0, s, 0) == doctest::Approx(q.W).epsilon(1e-12));
  }
}

TEST_CASE("energies: golden values") {
  SystemParams p = paper();

  CHECK(local_compute_energy(p, 1e5, 1.0) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(local_compute_energy(p, 0.0, 1.0) == 0.0);
  CHECK(local_cpu_ok(p, 2e6, 1.0));
  CHECK(!local_cpu_ok(p, 2e6 + 1, 1.0));

  CHECK(cn_compute_energy(p, 1e5, 0.5) == doctest::Approx(1.2e-3).epsilon(1e-12));
  CHECK(cn_compute_energy(p, 0.0, 0.5) == 0.0);
  CHECK_THROWS_AS(cn_compute_energy(p, 1.0, 1.0), std::domain_error);

  CHECK(mec_slot_time(p, 1e6, 5e9) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(mec_slot_time(p, 0.0, 5e9) == 0.0);
}

TEST_CASE("equal-frequency split is optimal for local computing") {
  // splitting cycles across two frequency levels finishing at T never beats
  // the single-frequency schedule
  SystemParams p = paper();
  const double d = 1.7e5, T = 1.0;
  const double cycles = p.c_t * d;
  const double best = local_compute_energy(p, d, T);
  CounterRng rng(11);
  for (int trial = 0; trial < 200; trial++) {
    const double w = 0.05 + 0.9 * rng.uniform(CounterRng::kInitPhase, 77, trial, 0);
    const double q = 0.05 + 0.9 * rng.uniform(CounterRng::kInitPhase, 78, trial, 0);
    // w of the cycles run at f1, rest at f2, total time T split as q, T-q
    const double f1 = w * cycles / (q * T);
    const double f2 = (1 - w) * cycles / ((1 - q) * T);
    const double energy =
        p.alpha_t * (w * cycles * f1 * f1 + (1 - w) * cycles * f2 * f2);
    CHECK(energy >= best * (1 - 1e-9));
  }
}

TEST_CASE("cn energy Hessian has eigenvalues {0, positive}") {
  SystemParams p = paper();
  CounterRng rng(3);
  for (int trial = 0; trial < 50; trial++) {
    const double d = 1e4 + 2e5 * rng.uniform(CounterRng::kInitPhase, 1, trial, 0);
    const double t1 = 0.1 + 0.7 * rng.uniform(CounterRng::kInitPhase, 2, trial, 0);
    const double hd = std::max(1.0, d * 1e-5), ht = 1e-5;
    auto f = [&](double dd, double tt) { return cn_compute_energy(p, dd, tt); };
    Eigen::Matrix2d H;
    H(0, 0) = (f(d + hd, t1) - 2 * f(d, t1) + f(d - hd, t1)) / (hd * hd);
    H(1, 1) = (f(d, t1 + ht) - 2 * f(d, t1) + f(d, t1 - ht)) / (ht * ht);
    H(0, 1) = H(1, 0) = (f(d + hd, t1 + ht) - f(d + hd, t1 - ht) - f(d - hd, t1 + ht) +
                         f(d - hd, t1 - ht)) /
                        (4 * hd * ht);
    const auto [lo, hi] = eig2(H);
    const double scale = std::abs(hi) + 1e-30;
    CHECK(lo >= -1e-5 * scale);       // PSD up to finite-difference noise
    CHECK(std::abs(lo) < 1e-3 * scale);  // one eigenvalue ~ 0
    CHECK(hi > 0.0);
  }
}

TEST_CASE("perspective rate Hessian is negative semidefinite") {
  SystemParams p = paper();
  CounterRng rng(4);
  for (int trial = 0; trial < 50; trial++) {
    const double a = 0.05 + 0.9 * rng.uniform(CounterRng::kInitPhase, 5, trial, 0);
    const double pt = 0.01 + 2.0 * rng.uniform(CounterRng::kInitPhase, 6, trial, 0);
    const double gain = 1e-7, noise = p.sigma2;
    // rate normalized by W keeps finite-difference noise well below the
    // curvature scale
    auto f = [&](double aa, double pp) {
      return rate_term_perspective(aa, 1.0, pp, gain, noise);
    };
    const double ha = 3e-4 * a, hp = 3e-4 * pt;
    Eigen::Matrix2d H;
    H(0, 0) = (f(a + ha, pt) - 2 * f(a, pt) + f(a - ha, pt)) / (ha * ha);
    H(1, 1) = (f(a, pt + hp) - 2 * f(a, pt) + f(a, pt - hp)) / (hp * hp);
    H(0, 1) = H(1, 0) = (f(a + ha, pt + hp) - f(a + ha, pt - hp) - f(a - ha, pt + hp) +
                         f(a - ha, pt - hp)) /
                        (4 * ha * hp);
    const auto [lo, hi] = eig2(H);
    const double scale = std::abs(lo) + std::abs(hi) + 1e-30;
    CHECK(hi <= 1e-5 * scale);
    (void)lo;
  }
}

TEST_CASE("offload energy and objective decomposition") {
  SystemParams p = paper();
  p.K = 2;
  p.N = 2;
  p.D.assign(2, 1e5);
  const Topology topo = generate_topology(p);
  const ChannelSet ch = build_channel_set(p, topo, CounterRng(1));

  Allocation a = Allocation::zeros(p);

  SUBCASE("zero powers give zero offload energy") {
    CHECK(offload_energy(a, p).sum() == 0.0);
  }

  SUBCASE("single user-carrier golden case") {
    a.A(0, 0) = 1.0;
    a.B(0, 0) = 1.0;
    a.P1(0, 0) = a.P2(0, 0) = a.P3(0, 0) = 1.0;
    a.t1(0) = a.t2(0) = a.t3(0) = 0.1;
    CHECK(offload_energy(a, p)(0) == doctest::Approx(0.3).epsilon(1e-12));
  }

  SUBCASE("objective equals the sum of its parts") {
    a.d_l << 5e4, 2e4;
    a.d_r << 3e4, 1e4;
    a.d_m << 2e4, 7e4;
    a.t1 << 0.2, 0.3;
    a.A(0, 0) = a.A(1, 1) = 1.0;
    a.P1(0, 0) = 0.7;
    a.P1(1, 1) = 0.4;
    double expect = offload_energy(a, p).sum();
    for (int k = 0; k < 2; k++) {
      expect += local_compute_energy(p, a.d_l(k), p.T);
      expect += cn_compute_energy(p, a.d_r(k), a.t1(k));
    }
    CHECK(total_objective(a, p) == doctest::Approx(expect).epsilon(1e-14));
  }

  SUBCASE("all-local reduces to the cubic formula") {
    Allocation b = Allocation::zeros(p);
    b.d_l << 1e5, 1e5;
    double expect = 0.0;
    for (int k = 0; k < 2; k++) expect += local_compute_energy(p, 1e5, p.T);
    CHECK(total_objective(b, p) == doctest::Approx(expect).epsilon(1e-14));
    CHECK(total_objective(b, p) == doctest::Approx(2e-3).epsilon(1e-12));
  }
}

TEST_CASE("feasibility checker") {
  SystemParams p = paper();
  p.K = 2;
  p.N = 2;
  p.D.assign(2, 1e5);
  const Topology topo = generate_topology(p);
  const ChannelSet ch = build_channel_set(p, topo, CounterRng(1));

  SUBCASE("pure local allocation is feasible when D fits the CPU cap") {
    Allocation a = Allocation::zeros(p);
    a.d_l << 1e5, 1e5;
    const auto rep = check_feasibility(a, p, ch, 1e-6);
    CHECK(rep.feasible);
    CHECK(rep.max_violation <= 1e-6);
  }

  SUBCASE("time budget overrun is reported with the right residual") {
    Allocation a = Allocation::zeros(p);
    a.d_l << 1e5, 1e5;
    a.t1 << 0.4, 0.0;
    a.t2 << 0.3, 0.0;
    a.t3 << 0.2, 0.0;
    a.t4 << 0.2, 0.0;  // sums to 1.1 T
    const auto rep = check_feasibility(a, p, ch, 1e-6);
    CHECK(!rep.feasible);
    CHECK(rep.residual("time_budget") == doctest::Approx(0.1).epsilon(1e-9));
  }

  SUBCASE("demanded bits must be covered by rates") {
    Allocation a = Allocation::zeros(p);
    a.d_l << 0.0, 1e5;
    a.d_r << 1e5, 0.0;  // no rate allocated for user 0
    a.t1 << 0.5, 0.0;
    const auto rep = check_feasibility(a, p, ch, 1e-6);
    CHECK(!rep.feasible);
    CHECK(rep.residual("cn_offload_bits") > 0.5);
  }

  SUBCASE("diagnostic text carries the residual names") {
    Allocation a = Allocation::zeros(p);
    a.d_l << 1e5, 1e5;
    const auto rep = check_feasibility(a, p, ch, 1e-6);
    const std::string text = rep.to_text();
    CHECK(text.find("time_budget") != std::string::npos);
    CHECK(text.find("transmissive_magnitude") != std::string::npos);
  }
}
