#include <doctest.h>

#include <cmath>
#include <sstream>

#include "rmsmtc/conic.hpp"
#include "rmsmtc/rng.hpp"
#include "rmsmtc/sca.hpp"

using namespace rmsmtc;
using conic::ConicProgram;
using conic::LinExpr;
using conic::SolveStatus;
using conic::SolverSettings;

namespace {

Eigen::MatrixXcd random_psd(int dim, CounterRng& rng, int tag, double scale = 1.0) {
  Eigen::MatrixXcd G(dim, dim);
  for (int i = 0; i < dim; i++)
    for (int j = 0; j < dim; j++)
      G(i, j) = rng.complex_normal(CounterRng::kInitPhase,
                                   static_cast<std::uint64_t>(tag) * 1000 + i, j);
  return scale * (G * G.adjoint()) / dim;
}

}  // namespace

TEST_CASE("taylor_ratio_upper: tangency, gradient, golden value") {
  CHECK(taylor_ratio_upper(1e5, 0.5, 1e5, 0.5, 1e3, 1.0) ==
        doctest::Approx(1e3 * 1e5 / 0.5).epsilon(1e-14));
  CHECK(taylor_ratio_upper(1e5, 0.5, 1.1e5, 0.5, 1e3, 1.0) ==
        doctest::Approx(2.2e8).epsilon(1e-12));

  // gradient against finite differences of c*d/(T-t)
  const double d0 = 7.3e4, t0 = 0.41, c = 1e3, T = 1.0;
  auto orig = [&](double d, double t) { return c * d / (T - t); };
  const double hd = 1.0, ht = 1e-7;
  const double gd_fd = (orig(d0 + hd, t0) - orig(d0 - hd, t0)) / (2 * hd);
  const double gt_fd = (orig(d0, t0 + ht) - orig(d0, t0 - ht)) / (2 * ht);
  const double gd = (taylor_ratio_upper(d0, t0, d0 + 1, t0, c, T) -
                     taylor_ratio_upper(d0, t0, d0, t0, c, T));
  const double gt = (taylor_ratio_upper(d0, t0, d0, t0 + 1e-6, c, T) -
                     taylor_ratio_upper(d0, t0, d0, t0, c, T)) / 1e-6;
  CHECK(gd == doctest::Approx(gd_fd).epsilon(1e-6));
  CHECK(gt == doctest::Approx(gt_fd).epsilon(1e-6));
}

TEST_CASE("taylor_ratio_upper_mec: tangency, gradient, golden value") {
  CHECK(taylor_ratio_upper_mec(1e6, 0.2, 1e6, 0.2, 1e3) ==
        doctest::Approx(5e9).epsilon(1e-14));
  CHECK(taylor_ratio_upper_mec(1e6, 0.2, 1e6, 0.25, 1e3) ==
        doctest::Approx(3.75e9).epsilon(1e-12));

  const double d0 = 3.7e5, t0 = 0.23, c = 1e3;
  auto orig = [&](double d, double t) { return c * d / t; };
  const double gd_fd = (orig(d0 + 1, t0) - orig(d0 - 1, t0)) / 2;
  const double gt_fd = (orig(d0, t0 + 1e-7) - orig(d0, t0 - 1e-7)) / 2e-7;
  const double gd = taylor_ratio_upper_mec(d0, t0, d0 + 1, t0, c) -
                    taylor_ratio_upper_mec(d0, t0, d0, t0, c);
  const double gt = (taylor_ratio_upper_mec(d0, t0, d0, t0 + 1e-6, c) -
                     taylor_ratio_upper_mec(d0, t0, d0, t0, c)) / 1e-6;
  CHECK(gd == doctest::Approx(gd_fd).epsilon(1e-6));
  CHECK(gt == doctest::Approx(gt_fd).epsilon(1e-6));
}

TEST_CASE("spectral-norm linearization is a tangent lower bound") {
  CounterRng rng(21);

  SUBCASE("tangency at the expansion point") {
    const Eigen::MatrixXcd S = random_psd(5, rng, 1);
    const auto lin = linearize_spectral_norm(S);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(S);
    CHECK(lin.value(S) == doctest::Approx(eig.eigenvalues().maxCoeff()).epsilon(1e-10));
  }

  SUBCASE("identity expansion, diagonal target") {
    const auto lin = linearize_spectral_norm(Eigen::MatrixXcd::Identity(2, 2));
    Eigen::MatrixXcd S = Eigen::MatrixXcd::Zero(2, 2);
    S(0, 0) = 3.0;
    S(1, 1) = 1.0;
    CHECK(lin.value(S) <= 3.0 + 1e-12);
    CHECK(lin.value(Eigen::MatrixXcd::Identity(2, 2)) == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("1000 random PSD pairs never exceed the spectral norm") {
    for (int trial = 0; trial < 1000; trial++) {
      const int dim = 2 + trial % 5;
      const Eigen::MatrixXcd Sp = random_psd(dim, rng, 2 * trial);
      const Eigen::MatrixXcd S = random_psd(dim, rng, 2 * trial + 1);
      const auto lin = linearize_spectral_norm(Sp);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(S);
      CHECK(lin.value(S) <= eig.eigenvalues().maxCoeff() + 1e-9);
    }
  }
}

TEST_CASE("real embedding doubles the Hermitian spectrum") {
  CounterRng rng(5);
  const Eigen::MatrixXcd S = random_psd(4, rng, 7);
  const Eigen::MatrixXd E = conic::real_embedding(S);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eh(S);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> er(E);
  for (int i = 0; i < 4; i++) {
    CHECK(er.eigenvalues()(2 * i) == doctest::Approx(eh.eigenvalues()(i)).epsilon(1e-9));
    CHECK(er.eigenvalues()(2 * i + 1) == doctest::Approx(eh.eigenvalues()(i)).epsilon(1e-9));
  }
}

TEST_CASE("hermitian coordinates are an isometry") {
  CounterRng rng(6);
  const Eigen::MatrixXcd X = random_psd(4, rng, 8);
  const Eigen::MatrixXcd Y = random_psd(4, rng, 9);
  const double ip = (X * Y).trace().real();
  CHECK(conic::hermitian_coords(X).dot(conic::hermitian_coords(Y)) ==
        doctest::Approx(ip).epsilon(1e-12));
  const Eigen::MatrixXcd back = conic::hermitian_from_coords(4, conic::hermitian_coords(X));
  CHECK((back - X).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("tiny linear solve: min x s.t. x >= 3") {
  ConicProgram prog;
  const int x = prog.add_var(3.0, conic::kInf);
  prog.set_objective(LinExpr::var(x));
  const auto out = conic::solve(prog, SolverSettings{});
  REQUIRE(out.status == SolveStatus::Optimal);
  CHECK(out.x(x) == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(out.kkt_residual <= 1e-7);
}

TEST_CASE("infeasible time-budget program reports infeasible") {
  ConicProgram prog;
  const int x = prog.add_var(3.0, conic::kInf);
  prog.set_objective(LinExpr::var(x));
  prog.add_lin_le(LinExpr::var(x), 1.0, /*phase1_shiftable=*/true);
  const auto out = conic::solve(prog, SolverSettings{});
  CHECK(out.status == SolveStatus::Infeasible);
  CHECK(out.message.find("binding") != std::string::npos);
}

TEST_CASE("exponential-cone rate program matches a grid oracle") {
  // min p subject to W log2(1 + p*gain/noise) >= target, W = 1e6,
  // gain/noise = 250. Closed form p* = (2^3 - 1)/250 = 0.028.
  const double W = 1e6, gn = 250.0, target = 3e6;
  ConicProgram prog;
  const int p = prog.add_var(0.0, 1.0);
  const int rho = prog.add_var(-1.0, 20.0);  // rate epigraph, Mbit/s
  prog.set_objective(LinExpr::var(p));
  // rho*1e6 <= W log2(1 + p*gn): exp cone with a = 1
  add_perspective_rate_constraint(prog, LinExpr::var(rho, 1e6), LinExpr(1.0),
                                  LinExpr(1.0), LinExpr::var(p), gn, 1.0, W);
  prog.add_lin_le(LinExpr::var(rho, -1.0), -target / 1e6, true);  // rho >= 3
  const auto out = conic::solve(prog, SolverSettings{});
  REQUIRE(out.status == SolveStatus::Optimal);

  // 1e4-point grid oracle
  double best = 1e300;
  for (int i = 0; i <= 10000; i++) {
    const double pw = i * 1e-4;
    if (W * std::log2(1 + pw * gn) >= target) {
      best = pw;
      break;
    }
  }
  CHECK(out.x(p) == doctest::Approx(0.028).epsilon(1e-6));
  CHECK(std::abs(out.x(p) - best) <= 1e-4 * best + 1e-4);
  CHECK(out.objective == doctest::Approx(best).epsilon(1e-2));
}

TEST_CASE("perspective rate constraint reductions") {
  SUBCASE("all-constant reduces to a linear row, solver respects it") {
    // d <= t*R with R = W log2(1+ p*g/n): make d variable
    ConicProgram prog;
    const int d = prog.add_var(0.0, 100.0);
    prog.set_objective(LinExpr::var(d, -1.0));  // maximize d
    const double W = 1e6;
    add_perspective_rate_constraint(prog, LinExpr::var(d, 1e6), LinExpr(0.5),
                                    LinExpr(1.0), LinExpr(0.028), 250.0, 1.0, W,
                                    /*phase1_shiftable=*/true);
    const auto out = conic::solve(prog, SolverSettings{});
    REQUIRE(out.status == SolveStatus::Optimal);
    // d (Mbit) = 0.5 * 3 Mbit = 1.5
    CHECK(out.x(d) == doctest::Approx(1.5).epsilon(1e-5));
  }

  SUBCASE("bilinear combination is rejected") {
    ConicProgram prog;
    const int d = prog.add_var(0.0, 1.0);
    const int t = prog.add_var(0.0, 1.0);
    const int p = prog.add_var(0.0, 1.0);
    CHECK_THROWS_AS(add_perspective_rate_constraint(prog, LinExpr::var(d),
                                                    LinExpr::var(t), LinExpr(1.0),
                                                    LinExpr::var(p), 1.0, 1.0, 1e6),
                    std::invalid_argument);
  }

  SUBCASE("share and power at zero force d to zero") {
    // the encoding collapses to d <= 0
    ConicProgram prog;
    const int d = prog.add_var(-50.0, 100.0);
    prog.set_objective(LinExpr::var(d, -1.0));  // maximize d
    add_perspective_rate_constraint(prog, LinExpr::var(d), LinExpr(0.7), LinExpr(0.0),
                                    LinExpr(0.0), 250.0, 1.0, 1e6);
    conic::StartHint hint;
    hint.x0 = Eigen::VectorXd::Constant(1, -10.0);
    const auto out = conic::solve(prog, SolverSettings{}, &hint);
    REQUIRE(out.status == SolveStatus::Optimal);
    CHECK(out.x(d) <= 1e-6);
    CHECK(out.x(d) >= -1e-4);

    // with d >= 0 as well, the feasible set has no interior point
    ConicProgram degenerate;
    const int d2 = degenerate.add_var(0.0, 100.0);
    degenerate.set_objective(LinExpr::var(d2, -1.0));
    add_perspective_rate_constraint(degenerate, LinExpr::var(d2), LinExpr(0.7),
                                    LinExpr(0.0), LinExpr(0.0), 250.0, 1.0, 1e6,
                                    /*phase1_shiftable=*/true);
    CHECK(conic::solve(degenerate, SolverSettings{}).status == SolveStatus::Infeasible);
  }
}

TEST_CASE("cubic-over-square epigraph") {
  SUBCASE("golden value: alpha_r c_r^3 d^3/(T-t1)^2") {
    // min u s.t. u >= 0.3e-18 * d^3 / (T-t1)^2 at d = 1e5 bits, T-t1 = 0.5
    ConicProgram prog;
    const int u = prog.add_var(0.0, 1.0);
    prog.set_objective(LinExpr::var(u));
    add_cubic_over_square_epigraph(prog, LinExpr::var(u), 0.3e-18,
                                   LinExpr(1e5), LinExpr(0.5));
    const auto out = conic::solve(prog, SolverSettings{});
    REQUIRE(out.status == SolveStatus::Optimal);
    CHECK(out.x(u) == doctest::Approx(1.2e-3).epsilon(1e-6));
  }

  SUBCASE("d = 0 pins u at 0") {
    ConicProgram prog;
    const int u = prog.add_var(0.0, 1.0);
    prog.set_objective(LinExpr::var(u));
    add_cubic_over_square_epigraph(prog, LinExpr::var(u), 1e-18, LinExpr(0.0),
                                   LinExpr(0.5));
    const auto out = conic::solve(prog, SolverSettings{});
    REQUIRE(out.status == SolveStatus::Optimal);
    CHECK(out.x(u) <= 1e-8);
  }

  SUBCASE("100 random feasible points agree with direct evaluation") {
    CounterRng rng(31);
    for (int trial = 0; trial < 100; trial++) {
      const double d = 1e4 + 3e5 * rng.uniform(CounterRng::kInitPhase, 41, trial, 0);
      const double rem = 0.1 + 0.8 * rng.uniform(CounterRng::kInitPhase, 42, trial, 0);
      const double coeff = 0.3e-18;
      ConicProgram prog;
      const int u = prog.add_var(0.0, 1e3);
      prog.set_objective(LinExpr::var(u));
      add_cubic_over_square_epigraph(prog, LinExpr::var(u), coeff, LinExpr(d),
                                     LinExpr(rem));
      const auto out = conic::solve(prog, SolverSettings{});
      REQUIRE(out.status == SolveStatus::Optimal);
      const double direct = coeff * d * d * d / (rem * rem);
      CHECK(out.x(u) == doctest::Approx(direct).epsilon(1e-7));
    }
  }
}

TEST_CASE("equality constraints via the kernel path") {
  // min x^3-ish proxy: min u s.t. u >= d^3 (coeff 1), d + e = 4, e <= 1
  ConicProgram prog;
  const int d = prog.add_var(0.0, 10.0);
  const int e = prog.add_var(0.0, 1.0);
  const int u = prog.add_var(0.0, 1e4);
  prog.set_objective(LinExpr::var(u));
  LinExpr sum = LinExpr::var(d);
  sum += LinExpr::var(e);
  prog.add_lin_eq(sum, 4.0);
  add_cubic_over_square_epigraph(prog, LinExpr::var(u), 1.0, LinExpr::var(d),
                                 LinExpr(1.0));
  conic::StartHint hint;
  hint.x0 = Eigen::Vector3d(3.2, 0.8, 50.0);
  const auto out = conic::solve(prog, SolverSettings{}, &hint);
  REQUIRE(out.status == SolveStatus::Optimal);
  CHECK(out.x(d) == doctest::Approx(3.0).epsilon(1e-5));  // push e to its cap
  CHECK(out.x(u) == doctest::Approx(27.0).epsilon(1e-4));
  CHECK(out.x(d) + out.x(e) == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("small SDP with diagonal cap") {
  // min tr(S) s.t. tr(S Q) >= 1, diag <= 1, S psd; Q = qq^H rank one.
  // Optimal S aligns with q: S = qq^H/(q^H Q q) scaled; value 1/||q||^2... use
  // a grid-free check: optimal objective = 1/lambda_max(Q).
  ConicProgram prog;
  const int blk = prog.add_hermitian_block(3);
  prog.add_psd(blk);
  Eigen::VectorXcd q(3);
  q << std::complex<double>(1.0, 0.2), std::complex<double>(-0.4, 0.7),
      std::complex<double>(0.3, -0.1);
  const Eigen::MatrixXcd Q = q * q.adjoint();
  LinExpr tr_sq = prog.trace_term(blk, Q);
  tr_sq *= -1.0;
  prog.add_lin_le(std::move(tr_sq), -1.0, true);  // tr(SQ) >= 1
  for (int m = 0; m < 3; m++) {
    Eigen::MatrixXcd E = Eigen::MatrixXcd::Zero(3, 3);
    E(m, m) = 1.0;
    prog.add_lin_le(prog.trace_term(blk, E), 1.0);
  }
  prog.set_objective(prog.trace_term(blk, Eigen::MatrixXcd::Identity(3, 3)));
  const auto out = conic::solve(prog, SolverSettings{});
  REQUIRE(out.status == SolveStatus::Optimal);
  const double expect = 1.0 / q.squaredNorm();
  CHECK(out.objective == doctest::Approx(expect).epsilon(1e-5));
  const Eigen::MatrixXcd S = out.block_matrix(prog, blk);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(S);
  CHECK(eig.eigenvalues().minCoeff() > -1e-9);
}

TEST_CASE("program dump is deterministic and labeled") {
  ConicProgram prog;
  const int x = prog.add_var(0.0, 2.0);
  prog.set_objective(LinExpr::var(x));
  prog.add_lin_le(LinExpr::var(x), 1.5);
  std::ostringstream a, b;
  prog.dump(a);
  prog.dump(b);
  CHECK(a.str() == b.str());
  CHECK(a.str().find("conicprogram") == 0);
  CHECK(a.str().find("le ") != std::string::npos);
}
