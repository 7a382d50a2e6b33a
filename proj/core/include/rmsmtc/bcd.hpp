#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rmsmtc/channel.hpp"
#include "rmsmtc/conic.hpp"
#include "rmsmtc/params.hpp"
#include "rmsmtc/sysmodel.hpp"

namespace rmsmtc {

struct BcdSettings {
  double epsilon = 1e-3;       // outer fractional-decrease threshold
  double epsilon_rank = 1e-3;  // rank-one gap tolerance
  int max_outer = 50;
  int sca_max_iters = 30;
  int dc_max_iters = 30;
  double sca_tol = 1e-4;
  double tol_feas = 1e-6;
  conic::SolverSettings conic;

  static BcdSettings from(const SystemParams& p, const RunSettings& s) {
    BcdSettings b;
    b.epsilon = p.epsilon;
    b.epsilon_rank = p.epsilon_rank;
    b.max_outer = s.max_outer;
    b.sca_max_iters = s.sca_max_iters;
    b.dc_max_iters = s.dc_max_iters;
    b.sca_tol = s.sca_tol;
    b.tol_feas = s.tol_feas;
    b.conic.tol_gap = s.tol_gap;
    return b;
  }
};

// Feature flags that carve the comparison schemes out of one pipeline.
struct PipelineOptions {
  bool enable_cn_leg = true;   // relay computing: d_r, slot I
  bool enable_mec_leg = true;  // MEC computing: d_m, slots II-IV
  bool optimize_phase = true;  // run subproblem 3
  bool use_sdr_phase = false;  // subproblem 3 via SDR + randomization
  bool round_shares = true;    // restore binary subcarrier ownership
  bool single_pass = false;    // one outer iteration, no alternation
};

struct SubproblemLog {
  int outer = 0;
  std::string block;
  conic::SolveStatus status = conic::SolveStatus::NumericalLimit;
  double objective_after = 0.0;
  bool accepted = false;
  std::string note;
};

struct BcdState {
  Allocation alloc;
  int iterations = 0;
  std::vector<double> trace;  // objective per outer iteration, trace[0] = initial
  std::vector<SubproblemLog> log;
  bool converged = false;
  bool feasible = false;
};

// Constructive feasible start; throws ScenarioInfeasible when the demanded
// bits cannot be scheduled with the initial resource split.
Allocation init_point(const SystemParams& params, const ChannelSet& ch,
                      const PipelineOptions& opts = {});

struct P2Result {
  bool ok = false;
  Eigen::MatrixXd A_shares, B_shares;  // relaxed shares in [0,1]
  Eigen::MatrixXd P1_aux, P2_aux, P3_aux;  // auxiliary powers p~ = a .* p
  double transmit_energy = 0.0;
  std::string message;
};

// Subproblem 1: joint relaxed subcarrier shares and transmit powers for fixed
// split/slots/transmissive vector.
P2Result solve_p2(const SystemParams& params, const ChannelSet& ch,
                  const Allocation& fixed, const BcdSettings& settings,
                  const PipelineOptions& opts = {});

// argmax restoration of binary ownership per subcarrier; ties to the lowest
// user index, all-zero columns stay unassigned.
void round_subcarriers(const Eigen::MatrixXd& A_shares, const Eigen::MatrixXd& B_shares,
                       Eigen::MatrixXd& A, Eigen::MatrixXd& B);

struct RepairResult {
  bool ok = false;
  Eigen::MatrixXd P1, P2, P3;  // actual per-carrier powers
  std::string message;
};

// Power re-fit with shares frozen (binary after rounding, or fractional);
// also used to refresh powers after a transmissive-vector update.
RepairResult repair_powers_after_rounding(const SystemParams& params,
                                          const ChannelSet& ch,
                                          const Eigen::MatrixXd& A,
                                          const Eigen::MatrixXd& B,
                                          const Allocation& fixed,
                                          const BcdSettings& settings,
                                          const PipelineOptions& opts = {});

struct P3Result {
  bool ok = false;
  Eigen::VectorXd d_l, d_r, d_m, t1, t2, t3, t4;
  std::vector<double> inner_trace;  // SCA objective per inner iteration
  int repairs = 0;                  // post-verification tightenings
  std::string message;
};

// Subproblem 2: task split and slot durations by SCA for fixed shares,
// powers, and transmissive vector.
P3Result solve_p3_sca(const SystemParams& params, const ChannelSet& ch,
                      const Allocation& fixed, const BcdSettings& settings,
                      const PipelineOptions& opts = {});

struct P4Result {
  bool ok = false;
  Eigen::MatrixXcd S;
  Eigen::VectorXcd s;
  double rank_gap = 0.0;
  std::vector<double> dc_trace;  // tr(S) - ||S||_2 per DC iteration
  std::string message;
};

// Subproblem 3: transmissive covariance by DC programming over the lifted
// SDP, then rank-one extraction.
P4Result solve_p4_dc(const SystemParams& params, const ChannelSet& ch,
                     const Allocation& fixed, const BcdSettings& settings);

// SDR variant: drop the rank-one handling, solve the max-slack relaxation,
// recover s by Gaussian randomization (plus the leading-eigenvector
// candidate). draws failed to produce a feasible candidate => ok=false.
P4Result solve_p4_sdr(const SystemParams& params, const ChannelSet& ch,
                      const Allocation& fixed, const BcdSettings& settings,
                      int randomization_draws = 200);

// s = sqrt(lambda_max) * u_max with per-element magnitude clipped to 1.
Eigen::VectorXcd extract_rank_one(const Eigen::MatrixXcd& S);

BcdState run_bcd(const SystemParams& params, const ChannelSet& ch,
                 const BcdSettings& settings, const PipelineOptions& opts = {});

// Largest uniform per-user demand schedulable by the pipeline, by bisection
// at relative tolerance 1e-2. The local-only restriction is analytic.
double capacity_search(const SystemParams& params, const ChannelSet& ch,
                       const BcdSettings& settings, const PipelineOptions& opts = {},
                       bool local_only = false);

}  // namespace rmsmtc
