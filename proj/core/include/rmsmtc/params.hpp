#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rmsmtc/rng.hpp"

namespace rmsmtc {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double dbm_to_watt(double dbm) { return std::pow(10.0, dbm / 10.0) * 1e-3; }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when the demanded task bits cannot be scheduled at all.
struct ScenarioInfeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// All quantities in SI linear units. dB/dBm conversion happens exactly once,
// when a config file is loaded.
struct SystemParams {
  int K = 5;   // task nodes
  int N = 20;  // subcarriers
  int Mc = 5;  // RMS elements per column direction
  int Mr = 5;  // RMS elements per row direction

  double W = 1e6;        // per-subcarrier bandwidth, Hz
  double T = 1.0;        // time duration, s
  double sigma2 = 1e-10; // relay noise power, W
  double delta2 = 1e-10; // feed-antenna noise power, W

  double c_t = 1e3;  // CPU cycles per bit, task node
  double c_r = 1e3;  // CPU cycles per bit, computing node
  double c_m = 1e3;  // CPU cycles per bit, MEC server
  double alpha_t = 1e-27;
  double alpha_r = 0.3e-27;

  double P_t_max = 10.0;  // W
  double P_r_max = 10.0;  // W
  double f_t_max = 2e9;   // Hz
  double f_r_max = 3e9;   // Hz
  double f_m_max = 5e9;   // Hz

  double f_c = 3e9;      // carrier frequency, Hz
  double nu = 3.0;       // path-loss exponent, TN -> relay
  double alpha_pl = 3.0; // path-loss exponent, relay -> RMS
  double C0 = 1e-3;      // reference path gain at 1 m, linear
  double kappa1 = 1.9952623149688795; // 3 dB, linear
  double kappa2 = 1.9952623149688795;

  std::array<double, 3> rms_pos = {0.0, 0.0, 10.0};
  std::array<double, 3> relay_pos = {25.0, 25.0, 10.0};
  double user_radius = 50.0;

  double dc = 0.04996540966666667;  // element column spacing, m (lambda/2 at 3 GHz)
  double dr = 0.04996540966666667;  // element row spacing, m
  double rho = 1.0;     // near-field gain magnitude
  double r_feed = 1.0;  // RMS-center-to-feed distance, m

  std::vector<double> D;  // demanded task bits per user (size K)

  double epsilon = 1e-3;       // BCD convergence threshold
  double epsilon_rank = 1e-3;  // rank-one gap tolerance
  std::uint64_t seed = 1;

  int M() const { return Mc * Mr; }
  void validate() const;  // throws ConfigError naming the offending field
};

// Knobs for the optimization pipeline; parsed from the same config file.
struct RunSettings {
  int max_outer = 50;
  int sca_max_iters = 30;
  int dc_max_iters = 30;
  double sca_tol = 1e-4;
  double tol_gap = 1e-8;   // conic solver duality-gap target
  double tol_feas = 1e-6;  // allocation feasibility tolerance (relative)
  int workers = 0;         // 0 => hardware concurrency
};

struct Scenario {
  SystemParams params;
  RunSettings settings;
};

struct Topology {
  Eigen::Matrix<double, Eigen::Dynamic, 3> user_positions;  // K x 3, m
  Eigen::VectorXd d_k;     // TN-to-relay distances, m
  double d_relay_rms = 0;  // m
  double r_hat = 0;        // RMS center to feed antenna, m
  double aoa_phi = 0;      // vertical AoA at RMS, rad
  double aoa_psi = 0;      // horizontal AoA at RMS, rad
};

// Flat key = value text, '#' comments. dB-suffixed keys (sigma2_dbm, c0_db,
// kappa_db, p_max_dbm, ...) are converted on load.
Scenario load_params(const std::string& config_text);
Scenario load_params_file(const std::string& path);

SystemParams default_paper_params();

Topology generate_topology(const SystemParams& params);

}  // namespace rmsmtc
