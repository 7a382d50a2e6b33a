#include "rmsmtc/params.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace rmsmtc {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

struct KvConfig {
  std::map<std::string, std::string> kv;
  mutable std::map<std::string, bool> used;

  bool has(const std::string& key) const { return kv.count(key) > 0; }

  std::string raw(const std::string& key) const {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("missing key: " + key);
    used[key] = true;
    return it->second;
  }

  double number(const std::string& key) const {
    const std::string v = raw(key);
    try {
      std::size_t pos = 0;
      double x = std::stod(v, &pos);
      while (pos < v.size() && std::isspace(static_cast<unsigned char>(v[pos]))) pos++;
      if (pos != v.size()) throw std::invalid_argument("trailing");
      return x;
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "': cannot parse number from '" + v + "'");
    }
  }

  std::vector<double> numbers(const std::string& key) const {
    const std::string v = raw(key);
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      try {
        out.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': cannot parse list entry '" + item + "'");
      }
    }
    if (out.empty()) throw ConfigError("key '" + key + "': empty list");
    return out;
  }
};

KvConfig parse_kv(const std::string& text) {
  KvConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    lineno++;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (!val.empty() && (val.front() == '"' || val.front() == '\'') &&
        val.size() >= 2 && val.back() == val.front())
      val = val.substr(1, val.size() - 2);
    if (cfg.kv.count(key)) throw ConfigError("duplicate key: " + key);
    cfg.kv[key] = val;
  }
  return cfg;
}

void require_positive(double x, const char* name) {
  if (!(x > 0.0) || !std::isfinite(x))
    throw ConfigError(std::string("invariant violation: ") + name + " must be > 0");
}

}  // namespace

void SystemParams::validate() const {
  if (K < 1) throw ConfigError("invariant violation: k must be >= 1");
  if (N < 1) throw ConfigError("invariant violation: n must be >= 1");
  if (Mc < 1 || Mr < 1) throw ConfigError("invariant violation: mc*mr must be >= 1");
  require_positive(W, "w");
  require_positive(T, "t");
  require_positive(sigma2, "sigma2");
  require_positive(delta2, "delta2");
  require_positive(c_t, "c_t");
  require_positive(c_r, "c_r");
  require_positive(c_m, "c_m");
  require_positive(alpha_t, "alpha_t");
  require_positive(alpha_r, "alpha_r");
  require_positive(P_t_max, "p_t_max");
  require_positive(P_r_max, "p_r_max");
  require_positive(f_t_max, "f_t_max");
  require_positive(f_r_max, "f_r_max");
  require_positive(f_m_max, "f_m_max");
  require_positive(f_c, "f_c");
  require_positive(C0, "c0");
  require_positive(kappa1, "kappa1");
  require_positive(kappa2, "kappa2");
  require_positive(user_radius, "user_radius");
  require_positive(dc, "dc");
  require_positive(dr, "dr");
  require_positive(rho, "rho");
  require_positive(r_feed, "r_feed");
  require_positive(epsilon, "epsilon");
  require_positive(epsilon_rank, "epsilon_rank");
  if (static_cast<int>(D.size()) != K)
    throw ConfigError("invariant violation: d must list one demand per user (k entries)");
  for (double d : D) require_positive(d, "d");
}

SystemParams default_paper_params() {
  SystemParams p;
  p.D.assign(static_cast<std::size_t>(p.K), 1e6);
  p.validate();
  return p;
}

Scenario load_params(const std::string& config_text) {
  const KvConfig cfg = parse_kv(config_text);
  SystemParams p = default_paper_params();

  auto get = [&](const char* key, double& field) {
    if (cfg.has(key)) field = cfg.number(key);
  };
  auto get_int = [&](const char* key, int& field) {
    if (cfg.has(key)) field = static_cast<int>(std::llround(cfg.number(key)));
  };

  get_int("k", p.K);
  get_int("n", p.N);
  if (p.K < 1) throw ConfigError("invariant violation: k must be >= 1");
  if (p.N < 1) throw ConfigError("invariant violation: n must be >= 1");

  // element grid: either mc/mr, or m with mc = mr = ceil(sqrt(m))
  if (cfg.has("m")) {
    const int M = static_cast<int>(std::llround(cfg.number("m")));
    const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(M))));
    if (side * side != M)
      throw ConfigError("key 'm': " + std::to_string(M) +
                        " is not a perfect square; give mc and mr explicitly");
    p.Mc = p.Mr = side;
  }
  get_int("mc", p.Mc);
  get_int("mr", p.Mr);

  get("w", p.W);
  get("t", p.T);

  if (cfg.has("sigma2") && cfg.has("sigma2_dbm"))
    throw ConfigError("give either sigma2 or sigma2_dbm, not both");
  if (cfg.has("sigma2_dbm")) p.sigma2 = dbm_to_watt(cfg.number("sigma2_dbm"));
  get("sigma2", p.sigma2);

  bool delta_given = cfg.has("delta2") || cfg.has("delta2_dbm");
  if (cfg.has("delta2") && cfg.has("delta2_dbm"))
    throw ConfigError("give either delta2 or delta2_dbm, not both");
  if (cfg.has("delta2_dbm")) p.delta2 = dbm_to_watt(cfg.number("delta2_dbm"));
  get("delta2", p.delta2);
  if (!delta_given) p.delta2 = p.sigma2;  // both model receiver thermal noise

  get("c_t", p.c_t);
  get("c_r", p.c_r);
  get("c_m", p.c_m);
  get("alpha_t", p.alpha_t);
  get("alpha_r", p.alpha_r);

  if (cfg.has("p_max_dbm")) p.P_t_max = p.P_r_max = dbm_to_watt(cfg.number("p_max_dbm"));
  if (cfg.has("p_t_max_dbm")) p.P_t_max = dbm_to_watt(cfg.number("p_t_max_dbm"));
  if (cfg.has("p_r_max_dbm")) p.P_r_max = dbm_to_watt(cfg.number("p_r_max_dbm"));
  get("p_t_max", p.P_t_max);
  get("p_r_max", p.P_r_max);

  get("f_t_max", p.f_t_max);
  get("f_r_max", p.f_r_max);
  get("f_m_max", p.f_m_max);
  get("f_c", p.f_c);
  get("nu", p.nu);
  get("alpha_pl", p.alpha_pl);

  if (cfg.has("c0_db")) p.C0 = db_to_linear(cfg.number("c0_db"));
  get("c0", p.C0);

  if (cfg.has("kappa_db")) p.kappa1 = p.kappa2 = db_to_linear(cfg.number("kappa_db"));
  if (cfg.has("kappa1_db")) p.kappa1 = db_to_linear(cfg.number("kappa1_db"));
  if (cfg.has("kappa2_db")) p.kappa2 = db_to_linear(cfg.number("kappa2_db"));
  get("kappa1", p.kappa1);
  get("kappa2", p.kappa2);

  auto get_pos = [&](const char* key, std::array<double, 3>& pos) {
    if (!cfg.has(key)) return;
    auto v = cfg.numbers(key);
    if (v.size() != 3) throw ConfigError(std::string("key '") + key + "': expected x,y,z");
    pos = {v[0], v[1], v[2]};
  };
  get_pos("rms_pos", p.rms_pos);
  get_pos("relay_pos", p.relay_pos);
  get("user_radius", p.user_radius);

  // half-wavelength spacing tracks f_c unless given explicitly
  p.dc = p.dr = 299792458.0 / (2.0 * p.f_c);
  get("dc", p.dc);
  get("dr", p.dr);
  get("rho", p.rho);
  get("r_feed", p.r_feed);

  if (cfg.has("d")) {
    auto v = cfg.numbers("d");
    if (v.size() == 1)
      p.D.assign(static_cast<std::size_t>(p.K), v[0]);
    else if (static_cast<int>(v.size()) == p.K)
      p.D = v;
    else
      throw ConfigError("key 'd': expected 1 or k entries, got " + std::to_string(v.size()));
  } else {
    p.D.assign(static_cast<std::size_t>(p.K), p.D.empty() ? 1e6 : p.D[0]);
  }

  get("epsilon", p.epsilon);
  get("epsilon_rank", p.epsilon_rank);
  if (cfg.has("seed")) p.seed = static_cast<std::uint64_t>(cfg.number("seed"));

  RunSettings s;
  if (cfg.has("max_outer")) s.max_outer = static_cast<int>(cfg.number("max_outer"));
  if (cfg.has("sca_max_iters")) s.sca_max_iters = static_cast<int>(cfg.number("sca_max_iters"));
  if (cfg.has("dc_max_iters")) s.dc_max_iters = static_cast<int>(cfg.number("dc_max_iters"));
  if (cfg.has("sca_tol")) s.sca_tol = cfg.number("sca_tol");
  if (cfg.has("tol_gap")) s.tol_gap = cfg.number("tol_gap");
  if (cfg.has("tol_feas")) s.tol_feas = cfg.number("tol_feas");
  if (cfg.has("workers")) s.workers = static_cast<int>(cfg.number("workers"));

  for (const auto& [key, value] : cfg.kv) {
    (void)value;
    if (!cfg.used.count(key)) throw ConfigError("unknown key: " + key);
  }

  p.validate();
  return Scenario{p, s};
}

Scenario load_params_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_params(ss.str());
}

Topology generate_topology(const SystemParams& params) {
  params.validate();
  CounterRng rng(params.seed);

  Topology topo;
  topo.user_positions.resize(params.K, 3);
  topo.d_k.resize(params.K);

  const Eigen::Vector3d relay(params.relay_pos[0], params.relay_pos[1], params.relay_pos[2]);
  const Eigen::Vector3d rms(params.rms_pos[0], params.rms_pos[1], params.rms_pos[2]);

  for (int k = 0; k < params.K; k++) {
    const double u1 = rng.uniform(CounterRng::kUserPosition, static_cast<std::uint64_t>(k), 0, 0);
    const double u2 = rng.uniform(CounterRng::kUserPosition, static_cast<std::uint64_t>(k), 0, 1);
    const double r = params.user_radius * std::sqrt(u1);
    const double th = 2.0 * M_PI * u2;
    Eigen::Vector3d pos(r * std::cos(th), r * std::sin(th), 0.0);
    topo.user_positions.row(k) = pos.transpose();
    topo.d_k(k) = (pos - relay).norm();
  }

  topo.d_relay_rms = (relay - rms).norm();
  topo.r_hat = params.r_feed;

  // AoA of the relay signal at the RMS: polar angle from the z axis and
  // azimuth in the xy plane of the RMS->relay direction.
  const Eigen::Vector3d dir = (relay - rms).normalized();
  topo.aoa_phi = std::acos(std::clamp(dir.z(), -1.0, 1.0));
  topo.aoa_psi = std::atan2(dir.y(), dir.x());
  return topo;
}

}  // namespace rmsmtc
