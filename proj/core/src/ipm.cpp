#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "rmsmtc/conic.hpp"

// Barrier path-following over {linear, exponential-cone, power-cone, log-det}
// barrier terms. Two linear-algebra paths:
//   * dense: full Hessian, linear equalities eliminated through a kernel
//     basis (used for small programs);
//   * grouped: per-group dense Hessian blocks, cross-group barrier terms
//     folded in by the Woodbury identity, and Hermitian PSD blocks handled
//     with the closed-form log-det Hessian inverse  H^-1[G] = S G S.
// Strict feasibility is restored, when needed, by a phase-I pass that relaxes
// only the rows marked phase1_shiftable.

namespace rmsmtc::conic {

namespace {

struct Row {
  std::vector<std::pair<int, double>> a;
  double b = 0.0;

  double eval(const Eigen::VectorXd& x) const {
    double v = b;
    for (const auto& [i, c] : a) v += c * x(i);
    return v;
  }
};

Row make_row(const LinExpr& e) {
  Row r;
  r.b = e.constant;
  r.a.reserve(e.terms.size());
  for (const auto& [i, c] : e.terms)
    if (c != 0.0) r.a.emplace_back(i, c);
  return r;
}

enum class TK { Lin, Exp, Pow, LogDet };

struct Term {
  TK kind;
  double alpha = 0.0;
  int block = -1;  // LogDet
  int cons_id = -1;
  int nrows = 0;
  std::array<Row, 3> rows;
  // routing (grouped path)
  bool woodbury = false;
  int group = -1;
};

struct SmallEval {
  double value = 0.0;
  Eigen::Vector3d g = Eigen::Vector3d::Zero();
  Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
  bool ok = false;
};

SmallEval eval_lin(double e) {
  SmallEval s;
  const double m = -e;  // margin
  if (!(m > 0.0) || !std::isfinite(m)) return s;
  s.ok = true;
  s.value = -std::log(m);
  s.g(0) = 1.0 / m;
  s.H(0, 0) = 1.0 / (m * m);
  return s;
}

SmallEval eval_exp(double x, double y, double z) {
  SmallEval s;
  if (!(y > 0.0) || !(z > 0.0)) return s;
  const double l = std::log(z / y);
  const double psi = y * l - x;
  if (!(psi > 0.0) || !std::isfinite(psi)) return s;
  s.ok = true;
  s.value = -std::log(psi) - std::log(y) - std::log(z);

  const Eigen::Vector3d dpsi(-1.0, l - 1.0, y / z);
  s.g = -dpsi / psi;
  s.g(1) -= 1.0 / y;
  s.g(2) -= 1.0 / z;

  s.H = dpsi * dpsi.transpose() / (psi * psi);
  s.H(1, 1) += 1.0 / (y * psi) + 1.0 / (y * y);
  s.H(1, 2) += -1.0 / (z * psi);
  s.H(2, 1) += -1.0 / (z * psi);
  s.H(2, 2) += y / (z * z * psi) + 1.0 / (z * z);
  return s;
}

SmallEval eval_pow(double x, double y, double z, double a) {
  SmallEval s;
  if (!(x > 0.0) || !(y > 0.0)) return s;
  const double phi = std::pow(x, 2.0 * a) * std::pow(y, 2.0 - 2.0 * a);
  const double xi = phi - z * z;
  if (!(xi > 0.0) || !std::isfinite(xi)) return s;
  s.ok = true;
  s.value = -std::log(xi) - (1.0 - a) * std::log(x) - a * std::log(y);

  const Eigen::Vector3d dxi(2.0 * a * phi / x, (2.0 - 2.0 * a) * phi / y, -2.0 * z);
  s.g = -dxi / xi;
  s.g(0) -= (1.0 - a) / x;
  s.g(1) -= a / y;

  Eigen::Matrix3d d2xi = Eigen::Matrix3d::Zero();
  d2xi(0, 0) = 2.0 * a * (2.0 * a - 1.0) * phi / (x * x);
  d2xi(0, 1) = d2xi(1, 0) = 2.0 * a * (2.0 - 2.0 * a) * phi / (x * y);
  d2xi(1, 1) = (2.0 - 2.0 * a) * (1.0 - 2.0 * a) * phi / (y * y);
  d2xi(2, 2) = -2.0;

  s.H = dxi * dxi.transpose() / (xi * xi) - d2xi / xi;
  s.H(0, 0) += (1.0 - a) / (x * x);
  s.H(1, 1) += a / (y * y);
  return s;
}

struct PsdState {
  int dim = 0;
  int offset = 0;
  Eigen::MatrixXcd S;     // current block value
  Eigen::MatrixXcd Sinv;  // A = S^-1
  double logdet = 0.0;
  bool pd = false;
};

double barrier_weight(const Term& t, const std::vector<PsdState>& psd) {
  switch (t.kind) {
    case TK::Lin: return 1.0;
    case TK::Exp: return 3.0;
    case TK::Pow: return 3.0;
    case TK::LogDet: return static_cast<double>(psd[static_cast<std::size_t>(t.block)].dim);
  }
  return 1.0;
}

class Ipm {
 public:
  Ipm(const ConicProgram& prog, const SolverSettings& st) : prog_(prog), st_(st) {}

  SolveOutcome run(const StartHint* hint);

 private:
  const ConicProgram& prog_;
  SolverSettings st_;

  int n_ = 0;          // variables, including the phase-I slack when present
  int n_orig_ = 0;
  bool phase1_ = false;
  int s_idx_ = -1;

  std::vector<Term> terms_;
  std::vector<PsdState> psd_;
  std::vector<int> block_group_;  // psd block -> group id

  // grouped path
  bool grouped_ = false;
  int num_groups_ = 0;
  std::vector<std::vector<int>> group_vars_;
  std::vector<int> var_local_;
  std::vector<int> var_group_;
  std::vector<int> group_psd_;  // -1 or block id

  // dense path (equalities)
  Eigen::MatrixXd Aeq_;
  Eigen::VectorXd beq_;
  Eigen::MatrixXd Z_;     // kernel basis over the original variables
  Eigen::MatrixXd Zcur_;  // kernel basis sized for the current phase

  Eigen::VectorXd c_;  // scaled objective
  double c_scale_ = 1.0;
  double m_total_ = 0.0;
  double s_lo_ = -10.0;  // phase-I slack lower bound
  int newton_iters_ = 0;

  void build_terms(bool with_phase1_shift);
  void setup_structure();
  bool domain_value(const Eigen::VectorXd& x, double* phi) const;
  bool derivatives(const Eigen::VectorXd& x, Eigen::VectorXd& g,
                   std::vector<Eigen::MatrixXd>& Hg, Eigen::MatrixXd& Hdense,
                   std::vector<const Term*>& wood) const;
  bool newton_direction(const Eigen::VectorXd& x, const Eigen::VectorXd& gtot,
                        const std::vector<Eigen::MatrixXd>& Hg,
                        const Eigen::MatrixXd& Hdense,
                        const std::vector<const Term*>& wood,
                        Eigen::VectorXd& dir) const;
  // returns lambda^2/2 or a negative value on failure
  double newton_step(double t, const Eigen::VectorXd& c, Eigen::VectorXd& x);
  bool center(double t, const Eigen::VectorXd& c, Eigen::VectorXd& x, double ctol,
              int max_steps, bool phase1_exit);

  Eigen::VectorXd default_start() const;
  void repair_cone_start(Eigen::VectorXd& x) const;
  void project_equalities(Eigen::VectorXd& x) const;
  SolveOutcome finish(SolveStatus status, const Eigen::VectorXd& x, double t,
                      const std::string& msg) const;
  mutable std::vector<int> wood_small_dims_;
};

void Ipm::build_terms(bool with_phase1_shift) {
  terms_.clear();
  psd_.clear();
  block_group_.clear();

  for (const auto& b : prog_.blocks()) {
    PsdState ps;
    ps.dim = b.dim;
    ps.offset = b.offset;
    psd_.push_back(std::move(ps));
  }

  int cid = -1;
  for (const auto& c : prog_.constraints()) {
    cid++;
    Term t;
    t.cons_id = cid;
    switch (c.kind) {
      case ConstraintKind::LinearEq:
        continue;  // handled separately
      case ConstraintKind::LinearIneq: {
        t.kind = TK::Lin;
        t.nrows = 1;
        t.rows[0] = make_row(c.a0);
        if (with_phase1_shift && c.phase1_shiftable)
          t.rows[0].a.emplace_back(s_idx_, -1.0);
        if (t.rows[0].a.empty()) {
          if (t.rows[0].b > 0.0)
            throw std::runtime_error("constant linear constraint is infeasible");
          continue;  // trivially satisfied
        }
        break;
      }
      case ConstraintKind::ExpCone:
        t.kind = TK::Exp;
        t.nrows = 3;
        t.rows = {make_row(c.a0), make_row(c.a1), make_row(c.a2)};
        break;
      case ConstraintKind::PowCone:
        t.kind = TK::Pow;
        t.alpha = c.alpha;
        t.nrows = 3;
        t.rows = {make_row(c.a0), make_row(c.a1), make_row(c.a2)};
        break;
      case ConstraintKind::PsdBlock:
        t.kind = TK::LogDet;
        t.block = c.psd_block;
        break;
    }
    terms_.push_back(std::move(t));
  }

  // variable boxes as linear barrier rows
  for (int i = 0; i < prog_.num_vars(); i++) {
    if (std::isfinite(prog_.lo(i))) {
      Term t;
      t.kind = TK::Lin;
      t.nrows = 1;
      t.rows[0].a.emplace_back(i, -1.0);
      t.rows[0].b = prog_.lo(i);  // lo - x <= 0
      terms_.push_back(std::move(t));
    }
    if (std::isfinite(prog_.hi(i))) {
      Term t;
      t.kind = TK::Lin;
      t.nrows = 1;
      t.rows[0].a.emplace_back(i, 1.0);
      t.rows[0].b = -prog_.hi(i);  // x - hi <= 0
      terms_.push_back(std::move(t));
    }
  }

  if (with_phase1_shift) {
    // box for the slack; scaled to the starting violation so its barrier
    // curvature stays comparable to the rest of the system
    Term t;
    t.kind = TK::Lin;
    t.nrows = 1;
    t.rows[0].a.emplace_back(s_idx_, -1.0);
    t.rows[0].b = s_lo_;  // s >= -s_lo_... row: -s + s_lo_ <= 0
    terms_.push_back(std::move(t));
  }

  m_total_ = 0.0;
  for (const auto& t : terms_) m_total_ += barrier_weight(t, psd_);
}

void Ipm::setup_structure() {
  var_group_.assign(static_cast<std::size_t>(n_), 0);
  for (int i = 0; i < prog_.num_vars(); i++) var_group_[static_cast<std::size_t>(i)] = prog_.group(i);

  int ng = 0;
  for (int g : var_group_) ng = std::max(ng, g + 1);
  if (phase1_) {
    var_group_[static_cast<std::size_t>(s_idx_)] = ng;
    ng++;
  }
  num_groups_ = ng;

  group_vars_.assign(static_cast<std::size_t>(ng), {});
  var_local_.assign(static_cast<std::size_t>(n_), -1);
  for (int i = 0; i < n_; i++) {
    auto& gv = group_vars_[static_cast<std::size_t>(var_group_[static_cast<std::size_t>(i)])];
    var_local_[static_cast<std::size_t>(i)] = static_cast<int>(gv.size());
    gv.push_back(i);
  }

  group_psd_.assign(static_cast<std::size_t>(ng), -1);
  block_group_.assign(psd_.size(), -1);
  for (std::size_t b = 0; b < psd_.size(); b++) {
    const int g = var_group_[static_cast<std::size_t>(psd_[b].offset)];
    group_psd_[static_cast<std::size_t>(g)] = static_cast<int>(b);
    block_group_[b] = g;
  }

  // classify terms
  for (auto& t : terms_) {
    if (t.kind == TK::LogDet) {
      t.group = block_group_[static_cast<std::size_t>(t.block)];
      t.woodbury = false;
      continue;
    }
    int g = -1;
    bool cross = false;
    for (int r = 0; r < t.nrows; r++)
      for (const auto& [i, c] : t.rows[r].a) {
        (void)c;
        const int gi = var_group_[static_cast<std::size_t>(i)];
        if (g == -1) g = gi;
        else if (g != gi) cross = true;
      }
    t.group = g;
    // anything except the log-det itself leaves a PSD group's base Hessian
    const bool touches_psd = (g >= 0 && group_psd_[static_cast<std::size_t>(g)] >= 0);
    t.woodbury = cross || touches_psd;
  }
}

bool Ipm::domain_value(const Eigen::VectorXd& x, double* phi) const {
  double total = 0.0;
  for (const auto& t : terms_) {
    switch (t.kind) {
      case TK::Lin: {
        const double m = -t.rows[0].eval(x);
        if (!(m > 0.0)) return false;
        total -= std::log(m);
        break;
      }
      case TK::Exp: {
        const double xv = t.rows[0].eval(x), yv = t.rows[1].eval(x), zv = t.rows[2].eval(x);
        if (!(yv > 0.0) || !(zv > 0.0)) return false;
        const double psi = yv * std::log(zv / yv) - xv;
        if (!(psi > 0.0)) return false;
        total += -std::log(psi) - std::log(yv) - std::log(zv);
        break;
      }
      case TK::Pow: {
        const double xv = t.rows[0].eval(x), yv = t.rows[1].eval(x), zv = t.rows[2].eval(x);
        if (!(xv > 0.0) || !(yv > 0.0)) return false;
        const double xi =
            std::pow(xv, 2.0 * t.alpha) * std::pow(yv, 2.0 - 2.0 * t.alpha) - zv * zv;
        if (!(xi > 0.0)) return false;
        total += -std::log(xi) - (1.0 - t.alpha) * std::log(xv) - t.alpha * std::log(yv);
        break;
      }
      case TK::LogDet: {
        const PsdState& ps = psd_[static_cast<std::size_t>(t.block)];
        const Eigen::MatrixXcd S = hermitian_from_coords(
            ps.dim, x.segment(ps.offset, hermitian_coord_count(ps.dim)));
        Eigen::LLT<Eigen::MatrixXcd> llt(S);
        if (llt.info() != Eigen::Success) return false;
        double ld = 0.0;
        for (int i = 0; i < ps.dim; i++) ld += std::log(llt.matrixL()(i, i).real());
        total += -2.0 * ld;
        break;
      }
    }
    if (!std::isfinite(total)) return false;
  }
  if (phi) *phi = total;
  return true;
}

bool Ipm::derivatives(const Eigen::VectorXd& x, Eigen::VectorXd& g,
                      std::vector<Eigen::MatrixXd>& Hg, Eigen::MatrixXd& Hdense,
                      std::vector<const Term*>& wood) const {
  g.setZero(n_);
  wood.clear();

  const bool dense = !grouped_;
  if (dense) {
    Hdense.setZero(n_, n_);
  } else {
    for (int gi = 0; gi < num_groups_; gi++) {
      if (group_psd_[static_cast<std::size_t>(gi)] >= 0) continue;
      const int ng = static_cast<int>(group_vars_[static_cast<std::size_t>(gi)].size());
      Hg[static_cast<std::size_t>(gi)].setZero(ng, ng);
    }
  }

  for (const auto& t : terms_) {
    if (t.kind == TK::LogDet) {
      PsdState& ps = const_cast<PsdState&>(psd_[static_cast<std::size_t>(t.block)]);
      ps.S = hermitian_from_coords(ps.dim, x.segment(ps.offset, hermitian_coord_count(ps.dim)));
      Eigen::LLT<Eigen::MatrixXcd> llt(ps.S);
      if (llt.info() != Eigen::Success) return false;
      Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(ps.dim, ps.dim);
      ps.Sinv = llt.solve(I);
      ps.pd = true;
      const Eigen::VectorXd ga = hermitian_coords(ps.Sinv);
      g.segment(ps.offset, ga.size()) -= ga;
      if (dense) {
        // H[i,j] = tr(A E_i A E_j); columns are coords(A E_i A)
        const int nc = hermitian_coord_count(ps.dim);
        for (int i = 0; i < nc; i++) {
          Eigen::VectorXd ei = Eigen::VectorXd::Zero(nc);
          ei(i) = 1.0;
          const Eigen::MatrixXcd Ei = hermitian_from_coords(ps.dim, ei);
          Hdense.block(ps.offset, ps.offset + i, nc, 1) =
              hermitian_coords(ps.Sinv * Ei * ps.Sinv);
        }
      }
      continue;
    }

    SmallEval se;
    double v0 = t.rows[0].eval(x);
    double v1 = t.nrows > 1 ? t.rows[1].eval(x) : 0.0;
    double v2 = t.nrows > 2 ? t.rows[2].eval(x) : 0.0;
    switch (t.kind) {
      case TK::Lin: se = eval_lin(v0); break;
      case TK::Exp: se = eval_exp(v0, v1, v2); break;
      case TK::Pow: se = eval_pow(v0, v1, v2, t.alpha); break;
      default: break;
    }
    if (!se.ok) return false;

    for (int r = 0; r < t.nrows; r++)
      for (const auto& [i, c] : t.rows[r].a) g(i) += se.g(r) * c;

    if (dense) {
      for (int r = 0; r < t.nrows; r++)
        for (int q = 0; q < t.nrows; q++) {
          const double h = se.H(r, q);
          if (h == 0.0) continue;
          for (const auto& [i, ci] : t.rows[r].a)
            for (const auto& [j, cj] : t.rows[q].a) Hdense(i, j) += h * ci * cj;
        }
    } else if (!t.woodbury) {
      Eigen::MatrixXd& HB = Hg[static_cast<std::size_t>(t.group)];
      for (int r = 0; r < t.nrows; r++)
        for (int q = 0; q < t.nrows; q++) {
          const double h = se.H(r, q);
          if (h == 0.0) continue;
          for (const auto& [i, ci] : t.rows[r].a)
            for (const auto& [j, cj] : t.rows[q].a)
              HB(var_local_[static_cast<std::size_t>(i)],
                 var_local_[static_cast<std::size_t>(j)]) += h * ci * cj;
        }
    } else {
      wood.push_back(&t);
    }
  }
  return true;
}

bool Ipm::newton_direction(const Eigen::VectorXd& x, const Eigen::VectorXd& gtot,
                           const std::vector<Eigen::MatrixXd>& Hg,
                           const Eigen::MatrixXd& Hdense,
                           const std::vector<const Term*>& wood,
                           Eigen::VectorXd& dir) const {
  if (!grouped_) {
    // reduced Newton system on the equality kernel
    const Eigen::MatrixXd& Z = Zcur_;
    Eigen::MatrixXd Hr = Z.transpose() * Hdense * Z;
    Eigen::VectorXd gr = Z.transpose() * gtot;
    double reg = 0.0;
    for (int tries = 0; tries < 6; tries++) {
      Eigen::LLT<Eigen::MatrixXd> llt(Hr);
      if (llt.info() == Eigen::Success) {
        dir = -Z * llt.solve(gr);
        return true;
      }
      reg = (reg == 0.0) ? 1e-12 * (1.0 + Hr.diagonal().cwiseAbs().maxCoeff()) : reg * 100.0;
      Hr += reg * Eigen::MatrixXd::Identity(Hr.rows(), Hr.cols());
    }
    return false;
  }

  // factor the non-PSD group blocks
  std::vector<Eigen::LLT<Eigen::MatrixXd>> chol(static_cast<std::size_t>(num_groups_));
  std::vector<Eigen::MatrixXd> Hreg(static_cast<std::size_t>(num_groups_));
  for (int gi = 0; gi < num_groups_; gi++) {
    if (group_psd_[static_cast<std::size_t>(gi)] >= 0) continue;
    Eigen::MatrixXd H = Hg[static_cast<std::size_t>(gi)];
    double reg = 0.0;
    for (int tries = 0;; tries++) {
      chol[static_cast<std::size_t>(gi)].compute(H);
      if (chol[static_cast<std::size_t>(gi)].info() == Eigen::Success) break;
      if (tries >= 6) return false;
      reg = (reg == 0.0) ? 1e-12 * (1.0 + H.diagonal().cwiseAbs().maxCoeff()) : reg * 100.0;
      H += reg * Eigen::MatrixXd::Identity(H.rows(), H.cols());
    }
  }

  auto base_solve = [&](const Eigen::VectorXd& r) -> Eigen::VectorXd {
    Eigen::VectorXd out(n_);
    for (int gi = 0; gi < num_groups_; gi++) {
      const auto& vars = group_vars_[static_cast<std::size_t>(gi)];
      const int psd_b = group_psd_[static_cast<std::size_t>(gi)];
      if (psd_b < 0) {
        Eigen::VectorXd rl(vars.size());
        for (std::size_t i = 0; i < vars.size(); i++) rl(static_cast<int>(i)) = r(vars[i]);
        Eigen::VectorXd sl = chol[static_cast<std::size_t>(gi)].solve(rl);
        for (std::size_t i = 0; i < vars.size(); i++) out(vars[i]) = sl(static_cast<int>(i));
      } else {
        const PsdState& ps = psd_[static_cast<std::size_t>(psd_b)];
        const int nc = hermitian_coord_count(ps.dim);
        const Eigen::MatrixXcd G = hermitian_from_coords(ps.dim, r.segment(ps.offset, nc));
        out.segment(ps.offset, nc) = hermitian_coords(ps.S * G * ps.S);
      }
    }
    return out;
  };

  // Woodbury columns
  int q = 0;
  wood_small_dims_.clear();
  for (const Term* t : wood) {
    wood_small_dims_.push_back(t->nrows);
    q += t->nrows;
  }

  auto base_apply = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    // K * v, for iterative refinement
    Eigen::VectorXd out(n_);
    for (int gi = 0; gi < num_groups_; gi++) {
      const auto& vars = group_vars_[static_cast<std::size_t>(gi)];
      const int psd_b = group_psd_[static_cast<std::size_t>(gi)];
      if (psd_b < 0) {
        Eigen::VectorXd vl(vars.size());
        for (std::size_t i = 0; i < vars.size(); i++) vl(static_cast<int>(i)) = v(vars[i]);
        const Eigen::VectorXd hl = Hg[static_cast<std::size_t>(gi)] * vl;
        for (std::size_t i = 0; i < vars.size(); i++) out(vars[i]) = hl(static_cast<int>(i));
      } else {
        const PsdState& ps = psd_[static_cast<std::size_t>(psd_b)];
        const int nc = hermitian_coord_count(ps.dim);
        const Eigen::MatrixXcd G = hermitian_from_coords(ps.dim, v.segment(ps.offset, nc));
        out.segment(ps.offset, nc) = hermitian_coords(ps.Sinv * G * ps.Sinv);
      }
    }
    return out;
  };

  if (q == 0) {
    dir = -base_solve(gtot);
    return true;
  }

  // Absorb each small barrier Hessian B = V L V^T into the columns:
  // H = K + Ut Ut^T with Ut = (rows^T) V L^(1/2). The capacitance matrix
  // I + Ut^T K^-1 Ut is then symmetric positive definite by construction,
  // immune to near-singular B blocks.
  Eigen::MatrixXd Ut(n_, q);
  int qt = 0;
  for (const Term* t : wood) {
    SmallEval se;
    const double v0 = t->rows[0].eval(x);
    const double v1 = t->nrows > 1 ? t->rows[1].eval(x) : 0.0;
    const double v2 = t->nrows > 2 ? t->rows[2].eval(x) : 0.0;
    switch (t->kind) {
      case TK::Lin: se = eval_lin(v0); break;
      case TK::Exp: se = eval_exp(v0, v1, v2); break;
      case TK::Pow: se = eval_pow(v0, v1, v2, t->alpha); break;
      default: break;
    }
    if (!se.ok) return false;
    const int k = t->nrows;
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(k, n_);
    for (int r = 0; r < k; r++)
      for (const auto& [i, c] : t->rows[r].a) J(r, i) += c;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(se.H.topLeftCorner(k, k));
    const double lmax = eig.eigenvalues().cwiseAbs().maxCoeff();
    for (int r = 0; r < k; r++) {
      const double lam = eig.eigenvalues()(r);
      if (lam <= 1e-14 * lmax) continue;  // drop numerically null directions
      Ut.col(qt++) = std::sqrt(lam) * (J.transpose() * eig.eigenvectors().col(r));
    }
  }
  if (qt == 0) {
    dir = -base_solve(gtot);
    return true;
  }
  const auto U = Ut.leftCols(qt);

  auto wood_apply = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return U * (U.transpose() * v);
  };

  Eigen::MatrixXd KU(n_, qt);
  for (int j = 0; j < qt; j++) KU.col(j) = base_solve(U.col(j));
  Eigen::MatrixXd cap = Eigen::MatrixXd::Identity(qt, qt) + U.transpose() * KU;
  Eigen::LLT<Eigen::MatrixXd> capF(cap);
  if (capF.info() != Eigen::Success) return false;

  auto full_solve = [&](const Eigen::VectorXd& rhs) -> Eigen::VectorXd {
    const Eigen::VectorXd Kr = base_solve(rhs);
    return Kr - KU * capF.solve(U.transpose() * Kr);
  };

  Eigen::VectorXd sol = full_solve(gtot);
  // a couple of refinement sweeps recover accuracy near the central-path end
  for (int sweep = 0; sweep < 2; sweep++) {
    const Eigen::VectorXd res = base_apply(sol) + wood_apply(sol) - gtot;
    const double rn = res.norm();
    if (!(rn > 1e-11 * (1.0 + gtot.norm()))) break;
    sol -= full_solve(res);
  }
  dir = -sol;
  return true;
}

double Ipm::newton_step(double t, const Eigen::VectorXd& c, Eigen::VectorXd& x) {
  static thread_local std::vector<Eigen::MatrixXd> Hg;
  static thread_local Eigen::MatrixXd Hdense;
  static thread_local std::vector<const Term*> wood;
  if (grouped_ && Hg.size() != static_cast<std::size_t>(num_groups_))
    Hg.assign(static_cast<std::size_t>(num_groups_), Eigen::MatrixXd());

  Eigen::VectorXd g;
  if (!derivatives(x, g, Hg, Hdense, wood)) return -1.0;
  Eigen::VectorXd gtot = g + t * c;

  Eigen::VectorXd dir;
  if (!newton_direction(x, gtot, Hg, Hdense, wood, dir)) return -1.0;

  const double lambda2 = -gtot.dot(dir);
  static const bool debug = std::getenv("RMSMTC_IPM_DEBUG") != nullptr;
  static const bool check = std::getenv("RMSMTC_IPM_CHECK") != nullptr;
  if (debug)
    std::fprintf(stderr, "  newton t=%.3e lambda2=%.3e |g|=%.3e |d|=%.3e\n", t,
                 lambda2, gtot.norm(), dir.norm());
  if (check && lambda2 < 0.0) {
    // finite-difference probe: H d should match (grad(x+eps*d) - grad(x))/eps
    const double eps = 1e-7 / std::max(1.0, dir.norm());
    Eigen::VectorXd g2;
    Eigen::VectorXd xp = x + eps * dir;
    if (derivatives(xp, g2, Hg, Hdense, wood)) {
      const Eigen::VectorXd Hd_fd = (g2 - g) / eps;
      std::fprintf(stderr,
                   "  CHECK lambda2=%.3e  <d,Hd_fd>=%.6e  -<d,g>=%.6e  (should "
                   "both be ~lambda2)\n",
                   lambda2, dir.dot(Hd_fd), -dir.dot(gtot));
    }
  }
  if (!(lambda2 > -1e-9)) return -1.0;  // direction lost positive definiteness
  if (lambda2 <= 0.0) return 0.0;

  // backtracking: stay in the barrier domain, then Armijo on t*c'x + Phi
  double phi0 = 0.0;
  domain_value(x, &phi0);
  const double f0 = t * c.dot(x) + phi0;
  double alpha = 1.0;
  Eigen::VectorXd xn;
  for (int it = 0;; it++) {
    if (it > 90) return -1.0;
    xn = x + alpha * dir;
    double phin;
    if (domain_value(xn, &phin)) {
      const double fn = t * c.dot(xn) + phin;
      if (fn <= f0 - 0.25 * alpha * lambda2 + 1e-13 * std::abs(f0)) break;
    }
    alpha *= 0.5;
  }
  x = xn;
  newton_iters_++;
  return lambda2 / 2.0;
}

bool Ipm::center(double t, const Eigen::VectorXd& c, Eigen::VectorXd& x, double ctol,
                 int max_steps, bool phase1_exit) {
  for (int it = 0; it < max_steps; it++) {
    if (phase1_exit && x(s_idx_) < -st_.phase1_margin) return true;
    const double dec = newton_step(t, c, x);
    if (dec < 0.0) return false;
    if (dec <= ctol) return true;
    if (newton_iters_ > st_.max_newton) return false;
  }
  return true;  // loosely centered; caller proceeds
}

Eigen::VectorXd Ipm::default_start() const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(prog_.num_vars());
  for (int i = 0; i < prog_.num_vars(); i++) {
    const double lo = prog_.lo(i), hi = prog_.hi(i);
    if (std::isfinite(lo) && std::isfinite(hi)) x(i) = 0.5 * (lo + hi);
    else if (std::isfinite(lo)) x(i) = lo + 1.0;
    else if (std::isfinite(hi)) x(i) = hi - 1.0;
  }
  for (const auto& b : prog_.blocks()) {
    // coords of 0.5*I
    for (int d = 0; d < b.dim; d++) x(b.offset + d) = 0.5;
  }
  return x;
}

// Nudge epigraph-style variables into cone domains: for each violated cone,
// move one variable of the offending argument row inside its box. Covers the
// common shape where the first cone argument carries a dedicated epigraph
// variable; anything it cannot fix is left for phase-I or an error.
void Ipm::repair_cone_start(Eigen::VectorXd& x) const {
  auto adjust = [&x, this](const Row& row, double target) {
    const std::pair<int, double>* pick = nullptr;
    for (const auto& e : row.a)
      if (!pick || std::abs(e.second) > std::abs(pick->second)) pick = &e;
    if (!pick || pick->second == 0.0) return;
    const int i = pick->first;
    double nv = x(i) + (target - row.eval(x)) / pick->second;
    const double lo = i < prog_.num_vars() ? prog_.lo(i) : -kInf;
    const double hi = i < prog_.num_vars() ? prog_.hi(i) : kInf;
    if (std::isfinite(lo)) nv = std::max(nv, lo + 1e-9 * (1.0 + std::abs(lo)));
    if (std::isfinite(hi)) nv = std::min(nv, hi - 1e-9 * (1.0 + std::abs(hi)));
    x(i) = nv;
  };

  for (int pass = 0; pass < 40; pass++) {
    bool all_ok = true;
    for (const auto& t : terms_) {
      if (t.kind == TK::Exp) {
        const double yv = t.rows[1].eval(x), zv = t.rows[2].eval(x);
        if (!(yv > 0.0) || !(zv > 0.0)) {
          all_ok = false;
          if (!(yv > 0.0)) adjust(t.rows[1], 1e-3);
          if (!(t.rows[2].eval(x) > 0.0)) adjust(t.rows[2], 1e-3);
          continue;
        }
        const double cap = yv * std::log(zv / yv);
        const double xv = t.rows[0].eval(x);
        if (!(cap - xv > 0.0)) {
          all_ok = false;
          adjust(t.rows[0], cap - std::max(1e-6, 0.05 * std::abs(cap)));
        }
      } else if (t.kind == TK::Pow) {
        double xv = t.rows[0].eval(x);
        const double yv = t.rows[1].eval(x);
        if (!(xv > 0.0)) {
          all_ok = false;
          adjust(t.rows[0], 1e-6);
          xv = t.rows[0].eval(x);
        }
        if (!(yv > 0.0)) {
          all_ok = false;
          adjust(t.rows[1], 1e-3);
        }
        const double y2 = t.rows[1].eval(x), z2 = t.rows[2].eval(x);
        if (xv > 0.0 && y2 > 0.0) {
          const double need = std::pow(z2 * z2 * 1.1 / std::pow(y2, 2.0 - 2.0 * t.alpha),
                                       1.0 / (2.0 * t.alpha));
          if (xv <= need) {
            all_ok = false;
            adjust(t.rows[0], need + std::max(1e-8, 0.1 * need));
          }
        }
      }
    }
    if (all_ok) break;
  }
}

void Ipm::project_equalities(Eigen::VectorXd& x) const {
  if (Aeq_.rows() == 0) return;
  const Eigen::VectorXd r = beq_ - Aeq_ * x.head(prog_.num_vars());
  if (r.norm() <= 1e-12 * (1.0 + beq_.norm())) return;
  const Eigen::VectorXd corr =
      Aeq_.transpose() * (Aeq_ * Aeq_.transpose()).ldlt().solve(r);
  x.head(prog_.num_vars()) += corr;
}

SolveOutcome Ipm::finish(SolveStatus status, const Eigen::VectorXd& x, double t,
                         const std::string& msg) const {
  SolveOutcome out;
  out.status = status;
  out.x = x.head(prog_.num_vars());
  out.objective = prog_.objective().eval(out.x);
  out.newton_iters = newton_iters_;
  double eq_res = 0.0;
  if (Aeq_.rows() > 0) eq_res = (Aeq_ * out.x - beq_).cwiseAbs().maxCoeff();
  const double obj_scale =
      (c_.size() == x.size()) ? std::max(1.0, std::abs(c_.dot(x))) : 1.0;
  out.kkt_residual = (t > 0.0 ? m_total_ / (t * obj_scale) : 0.0) + eq_res;
  out.message = msg;
  return out;
}

SolveOutcome Ipm::run(const StartHint* hint) {
  n_orig_ = prog_.num_vars();

  // equality rows
  std::vector<const Constraint*> eqs;
  for (const auto& c : prog_.constraints())
    if (c.kind == ConstraintKind::LinearEq) eqs.push_back(&c);
  const bool has_eq = !eqs.empty();
  grouped_ = !has_eq && (prog_.num_groups() > 1 || !prog_.blocks().empty());

  if (has_eq) {
    Aeq_.setZero(static_cast<Eigen::Index>(eqs.size()), n_orig_);
    beq_.setZero(static_cast<Eigen::Index>(eqs.size()));
    for (std::size_t r = 0; r < eqs.size(); r++) {
      for (const auto& [i, c] : eqs[r]->a0.terms) Aeq_(static_cast<Eigen::Index>(r), i) += c;
      beq_(static_cast<Eigen::Index>(r)) = -eqs[r]->a0.constant;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(Aeq_);
    Z_ = lu.kernel();
    if (Z_.cols() == 0) Z_ = Eigen::MatrixXd::Zero(n_orig_, 0);
  } else {
    Aeq_.resize(0, n_orig_);
    beq_.resize(0);
    Z_ = Eigen::MatrixXd::Identity(n_orig_, n_orig_);
  }
  auto set_kernel = [this]() {
    if (grouped_) return;
    if (!phase1_) {
      Zcur_ = Z_;
    } else {
      // phase-I slack is free of the equalities
      Zcur_ = Eigen::MatrixXd::Zero(n_, Z_.cols() + 1);
      Zcur_.topLeftCorner(n_orig_, Z_.cols()) = Z_;
      Zcur_(n_ - 1, Z_.cols()) = 1.0;
    }
  };

  // phase selection
  Eigen::VectorXd x0 = hint ? hint->x0 : default_start();
  if (x0.size() != n_orig_)
    throw std::invalid_argument("start hint has wrong dimension");

  phase1_ = false;
  s_idx_ = -1;
  n_ = n_orig_;
  build_terms(false);
  setup_structure();
  set_kernel();
  project_equalities(x0);

  double phi_probe;
  bool interior = domain_value(x0, &phi_probe);
  if (!interior) {
    repair_cone_start(x0);
    project_equalities(x0);
    interior = domain_value(x0, &phi_probe);
  }

  if (!interior) {
    // check that violations are confined to shiftable linear rows
    phase1_ = true;
    s_idx_ = n_orig_;
    n_ = n_orig_ + 1;

    // required slack at x0
    double viol = 0.0;
    for (const auto& c : prog_.constraints())
      if (c.kind == ConstraintKind::LinearIneq && c.phase1_shiftable)
        viol = std::max(viol, c.a0.eval(x0));
    s_lo_ = -(2.0 * viol + 10.0);

    build_terms(true);
    setup_structure();
    set_kernel();
    Eigen::VectorXd x1(n_);
    x1.head(n_orig_) = x0;
    x1(s_idx_) = viol + std::max(1.0, viol);
    if (!domain_value(x1, &phi_probe)) {
      // shifting more may still fix it when slack interacts with other rows
      x1(s_idx_) = 10.0 * (viol + 1.0);
      if (!domain_value(x1, &phi_probe))
        return finish(SolveStatus::NumericalLimit, x1, 0.0,
                      "start point violates non-relaxable constraints");
    }

    Eigen::VectorXd cp1 = Eigen::VectorXd::Zero(n_);
    cp1(s_idx_) = 1.0;
    double t = 1.0;
    bool found = false;
    for (int stage = 0; stage < 40; stage++) {
      if (!center(t, cp1, x1, 1e-7, 80, /*phase1_exit=*/true))
        return finish(SolveStatus::NumericalLimit, x1, t, "phase-I centering failed");
      if (x1(s_idx_) < -st_.phase1_margin) {
        found = true;
        break;
      }
      if (m_total_ / t < 0.25 * st_.phase1_margin) break;
      t *= st_.mu;
      if (newton_iters_ > st_.max_newton)
        return finish(SolveStatus::NumericalLimit, x1, t, "phase-I iteration limit");
    }
    if (!found) {
      std::ostringstream msg;
      msg << "infeasible: minimal relaxation " << x1(s_idx_) << "; binding rows:";
      for (std::size_t ci = 0; ci < prog_.constraints().size(); ci++) {
        const auto& c = prog_.constraints()[ci];
        if (c.kind == ConstraintKind::LinearIneq && c.phase1_shiftable &&
            c.a0.eval(x1) > -2.0 * std::abs(x1(s_idx_)) - st_.phase1_margin)
          msg << ' ' << ci;
      }
      return finish(SolveStatus::Infeasible, x1, t, msg.str());
    }
    x0 = x1.head(n_orig_);

    // back to the unshifted problem
    phase1_ = false;
    s_idx_ = -1;
    n_ = n_orig_;
    build_terms(false);
    setup_structure();
    set_kernel();
    if (!domain_value(x0, &phi_probe))
      return finish(SolveStatus::NumericalLimit, x0, 0.0, "phase-I result not interior");
  }

  // phase-II
  c_ = Eigen::VectorXd::Zero(n_);
  for (const auto& [i, cf] : prog_.objective().terms) c_(i) += cf;
  c_scale_ = c_.cwiseAbs().maxCoeff();
  if (c_scale_ > 0.0) c_ /= c_scale_;

  Eigen::VectorXd x = x0;
  double t = st_.t0;
  if (c_scale_ == 0.0) {
    if (!center(1.0, c_, x, 1e-7, 200, false))
      return finish(SolveStatus::NumericalLimit, x, 1.0, "centering failed");
    auto out = finish(SolveStatus::Optimal, x, std::numeric_limits<double>::infinity(),
                      "analytic center (no objective)");
    out.kkt_residual = 0.0;
    return out;
  }

  // Stage loop with one geometric-backoff retry per failed stage. Pure primal
  // barriers run out of double precision near rank-deficient optima; when
  // that happens before tol_gap, the best centered iterate is still returned
  // as optimal if it met tol_gap_accept, with the achieved gap reported.
  Eigen::VectorXd x_best = x;
  double t_done = 0.0;  // largest t whose centering completed
  bool retried = false;
  for (int stage = 0; stage < 120; stage++) {
    Eigen::VectorXd x_try = x_best;
    const bool ok = center(t, c_, x_try, 1e-7, 120, false);
    if (ok) {
      x_best = x_try;
      t_done = t;
      const double obj_scale = std::max(1.0, std::abs(c_.dot(x_best)));
      if (m_total_ / t <= st_.tol_gap * obj_scale) {
        auto out = finish(SolveStatus::Optimal, x_best, t, "");
        out.objective = prog_.objective().eval(out.x);
        return out;
      }
      if (x_best.cwiseAbs().maxCoeff() > 1e12)
        return finish(SolveStatus::Unbounded, x_best, t, "iterates diverging");
      if (newton_iters_ > st_.max_newton) break;
      retried = false;
      t *= st_.mu;
      continue;
    }
    if (t_done > 0.0 && !retried) {
      retried = true;
      t = t_done * std::sqrt(st_.mu);  // halve the step in log scale
      continue;
    }
    break;
  }

  const double obj_scale = std::max(1.0, std::abs(c_.dot(x_best)));
  const double achieved = t_done > 0.0 ? m_total_ / (t_done * obj_scale)
                                       : std::numeric_limits<double>::infinity();
  if (achieved <= st_.tol_gap_accept) {
    auto out = finish(SolveStatus::Optimal, x_best, t_done,
                      "stopped at numerical precision floor");
    out.objective = prog_.objective().eval(out.x);
    return out;
  }
  return finish(SolveStatus::NumericalLimit, x_best, std::max(t_done, st_.t0),
                "centering failed before reaching the gap target");
}

}  // namespace

SolveOutcome solve(const ConicProgram& prog, const SolverSettings& settings,
                   const StartHint* hint) {
  Ipm ipm(prog, settings);
  return ipm.run(hint);
}

}  // namespace rmsmtc::conic
