#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rmsmtc::conic {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Sparse affine expression sum_i coeff_i * x_i + constant.
struct LinExpr {
  std::vector<std::pair<int, double>> terms;
  double constant = 0.0;

  LinExpr() = default;
  /* implicit */ LinExpr(double c) : constant(c) {}
  static LinExpr var(int i, double coeff = 1.0) {
    LinExpr e;
    e.terms.emplace_back(i, coeff);
    return e;
  }
  LinExpr& add(int i, double coeff) {
    terms.emplace_back(i, coeff);
    return *this;
  }
  LinExpr& operator+=(const LinExpr& o) {
    terms.insert(terms.end(), o.terms.begin(), o.terms.end());
    constant += o.constant;
    return *this;
  }
  LinExpr& operator*=(double f) {
    for (auto& t : terms) t.second *= f;
    constant *= f;
    return *this;
  }
  double eval(const Eigen::VectorXd& x) const {
    double v = constant;
    for (const auto& [i, c] : terms) v += c * x(i);
    return v;
  }
  bool is_constant() const { return terms.empty(); }
};

enum class ConstraintKind {
  LinearEq,   // expr == 0
  LinearIneq, // expr <= 0
  ExpCone,    // y e^{x/y} <= z  (y > 0)
  PowCone,    // x^alpha y^(1-alpha) >= |z|  (x, y >= 0)
  PsdBlock,   // designated Hermitian block is PSD
};

struct Constraint {
  ConstraintKind kind;
  LinExpr a0, a1, a2;  // LinearEq/Ineq use a0; cones use (x, y, z) = (a0, a1, a2)
  double alpha = 0.0;  // PowCone exponent
  int psd_block = -1;
  bool phase1_shiftable = false;  // may be relaxed during phase-I
};

// Hermitian matrices are carried as real coordinate vectors in an orthonormal
// basis: dim diagonal entries first, then (re, im)*sqrt(2) for each upper
// off-diagonal pair, so tr(X Y) equals the dot product of coordinates.
int hermitian_coord_count(int dim);
Eigen::VectorXd hermitian_coords(const Eigen::MatrixXcd& X);
Eigen::MatrixXcd hermitian_from_coords(int dim, const Eigen::VectorXd& coords);

// Real-symmetric [Re -Im; Im Re] embedding; for Hermitian input the embedded
// spectrum is the doubled Hermitian spectrum.
Eigen::MatrixXd real_embedding(const Eigen::MatrixXcd& A);

struct HermitianBlock {
  int dim = 0;
  int offset = 0;  // first coordinate index in x
};

// Solver-agnostic convex program over scalars plus Hermitian PSD blocks.
// Constraint families are exactly the ones the subproblems need.
class ConicProgram {
 public:
  int add_var(double lo = -kInf, double hi = kInf, int group = 0);
  int num_vars() const { return static_cast<int>(lo_.size()); }

  // appends dim*dim real coordinates; the block lives in its own group
  int add_hermitian_block(int dim);
  const std::vector<HermitianBlock>& blocks() const { return blocks_; }

  void set_objective(LinExpr e) { objective_ = std::move(e); }
  const LinExpr& objective() const { return objective_; }

  int add_lin_eq(LinExpr e, double rhs);
  // e <= rhs
  int add_lin_le(LinExpr e, double rhs, bool phase1_shiftable = false);
  // y e^{x/y} <= z
  int add_exp_cone(LinExpr x, LinExpr y, LinExpr z);
  // x^alpha y^(1-alpha) >= |z|
  int add_pow_cone(LinExpr x, LinExpr y, LinExpr z, double alpha);
  int add_psd(int block);

  // tr(S_block Q) as an affine expression (Q Hermitian)
  LinExpr trace_term(int block, const Eigen::MatrixXcd& Q) const;

  const std::vector<Constraint>& constraints() const { return cons_; }
  double lo(int i) const { return lo_[static_cast<std::size_t>(i)]; }
  double hi(int i) const { return hi_[static_cast<std::size_t>(i)]; }
  int group(int i) const { return group_[static_cast<std::size_t>(i)]; }
  int num_groups() const;

  // sparse text dump for external cross-validation
  void dump(std::ostream& os) const;

 private:
  std::vector<double> lo_, hi_;
  std::vector<int> group_;
  std::vector<HermitianBlock> blocks_;
  std::vector<Constraint> cons_;
  LinExpr objective_;
};

struct SolverSettings {
  double tol_gap = 1e-8;        // relative duality-gap target
  double tol_gap_accept = 1e-6; // still "optimal" if numerics stop progress here
  double tol_feas = 1e-8;       // strict-interior margin checks
  double mu = 20.0;             // barrier stage multiplier
  int max_newton = 800;         // total Newton iterations across stages
  double phase1_margin = 1e-8;  // early-exit slack for phase-I
  double t0 = 1.0;              // initial barrier weight
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, NumericalLimit };

const char* to_string(SolveStatus s);

struct SolveOutcome {
  SolveStatus status = SolveStatus::NumericalLimit;
  Eigen::VectorXd x;
  double objective = 0.0;
  int newton_iters = 0;
  double kkt_residual = 0.0;
  std::string message;

  Eigen::MatrixXcd block_matrix(const ConicProgram& prog, int block) const;
};

// Start hint: x0 must satisfy all equalities and the domain of every
// non-shiftable constraint; shiftable linear rows may be violated (phase-I
// repairs them).
struct StartHint {
  Eigen::VectorXd x0;
};

SolveOutcome solve(const ConicProgram& prog, const SolverSettings& settings,
                   const StartHint* hint = nullptr);

}  // namespace rmsmtc::conic
