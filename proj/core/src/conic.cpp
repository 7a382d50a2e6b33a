#include "rmsmtc/conic.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace rmsmtc::conic {

int hermitian_coord_count(int dim) { return dim * dim; }

Eigen::VectorXd hermitian_coords(const Eigen::MatrixXcd& X) {
  const int dim = static_cast<int>(X.rows());
  Eigen::VectorXd c(hermitian_coord_count(dim));
  int idx = 0;
  for (int i = 0; i < dim; i++) c(idx++) = X(i, i).real();
  const double s2 = std::sqrt(2.0);
  for (int j = 1; j < dim; j++)
    for (int i = 0; i < j; i++) {
      c(idx++) = s2 * X(i, j).real();
      c(idx++) = s2 * X(i, j).imag();
    }
  return c;
}

Eigen::MatrixXcd hermitian_from_coords(int dim, const Eigen::VectorXd& coords) {
  Eigen::MatrixXcd X(dim, dim);
  int idx = 0;
  for (int i = 0; i < dim; i++) X(i, i) = coords(idx++);
  const double inv_s2 = 1.0 / std::sqrt(2.0);
  for (int j = 1; j < dim; j++)
    for (int i = 0; i < j; i++) {
      const double re = coords(idx++) * inv_s2;
      const double im = coords(idx++) * inv_s2;
      X(i, j) = {re, im};
      X(j, i) = {re, -im};
    }
  return X;
}

Eigen::MatrixXd real_embedding(const Eigen::MatrixXcd& A) {
  const Eigen::Index m = A.rows(), n = A.cols();
  Eigen::MatrixXd E(2 * m, 2 * n);
  E.topLeftCorner(m, n) = A.real();
  E.topRightCorner(m, n) = -A.imag();
  E.bottomLeftCorner(m, n) = A.imag();
  E.bottomRightCorner(m, n) = A.real();
  return E;
}

int ConicProgram::add_var(double lo, double hi, int group) {
  lo_.push_back(lo);
  hi_.push_back(hi);
  group_.push_back(group);
  return static_cast<int>(lo_.size()) - 1;
}

int ConicProgram::add_hermitian_block(int dim) {
  HermitianBlock b;
  b.dim = dim;
  b.offset = num_vars();
  const int g = num_groups();
  for (int i = 0; i < hermitian_coord_count(dim); i++) add_var(-kInf, kInf, g);
  blocks_.push_back(b);
  return static_cast<int>(blocks_.size()) - 1;
}

int ConicProgram::num_groups() const {
  int g = -1;
  for (int gi : group_) g = std::max(g, gi);
  return g + 1;
}

int ConicProgram::add_lin_eq(LinExpr e, double rhs) {
  Constraint c;
  c.kind = ConstraintKind::LinearEq;
  e.constant -= rhs;
  c.a0 = std::move(e);
  cons_.push_back(std::move(c));
  return static_cast<int>(cons_.size()) - 1;
}

int ConicProgram::add_lin_le(LinExpr e, double rhs, bool phase1_shiftable) {
  Constraint c;
  c.kind = ConstraintKind::LinearIneq;
  e.constant -= rhs;
  c.a0 = std::move(e);
  c.phase1_shiftable = phase1_shiftable;
  cons_.push_back(std::move(c));
  return static_cast<int>(cons_.size()) - 1;
}

int ConicProgram::add_exp_cone(LinExpr x, LinExpr y, LinExpr z) {
  Constraint c;
  c.kind = ConstraintKind::ExpCone;
  c.a0 = std::move(x);
  c.a1 = std::move(y);
  c.a2 = std::move(z);
  cons_.push_back(std::move(c));
  return static_cast<int>(cons_.size()) - 1;
}

int ConicProgram::add_pow_cone(LinExpr x, LinExpr y, LinExpr z, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("power cone exponent must lie in (0,1)");
  Constraint c;
  c.kind = ConstraintKind::PowCone;
  c.a0 = std::move(x);
  c.a1 = std::move(y);
  c.a2 = std::move(z);
  c.alpha = alpha;
  cons_.push_back(std::move(c));
  return static_cast<int>(cons_.size()) - 1;
}

int ConicProgram::add_psd(int block) {
  Constraint c;
  c.kind = ConstraintKind::PsdBlock;
  c.psd_block = block;
  cons_.push_back(std::move(c));
  return static_cast<int>(cons_.size()) - 1;
}

LinExpr ConicProgram::trace_term(int block, const Eigen::MatrixXcd& Q) const {
  const HermitianBlock& b = blocks_[static_cast<std::size_t>(block)];
  const Eigen::VectorXd q = hermitian_coords(Q);
  LinExpr e;
  for (int i = 0; i < q.size(); i++)
    if (q(i) != 0.0) e.add(b.offset + i, q(i));
  return e;
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::NumericalLimit: return "numerical_limit";
  }
  return "?";
}

Eigen::MatrixXcd SolveOutcome::block_matrix(const ConicProgram& prog, int block) const {
  const HermitianBlock& b = prog.blocks()[static_cast<std::size_t>(block)];
  return hermitian_from_coords(b.dim, x.segment(b.offset, hermitian_coord_count(b.dim)));
}

namespace {
void dump_expr(std::ostream& os, const LinExpr& e) {
  os << e.constant;
  for (const auto& [i, c] : e.terms) os << ' ' << i << ':' << c;
}
}  // namespace

void ConicProgram::dump(std::ostream& os) const {
  os << "conicprogram 1\n";
  os << "vars " << num_vars() << "\n";
  for (int i = 0; i < num_vars(); i++)
    os << "bound " << i << ' ' << lo(i) << ' ' << hi(i) << "\n";
  for (const auto& b : blocks_) os << "hermitian " << b.dim << " @" << b.offset << "\n";
  os << "objective ";
  dump_expr(os, objective_);
  os << "\n";
  for (const auto& c : cons_) {
    switch (c.kind) {
      case ConstraintKind::LinearEq: os << "eq "; dump_expr(os, c.a0); break;
      case ConstraintKind::LinearIneq: os << "le "; dump_expr(os, c.a0); break;
      case ConstraintKind::ExpCone:
        os << "exp ";
        dump_expr(os, c.a0); os << " | "; dump_expr(os, c.a1); os << " | ";
        dump_expr(os, c.a2);
        break;
      case ConstraintKind::PowCone:
        os << "pow " << c.alpha << ' ';
        dump_expr(os, c.a0); os << " | "; dump_expr(os, c.a1); os << " | ";
        dump_expr(os, c.a2);
        break;
      case ConstraintKind::PsdBlock: os << "psd " << c.psd_block; break;
    }
    os << "\n";
  }
}

}  // namespace rmsmtc::conic
