#include "nnrep/miqp_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Dense>

#include "nnrep/error.hpp"
#include "nnrep/io.hpp"

namespace nnrep {

int MiqpModel::add_var(VarInfo info) {
  const int index = static_cast<int>(vars_.size());
  if (!info.name.empty()) {
    if (!by_name_.emplace(info.name, index).second) {
      throw PreconditionError("duplicate variable name '" + info.name + "'");
    }
  }
  vars_.push_back(std::move(info));
  lin_.push_back(0.0);
  hint_.emplace_back();
  return index;
}

int MiqpModel::add_continuous(std::string name, double lo, double hi) {
  if (lo > hi) throw PreconditionError("variable '" + name + "' has empty bounds");
  return add_var(VarInfo{std::move(name), lo, hi, false});
}

int MiqpModel::add_binary(std::string name) {
  return add_var(VarInfo{std::move(name), 0.0, 1.0, true});
}

void MiqpModel::add_constraint(std::vector<LinTerm> terms, Sense sense, double rhs, std::string name) {
  rows_.push_back(LinearConstraint{std::move(terms), sense, rhs, std::move(name)});
}

void MiqpModel::add_quadratic(int i, int j, double coef) {
  if (i > j) std::swap(i, j);
  quad_.push_back(QuadTerm{i, j, coef});
}

void MiqpModel::add_linear(int var, double coef) {
  lin_.at(static_cast<std::size_t>(var)) += coef;
}

void MiqpModel::set_bounds(int var, double lo, double hi) {
  auto& v = vars_.at(static_cast<std::size_t>(var));
  if (lo > hi) throw PreconditionError("variable '" + v.name + "' has empty bounds");
  v.lo = lo;
  v.hi = hi;
}

void MiqpModel::set_binary_hint(int var, double value) {
  hint_.at(static_cast<std::size_t>(var)) = value;
}

void MiqpModel::clear_binary_hints() {
  for (auto& h : hint_) h.reset();
}

std::size_t MiqpModel::num_binaries() const {
  return static_cast<std::size_t>(
      std::count_if(vars_.begin(), vars_.end(), [](const VarInfo& v) { return v.binary; }));
}

std::optional<int> MiqpModel::find(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

int MiqpModel::index_of(const std::string& name) const {
  auto idx = find(name);
  if (!idx) throw PreconditionError("model has no variable named '" + name + "'");
  return *idx;
}

double MiqpModel::objective(const std::vector<double>& x) const {
  double v = objective_constant_;
  for (std::size_t i = 0; i < lin_.size(); ++i) v += lin_[i] * x[i];
  for (const auto& q : quad_) {
    v += q.coef * x[static_cast<std::size_t>(q.i)] * x[static_cast<std::size_t>(q.j)];
  }
  return v;
}

double MiqpModel::max_violation(const std::vector<double>& x) const {
  double worst = 0.0;
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    worst = std::max({worst, vars_[i].lo - x[i], x[i] - vars_[i].hi});
  }
  for (const auto& row : rows_) {
    double lhs = 0.0;
    for (const auto& t : row.terms) lhs += t.coef * x[static_cast<std::size_t>(t.var)];
    switch (row.sense) {
      case Sense::LessEqual: worst = std::max(worst, lhs - row.rhs); break;
      case Sense::GreaterEqual: worst = std::max(worst, row.rhs - lhs); break;
      case Sense::Equal: worst = std::max(worst, std::abs(lhs - row.rhs)); break;
    }
  }
  return worst;
}

double MiqpModel::max_integrality_violation(const std::vector<double>& x) const {
  double worst = 0.0;
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    if (vars_[i].binary) worst = std::max(worst, std::abs(x[i] - std::round(x[i])));
  }
  return worst;
}

void MiqpModel::validate() const {
  const int n = static_cast<int>(vars_.size());
  for (const auto& row : rows_) {
    if (!std::isfinite(row.rhs)) throw PreconditionError("constraint '" + row.name + "' has non-finite rhs");
    for (const auto& t : row.terms) {
      if (t.var < 0 || t.var >= n) {
        throw PreconditionError("constraint '" + row.name + "' references an undeclared variable");
      }
      if (!std::isfinite(t.coef)) {
        throw PreconditionError("constraint '" + row.name + "' has a non-finite coefficient");
      }
    }
  }
  for (double c : lin_) {
    if (!std::isfinite(c)) throw PreconditionError("objective has a non-finite coefficient");
  }
  // PSD check on the variables that actually appear in quadratic terms.
  std::map<int, int> local;
  bool diagonal = true;
  for (const auto& q : quad_) {
    if (q.i < 0 || q.j >= n) throw PreconditionError("quadratic term references an undeclared variable");
    if (vars_[static_cast<std::size_t>(q.i)].binary || vars_[static_cast<std::size_t>(q.j)].binary) {
      throw PreconditionError("binary variables may not appear in the quadratic objective");
    }
    if (!std::isfinite(q.coef)) throw PreconditionError("quadratic objective has a non-finite coefficient");
    local.emplace(q.i, 0);
    local.emplace(q.j, 0);
    diagonal = diagonal && q.i == q.j;
  }
  if (local.empty()) return;
  int k = 0;
  for (auto& [var, slot] : local) slot = k++;
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(k, k);
  for (const auto& q : quad_) {
    const int a = local[q.i];
    const int b = local[q.j];
    if (a == b) {
      Q(a, a) += q.coef;
    } else {
      Q(a, b) += 0.5 * q.coef;
      Q(b, a) += 0.5 * q.coef;
    }
  }
  const double scale = std::max(1.0, Q.cwiseAbs().maxCoeff());
  double min_eig = 0.0;
  if (diagonal) {
    min_eig = Q.diagonal().minCoeff();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q, Eigen::EigenvaluesOnly);
    min_eig = es.eigenvalues().minCoeff();
  }
  if (min_eig < -1e-9 * scale) {
    throw PreconditionError("quadratic objective is not positive semidefinite");
  }
}

namespace {

void write_term(std::ostream& out, double coef, const std::string& what, bool first) {
  if (coef < 0) {
    out << " - " << format_double(-coef) << ' ' << what;
  } else {
    out << (first ? " " : " + ") << format_double(coef) << ' ' << what;
  }
}

std::string lp_name(const MiqpModel& m, int i) {
  const auto& n = m.var(i).name;
  return n.empty() ? "v" + std::to_string(i) : n;
}

}  // namespace

void MiqpModel::write_lp(std::ostream& out) const {
  out << "\\ objective constant: " << format_double(objective_constant_) << "\n";
  out << "Minimize\n obj:";
  bool first = true;
  for (std::size_t i = 0; i < lin_.size(); ++i) {
    if (lin_[i] == 0.0) continue;
    write_term(out, lin_[i], lp_name(*this, static_cast<int>(i)), first);
    first = false;
  }
  if (!quad_.empty()) {
    out << (first ? " [" : " + [");
    bool qfirst = true;
    for (const auto& q : quad_) {
      const std::string what = q.i == q.j ? lp_name(*this, q.i) + " ^ 2"
                                          : lp_name(*this, q.i) + " * " + lp_name(*this, q.j);
      write_term(out, 2.0 * q.coef, what, qfirst);
      qfirst = false;
    }
    out << " ] / 2";
    first = false;
  }
  if (first) out << " 0 " << lp_name(*this, 0);
  out << "\nSubject To\n";
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    const auto& row = rows_[r];
    out << ' ' << (row.name.empty() ? "c" + std::to_string(r) : row.name) << ':';
    bool tfirst = true;
    for (const auto& t : row.terms) {
      write_term(out, t.coef, lp_name(*this, t.var), tfirst);
      tfirst = false;
    }
    if (tfirst) out << " 0 " << lp_name(*this, 0);
    out << (row.sense == Sense::LessEqual ? " <= " : row.sense == Sense::GreaterEqual ? " >= " : " = ")
        << format_double(row.rhs) << '\n';
  }
  out << "Bounds\n";
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    const auto& v = vars_[i];
    if (v.binary) continue;
    const std::string name = lp_name(*this, static_cast<int>(i));
    if (std::isinf(v.lo) && std::isinf(v.hi)) {
      out << ' ' << name << " free\n";
    } else {
      out << ' ' << (std::isinf(v.lo) ? "-inf" : format_double(v.lo)) << " <= " << name << " <= "
          << (std::isinf(v.hi) ? "+inf" : format_double(v.hi)) << '\n';
    }
  }
  out << "Binaries\n";
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    if (vars_[i].binary) out << ' ' << lp_name(*this, static_cast<int>(i)) << '\n';
  }
  out << "End\n";
}

}  // namespace nnrep
