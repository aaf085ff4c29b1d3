#include "nnrep/miqp.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_set>

#include "nnrep/error.hpp"

namespace nnrep {

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::FeasibleLimit: return "FeasibleLimit";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::Unbounded: return "Unbounded";
    case SolveStatus::LimitNoSolution: return "LimitNoSolution";
  }
  return "Unknown";
}

double SolveResult::gap() const {
  if (!has_solution()) return std::numeric_limits<double>::infinity();
  return objective - lower_bound;
}

// ---------------------------------------------------------------------------
// Relaxation
// ---------------------------------------------------------------------------

namespace {

// Fixed binaries turn Big-M rows into pairs of opposing inequalities with no
// interior between them, which makes the multipliers unbounded. The QP is
// therefore rebuilt for every fixing: fixed binaries are substituted,
// singleton rows become bounds and parallel rows are merged into one ranged
// row. Free binaries stay as continuous variables in [0, 1].
RelaxationResult solve_reduced(const MiqpModel& model, const Fixings& fix, const QpSettings& settings,
                               std::chrono::steady_clock::time_point deadline) {
  RelaxationResult out;
  const std::size_t n = model.num_vars();
  constexpr double kTol = 1e-9;

  std::vector<int> col(n, -1);
  std::vector<double> value(n, 0.0);
  std::vector<int> cont;
  for (std::size_t j = 0; j < n; ++j) {
    const auto& v = model.var(static_cast<int>(j));
    if (v.binary && fix[j] >= 0) {
      value[j] = fix[j];
    } else {
      col[j] = static_cast<int>(cont.size());
      cont.push_back(static_cast<int>(j));
    }
  }
  const std::size_t nc = cont.size();
  std::vector<double> lo(nc);
  std::vector<double> hi(nc);
  for (std::size_t k = 0; k < nc; ++k) {
    const auto& v = model.var(cont[k]);
    lo[k] = v.binary ? std::max(v.lo, 0.0) : v.lo;
    hi[k] = v.binary ? std::min(v.hi, 1.0) : v.hi;
  }
  auto infeasible = [&] {
    out.status = RelaxationStatus::Infeasible;
    out.certified = true;
    out.lower_bound = kInf;
    return out;
  };

  struct Row {
    std::vector<std::pair<int, double>> terms;  // normalized
    double l = -kInf;
    double u = kInf;
  };
  std::vector<Row> rows;
  std::map<std::vector<std::pair<int, double>>, std::size_t> index;

  for (const auto& c : model.constraints()) {
    double rhs = c.rhs;
    std::map<int, double> acc;
    for (const auto& t : c.terms) {
      if (t.coef == 0.0) continue;
      if (col[static_cast<std::size_t>(t.var)] < 0) {
        rhs -= t.coef * value[static_cast<std::size_t>(t.var)];
      } else {
        acc[col[static_cast<std::size_t>(t.var)]] += t.coef;
      }
    }
    std::vector<std::pair<int, double>> terms;
    for (const auto& [k, a] : acc) {
      if (a != 0.0) terms.emplace_back(k, a);
    }
    double l = c.sense == Sense::LessEqual ? -kInf : rhs;
    double u = c.sense == Sense::GreaterEqual ? kInf : rhs;
    if (terms.empty()) {
      if (l > kTol * (1.0 + std::abs(l)) || u < -kTol * (1.0 + std::abs(u))) return infeasible();
      continue;
    }
    double scale = 0.0;
    for (const auto& t : terms) scale = std::max(scale, std::abs(t.second));
    if (terms.front().second < 0.0) scale = -scale;
    for (auto& t : terms) t.second /= scale;
    l /= scale;
    u /= scale;
    if (scale < 0.0) std::swap(l, u);
    if (terms.size() == 1) {
      // |coefficient| is 1 after normalization and the sign is positive.
      const auto k = static_cast<std::size_t>(terms.front().first);
      lo[k] = std::max(lo[k], l);
      hi[k] = std::min(hi[k], u);
      continue;
    }
    auto [it, fresh] = index.try_emplace(terms, rows.size());
    if (fresh) {
      rows.push_back({std::move(terms), l, u});
    } else {
      Row& r = rows[it->second];
      r.l = std::max(r.l, l);
      r.u = std::min(r.u, u);
    }
  }
  for (std::size_t k = 0; k < nc; ++k) {
    if (lo[k] > hi[k]) {
      if (lo[k] - hi[k] > kTol * (1.0 + std::abs(lo[k]))) return infeasible();
      lo[k] = hi[k] = 0.5 * (lo[k] + hi[k]);
    }
  }
  for (auto& r : rows) {
    if (r.l > r.u) {
      if (r.l - r.u > kTol * (1.0 + std::abs(r.l))) return infeasible();
      r.l = r.u = 0.5 * (r.l + r.u);
    }
  }

  const std::size_t m = rows.size() + nc;
  std::vector<Eigen::Triplet<double>> atrip;
  Vector l(static_cast<Eigen::Index>(m));
  Vector u(static_cast<Eigen::Index>(m));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (const auto& [k, a] : rows[r].terms) atrip.emplace_back(static_cast<int>(r), k, a);
    l(static_cast<Eigen::Index>(r)) = rows[r].l;
    u(static_cast<Eigen::Index>(r)) = rows[r].u;
  }
  for (std::size_t k = 0; k < nc; ++k) {
    const auto r = static_cast<Eigen::Index>(rows.size() + k);
    atrip.emplace_back(static_cast<int>(r), static_cast<int>(k), 1.0);
    l(r) = lo[k];
    u(r) = hi[k];
  }
  SparseMatrix A(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(nc));
  A.setFromTriplets(atrip.begin(), atrip.end());

  double constant = model.objective_constant();
  Vector q = Vector::Zero(static_cast<Eigen::Index>(nc));
  for (std::size_t j = 0; j < n; ++j) {
    const double c = model.linear()[j];
    if (c == 0.0) continue;
    if (col[j] < 0) {
      constant += c * value[j];
    } else {
      q(col[j]) += c;
    }
  }
  std::vector<Eigen::Triplet<double>> ptrip;
  for (const auto& qt : model.quadratic()) {
    const int a = col[static_cast<std::size_t>(qt.i)];
    const int b = col[static_cast<std::size_t>(qt.j)];
    if (a == b) {
      ptrip.emplace_back(a, a, 2.0 * qt.coef);
    } else {
      ptrip.emplace_back(a, b, qt.coef);
      ptrip.emplace_back(b, a, qt.coef);
    }
  }
  SparseMatrix P(static_cast<Eigen::Index>(nc), static_cast<Eigen::Index>(nc));
  P.setFromTriplets(ptrip.begin(), ptrip.end());

  QpSolver qp(P, q, A, l, u, settings);
  qp.set_deadline(deadline);
  const QpResult qr = qp.solve(l, u);
  out.iterations = qr.iterations;
  switch (qr.status) {
    case QpStatus::Solved: out.status = RelaxationStatus::Optimal; break;
    case QpStatus::PrimalInfeasible:
      out.status = RelaxationStatus::Infeasible;
      out.certified = qr.certified_infeasible;
      out.lower_bound = kInf;
      return out;
    case QpStatus::DualInfeasible: out.status = RelaxationStatus::Unbounded; return out;
    default: out.status = RelaxationStatus::Unknown; break;
  }
  out.x = value;
  for (std::size_t k = 0; k < nc; ++k) out.x[static_cast<std::size_t>(cont[k])] = qr.x(static_cast<Eigen::Index>(k));
  if (out.status == RelaxationStatus::Optimal) out.lower_bound = qr.objective + constant;
  return out;
}

}  // namespace

struct RelaxationSolver::Impl {
  const MiqpModel* model = nullptr;
  QpSettings settings;
  std::chrono::steady_clock::time_point deadline = std::chrono::steady_clock::time_point::max();
};

RelaxationSolver::RelaxationSolver(const MiqpModel& model, const QpSettings& settings)
    : impl_(std::make_unique<Impl>()) {
  impl_->model = &model;
  impl_->settings = settings;
}
RelaxationSolver::~RelaxationSolver() = default;
RelaxationSolver::RelaxationSolver(RelaxationSolver&&) noexcept = default;
RelaxationSolver& RelaxationSolver::operator=(RelaxationSolver&&) noexcept = default;

RelaxationResult RelaxationSolver::solve(const Fixings& fixings) {
  if (fixings.size() != impl_->model->num_vars()) throw DimensionError("fixings vector has wrong length");
  return solve_reduced(*impl_->model, fixings, impl_->settings, impl_->deadline);
}

void RelaxationSolver::set_deadline(std::chrono::steady_clock::time_point deadline) {
  impl_->deadline = deadline;
}

Fixings RelaxationSolver::root_fixings() const {
  const MiqpModel& m = *impl_->model;
  Fixings f(m.num_vars(), -1);
  for (std::size_t j = 0; j < m.num_vars(); ++j) {
    const auto& v = m.var(static_cast<int>(j));
    if (!v.binary) continue;
    if (v.hi < 0.5) f[j] = 0;
    if (v.lo > 0.5) f[j] = 1;
  }
  return f;
}

RelaxationResult solve_relaxation(const MiqpModel& model, const Fixings& fixings, const QpSettings& settings) {
  RelaxationSolver rs(model, settings);
  return rs.solve(fixings);
}

// ---------------------------------------------------------------------------
// Branch and bound
// ---------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

struct Node {
  double lb = -kInf;
  int depth = 0;
  std::int64_t id = 0;
  Fixings fix;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.lb != b.lb) return a.lb > b.lb;
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.id > b.id;
  }
};

struct Candidate {
  std::vector<double> x;
  double objective = kInf;
};

struct Evaluation {
  enum class Kind { Infeasible, Unbounded, Pruned, Branch, Closed, Unresolved } kind = Kind::Unresolved;
  double lb = -kInf;
  int branch_var = -1;
  bool branch_up_first = false;
  std::vector<Candidate> candidates;
  std::int64_t qp_solves = 0;
};

std::string fix_key(const Fixings& f) {
  return std::string(reinterpret_cast<const char*>(f.data()), f.size());
}

class BranchAndBound {
 public:
  BranchAndBound(const MiqpModel& model, const SolveParams& params)
      : model_(model), params_(params), start_(Clock::now()) {
    for (std::size_t j = 0; j < model.num_vars(); ++j) {
      if (model.var(static_cast<int>(j)).binary) binaries_.push_back(static_cast<int>(j));
    }
    if (std::isfinite(params.time_limit_s)) {
      deadline_ = start_ + std::chrono::duration_cast<Clock::duration>(
                               std::chrono::duration<double>(params.time_limit_s));
    }
  }

  SolveResult run();

 private:
  double cutoff() const {
    if (!incumbent_) return kInf;
    return incumbent_->objective - std::max(params_.abs_gap_tol, params_.rel_gap_tol * std::abs(incumbent_->objective));
  }
  bool time_up() const { return Clock::now() > deadline_; }
  double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

  Evaluation evaluate(RelaxationSolver& rs, const Node& node, double cutoff_snapshot);
  std::optional<Candidate> leaf_candidate(const Fixings& fix, std::int64_t& qp_solves,
                                          bool* unresolved = nullptr, bool* infeasible = nullptr);
  bool check_candidate(std::vector<double>& x, const Fixings& fix, double& objective) const;
  void offer(const Candidate& c);
  // Returns the child to continue with when plunging.
  std::optional<Node> process(const Node& node, Evaluation&& ev, bool plunge);
  double global_lower_bound() const;
  void log_progress(bool force);
  bool try_mark(const Fixings& f);

  const MiqpModel& model_;
  const SolveParams& params_;
  Clock::time_point start_;
  Clock::time_point deadline_ = Clock::time_point::max();
  std::vector<int> binaries_;

  std::priority_queue<Node, std::vector<Node>, NodeOrder> open_;
  std::optional<Candidate> incumbent_;
  std::int64_t next_id_ = 0;
  std::int64_t nodes_ = 0;
  std::int64_t qp_solves_ = 0;
  std::int64_t unresolved_ = 0;
  double pruned_min_lb_ = kInf;
  double unresolved_min_lb_ = kInf;
  double current_lb_ = kInf;
  bool unbounded_ = false;
  std::mutex tried_mu_;
  std::unordered_set<std::string> tried_;
};

bool BranchAndBound::try_mark(const Fixings& f) {
  std::lock_guard<std::mutex> lock(tried_mu_);
  return tried_.insert(fix_key(f)).second;
}

bool BranchAndBound::check_candidate(std::vector<double>& x, const Fixings& fix, double& objective) const {
  for (int j : binaries_) x[static_cast<std::size_t>(j)] = fix[static_cast<std::size_t>(j)];
  if (model_.max_violation(x) > params_.feasibility_tol) return false;
  objective = model_.objective(x);
  return std::isfinite(objective);
}

std::optional<Candidate> BranchAndBound::leaf_candidate(const Fixings& fix, std::int64_t& qp_solves,
                                                        bool* unresolved, bool* infeasible) {
  RelaxationResult r = solve_reduced(model_, fix, params_.qp, deadline_);
  ++qp_solves;
  if (r.status != RelaxationStatus::Optimal) {
    const bool proven = r.status == RelaxationStatus::Infeasible &&
                        (r.certified || !params_.require_certified_infeasibility);
    if (infeasible) *infeasible = proven;
    // An unbounded leaf sets neither flag.
    if (unresolved && !proven && r.status != RelaxationStatus::Unbounded) *unresolved = true;
    return std::nullopt;
  }
  Candidate c;
  c.x = std::move(r.x);
  if (!check_candidate(c.x, fix, c.objective)) {
    if (unresolved) *unresolved = true;
    return std::nullopt;
  }
  return c;
}

Evaluation BranchAndBound::evaluate(RelaxationSolver& rs, const Node& node, double cutoff_snapshot) {
  Evaluation ev;
  if (std::all_of(binaries_.begin(), binaries_.end(),
                  [&](int j) { return node.fix[static_cast<std::size_t>(j)] >= 0; })) {
    bool unresolved = false;
    bool infeasible = false;
    auto c = leaf_candidate(node.fix, ev.qp_solves, &unresolved, &infeasible);
    ev.lb = node.lb;
    if (c) {
      ev.candidates.push_back(std::move(*c));
      ev.kind = Evaluation::Kind::Closed;
    } else if (infeasible) {
      ev.kind = Evaluation::Kind::Infeasible;
    } else if (unresolved) {
      ev.kind = Evaluation::Kind::Unresolved;
    } else {
      // Unbounded leaf.
      ev.kind = Evaluation::Kind::Unbounded;
    }
    return ev;
  }
  RelaxationResult r = rs.solve(node.fix);
  ev.qp_solves = 1;
  if (r.status == RelaxationStatus::Infeasible &&
      (r.certified || !params_.require_certified_infeasibility)) {
    ev.kind = Evaluation::Kind::Infeasible;
    return ev;
  }
  if (r.status == RelaxationStatus::Unbounded) {
    ev.kind = Evaluation::Kind::Unbounded;
    return ev;
  }
  ev.lb = r.status == RelaxationStatus::Optimal ? std::max(node.lb, r.lower_bound) : node.lb;
  if (ev.lb >= cutoff_snapshot) {
    ev.kind = Evaluation::Kind::Pruned;
    return ev;
  }
  const bool usable_point = r.x.size() == model_.num_vars();

  // Most fractional free binary; ties go to the lowest index.
  int best = -1;
  double best_frac = params_.integrality_tol;
  for (int j : binaries_) {
    if (node.fix[static_cast<std::size_t>(j)] >= 0 || !usable_point) continue;
    const double v = r.x[static_cast<std::size_t>(j)];
    const double frac = std::min(std::abs(v), std::abs(1.0 - v));
    if (frac > best_frac) {
      best_frac = frac;
      best = j;
    }
  }
  if (best < 0 && !usable_point) {
    // Relaxation failed without a point to branch on: split on the first free binary.
    for (int j : binaries_) {
      if (node.fix[static_cast<std::size_t>(j)] < 0) {
        best = j;
        break;
      }
    }
  }

  if (best < 0) {
    // Integral relaxation.
    Fixings leaf = node.fix;
    for (int j : binaries_) {
      if (leaf[static_cast<std::size_t>(j)] < 0) {
        leaf[static_cast<std::size_t>(j)] = r.x[static_cast<std::size_t>(j)] >= 0.5 ? 1 : 0;
      }
    }
    bool unresolved = false;
    auto c = leaf_candidate(leaf, ev.qp_solves, &unresolved);
    if (c) {
      ev.candidates.push_back(std::move(*c));
      // The relaxation optimum is attained by an integral point; the
      // subtree needs no further work.
      if (r.status == RelaxationStatus::Optimal) {
        ev.kind = Evaluation::Kind::Closed;
        return ev;
      }
    }
    // Fall back to branching on the first free binary.
    for (int j : binaries_) {
      if (node.fix[static_cast<std::size_t>(j)] < 0) {
        best = j;
        break;
      }
    }
  } else if (usable_point) {
    // Rounding heuristic.
    Fixings rounded = node.fix;
    for (int j : binaries_) {
      if (rounded[static_cast<std::size_t>(j)] < 0) {
        rounded[static_cast<std::size_t>(j)] = r.x[static_cast<std::size_t>(j)] >= 0.5 ? 1 : 0;
      }
    }
    if (try_mark(rounded)) {
      if (auto c = leaf_candidate(rounded, ev.qp_solves)) ev.candidates.push_back(std::move(*c));
    }
  }

  ev.kind = Evaluation::Kind::Branch;
  ev.branch_var = best;
  ev.branch_up_first = usable_point && r.x[static_cast<std::size_t>(best)] >= 0.5;
  return ev;
}

void BranchAndBound::offer(const Candidate& c) {
  if (incumbent_ && c.objective >= incumbent_->objective) return;
  incumbent_ = c;
  log_progress(true);
}

double BranchAndBound::global_lower_bound() const {
  double lb = std::min({pruned_min_lb_, unresolved_min_lb_, current_lb_});
  if (!open_.empty()) lb = std::min(lb, open_.top().lb);
  if (incumbent_) lb = std::min(lb, incumbent_->objective);
  return lb;
}

void BranchAndBound::log_progress(bool force) {
  if (!params_.log || params_.log_every <= 0) return;
  if (!force && nodes_ % params_.log_every != 0) return;
  const double ub = incumbent_ ? incumbent_->objective : kInf;
  const double lb = global_lower_bound();
  const double gap = std::isfinite(ub) && std::isfinite(lb) ? ub - lb : kInf;
  std::ostringstream line;
  line << "node=" << nodes_ << " lb=" << lb << " ub=" << ub << " gap=" << gap << " t=" << std::fixed
       << std::setprecision(3) << elapsed() << '\n';
  *params_.log << line.str();
}

std::optional<Node> BranchAndBound::process(const Node& node, Evaluation&& ev, bool plunge) {
  ++nodes_;
  qp_solves_ += ev.qp_solves;
  for (const auto& c : ev.candidates) offer(c);
  log_progress(false);
  const double cut = cutoff();
  switch (ev.kind) {
    case Evaluation::Kind::Infeasible:
    case Evaluation::Kind::Closed:
      return std::nullopt;
    case Evaluation::Kind::Unbounded:
      unbounded_ = true;
      return std::nullopt;
    case Evaluation::Kind::Pruned:
      pruned_min_lb_ = std::min(pruned_min_lb_, ev.lb);
      return std::nullopt;
    case Evaluation::Kind::Unresolved:
      ++unresolved_;
      unresolved_min_lb_ = std::min(unresolved_min_lb_, ev.lb);
      return std::nullopt;
    case Evaluation::Kind::Branch:
      break;
  }
  if (ev.lb >= cut) {
    pruned_min_lb_ = std::min(pruned_min_lb_, ev.lb);
    return std::nullopt;
  }
  Node down{ev.lb, node.depth + 1, next_id_++, node.fix};
  Node up{ev.lb, node.depth + 1, next_id_++, node.fix};
  down.fix[static_cast<std::size_t>(ev.branch_var)] = 0;
  up.fix[static_cast<std::size_t>(ev.branch_var)] = 1;
  Node& first = ev.branch_up_first ? up : down;
  Node& second = ev.branch_up_first ? down : up;
  open_.push(std::move(second));
  if (plunge) return std::move(first);
  open_.push(std::move(first));
  return std::nullopt;
}

SolveResult BranchAndBound::run() {
  SolveResult result;
  const int threads = std::max(1, params_.threads);
  std::vector<RelaxationSolver> workers;
  for (int t = 0; t < threads; ++t) {
    workers.emplace_back(model_, params_.qp);
    workers.back().set_deadline(deadline_);
  }
  const Fixings root = workers[0].root_fixings();

  // Start from the caller's binary hint when one is supplied.
  {
    Fixings hinted = root;
    bool any = false;
    const auto& hint = model_.binary_hint();
    for (int j : binaries_) {
      if (hinted[static_cast<std::size_t>(j)] >= 0) continue;
      if (hint[static_cast<std::size_t>(j)]) {
        hinted[static_cast<std::size_t>(j)] = *hint[static_cast<std::size_t>(j)] >= 0.5 ? 1 : 0;
        any = true;
      }
    }
    if (any) {
      std::int64_t solves = 0;
      bool complete = std::all_of(binaries_.begin(), binaries_.end(),
                                  [&](int j) { return hinted[static_cast<std::size_t>(j)] >= 0; });
      if (complete) {
        try_mark(hinted);
        if (auto c = leaf_candidate(hinted, solves)) offer(*c);
      } else {
        RelaxationResult r = workers[0].solve(hinted);
        ++solves;
        if (r.status == RelaxationStatus::Optimal) {
          for (int j : binaries_) {
            if (hinted[static_cast<std::size_t>(j)] < 0) {
              hinted[static_cast<std::size_t>(j)] = r.x[static_cast<std::size_t>(j)] >= 0.5 ? 1 : 0;
            }
          }
          try_mark(hinted);
          if (auto c = leaf_candidate(hinted, solves)) offer(*c);
        }
      }
      qp_solves_ += solves;
    }
  }

  open_.push(Node{-kInf, 0, next_id_++, root});
  bool hit_limit = false;
  bool early_stop = false;

  while (!open_.empty()) {
    if (time_up() || nodes_ >= params_.node_limit) {
      hit_limit = true;
      break;
    }
    if (params_.stop_at_first_incumbent && incumbent_) {
      early_stop = true;
      break;
    }
    if (threads == 1) {
      std::optional<Node> current = open_.top();
      open_.pop();
      while (current) {
        current_lb_ = current->lb;
        if (current->lb >= cutoff()) {
          pruned_min_lb_ = std::min(pruned_min_lb_, current->lb);
          break;
        }
        Evaluation ev = evaluate(workers[0], *current, cutoff());
        Node node = std::move(*current);
        current = process(node, std::move(ev), true);
        if (current && (time_up() || nodes_ >= params_.node_limit ||
                        (params_.stop_at_first_incumbent && incumbent_))) {
          open_.push(std::move(*current));
          current.reset();
        }
      }
      current_lb_ = kInf;
    } else {
      std::vector<Node> batch;
      while (!open_.empty() && static_cast<int>(batch.size()) < threads) {
        Node n = open_.top();
        open_.pop();
        if (n.lb >= cutoff()) {
          pruned_min_lb_ = std::min(pruned_min_lb_, n.lb);
          continue;
        }
        batch.push_back(std::move(n));
      }
      std::vector<Evaluation> evs(batch.size());
      const double cut = cutoff();
      std::vector<std::thread> pool;
      for (std::size_t b = 0; b < batch.size(); ++b) {
        pool.emplace_back([&, b] { evs[b] = evaluate(workers[b], batch[b], cut); });
      }
      for (auto& t : pool) t.join();
      for (std::size_t b = 0; b < batch.size(); ++b) process(batch[b], std::move(evs[b]), false);
    }
    if (unbounded_) break;
  }

  result.nodes = nodes_;
  result.qp_solves = qp_solves_;
  result.wall_time_s = elapsed();
  result.lower_bound = global_lower_bound();
  if (unbounded_) {
    result.status = SolveStatus::Unbounded;
    result.diagnostic = "relaxation is unbounded below";
    result.lower_bound = -kInf;
    return result;
  }
  if (incumbent_) {
    result.x = incumbent_->x;
    result.objective = incumbent_->objective;
  }
  const bool gap_closed =
      incumbent_ && result.objective - result.lower_bound <=
                        std::max(params_.abs_gap_tol, params_.rel_gap_tol * std::abs(result.objective));
  std::ostringstream diag;
  if (unresolved_ > 0) diag << unresolved_ << " node(s) left unresolved by the QP subsolver; ";
  if (hit_limit) diag << "search limit reached; ";
  if (early_stop) diag << "stopped at first incumbent; ";

  if (gap_closed) {
    result.status = SolveStatus::Optimal;
    if (open_.empty() && unresolved_ == 0) result.lower_bound = std::min(result.lower_bound, result.objective);
  } else if (incumbent_) {
    result.status = SolveStatus::FeasibleLimit;
  } else if (!hit_limit && !early_stop && unresolved_ == 0) {
    result.status = SolveStatus::Infeasible;
    result.lower_bound = kInf;
  } else {
    result.status = SolveStatus::LimitNoSolution;
  }
  result.diagnostic = diag.str();
  if (!result.diagnostic.empty()) result.diagnostic.resize(result.diagnostic.size() - 2);
  log_progress(true);
  return result;
}

}  // namespace

SolveResult solve(const MiqpModel& model, const SolveParams& params) {
  if (!(params.rel_gap_tol > 0) || !(params.abs_gap_tol > 0) || !(params.integrality_tol > 0)) {
    throw PreconditionError("solver tolerances must be positive");
  }
  model.validate();
  BranchAndBound bnb(model, params);
  return bnb.run();
}

}  // namespace nnrep
