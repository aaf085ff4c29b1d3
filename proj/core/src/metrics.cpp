#include <cmath>

#include "nnrep/error.hpp"
#include "nnrep/repair.hpp"

namespace nnrep {

double repair_efficacy(const Network& orig, const Network& repaired, const Dataset& ds, const Predicate& pred,
                       double tol) {
  std::size_t bad = 0;
  std::size_t fixed = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!ds.in_region[i] || eval_predicate(pred, ds.inputs[i], orig.forward(ds.inputs[i]), tol)) continue;
    ++bad;
    if (eval_predicate(pred, ds.inputs[i], repaired.forward(ds.inputs[i]), tol)) ++fixed;
  }
  return bad == 0 ? 100.0 : 100.0 * static_cast<double>(fixed) / static_cast<double>(bad);
}

Metrics compute_metrics(const Network& orig, const Network& repaired, const Dataset& repair_set,
                        const Dataset& test_set, const Predicate& pred, const std::vector<double>& eps_list,
                        double tol, const VerifyOptions& verify_opts) {
  if (repair_set.empty() || test_set.empty()) throw PreconditionError("metrics need non-empty repair and test sets");
  repair_set.validate();
  test_set.validate();
  if (repair_set.input_dim() != orig.input_dim() || test_set.input_dim() != orig.input_dim()) {
    throw DimensionError("dataset inputs do not match the network input width");
  }
  if (!(orig.input_dim() == repaired.input_dim() && orig.output_dim() == repaired.output_dim())) {
    throw DimensionError("original and repaired networks have different shapes");
  }

  Metrics m;
  double abs_sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    const Vector& x = test_set.inputs[i];
    const Vector yo = orig.forward(x);
    const Vector yr = repaired.forward(x);
    abs_sum += (yr - yo).cwiseAbs().sum();
    count += static_cast<std::size_t>(yo.size());
    if (eval_predicate(pred, x, yo, tol)) {
      ++m.test_satisfying_before;
      if (!eval_predicate(pred, x, yr, tol)) ++m.test_broken;
    }
  }
  m.mae = abs_sum / static_cast<double>(count);
  m.ib = m.test_satisfying_before == 0
             ? 0.0
             : 100.0 * static_cast<double>(m.test_broken) / static_cast<double>(m.test_satisfying_before);

  std::vector<Vector> adversarial;
  std::vector<Vector> constrained;
  for (std::size_t i = 0; i < repair_set.size(); ++i) {
    if (!repair_set.in_region[i]) continue;
    const Vector& x = repair_set.inputs[i];
    constrained.push_back(x);
    if (eval_predicate(pred, x, orig.forward(x), tol)) continue;
    ++m.violating_before;
    adversarial.push_back(x);
    if (eval_predicate(pred, x, repaired.forward(x), tol)) ++m.repaired;
  }
  m.re = m.violating_before == 0 ? 100.0
                                 : 100.0 * static_cast<double>(m.repaired) / static_cast<double>(m.violating_before);

  const std::vector<Vector>& acc_set = adversarial.empty() ? constrained : adversarial;
  for (double eps : eps_list) {
    m.acc[eps] = acc_set.empty() ? 100.0 : 100.0 * adv_accuracy(repaired, acc_set, pred, eps, verify_opts);
  }
  return m;
}

}  // namespace nnrep
