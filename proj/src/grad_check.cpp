#include "acklab/grad_check.hpp"

#include <cmath>

namespace acklab {

namespace {

double evaluate(const LossFn& loss) {
  Tape tape;
  return loss(tape).scalar();
}

}  // namespace

GradCheckResult grad_check_detailed(const LossFn& loss, std::span<Parameter* const> params, double eps) {
  if (!(eps > 0.0)) throw Error("grad_check: eps must be > 0");
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Var out = loss(tape);
    if (!std::isfinite(out.scalar())) throw Error("grad_check: non-finite loss at the unperturbed point");
    tape.backward(out);
  }

  GradCheckResult result;
  for (Parameter* p : params) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      double& theta = p->value.data()[i];
      const double saved = theta;
      theta = saved + eps;
      const double up = evaluate(loss);
      theta = saved - eps;
      const double down = evaluate(loss);
      theta = saved;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw Error("grad_check: non-finite loss when perturbing " + p->name + "[" + std::to_string(i) + "]");
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = p->grad.data()[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic - numeric) / denom;
      ++result.checked;
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_parameter = p->name;
        result.worst_index = i;
        result.worst_analytic = analytic;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

double grad_check(const LossFn& loss, std::span<Parameter* const> params, double eps) {
  return grad_check_detailed(loss, params, eps).max_relative_error;
}

}  // namespace acklab
