#include "unmt/tensor/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "unmt/error.hpp"

namespace unmt {

namespace {

double evaluate(const std::function<Tensor()>& f) {
  NoGradScope no_grad;
  const double v = f().item();
  if (!std::isfinite(v)) throw EvaluationError("grad_check: objective is not finite");
  return v;
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor()>& f, ParameterSet& params,
                           const GradCheckOptions& options) {
  if (options.eps < 1e-6 || options.eps > 1e-4) {
    throw ParameterError("grad_check: eps must lie in [1e-6, 1e-4]");
  }
  zero_gradients(params);
  {
    Tape tape;
    Tensor loss;
    {
      TapeScope scope(tape);
      loss = f();
    }
    if (!std::isfinite(loss.item())) throw EvaluationError("grad_check: objective is not finite");
    tape.backward(loss);
  }

  GradCheckReport report;
  for (auto& p : params) {
    GradCheckEntry entry;
    entry.name = p.name;
    std::vector<double> analytic(p.tensor.grad().begin(), p.tensor.grad().end());
    auto values = p.tensor.data_mut();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + options.eps;
      const double up = evaluate(f);
      values[i] = orig - options.eps;
      const double down = evaluate(f);
      values[i] = orig;
      const double numeric = (up - down) / (2.0 * options.eps);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), options.abs_floor});
      const double rel = std::abs(analytic[i] - numeric) / denom;
      if (rel > entry.max_rel_error || entry.checked == 0) {
        entry.max_rel_error = std::max(entry.max_rel_error, rel);
        if (rel >= entry.max_rel_error) {
          entry.worst_index = i;
          entry.analytic = analytic[i];
          entry.numeric = numeric;
        }
      }
      ++entry.checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.elements_checked += entry.checked;
    report.entries.push_back(entry);
  }
  zero_gradients(params);
  return report;
}

}  // namespace unmt
