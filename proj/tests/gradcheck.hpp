#pragma once

// Finite-difference gradient checking used by the unit and acceptance suites.
// The analytic gradient from the tape is compared against central differences
// (loss(theta+eps) - loss(theta-eps)) / (2 eps) computed by rebuilding the
// forward pass, which keeps the oracle independent of the backward rules.

#include <cmath>
#include <functional>
#include <string>

#include "kbvqa/params.hpp"
#include "kbvqa/tape.hpp"

namespace kbvqa::testing {

using LossFn = std::function<Var(Tape&, ParameterStore&)>;

struct GradCheck {
  double max_rel_err = 0.0;
  std::string worst;  // "name[i]" of the worst element
};

// Relative error is |analytic - fd| / max(1, |analytic|, |fd|), so values
// below 1 are compared absolutely.
inline GradCheck check_gradients(ParameterStore& store, const LossFn& loss_fn, double fd_eps = 1e-5) {
  store.zero_grad();
  Tape tape(store.precision());
  Var loss = loss_fn(tape, store);
  tape.backward(loss);

  GradCheck result;
  for (const std::string& name : store.names()) {
    ParamEntry& e = store.entry(name);
    if (!e.trainable) continue;
    for (size_t i = 0; i < e.value.data.size(); ++i) {
      double saved = e.value.data[i];
      e.value.data[i] = saved + fd_eps;
      Tape tp(store.precision());
      double up = tp.value(loss_fn(tp, store)).data[0];
      e.value.data[i] = saved - fd_eps;
      Tape tm(store.precision());
      double down = tm.value(loss_fn(tm, store)).data[0];
      e.value.data[i] = saved;
      double fd = (up - down) / (2.0 * fd_eps);
      double analytic = e.grad.data[i];
      double rel = std::abs(analytic - fd) / std::max({1.0, std::abs(analytic), std::abs(fd)});
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

}  // namespace kbvqa::testing
