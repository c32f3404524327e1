// Exact vs fast same-step forecast on one simulated path of the d = 4 design.

#include <iostream>

#include "sutse/sutse.hpp"

int main() {
  using namespace sutse;
  const Index d = 4;
  const SutseSpec truth = simulation_model(d, 0.5);
  const StateSpaceModel model = compose(truth);
  const ObservationSeries y = simulate(model, 1500, 42);
  const ObservationSeries hist = y.rows(0, 1499);
  const VectorXd next = y.values.row(1499).transpose();

  SameStepRequest req;
  req.observed_idx = {0, 1, 2};
  req.observed_vals = next.head(3);
  req.target = 3;

  const FilterOutput out = kalman_filter(model, hist, FilterStorage::none());
  const double exact = same_step_forecast(model, out, req);

  const SutseSpec diag = diagonalized(truth);
  const FastFilterOutput ff = run_univariate_filters(diag, hist);
  const ErrorCovEstimate V = sample_error_cov(ff, 5);
  const double fast = fast_same_step(ff, V, req);

  std::cout << "actual          " << next(3) << '\n'
            << "one-step        " << one_step_forecast(model, out)(3) << '\n'
            << "exact same-step " << exact << '\n'
            << "fast same-step  " << fast << '\n'
            << "V-hat from " << V.m << " rows:\n" << V.V << '\n';
}
