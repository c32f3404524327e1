// Limiting filter of the scalar local level and the spectral check of the
// misspecified d = 4 filter.

#include <cmath>
#include <iostream>

#include "sutse/sutse.hpp"

int main() {
  using namespace sutse;
  StateSpaceModel ll;
  ll.Z = ll.T = ll.sigma_eps = ll.sigma_eta = ll.P1 = MatrixXd::Ones(1, 1);
  ll.a1 = VectorXd::Zero(1);
  const LimitingFilter lf = limiting_filter(ll);
  std::cout.precision(12);
  std::cout << "local level: P = " << lf.P(0, 0) << " (golden ratio " << (1 + std::sqrt(5.0)) / 2 << ") after "
            << lf.iterations << " iterations\n";

  const SutseSpec spec = simulation_model(4, 0.5);
  const StateSpaceModel mis = compose(diagonalized(spec));
  const AssumptionReport rep = check_assumptions(compose(spec), mis);
  std::cout << "rho(TL') = " << rep.spectral_radius_TLprime << ", observability rank " << rep.observability_rank
            << "/" << rep.p << '\n';
  const GeometricEnvelope env = geometric_norm_check(mis.T * limiting_filter(mis).L, 500);
  std::cout << "||(TL')^n|| <= " << env.M << " * " << env.r << "^n  valid=" << env.valid << '\n';
}
