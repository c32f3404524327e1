#pragma once

// Seemingly-unrelated composition: d univariate blocks with block-diagonal
// Z, T, sigma_eta, P1 and a full observation covariance sigma_eps.

#include <string>
#include <vector>

#include "sutse/linalg.hpp"
#include "sutse/state_space.hpp"

namespace sutse {

/// One univariate block y_j = Z_j alpha_j + eps_j, alpha_j' = T_j alpha_j + eta_j.
struct SeriesBlock {
  MatrixXd Z;   // 1 x p_j
  MatrixXd T;   // p_j x p_j
  MatrixXd Q;   // p_j x p_j, state-noise covariance
  VectorXd a1;  // p_j
  MatrixXd P1;  // p_j x p_j

  Index p() const { return Z.cols(); }

  void validate(Index j = -1) const {
    const std::string tag = j >= 0 ? "block " + std::to_string(j + 1) + ": " : "block: ";
    const Index pj = p();
    if (Z.rows() != 1 || pj < 1) throw InputError(tag + "Z must be 1 x p_j with p_j >= 1");
    if (T.rows() != pj || T.cols() != pj) throw InputError(tag + "T must be p_j x p_j");
    if (Q.rows() != pj || Q.cols() != pj) throw InputError(tag + "Q must be p_j x p_j");
    if (a1.size() != pj) throw InputError(tag + "a1 must have length p_j");
    if (P1.rows() != pj || P1.cols() != pj) throw InputError(tag + "P1 must be p_j x p_j");
    if (!Z.allFinite() || !T.allFinite() || !a1.allFinite()) throw InputError(tag + "non-finite entries");
    linalg::require_psd(Q, tag + "Q");
    linalg::require_psd(P1, tag + "P1");
  }
};

struct SutseSpec {
  std::vector<SeriesBlock> blocks;
  MatrixXd sigma_eps;  // d x d

  Index d() const { return static_cast<Index>(blocks.size()); }

  Index p() const {
    Index total = 0;
    for (const auto& b : blocks) total += b.p();
    return total;
  }

  /// Offset of block j inside the stacked state vector.
  Index offset(Index j) const {
    Index off = 0;
    for (Index i = 0; i < j; ++i) off += blocks[static_cast<std::size_t>(i)].p();
    return off;
  }

  void validate() const {
    if (blocks.empty()) throw InputError("SUTSE spec: at least one block is required");
    for (std::size_t j = 0; j < blocks.size(); ++j) blocks[j].validate(static_cast<Index>(j));
    if (sigma_eps.rows() != d() || sigma_eps.cols() != d())
      throw InputError("SUTSE spec: sigma_eps must be " + std::to_string(d()) + "x" + std::to_string(d()));
    linalg::require_psd(sigma_eps, "sigma_eps");
  }
};

/// Stacks the blocks into one state-space model. Block validation is
/// per-block, so the cost stays linear in d.
inline StateSpaceModel compose(const SutseSpec& spec) {
  spec.validate();
  const Index d = spec.d(), p = spec.p();
  StateSpaceModel m;
  m.Z = MatrixXd::Zero(d, p);
  m.T = MatrixXd::Zero(p, p);
  m.sigma_eta = MatrixXd::Zero(p, p);
  m.P1 = MatrixXd::Zero(p, p);
  m.a1 = VectorXd::Zero(p);
  m.sigma_eps = spec.sigma_eps;
  Index off = 0;
  for (Index j = 0; j < d; ++j) {
    const auto& b = spec.blocks[static_cast<std::size_t>(j)];
    const Index pj = b.p();
    m.Z.block(j, off, 1, pj) = b.Z;
    m.T.block(off, off, pj, pj) = b.T;
    m.sigma_eta.block(off, off, pj, pj) = b.Q;
    m.P1.block(off, off, pj, pj) = b.P1;
    m.a1.segment(off, pj) = b.a1;
    off += pj;
  }
  return m;
}

/// Block j of a composed model, i.e. the inverse of compose for one block.
inline SeriesBlock slice_block(const StateSpaceModel& m, const SutseSpec& layout, Index j) {
  const Index off = layout.offset(j);
  const Index pj = layout.blocks.at(static_cast<std::size_t>(j)).p();
  SeriesBlock b;
  b.Z = m.Z.block(j, off, 1, pj);
  b.T = m.T.block(off, off, pj, pj);
  b.Q = m.sigma_eta.block(off, off, pj, pj);
  b.P1 = m.P1.block(off, off, pj, pj);
  b.a1 = m.a1.segment(off, pj);
  return b;
}

/// Univariate model of dimension j with observation variance sigma_eps(j, j).
inline StateSpaceModel block_model(const SutseSpec& spec, Index j) {
  const auto& b = spec.blocks.at(static_cast<std::size_t>(j));
  StateSpaceModel m;
  m.Z = b.Z;
  m.T = b.T;
  m.sigma_eta = b.Q;
  m.a1 = b.a1;
  m.P1 = b.P1;
  m.sigma_eps = MatrixXd::Constant(1, 1, spec.sigma_eps(j, j));
  return m;
}

/// Local level plus AR(q): state (level, x_t, x_{t-1}, ..., x_{t-q+1}),
/// Z = (1, 1, 0, ..., 0), level random walk in row 1, AR recursion in row 2,
/// identity shift below. Initial state fixed at zero (P1 = 0).
inline SeriesBlock ar_local_level_block(const VectorXd& phi, double q1, double q2) {
  const Index q = phi.size();
  if (q < 1) throw InputError("ar_local_level_block: need at least one AR coefficient");
  if (!(q1 >= 0.0) || !(q2 >= 0.0)) throw InputError("ar_local_level_block: variances must be >= 0");
  if (!phi.allFinite()) throw InputError("ar_local_level_block: non-finite AR coefficient");
  const Index pj = q + 1;
  SeriesBlock b;
  b.Z = MatrixXd::Zero(1, pj);
  b.Z(0, 0) = 1.0;
  b.Z(0, 1) = 1.0;
  b.T = MatrixXd::Zero(pj, pj);
  b.T(0, 0) = 1.0;
  b.T.block(1, 1, 1, q) = phi.transpose();
  for (Index r = 2; r < pj; ++r) b.T(r, r - 1) = 1.0;
  b.Q = MatrixXd::Zero(pj, pj);
  b.Q(0, 0) = q1;
  b.Q(1, 1) = q2;
  b.a1 = VectorXd::Zero(pj);
  b.P1 = MatrixXd::Zero(pj, pj);
  return b;
}

/// Constant-diagonal, constant-off-diagonal covariance. Throws InputError when
/// the result is not positive definite.
inline MatrixXd equicorrelation_sigma_eps(const VectorXd& diag, double offdiag) {
  const Index d = diag.size();
  if (d < 1) throw InputError("equicorrelation_sigma_eps: empty diagonal");
  MatrixXd s = MatrixXd::Constant(d, d, offdiag);
  s.diagonal() = diag;
  if (!linalg::is_pd(s))
    throw InputError("equicorrelation_sigma_eps: result is not positive definite (offdiag=" +
                     std::to_string(offdiag) + ")");
  return s;
}

/// Ground truth of the Monte Carlo design: AR(7) + local level blocks.
struct SimulationTruth {
  VectorXd phi;
  double q1 = 0.01;
  double q2 = 1.0;
  double sigma_diag = 1.0;
  double rho = 0.5;
};

inline VectorXd simulation_phi() {
  VectorXd phi(7);
  phi << -0.4, -0.1, 0.0, 0.0, 0.0, 0.2, 0.5;
  return phi;
}

/// d identical AR(7)+local-level blocks with sigma_eps(k,k) = 1 and
/// sigma_eps(k,l) = rho, alpha_1 = 0 exactly.
inline SutseSpec simulation_model(Index d, double rho = 0.5, SimulationTruth* truth = nullptr) {
  if (d < 2) throw InputError("simulation_model: d must be >= 2");
  SimulationTruth t;
  t.phi = simulation_phi();
  t.rho = rho;
  SutseSpec spec;
  for (Index j = 0; j < d; ++j) spec.blocks.push_back(ar_local_level_block(t.phi, t.q1, t.q2));
  spec.sigma_eps = equicorrelation_sigma_eps(VectorXd::Constant(d, t.sigma_diag), rho);
  if (truth) *truth = t;
  return spec;
}

/// Copy of `spec` with the off-diagonal of sigma_eps zeroed.
inline SutseSpec diagonalized(const SutseSpec& spec) {
  SutseSpec out = spec;
  out.sigma_eps = MatrixXd(spec.sigma_eps.diagonal().asDiagonal());
  return out;
}

/// Replaces every block's initial state with the diffuse prior N(0, kappa I).
inline SutseSpec with_diffuse_prior(SutseSpec spec, double kappa = kDiffuseKappa) {
  for (auto& b : spec.blocks) {
    b.a1.setZero();
    b.P1 = kappa * MatrixXd::Identity(b.p(), b.p());
  }
  return spec;
}

}  // namespace sutse
