#include "panelmc/solver.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "panelmc/errors.hpp"
#include "panelmc/rng.hpp"

namespace panelmc {

namespace {

constexpr const char* kModule = "nuclear_solver";

struct Svd {
  Eigen::MatrixXd u;
  Eigen::VectorXd s;
  Eigen::MatrixXd v;
};

Svd thin_svd(const Eigen::MatrixXd& m) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

// Randomized subspace-iteration SVD for the rank_cap path. Deterministic:
// the sketch is seeded from the matrix dimensions only.
Svd truncated_svd(const Eigen::MatrixXd& m, int cap) {
  const int n = static_cast<int>(m.rows());
  const int t = static_cast<int>(m.cols());
  const int p = std::min(std::min(n, t), cap + 8);
  Rng rng(derive_seed(0x5EEDF00DULL, static_cast<std::uint64_t>(n) * 131 + t));
  Eigen::MatrixXd g(t, p);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < t; ++i) g(i, j) = rng.normal();
  Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(m * g)
                          .householderQ() *
                      Eigen::MatrixXd::Identity(n, p);
  for (int it = 0; it < 2; ++it) {
    Eigen::MatrixXd z = Eigen::HouseholderQR<Eigen::MatrixXd>(m.transpose() * q)
                            .householderQ() *
                        Eigen::MatrixXd::Identity(t, p);
    q = Eigen::HouseholderQR<Eigen::MatrixXd>(m * z).householderQ() *
        Eigen::MatrixXd::Identity(n, p);
  }
  Eigen::MatrixXd b = q.transpose() * m;  // p x t
  Svd small = thin_svd(b);
  Svd out;
  out.u = q * small.u;
  out.s = small.s;
  out.v = small.v;
  return out;
}

struct SvtResult {
  Eigen::MatrixXd z;
  Eigen::VectorXd s;  // thresholded singular values, nonincreasing
};

SvtResult svt_impl(const Eigen::MatrixXd& m, double rho, const std::optional<int>& rank_cap) {
  Svd svd;
  const int min_dim = static_cast<int>(std::min(m.rows(), m.cols()));
  if (rank_cap && *rank_cap + 8 < min_dim) {
    svd = truncated_svd(m, *rank_cap);
  } else {
    svd = thin_svd(m);
  }
  Eigen::VectorXd shrunk = (svd.s.array() - rho).max(0.0);
  if (rank_cap) {
    for (int j = *rank_cap; j < shrunk.size(); ++j) shrunk(j) = 0.0;
  }
  SvtResult out;
  out.z = svd.u * shrunk.asDiagonal() * svd.v.transpose();
  out.s = std::move(shrunk);
  return out;
}

void check_shapes(const Eigen::MatrixXd& y, const TreatmentMask& m) {
  if (y.rows() != m.mask.rows() || y.cols() != m.mask.cols()) {
    throw_domain(kModule, "outcome matrix and mask shapes differ");
  }
}

void flag_degenerate_lines(const TreatmentMask& m, std::vector<std::string>& warnings) {
  for (int i = 0; i < m.mask.rows(); ++i) {
    if (!m.mask.row(i).any()) {
      warnings.push_back("unit " + std::to_string(i) +
                         " has no observed cell at this level; its row is pure extrapolation");
    }
  }
  for (int t = 0; t < m.mask.cols(); ++t) {
    if (!m.mask.col(t).any()) {
      warnings.push_back("period " + std::to_string(t) +
                         " has no observed cell at this level; its column is pure extrapolation");
    }
  }
}

double masked_half_sse(const Eigen::MatrixXd& gamma, const Eigen::MatrixXd& y,
                       const TreatmentMask& m) {
  double sse = 0.0;
  for (int t = 0; t < y.cols(); ++t) {
    for (int i = 0; i < y.rows(); ++i) {
      if (m.mask(i, t)) {
        const double d = y(i, t) - gamma(i, t);
        sse += d * d;
      }
    }
  }
  return 0.5 * sse;
}

}  // namespace

OracleInstance make_oracle_instance(Eigen::MatrixXd gamma_true, Eigen::MatrixXd errors,
                                    TreatmentMask mask) {
  if (gamma_true.rows() != errors.rows() || gamma_true.cols() != errors.cols() ||
      gamma_true.rows() != mask.mask.rows() || gamma_true.cols() != mask.mask.cols()) {
    throw_domain(kModule, "oracle instance shapes differ");
  }
  for (int t = 0; t < errors.cols(); ++t) {
    for (int i = 0; i < errors.rows(); ++i) {
      if (!mask.mask(i, t)) errors(i, t) = 0.0;
    }
  }
  return OracleInstance{std::move(gamma_true), std::move(errors), std::move(mask)};
}

Eigen::MatrixXd svt(const Eigen::MatrixXd& m, double rho) {
  if (!m.allFinite()) throw_numeric(kModule, "svt input contains non-finite entries");
  if (rho < 0) throw_domain(kModule, "svt threshold must be nonnegative");
  return svt_impl(m, rho, std::nullopt).z;
}

int effective_rank(const Eigen::VectorXd& s, double rel_tol) {
  if (s.size() == 0 || s(0) <= 0.0) return 0;
  const double cut = rel_tol * s(0);
  int r = 0;
  for (int j = 0; j < s.size(); ++j) {
    if (s(j) > cut) ++r;
  }
  return r;
}

double spectral_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

double nuclear_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues().sum();
}

double objective(const Eigen::MatrixXd& gamma, const Eigen::MatrixXd& y,
                 const TreatmentMask& mask, double rho) {
  check_shapes(y, mask);
  if (gamma.rows() != y.rows() || gamma.cols() != y.cols()) {
    throw_domain(kModule, "gamma and outcome shapes differ");
  }
  return masked_half_sse(gamma, y, mask) + rho * nuclear_norm(gamma);
}

FitResult fit_completion(const Eigen::MatrixXd& y, const TreatmentMask& mask,
                         const SolverConfig& cfg) {
  return fit_completion(y, mask, cfg, Eigen::MatrixXd::Zero(y.rows(), y.cols()));
}

FitResult fit_completion(const Eigen::MatrixXd& y, const TreatmentMask& mask,
                         const SolverConfig& cfg, const Eigen::MatrixXd& init) {
  check_shapes(y, mask);
  if (mask.count < 1) throw_domain(kModule, "no observations at treatment level");
  if (cfg.tol <= 0 || cfg.max_iters < 1) throw_domain(kModule, "invalid solver config");
  if (cfg.rho < 0) throw_domain(kModule, "rho must be nonnegative");
  if (!y.allFinite()) throw_numeric(kModule, "outcome matrix contains non-finite entries");

  const int n = static_cast<int>(y.rows());
  const int t = static_cast<int>(y.cols());
  Eigen::MatrixXd py = Eigen::MatrixXd::Zero(n, t);
  for (int c = 0; c < t; ++c)
    for (int r = 0; r < n; ++r)
      if (mask.mask(r, c)) py(r, c) = y(r, c);

  FitResult result;
  flag_degenerate_lines(mask, result.warnings);
  result.rho = cfg.rho;

  Eigen::MatrixXd z = init;
  Eigen::VectorXd s_last;
  bool converged = false;
  for (int it = 0; it < cfg.max_iters; ++it) {
    Eigen::MatrixXd m = py;
    for (int c = 0; c < t; ++c)
      for (int r = 0; r < n; ++r)
        if (!mask.mask(r, c)) m(r, c) = z(r, c);
    SvtResult step = svt_impl(m, cfg.rho, cfg.rank_cap);
    result.objective_trace.push_back(masked_half_sse(step.z, y, mask) +
                                     cfg.rho * step.s.sum());
    const double dz = (step.z - z).norm();
    const double base = std::max(z.norm(), 1e-30);
    z = std::move(step.z);
    s_last = std::move(step.s);
    if (dz <= cfg.tol * base) {
      converged = true;
      break;
    }
  }
  result.gamma_hat = std::move(z);
  result.singular_values = std::move(s_last);
  result.effective_rank = effective_rank(result.singular_values, cfg.rank_tol_rel);
  result.converged = converged;
  return result;
}

FitResult fit_with_rank(const Eigen::MatrixXd& y, const TreatmentMask& mask,
                        int target_rank, SolverConfig cfg, int rho_iters) {
  check_shapes(y, mask);
  const int min_dim = static_cast<int>(std::min(y.rows(), y.cols()));
  if (target_rank < 1 || target_rank > min_dim) {
    throw_domain(kModule, "target rank " + std::to_string(target_rank) +
                              " outside [1, min(N,T)] = [1, " + std::to_string(min_dim) + "]");
  }
  Eigen::MatrixXd py = Eigen::MatrixXd::Zero(y.rows(), y.cols());
  for (int c = 0; c < y.cols(); ++c)
    for (int r = 0; r < y.rows(); ++r)
      if (mask.mask(r, c)) py(r, c) = y(r, c);
  const double s_max = spectral_norm(py);

  if (s_max <= 0.0) {
    cfg.rho = 0.0;
    FitResult fit = fit_completion(y, mask, cfg);
    fit.rank_exact = fit.effective_rank == target_rank;
    if (!fit.rank_exact) fit.warnings.push_back("target rank unattainable on zero data");
    return fit;
  }

  double lo = 0.0;
  double hi = s_max;
  std::optional<FitResult> exact;      // smallest rho seen with the exact rank
  std::optional<FitResult> above;      // smallest rank >= target among probes
  Eigen::MatrixXd warm = Eigen::MatrixXd::Zero(y.rows(), y.cols());
  for (int it = 0; it < rho_iters; ++it) {
    const double mid = 0.5 * (lo + hi);
    cfg.rho = mid;
    FitResult fit = fit_completion(y, mask, cfg, warm);
    warm = fit.gamma_hat;
    const int r = fit.effective_rank;
    if (r > target_rank) {
      lo = mid;
      if (!above || r < above->effective_rank) above = std::move(fit);
    } else {
      if (r == target_rank) exact = std::move(fit);
      hi = mid;
    }
    if (hi - lo <= 1e-12 * s_max) break;
  }
  if (exact) {
    exact->rank_exact = true;
    return std::move(*exact);
  }
  // Rank jumped over the target: fall back per contract.
  if (!above) {
    cfg.rho = 0.0;
    above = fit_completion(y, mask, cfg, warm);
  }
  above->rank_exact = false;
  above->warnings.push_back("no rho attains effective rank " + std::to_string(target_rank) +
                            "; returning rank " + std::to_string(above->effective_rank));
  return std::move(*above);
}

FitResult fit_with_additive(const Eigen::MatrixXd& y, const TreatmentMask& mask,
                            const std::vector<Eigen::MatrixXd>& covariates,
                            bool use_unit_fe, bool use_time_fe, const SolverConfig& cfg) {
  check_shapes(y, mask);
  if (mask.count < 1) throw_domain(kModule, "no observations at treatment level");
  const int n = static_cast<int>(y.rows());
  const int t = static_cast<int>(y.cols());
  const int dc = static_cast<int>(covariates.size());
  for (const auto& c : covariates) {
    if (c.rows() != n || c.cols() != t) throw_domain(kModule, "covariate shape differs");
    for (int cc = 0; cc < t; ++cc)
      for (int rr = 0; rr < n; ++rr)
        if (mask.mask(rr, cc) && !std::isfinite(c(rr, cc)))
          throw_numeric(kModule, "covariate has non-finite entry on an observed cell");
  }

  const bool intercept = use_unit_fe || use_time_fe;
  const int p = dc + (use_unit_fe ? n : 0) + (use_time_fe ? t : 0) + (intercept ? 1 : 0);

  // Observed-cell design; fixed across iterations so the SVD is computed once.
  std::vector<std::pair<int, int>> obs;
  obs.reserve(static_cast<std::size_t>(mask.count));
  for (int c = 0; c < t; ++c)
    for (int r = 0; r < n; ++r)
      if (mask.mask(r, c)) obs.emplace_back(r, c);

  FitResult result;
  flag_degenerate_lines(mask, result.warnings);
  result.rho = cfg.rho;

  std::optional<Eigen::BDCSVD<Eigen::MatrixXd>> design_svd;
  if (p > 0) {
    Eigen::MatrixXd design = Eigen::MatrixXd::Zero(static_cast<int>(obs.size()), p);
    for (std::size_t k = 0; k < obs.size(); ++k) {
      const auto [i, s] = obs[k];
      int col = 0;
      for (int d = 0; d < dc; ++d) design(static_cast<int>(k), col++) = covariates[d](i, s);
      if (use_unit_fe) design(static_cast<int>(k), col + i) = 1.0, col += n;
      if (use_time_fe) design(static_cast<int>(k), col + s) = 1.0, col += t;
    if (intercept) design(static_cast<int>(k), col) = 1.0;
    }
    design_svd.emplace(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
    int design_rank = 0;
    if (design_svd->singularValues().size() > 0) {
      const double cut = 1e-10 * design_svd->singularValues()(0);
      for (int j = 0; j < design_svd->singularValues().size(); ++j)
        if (design_svd->singularValues()(j) > cut) ++design_rank;
    }
    int expected_redundancy = 0;
    if (intercept && use_unit_fe) ++expected_redundancy;
    if (intercept && use_time_fe) ++expected_redundancy;
    if (design_rank < std::min<int>(p - expected_redundancy,
                                    static_cast<int>(obs.size()))) {
      result.warnings.push_back("collinear covariates; using minimum-norm least squares");
    }
  }

  Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(n, t);
  Eigen::VectorXd coef = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd s_last = Eigen::VectorXd::Zero(std::min(n, t));
  Eigen::VectorXd r_obs(static_cast<int>(obs.size()));
  Eigen::MatrixXd additive = Eigen::MatrixXd::Zero(n, t);
  double j_prev = std::numeric_limits<double>::infinity();
  bool converged = false;

  for (int it = 0; it < cfg.max_iters; ++it) {
    // (a) least squares of observed residuals on the additive terms
    if (p > 0) {
      for (std::size_t k = 0; k < obs.size(); ++k) {
        const auto [i, s] = obs[k];
        r_obs(static_cast<int>(k)) = y(i, s) - gamma(i, s);
      }
      coef = design_svd->solve(r_obs);
      additive.setZero();
      for (int s = 0; s < t; ++s) {
        for (int i = 0; i < n; ++i) {
          int col = 0;
          double v = 0.0;
          for (int d = 0; d < dc; ++d) v += coef(col++) * covariates[d](i, s);
          if (use_unit_fe) v += coef(col + i), col += n;
          if (use_time_fe) v += coef(col + s), col += t;
          if (intercept) v += coef(col);
          additive(i, s) = v;
        }
      }
    }
    // (b) one soft-impute pass on the residuals
    Eigen::MatrixXd m = gamma;
    for (const auto& [i, s] : obs) m(i, s) = y(i, s) - additive(i, s);
    SvtResult step = svt_impl(m, cfg.rho, cfg.rank_cap);
    gamma = std::move(step.z);
    s_last = std::move(step.s);

    double sse = 0.0;
    for (const auto& [i, s] : obs) {
      const double d = y(i, s) - additive(i, s) - gamma(i, s);
      sse += d * d;
    }
    const double j_now = 0.5 * sse + cfg.rho * s_last.sum();
    result.objective_trace.push_back(j_now);
    if (std::abs(j_prev - j_now) <= cfg.tol * std::max(1.0, std::abs(j_prev))) {
      converged = true;
      break;
    }
    j_prev = j_now;
  }

  // Identification: alpha mean-zero over units observed at this level; the
  // intercept (and any alpha/delta level shift) is folded into delta.
  int col = dc;
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd delta = Eigen::VectorXd::Zero(t);
  double c0 = 0.0;
  if (use_unit_fe) alpha = coef.segment(col, n), col += n;
  if (use_time_fe) delta = coef.segment(col, t), col += t;
  if (intercept) c0 = coef(col);
  if (use_unit_fe) {
    std::vector<int> observed_units;
    for (int i = 0; i < n; ++i)
      if (mask.mask.row(i).any()) observed_units.push_back(i);
    double mean_alpha = 0.0;
    for (int i : observed_units) mean_alpha += alpha(i);
    mean_alpha /= std::max<std::size_t>(1, observed_units.size());
    alpha.array() -= mean_alpha;
    c0 += mean_alpha;
  }
  if (use_time_fe) {
    delta.array() += c0;
  } else if (use_unit_fe) {
    alpha.array() += c0;
  }

  result.gamma_hat = std::move(gamma);
  result.singular_values = std::move(s_last);
  result.effective_rank = effective_rank(result.singular_values, cfg.rank_tol_rel);
  result.converged = converged;
  if (dc > 0) result.beta_hat = coef.head(dc);
  if (use_unit_fe) result.alpha_hat = alpha;
  if (use_time_fe) result.delta_hat = delta;
  return result;
}

double additive_part(const FitResult& fit, const PanelDataset& ds, int i, int t) {
  double v = 0.0;
  if (fit.beta_hat) {
    const auto& beta = *fit.beta_hat;
    for (int d = 0; d < beta.size(); ++d) {
      v += beta(d) * ds.covariates()[static_cast<std::size_t>(d)](i, t);
    }
  }
  if (fit.alpha_hat) v += (*fit.alpha_hat)(i);
  if (fit.delta_hat) v += (*fit.delta_hat)(t);
  return v;
}

}  // namespace panelmc
