#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "panelmc/panel_data.hpp"

namespace panelmc {

struct SolverConfig {
  double rho = 0.0;       // nuclear-norm penalty
  int max_iters = 500;    // soft-impute iteration cap
  double tol = 1e-6;      // relative Frobenius-change stopping threshold
  std::optional<int> rank_cap;  // truncated SVD cap, for speed on large panels
  double rank_tol_rel = 1e-7;   // effective rank counts s_j > rank_tol_rel * s_1
};

struct FitResult {
  Eigen::MatrixXd gamma_hat;
  Eigen::VectorXd singular_values;  // nonincreasing
  int effective_rank = 0;
  std::vector<double> objective_trace;  // nonincreasing by construction
  bool converged = false;
  double rho = 0.0;        // penalty actually used (selected one for rank fits)
  bool rank_exact = true;  // fit_with_rank: whether the target rank was attained
  std::optional<Eigen::VectorXd> beta_hat;   // covariate coefficients
  std::optional<Eigen::VectorXd> alpha_hat;  // unit effects
  std::optional<Eigen::VectorXd> delta_hat;  // time effects (carries the intercept)
  std::vector<std::string> warnings;

  double final_objective() const {
    return objective_trace.empty() ? 0.0 : objective_trace.back();
  }
};

// Synthetic truth for the finite-sample bound checks: gamma_true holds
// m(x, A_i, B_t) on the full grid and errors vanish off the observed mask.
struct OracleInstance {
  Eigen::MatrixXd gamma_true;
  Eigen::MatrixXd errors;  // zero wherever mask is false
  TreatmentMask mask;
};

OracleInstance make_oracle_instance(Eigen::MatrixXd gamma_true, Eigen::MatrixXd errors,
                                    TreatmentMask mask);

// Singular value soft-thresholding: U diag([s - rho]_+) V^T.
Eigen::MatrixXd svt(const Eigen::MatrixXd& m, double rho);

// Nuclear-norm-penalized least squares on the observed cells via soft-impute:
//   Gamma^{k+1} = svt(P_obs(Y) + P_unobs(Gamma^k), rho).
FitResult fit_completion(const Eigen::MatrixXd& y, const TreatmentMask& mask,
                         const SolverConfig& cfg);
// Warm-started variant used by the rho search.
FitResult fit_completion(const Eigen::MatrixXd& y, const TreatmentMask& mask,
                         const SolverConfig& cfg, const Eigen::MatrixXd& init);

// Bisection on rho for a fit whose effective rank equals target_rank. The
// search converges to the smallest such rho (lightest shrinkage at that
// rank); when the rank is skipped entirely it returns the fit with the
// smallest effective rank >= target_rank and sets rank_exact = false.
FitResult fit_with_rank(const Eigen::MatrixXd& y, const TreatmentMask& mask,
                        int target_rank, SolverConfig cfg, int rho_iters = 60);

// Block coordinate descent for the program with additive covariate and
// two-way fixed-effect terms outside the nuclear-norm penalty.
FitResult fit_with_additive(const Eigen::MatrixXd& y, const TreatmentMask& mask,
                            const std::vector<Eigen::MatrixXd>& covariates,
                            bool use_unit_fe, bool use_time_fe, const SolverConfig& cfg);

// (1/2) sum_{observed} (Y - Gamma)^2 + rho * ||Gamma||_*.
double objective(const Eigen::MatrixXd& gamma, const Eigen::MatrixXd& y,
                 const TreatmentMask& mask, double rho);

double spectral_norm(const Eigen::MatrixXd& m);
double nuclear_norm(const Eigen::MatrixXd& m);
int effective_rank(const Eigen::VectorXd& singular_values, double rel_tol = 1e-7);

// Additive-part prediction C'beta + alpha_i + delta_t for one cell; zero for
// fits without additive terms.
double additive_part(const FitResult& fit, const PanelDataset& ds, int i, int t);

}  // namespace panelmc
