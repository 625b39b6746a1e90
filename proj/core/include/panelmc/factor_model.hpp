#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace panelmc {

// Loadings/factors normalized so that (1/T) factors' factors = I_R and
// (1/N) loadings' loadings is diagonal; loadings * factors' reconstructs the
// rank-R truncation of the input matrix.
struct FactorStructure {
  Eigen::MatrixXd loadings;  // N x R
  Eigen::MatrixXd factors;   // T x R
  Eigen::VectorXd singular_values;
  int rank = 0;
  std::vector<std::string> warnings;
};

struct DecayReport {
  Eigen::VectorXd singular_values;   // full spectrum, nonincreasing
  Eigen::VectorXd truncation_errors; // index R in [0, min(N,T)]: sum_{j>R} s_j^2
  std::optional<double> fitted_alpha;
};

struct NuclearBoundReport {
  double nuclear_norm = 0.0;      // exact ||Gamma||_* of the assembled matrix
  double bound = 0.0;             // sqrt(NT) * sum_j s_j
  double normalized_slack = 0.0;  // (bound - nuclear_norm) / sqrt(NT)
  double eps = 0.05;
  bool pass = false;
};

// SVD-based extraction with a deterministic sign convention: each factor
// column's first nonzero coordinate is positive. Columns beyond the numeric
// rank are zero-filled and flagged.
FactorStructure extract_factors(const Eigen::MatrixXd& gamma_hat, int r);

// Full spectrum plus tail energies; fitted decay exponent from a log-log
// regression over j >= 2 when at least four singular values are nonzero.
DecayReport singular_decay(const Eigen::MatrixXd& gamma);

// Assembles Gamma = sum_j s_j u_j v_j' from sampled eigenfunction values and
// compares its exact nuclear norm against sqrt(NT) * sum_j s_j.
NuclearBoundReport nuclear_norm_bound_check(const Eigen::VectorXd& s_true,
                                            const Eigen::MatrixXd& u_vals,
                                            const Eigen::MatrixXd& v_vals,
                                            double eps = 0.05);

}  // namespace panelmc
