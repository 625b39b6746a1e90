#include "panelmc/factor_model.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "panelmc/errors.hpp"
#include "panelmc/solver.hpp"

namespace panelmc {

namespace {
constexpr const char* kModule = "factor_model";
}

FactorStructure extract_factors(const Eigen::MatrixXd& gamma_hat, int r) {
  const int n = static_cast<int>(gamma_hat.rows());
  const int t = static_cast<int>(gamma_hat.cols());
  const int min_dim = std::min(n, t);
  if (r < 1 || r > min_dim) {
    throw_domain(kModule, "factor count " + std::to_string(r) + " outside [1, " +
                              std::to_string(min_dim) + "]");
  }
  if (!gamma_hat.allFinite()) throw_numeric(kModule, "matrix contains non-finite entries");

  Eigen::BDCSVD<Eigen::MatrixXd> svd(gamma_hat, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const int numeric_rank = effective_rank(s, 1e-12);

  FactorStructure fs;
  fs.rank = r;
  fs.singular_values = s.head(r);
  fs.loadings = Eigen::MatrixXd::Zero(n, r);
  fs.factors = Eigen::MatrixXd::Zero(t, r);
  const double sqrt_t = std::sqrt(static_cast<double>(t));

  const int live = std::min(r, numeric_rank);
  for (int j = 0; j < live; ++j) {
    Eigen::VectorXd f = sqrt_t * svd.matrixV().col(j);
    Eigen::VectorXd l = svd.matrixU().col(j) * (s(j) / sqrt_t);
    // Sign convention: first nonzero coordinate of the factor is positive.
    const double scale = f.cwiseAbs().maxCoeff();
    for (int k = 0; k < f.size(); ++k) {
      if (std::abs(f(k)) > 1e-14 * scale) {
        if (f(k) < 0) {
          f = -f;
          l = -l;
        }
        break;
      }
    }
    fs.factors.col(j) = f;
    fs.loadings.col(j) = l;
  }
  if (live < r) {
    for (int j = live; j < r; ++j) fs.singular_values(j) = 0.0;
    fs.warnings.push_back("requested " + std::to_string(r) + " factors but matrix rank is " +
                          std::to_string(numeric_rank) + "; trailing columns zero-filled");
  }
  return fs;
}

DecayReport singular_decay(const Eigen::MatrixXd& gamma) {
  if (!gamma.allFinite()) throw_numeric(kModule, "matrix contains non-finite entries");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(gamma);
  DecayReport report;
  report.singular_values = svd.singularValues();
  const int m = static_cast<int>(report.singular_values.size());

  report.truncation_errors = Eigen::VectorXd::Zero(m + 1);
  double tail = 0.0;
  for (int j = m - 1; j >= 0; --j) {
    tail += report.singular_values(j) * report.singular_values(j);
    report.truncation_errors(j) = tail;
  }

  int nonzero = 0;
  for (int j = 0; j < m; ++j) {
    if (report.singular_values(j) > 0 &&
        report.singular_values(j) > 1e-14 * report.singular_values(0)) {
      ++nonzero;
    }
  }
  if (nonzero >= 4) {
    // Least squares of log s_j on log j over j >= 2, skipping s_1 dominance.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int count = 0;
    for (int j = 1; j < nonzero; ++j) {  // zero-based: j=1 is the second value
      const double x = std::log(static_cast<double>(j + 1));
      const double yv = std::log(report.singular_values(j));
      sx += x;
      sy += yv;
      sxx += x * x;
      sxy += x * yv;
      ++count;
    }
    const double denom = count * sxx - sx * sx;
    if (count >= 2 && std::abs(denom) > 1e-12) {
      report.fitted_alpha = -(count * sxy - sx * sy) / denom;
    }
  }
  return report;
}

NuclearBoundReport nuclear_norm_bound_check(const Eigen::VectorXd& s_true,
                                            const Eigen::MatrixXd& u_vals,
                                            const Eigen::MatrixXd& v_vals, double eps) {
  const int j = static_cast<int>(s_true.size());
  if (u_vals.cols() != j || v_vals.cols() != j) {
    throw_domain(kModule, "u/v column counts differ from the singular value count");
  }
  for (int k = 1; k < j; ++k) {
    if (s_true(k) > s_true(k - 1)) {
      throw_domain(kModule, "singular values must be nonincreasing");
    }
  }
  const double nt = static_cast<double>(u_vals.rows()) * static_cast<double>(v_vals.rows());
  Eigen::MatrixXd gamma = u_vals * s_true.asDiagonal() * v_vals.transpose();

  NuclearBoundReport report;
  report.eps = eps;
  report.nuclear_norm = nuclear_norm(gamma);
  report.bound = std::sqrt(nt) * s_true.sum();
  report.normalized_slack = (report.bound - report.nuclear_norm) / std::sqrt(nt);
  report.pass = report.normalized_slack >= -eps;
  return report;
}

}  // namespace panelmc
