#include "panelmc/estimators.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>

#include "panelmc/csv.hpp"
#include "panelmc/errors.hpp"

namespace panelmc {

namespace {

constexpr const char* kModule = "estimators";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_binary(const PanelDataset& ds, const char* op) {
  const auto& sup = ds.support();
  if (sup.size() != 2 || !ds.in_support(0) || !ds.in_support(1)) {
    throw_domain(kModule, std::string(op) + " requires a binary {0,1} treatment");
  }
}

// Aggregate per-period values with the given nonnegative weights, skipping
// NaN entries (they carry zero weight by construction).
double weighted_aggregate(const Eigen::VectorXd& per_period, const Eigen::VectorXd& w) {
  double num = 0.0, den = 0.0;
  for (int t = 0; t < per_period.size(); ++t) {
    if (std::isnan(per_period(t)) || w(t) <= 0.0) continue;
    num += w(t) * per_period(t);
    den += w(t);
  }
  if (den <= 0.0) throw_domain(kModule, "no period contributes to the aggregate");
  return num / den;
}

}  // namespace

Weights unit_weights(int n_units, int n_periods) {
  return {Eigen::MatrixXd::Ones(n_units, n_periods)};
}

Weights treated_weights(const PanelDataset& ds, int x) {
  const TreatmentMask m = mask(ds, x);
  if (m.count == 0) throw_domain(kModule, "no cells at conditioning level");
  const double scale =
      static_cast<double>(ds.n_units()) * ds.n_periods() / static_cast<double>(m.count);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(ds.n_units(), ds.n_periods());
  for (int t = 0; t < ds.n_periods(); ++t)
    for (int i = 0; i < ds.n_units(); ++i)
      if (m.mask(i, t)) w(i, t) = scale;
  return {std::move(w)};
}

EffectEstimate asf_mc(const FitResult& fit, const PanelDataset& ds, int x) {
  if (fit.gamma_hat.rows() != ds.n_units() || fit.gamma_hat.cols() != ds.n_periods()) {
    throw_domain(kModule, "fit shape differs from panel shape");
  }
  const int n = ds.n_units();
  const int t = ds.n_periods();
  EffectEstimate est;
  est.method = "MC";
  est.x = x;
  est.per_period = Eigen::VectorXd::Zero(t);
  est.n_used_per_period = Eigen::VectorXi::Constant(t, n);
  for (int s = 0; s < t; ++s) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      if (ds.treatments()(i, s) == x) {
        acc += ds.outcomes()(i, s);
      } else {
        acc += fit.gamma_hat(i, s) + additive_part(fit, ds, i, s);
      }
    }
    est.per_period(s) = acc / n;
  }
  est.aggregate = weighted_aggregate(est.per_period, Eigen::VectorXd::Ones(t));
  return est;
}

EffectEstimate casf_mc(const FitResult& fit, const PanelDataset& ds, int x, int x0) {
  if (fit.gamma_hat.rows() != ds.n_units() || fit.gamma_hat.cols() != ds.n_periods()) {
    throw_domain(kModule, "fit shape differs from panel shape");
  }
  if (!ds.in_support(x0)) throw_domain(kModule, "conditioning level outside support");
  const int n = ds.n_units();
  const int t = ds.n_periods();
  EffectEstimate est;
  est.method = "MC";
  est.x = x;
  est.x0 = x0;
  est.per_period = Eigen::VectorXd::Constant(t, kNaN);
  est.n_used_per_period = Eigen::VectorXi::Zero(t);
  Eigen::VectorXd weights = Eigen::VectorXd::Zero(t);
  for (int s = 0; s < t; ++s) {
    double acc = 0.0;
    int count = 0;
    for (int i = 0; i < n; ++i) {
      if (ds.treatments()(i, s) != x0) continue;
      ++count;
      if (ds.treatments()(i, s) == x) {
        acc += ds.outcomes()(i, s);
      } else {
        acc += fit.gamma_hat(i, s) + additive_part(fit, ds, i, s);
      }
    }
    if (count > 0) {
      est.per_period(s) = acc / count;
      est.n_used_per_period(s) = count;
      weights(s) = count;  // N_t weighting for the aggregate
    }
  }
  if (weights.sum() <= 0.0) throw_domain(kModule, "conditioning set empty in every period");
  est.aggregate = weighted_aggregate(est.per_period, weights);
  return est;
}

EffectEstimate effect_from_matched(const MatchedCounterfactual& mc, const PanelDataset& ds,
                                   int x, const Weights& weights) {
  const int n = ds.n_units();
  const int t = ds.n_periods();
  if (mc.y_tilde.rows() != n || mc.y_tilde.cols() != t || weights.w.rows() != n ||
      weights.w.cols() != t) {
    throw_domain(kModule, "matched counterfactual or weights shape differs from panel");
  }
  if (weights.w.cwiseAbs().sum() <= 0.0) throw_domain(kModule, "weights are identically zero");
  EffectEstimate est;
  est.method = mc.method_label();
  est.x = x;
  est.per_period = Eigen::VectorXd::Zero(t);
  est.n_used_per_period = Eigen::VectorXi::Zero(t);
  for (int s = 0; s < t; ++s) {
    double acc = 0.0;
    int used = 0;
    for (int i = 0; i < n; ++i) {
      if (weights.w(i, s) != 0.0) ++used;
      acc += weights.w(i, s) * mc.y_tilde(i, s);
    }
    est.per_period(s) = acc / n;
    est.n_used_per_period(s) = used;
  }
  est.aggregate = est.per_period.mean();  // (1/NT) sum_it W_it Ytilde_it
  return est;
}

double weighted_reduced_form(const FitResult& fit, const Weights& weights) {
  if (fit.gamma_hat.rows() != weights.w.rows() || fit.gamma_hat.cols() != weights.w.cols()) {
    throw_domain(kModule, "weights shape differs from fit shape");
  }
  return (weights.w.array() * fit.gamma_hat.array()).sum() /
         static_cast<double>(fit.gamma_hat.size());
}

EffectEstimate dmeans(const PanelDataset& ds) {
  require_binary(ds, "dmeans");
  const int n = ds.n_units();
  const int t = ds.n_periods();
  EffectEstimate est;
  est.method = "Dmeans";
  est.x = 1;
  est.x0 = 1;
  est.per_period = Eigen::VectorXd::Constant(t, kNaN);
  est.n_used_per_period = Eigen::VectorXi::Zero(t);
  Eigen::VectorXd weights = Eigen::VectorXd::Zero(t);
  for (int s = 0; s < t; ++s) {
    double sum1 = 0.0, sum0 = 0.0;
    int n1 = 0, n0 = 0;
    for (int i = 0; i < n; ++i) {
      if (ds.treatments()(i, s) == 1) {
        sum1 += ds.outcomes()(i, s);
        ++n1;
      } else {
        sum0 += ds.outcomes()(i, s);
        ++n0;
      }
    }
    if (n1 > 0 && n0 > 0) {
      est.per_period(s) = sum1 / n1 - sum0 / n0;
      est.n_used_per_period(s) = n1 + n0;
      weights(s) = n1;
    }
  }
  if (weights.sum() <= 0.0) {
    throw_domain(kModule, "no period has both treated and untreated observations");
  }
  est.aggregate = weighted_aggregate(est.per_period, weights);
  return est;
}

EffectEstimate did(const PanelDataset& ds) {
  require_binary(ds, "did");
  const int n = ds.n_units();
  const int t = ds.n_periods();
  const auto& x = ds.treatments();
  const auto& y = ds.outcomes();

  std::vector<int> treated_periods;
  for (int s = 0; s < t; ++s) {
    int n1 = 0;
    for (int i = 0; i < n; ++i) n1 += x(i, s);
    if (n1 > 0) treated_periods.push_back(s);
  }
  if (treated_periods.empty()) throw_domain(kModule, "no treated observations");

  // Unit dummies, period dummies, an intercept, and one interaction column
  // per period with treated observations.
  const int p = n + t + static_cast<int>(treated_periods.size()) + 1;
  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(n * t, p);
  Eigen::VectorXd rhs(n * t);
  for (int s = 0; s < t; ++s) {
    for (int i = 0; i < n; ++i) {
      const int row = s * n + i;
      design(row, i) = 1.0;
      design(row, n + s) = 1.0;
      design(row, p - 1) = 1.0;
      rhs(row) = y(i, s);
    }
  }
  for (std::size_t a = 0; a < treated_periods.size(); ++a) {
    const int s = treated_periods[a];
    for (int i = 0; i < n; ++i) {
      if (x(i, s) == 1) design(s * n + i, n + t + static_cast<int>(a)) = 1.0;
    }
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::VectorXd coef = svd.solve(rhs);

  EffectEstimate est;
  est.method = "DiD";
  est.x = 1;
  est.x0 = 1;
  est.per_period = Eigen::VectorXd::Constant(t, kNaN);
  est.n_used_per_period = Eigen::VectorXi::Zero(t);
  Eigen::VectorXd weights = Eigen::VectorXd::Zero(t);
  for (std::size_t a = 0; a < treated_periods.size(); ++a) {
    const int s = treated_periods[a];
    int n1 = 0;
    for (int i = 0; i < n; ++i) n1 += x(i, s);
    est.per_period(s) = coef(n + t + static_cast<int>(a));
    est.n_used_per_period(s) = n1;
    weights(s) = n1;
  }
  est.aggregate = weighted_aggregate(est.per_period, weights);
  return est;
}

DsfResult dsf(const PipelineFn& pipeline, const PanelDataset& ds, int x,
              const Eigen::VectorXd& grid) {
  if (grid.size() == 0) throw_domain(kModule, "empty DSF grid");
  for (int g = 1; g < grid.size(); ++g) {
    if (grid(g) <= grid(g - 1)) throw_domain(kModule, "DSF grid must be increasing");
  }
  const int t = ds.n_periods();
  DsfResult out;
  out.aggregated.grid = grid;
  out.aggregated.f_raw = Eigen::VectorXd::Zero(grid.size());
  out.aggregated.aggregated = true;
  Eigen::MatrixXd per_period_raw(grid.size(), t);
  per_period_raw.setConstant(kNaN);

  for (int g = 0; g < grid.size(); ++g) {
    Eigen::MatrixXd indicator(ds.n_units(), t);
    for (int s = 0; s < t; ++s)
      for (int i = 0; i < ds.n_units(); ++i)
        indicator(i, s) = ds.outcomes()(i, s) <= grid(g) ? 1.0 : 0.0;
    EffectEstimate est;
    try {
      est = pipeline(ds.with_outcomes(std::move(indicator)));
    } catch (const std::exception& e) {
      throw_domain(kModule, "DSF pipeline failed at grid value " +
                                csv::format_double(grid(g)) + ": " + e.what());
    }
    out.aggregated.f_raw(g) = est.aggregate;
    if (est.per_period.size() == t) per_period_raw.row(g) = est.per_period.transpose();
  }

  auto rearrange = [](const Eigen::VectorXd& raw) {
    std::vector<double> v(raw.data(), raw.data() + raw.size());
    std::sort(v.begin(), v.end());
    return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<long>(v.size())).eval();
  };
  out.aggregated.f_rearranged = rearrange(out.aggregated.f_raw);

  for (int s = 0; s < t; ++s) {
    Eigen::VectorXd col = per_period_raw.col(s);
    if (col.hasNaN()) continue;
    DistributionEstimate de;
    de.grid = grid;
    de.f_raw = col;
    de.f_rearranged = rearrange(col);
    de.aggregated = false;
    de.period = s;
    out.per_period.push_back(std::move(de));
  }
  return out;
}

QuantileResult quantile_invert(const DistributionEstimate& de, double tau) {
  if (de.grid.size() == 0) throw_domain(kModule, "empty grid in quantile inversion");
  if (!(tau > 0.0 && tau < 1.0)) throw_domain(kModule, "tau must lie in (0,1)");
  for (int g = 0; g < de.grid.size(); ++g) {
    if (de.f_rearranged(g) >= tau) return {de.grid(g), false};
  }
  return {de.grid(de.grid.size() - 1), true};
}

Eigen::VectorXd default_quantile_grid(const PanelDataset& ds, int x, double lo, double hi,
                                      double step) {
  const TreatmentMask m = mask(ds, x);
  if (m.count == 0) throw_domain(kModule, "no outcomes at level for quantile grid");
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(m.count));
  for (int s = 0; s < ds.n_periods(); ++s)
    for (int i = 0; i < ds.n_units(); ++i)
      if (m.mask(i, s)) values.push_back(ds.outcomes()(i, s));
  std::sort(values.begin(), values.end());

  std::vector<double> grid;
  const long count = static_cast<long>(values.size());
  for (double q = lo; q <= hi + 1e-12; q += step) {
    // Left-inverse sample quantile: smallest order statistic with F_n >= q.
    long idx = static_cast<long>(std::ceil(q * static_cast<double>(count))) - 1;
    idx = std::clamp<long>(idx, 0, count - 1);
    const double v = values[static_cast<std::size_t>(idx)];
    if (grid.empty() || v > grid.back()) grid.push_back(v);
  }
  return Eigen::Map<Eigen::VectorXd>(grid.data(), static_cast<long>(grid.size())).eval();
}

}  // namespace panelmc
