#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "panelmc/matching.hpp"
#include "panelmc/panel_data.hpp"
#include "panelmc/solver.hpp"

namespace panelmc {

// Per-period structural-function values plus the aggregate. Periods that
// contribute nothing (empty conditioning set, missing group) carry NaN and
// n_used = 0 and receive zero weight in the aggregate.
struct EffectEstimate {
  std::string method;
  int x = 0;
  std::optional<int> x0;
  Eigen::VectorXd per_period;
  Eigen::VectorXi n_used_per_period;
  double aggregate = 0.0;
};

struct DistributionEstimate {
  Eigen::VectorXd grid;          // increasing y values
  Eigen::VectorXd f_raw;         // plug-in DSF values per grid point
  Eigen::VectorXd f_rearranged;  // sorted f_raw (monotone rearrangement)
  bool aggregated = true;
  int period = -1;  // >= 0 for per-period curves
};

struct DsfResult {
  DistributionEstimate aggregated;
  std::vector<DistributionEstimate> per_period;
};

struct Weights {
  Eigen::MatrixXd w;
};

struct QuantileResult {
  double value = 0.0;
  bool out_of_range = false;
};

Weights unit_weights(int n_units, int n_periods);
// W_it = (NT / n(x)) * D_it(x): aggregates to the conditional mean over
// cells at level x.
Weights treated_weights(const PanelDataset& ds, int x);

// Plug-in ASF: observed cells contribute Y, unobserved ones the completed
// value (plus additive terms when the fit has them).
EffectEstimate asf_mc(const FitResult& fit, const PanelDataset& ds, int x);

// Plug-in CASF conditioning on X_it = x0; never touches the completion on
// cells where the first indicator branch applies.
EffectEstimate casf_mc(const FitResult& fit, const PanelDataset& ds, int x, int x0);

EffectEstimate effect_from_matched(const MatchedCounterfactual& mc, const PanelDataset& ds,
                                   int x, const Weights& weights);

// (1/NT) sum_it W_it Gamma_hat_it.
double weighted_reduced_form(const FitResult& fit, const Weights& weights);

// Per-period difference of treated and untreated means (binary treatment).
EffectEstimate dmeans(const PanelDataset& ds);

// Two-way fixed effects regression with one treatment interaction per period
// that has treated observations; coefficients are per-period ATT estimates.
EffectEstimate did(const PanelDataset& ds);

using PipelineFn = std::function<EffectEstimate(const PanelDataset&)>;

// Distribution structural function: re-runs the full pipeline on indicator
// outcomes 1{Y <= y} over the grid, then rearranges into a monotone curve.
DsfResult dsf(const PipelineFn& pipeline, const PanelDataset& ds, int x,
              const Eigen::VectorXd& grid);

// Left inverse: smallest grid y with F(y) >= tau.
QuantileResult quantile_invert(const DistributionEstimate& de, double tau);

// Sample quantiles of outcomes at level x for indices lo, lo+step, ..., hi
// (deduplicated, increasing).
Eigen::VectorXd default_quantile_grid(const PanelDataset& ds, int x, double lo = 0.10,
                                      double hi = 0.98, double step = 0.01);

}  // namespace panelmc
