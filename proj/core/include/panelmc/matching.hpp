#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "panelmc/factor_model.hpp"
#include "panelmc/panel_data.hpp"

namespace panelmc {

enum class MatchMode { Simple, TwoWay };

struct NeighborRule {
  enum class Kind { KNearest, Radius };
  Kind kind = Kind::KNearest;
  int k = 1;             // KNearest
  double tau = 0.0;      // Radius: loading-distance bandwidth
  double upsilon = 0.0;  // Radius: factor-distance bandwidth

  static NeighborRule k_nearest(int k) { return {Kind::KNearest, k, 0.0, 0.0}; }
  static NeighborRule radius(double tau, double upsilon) {
    return {Kind::Radius, 0, tau, upsilon};
  }
};

struct MatchConfig {
  MatchMode mode = MatchMode::TwoWay;
  NeighborRule rule = NeighborRule::k_nearest(1);
};

// One source cell's contribution to a counterfactual value.
struct MatchContribution {
  int j = 0;
  int s = 0;
  double weight = 0.0;
  double distance = 0.0;  // combined factor-space distance of the match
};

struct MatchedCounterfactual {
  int x = 0;
  MatchMode mode = MatchMode::Simple;
  NeighborRule rule;
  Eigen::MatrixXd y_tilde;  // counterfactual outcomes at level x
  Eigen::MatrixXi n_it;     // matches used per cell (1 on self cells, 0 on fallbacks)
  std::vector<std::pair<int, int>> fallback_cells;
  std::map<std::pair<int, int>, std::vector<MatchContribution>> match_weights;
  std::vector<std::string> warnings;

  std::string method_label() const;
};

// Counterfactual imputation from the nearest observed cell(s) in estimated
// factor space: candidates (j, s) with X_js = x ranked by
// ||lambda_i - lambda_j||^2 + ||f_t - f_s||^2, ties broken by (j, s).
MatchedCounterfactual simple_match(const FactorStructure& fs, const PanelDataset& ds,
                                   int x, const MatchConfig& cfg);

// Difference-in-differences matching: candidate pairs (j, s) with j != i,
// s != t and X_is = X_jt = X_js = x contribute Y_is + Y_jt - Y_js.
MatchedCounterfactual two_way_match(const FactorStructure& fs, const PanelDataset& ds,
                                    int x, const MatchConfig& cfg);

// Audit export: one row per (target cell, matched cell, weight, distance).
void write_match_audit_csv(const MatchedCounterfactual& mc, const PanelDataset& ds,
                           const std::string& path);

}  // namespace panelmc
