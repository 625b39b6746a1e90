#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace panelmc {

// Column mapping for long-format CSV ingestion plus the declared treatment
// support. Covariate columns are optional.
struct CsvSchema {
  std::string unit = "unit";
  std::string period = "period";
  std::string outcome = "outcome";
  std::string treatment = "treatment";
  std::vector<std::string> covariates;
  std::vector<int> support = {0, 1};
};

// Balanced N x T panel with integer treatments on a declared finite support.
// Immutable after construction; safe to share across threads.
class PanelDataset {
 public:
  PanelDataset(Eigen::MatrixXd outcomes, Eigen::MatrixXi treatments,
               std::vector<int> support,
               std::vector<Eigen::MatrixXd> covariates = {},
               std::vector<std::string> unit_labels = {},
               std::vector<std::string> period_labels = {});

  int n_units() const { return static_cast<int>(outcomes_.rows()); }
  int n_periods() const { return static_cast<int>(outcomes_.cols()); }
  const Eigen::MatrixXd& outcomes() const { return outcomes_; }
  const Eigen::MatrixXi& treatments() const { return treatments_; }
  const std::vector<int>& support() const { return support_; }
  bool has_covariates() const { return !covariates_.empty(); }
  // One N x T matrix per covariate dimension.
  const std::vector<Eigen::MatrixXd>& covariates() const { return covariates_; }
  const std::vector<std::string>& unit_labels() const { return unit_labels_; }
  const std::vector<std::string>& period_labels() const { return period_labels_; }

  bool in_support(int x) const;

  // Copy with outcomes replaced (same shape); used by the DSF pipeline.
  PanelDataset with_outcomes(Eigen::MatrixXd outcomes) const;

 private:
  Eigen::MatrixXd outcomes_;
  Eigen::MatrixXi treatments_;
  std::vector<int> support_;
  std::vector<Eigen::MatrixXd> covariates_;
  std::vector<std::string> unit_labels_;
  std::vector<std::string> period_labels_;
};

// D_it(x) = 1{X_it = x} together with n(x) = |D(x)|.
struct TreatmentMask {
  int x = 0;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask;
  int count = 0;

  bool observed(int i, int t) const { return mask(i, t); }
};

// Long-format loader. Every (unit, period) pair must appear exactly once;
// unit/period ordering is numeric when all labels parse as numbers and
// first-appearance otherwise.
PanelDataset load_csv(const std::string& path, const CsvSchema& schema = {});
PanelDataset parse_long_csv(std::string_view text, const CsvSchema& schema,
                            const std::string& origin);

// Inverse of load_csv for round-tripping panels to disk.
void save_csv(const PanelDataset& ds, const std::string& path,
              const CsvSchema& schema = {});

TreatmentMask mask(const PanelDataset& ds, int x);

}  // namespace panelmc
