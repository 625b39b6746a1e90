#include "panelmc/panel_data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_map>

#include "panelmc/csv.hpp"
#include "panelmc/errors.hpp"

namespace panelmc {

namespace {

constexpr const char* kModule = "panel_data";

std::string support_to_string(const std::vector<int>& support) {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (i) os << ',';
    os << support[i];
  }
  os << '}';
  return os.str();
}

// Stable label ordering: numeric sort when every label parses as a number,
// first-appearance order otherwise.
std::vector<std::string> ordered_labels(const std::vector<std::string>& appearance) {
  bool all_numeric = true;
  std::vector<double> values(appearance.size());
  for (std::size_t i = 0; i < appearance.size(); ++i) {
    if (!csv::try_parse_double(appearance[i], values[i])) {
      all_numeric = false;
      break;
    }
  }
  std::vector<std::string> out = appearance;
  if (all_numeric) {
    std::vector<std::size_t> idx(appearance.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = appearance[idx[i]];
  }
  return out;
}

}  // namespace

PanelDataset::PanelDataset(Eigen::MatrixXd outcomes, Eigen::MatrixXi treatments,
                           std::vector<int> support,
                           std::vector<Eigen::MatrixXd> covariates,
                           std::vector<std::string> unit_labels,
                           std::vector<std::string> period_labels)
    : outcomes_(std::move(outcomes)),
      treatments_(std::move(treatments)),
      support_(std::move(support)),
      covariates_(std::move(covariates)),
      unit_labels_(std::move(unit_labels)),
      period_labels_(std::move(period_labels)) {
  const int n = static_cast<int>(outcomes_.rows());
  const int t = static_cast<int>(outcomes_.cols());
  if (n < 1 || t < 1) throw_domain(kModule, "panel must have at least one unit and period");
  if (treatments_.rows() != n || treatments_.cols() != t) {
    throw_domain(kModule, "outcomes and treatments shapes differ");
  }
  if (support_.empty()) throw_domain(kModule, "treatment support must be non-empty");
  if (!outcomes_.allFinite()) throw_domain(kModule, "outcomes contain non-finite values");
  for (int i = 0; i < n; ++i) {
    for (int s = 0; s < t; ++s) {
      if (!in_support(treatments_(i, s))) {
        throw_domain(kModule, "treatment value " + std::to_string(treatments_(i, s)) +
                                  " at unit " + std::to_string(i) + ", period " +
                                  std::to_string(s) + " outside declared support " +
                                  support_to_string(support_));
      }
    }
  }
  for (const auto& c : covariates_) {
    if (c.rows() != n || c.cols() != t) {
      throw_domain(kModule, "covariate matrix shape differs from panel shape");
    }
  }
  if (unit_labels_.empty()) {
    for (int i = 0; i < n; ++i) unit_labels_.push_back(std::to_string(i + 1));
  }
  if (period_labels_.empty()) {
    for (int s = 0; s < t; ++s) period_labels_.push_back(std::to_string(s + 1));
  }
  if (static_cast<int>(unit_labels_.size()) != n) {
    throw_domain(kModule, "unit label count differs from N");
  }
  if (static_cast<int>(period_labels_.size()) != t) {
    throw_domain(kModule, "period label count differs from T");
  }
}

bool PanelDataset::in_support(int x) const {
  return std::find(support_.begin(), support_.end(), x) != support_.end();
}

PanelDataset PanelDataset::with_outcomes(Eigen::MatrixXd outcomes) const {
  if (outcomes.rows() != outcomes_.rows() || outcomes.cols() != outcomes_.cols()) {
    throw_domain(kModule, "replacement outcomes shape differs from panel shape");
  }
  return PanelDataset(std::move(outcomes), treatments_, support_, covariates_,
                      unit_labels_, period_labels_);
}

PanelDataset parse_long_csv(std::string_view text, const CsvSchema& schema,
                            const std::string& origin) {
  csv::Table table = csv::parse(text);
  if (table.header.empty()) throw_parse(kModule, "empty file " + origin);

  const int c_unit = table.column(schema.unit);
  const int c_period = table.column(schema.period);
  const int c_outcome = table.column(schema.outcome);
  const int c_treatment = table.column(schema.treatment);
  for (const auto& [name, col] :
       {std::pair{schema.unit, c_unit},
        {schema.period, c_period},
        {schema.outcome, c_outcome},
        {schema.treatment, c_treatment}}) {
    if (col < 0) throw_parse(kModule, "missing column '" + name + "' in " + origin);
  }
  std::vector<int> c_cov;
  for (const auto& name : schema.covariates) {
    int col = table.column(name);
    if (col < 0) throw_parse(kModule, "missing covariate column '" + name + "' in " + origin);
    c_cov.push_back(col);
  }

  std::vector<std::string> unit_order, period_order;
  std::unordered_map<std::string, int> unit_seen, period_seen;
  for (const auto& row : table.rows) {
    const std::string& u = row[static_cast<std::size_t>(c_unit)];
    const std::string& p = row[static_cast<std::size_t>(c_period)];
    if (unit_seen.emplace(u, 1).second) unit_order.push_back(u);
    if (period_seen.emplace(p, 1).second) period_order.push_back(p);
  }
  if (unit_order.empty()) throw_parse(kModule, "no data rows in " + origin);

  std::vector<std::string> units = ordered_labels(unit_order);
  std::vector<std::string> periods = ordered_labels(period_order);
  std::unordered_map<std::string, int> unit_index, period_index;
  for (std::size_t i = 0; i < units.size(); ++i) unit_index[units[i]] = static_cast<int>(i);
  for (std::size_t s = 0; s < periods.size(); ++s) period_index[periods[s]] = static_cast<int>(s);

  const int n = static_cast<int>(units.size());
  const int t = static_cast<int>(periods.size());
  Eigen::MatrixXd outcomes(n, t);
  Eigen::MatrixXi treatments(n, t);
  std::vector<Eigen::MatrixXd> covariates(c_cov.size(), Eigen::MatrixXd(n, t));
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> seen(n, t);
  seen.setConstant(false);

  long row_number = 1;  // header is row 1
  for (const auto& row : table.rows) {
    ++row_number;
    const int i = unit_index.at(row[static_cast<std::size_t>(c_unit)]);
    const int s = period_index.at(row[static_cast<std::size_t>(c_period)]);
    if (seen(i, s)) {
      throw_parse(kModule, "duplicate (unit, period) pair (" + units[static_cast<std::size_t>(i)] +
                               ", " + periods[static_cast<std::size_t>(s)] + ") at row " +
                               std::to_string(row_number) + " in " + origin);
    }
    seen(i, s) = true;
    outcomes(i, s) = csv::parse_double(row[static_cast<std::size_t>(c_outcome)], kModule,
                                       "in outcome column at row " + std::to_string(row_number));
    long x = 0;
    if (!csv::try_parse_long(row[static_cast<std::size_t>(c_treatment)], x)) {
      throw_parse(kModule, "non-integer treatment '" + row[static_cast<std::size_t>(c_treatment)] +
                               "' at row " + std::to_string(row_number));
    }
    treatments(i, s) = static_cast<int>(x);
    for (std::size_t k = 0; k < c_cov.size(); ++k) {
      covariates[k](i, s) =
          csv::parse_double(row[static_cast<std::size_t>(c_cov[k])], kModule,
                            "in covariate column at row " + std::to_string(row_number));
    }
  }

  if (!seen.all()) {
    std::ostringstream os;
    os << "unbalanced panel; missing (unit, period) pairs:";
    int listed = 0;
    for (int i = 0; i < n && listed < 8; ++i) {
      for (int s = 0; s < t && listed < 8; ++s) {
        if (!seen(i, s)) {
          os << " (" << units[static_cast<std::size_t>(i)] << ", "
             << periods[static_cast<std::size_t>(s)] << ")";
          ++listed;
        }
      }
    }
    const long missing = static_cast<long>(n) * t - static_cast<long>(table.rows.size());
    if (missing > listed) os << " and " << (missing - listed) << " more";
    throw_parse(kModule, os.str());
  }

  return PanelDataset(std::move(outcomes), std::move(treatments), schema.support,
                      std::move(covariates), std::move(units), std::move(periods));
}

PanelDataset load_csv(const std::string& path, const CsvSchema& schema) {
  csv::Table table = csv::read_file(path);  // reuse I/O error handling
  std::ostringstream os;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) os << ',';
    os << table.header[i];
  }
  os << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      os << row[i];
    }
    os << '\n';
  }
  return parse_long_csv(os.str(), schema, "'" + path + "'");
}

void save_csv(const PanelDataset& ds, const std::string& path, const CsvSchema& schema) {
  std::vector<std::string> header = {schema.unit, schema.period, schema.outcome,
                                     schema.treatment};
  for (std::size_t k = 0; k < ds.covariates().size(); ++k) {
    header.push_back(k < schema.covariates.size() ? schema.covariates[k]
                                                  : "c" + std::to_string(k + 1));
  }
  std::vector<std::vector<std::string>> rows;
  rows.reserve(static_cast<std::size_t>(ds.n_units()) * ds.n_periods());
  for (int i = 0; i < ds.n_units(); ++i) {
    for (int s = 0; s < ds.n_periods(); ++s) {
      std::vector<std::string> row = {
          ds.unit_labels()[static_cast<std::size_t>(i)],
          ds.period_labels()[static_cast<std::size_t>(s)],
          csv::format_double(ds.outcomes()(i, s)),
          std::to_string(ds.treatments()(i, s)),
      };
      for (const auto& c : ds.covariates()) row.push_back(csv::format_double(c(i, s)));
      rows.push_back(std::move(row));
    }
  }
  csv::write_file(path, header, rows);
}

TreatmentMask mask(const PanelDataset& ds, int x) {
  if (!ds.in_support(x)) {
    throw_domain(kModule, "treatment level " + std::to_string(x) +
                              " outside declared support " + support_to_string(ds.support()));
  }
  TreatmentMask m;
  m.x = x;
  m.mask = ds.treatments().array() == x;
  m.count = static_cast<int>(m.mask.count());
  return m;
}

}  // namespace panelmc
