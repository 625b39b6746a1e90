#include "panelmc/matching.hpp"

#include <algorithm>
#include <cmath>

#include "panelmc/csv.hpp"
#include "panelmc/errors.hpp"

namespace panelmc {

namespace {

constexpr const char* kModule = "matching";

struct Candidate {
  double dist;
  int j;
  int s;
  bool operator<(const Candidate& o) const {
    if (dist != o.dist) return dist < o.dist;
    if (j != o.j) return j < o.j;  // fixed lexicographic tie-break (j, then s)
    return s < o.s;
  }
};

Eigen::MatrixXd pairwise_sq_dists(const Eigen::MatrixXd& rows) {
  const int n = static_cast<int>(rows.rows());
  Eigen::VectorXd sq = rows.rowwise().squaredNorm();
  Eigen::MatrixXd d = sq.replicate(1, n) + sq.transpose().replicate(n, 1) -
                      2.0 * rows * rows.transpose();
  return d.cwiseMax(0.0);
}

void validate_inputs(const FactorStructure& fs, const PanelDataset& ds, int x,
                     const MatchConfig& cfg, const TreatmentMask& m) {
  if (fs.loadings.rows() != ds.n_units() || fs.factors.rows() != ds.n_periods()) {
    throw_domain(kModule, "factor structure shape differs from panel shape");
  }
  if (m.count < 1) {
    throw_domain(kModule, "no observations at treatment level " + std::to_string(x));
  }
  if (cfg.rule.kind == NeighborRule::Kind::KNearest && cfg.rule.k < 1) {
    throw_domain(kModule, "k must be at least 1");
  }
  if (cfg.rule.kind == NeighborRule::Kind::Radius &&
      (cfg.rule.tau <= 0.0 || cfg.rule.upsilon <= 0.0)) {
    throw_domain(kModule, "radius bandwidths must be positive");
  }
}

double fallback_mean(const PanelDataset& ds, const TreatmentMask& m) {
  double sum = 0.0;
  for (int t = 0; t < ds.n_periods(); ++t)
    for (int i = 0; i < ds.n_units(); ++i)
      if (m.mask(i, t)) sum += ds.outcomes()(i, t);
  return sum / m.count;
}

}  // namespace

std::string MatchedCounterfactual::method_label() const {
  std::string base = mode == MatchMode::Simple ? "SM" : "TWM";
  if (rule.kind == NeighborRule::Kind::KNearest) {
    return base + "-" + std::to_string(rule.k);
  }
  return base + "-R";
}

MatchedCounterfactual simple_match(const FactorStructure& fs, const PanelDataset& ds,
                                   int x, const MatchConfig& cfg) {
  const TreatmentMask m = mask(ds, x);
  validate_inputs(fs, ds, x, cfg, m);
  const int n = ds.n_units();
  const int t = ds.n_periods();
  const Eigen::MatrixXd& y = ds.outcomes();
  const Eigen::MatrixXd dl = pairwise_sq_dists(fs.loadings);
  const Eigen::MatrixXd df = pairwise_sq_dists(fs.factors);

  std::vector<std::pair<int, int>> pool;  // all cells with X_js = x
  pool.reserve(static_cast<std::size_t>(m.count));
  for (int j = 0; j < n; ++j)
    for (int s = 0; s < t; ++s)
      if (m.mask(j, s)) pool.emplace_back(j, s);
  const double pool_mean = fallback_mean(ds, m);

  MatchedCounterfactual out;
  out.x = x;
  out.mode = MatchMode::Simple;
  out.rule = cfg.rule;
  out.y_tilde = y;
  out.n_it = Eigen::MatrixXi::Zero(n, t);
  int short_cells = 0;

  std::vector<Candidate> cands;
  cands.reserve(pool.size());
  for (int i = 0; i < n; ++i) {
    for (int s = 0; s < t; ++s) {
      if (m.mask(i, s)) {
        out.n_it(i, s) = 1;
        out.match_weights[{i, s}] = {{i, s, 1.0, 0.0}};
        continue;
      }
      cands.clear();
      if (cfg.rule.kind == NeighborRule::Kind::KNearest) {
        for (const auto& [j, ss] : pool) cands.push_back({dl(i, j) + df(s, ss), j, ss});
        const int take = std::min<int>(cfg.rule.k, static_cast<int>(cands.size()));
        if (take < cfg.rule.k) ++short_cells;
        std::partial_sort(cands.begin(), cands.begin() + take, cands.end());
        cands.resize(static_cast<std::size_t>(take));
      } else {
        const double tau2 = cfg.rule.tau * cfg.rule.tau;
        const double ups2 = cfg.rule.upsilon * cfg.rule.upsilon;
        for (const auto& [j, ss] : pool) {
          if (dl(i, j) <= tau2 && df(s, ss) <= ups2) {
            cands.push_back({dl(i, j) + df(s, ss), j, ss});
          }
        }
      }
      if (cands.empty()) {
        out.y_tilde(i, s) = pool_mean;
        out.fallback_cells.emplace_back(i, s);
        continue;
      }
      const double w = 1.0 / static_cast<double>(cands.size());
      double acc = 0.0;
      auto& contribs = out.match_weights[{i, s}];
      for (const auto& c : cands) {
        acc += y(c.j, c.s);
        contribs.push_back({c.j, c.s, w, c.dist});
      }
      out.y_tilde(i, s) = acc * w;
      out.n_it(i, s) = static_cast<int>(cands.size());
    }
  }
  if (short_cells > 0) {
    out.warnings.push_back(std::to_string(short_cells) +
                           " cell(s) had fewer feasible candidates than k; used all available");
  }
  return out;
}

MatchedCounterfactual two_way_match(const FactorStructure& fs, const PanelDataset& ds,
                                    int x, const MatchConfig& cfg) {
  const TreatmentMask m = mask(ds, x);
  validate_inputs(fs, ds, x, cfg, m);
  const int n = ds.n_units();
  const int t = ds.n_periods();
  const Eigen::MatrixXd& y = ds.outcomes();
  const Eigen::MatrixXd dl = pairwise_sq_dists(fs.loadings);
  const Eigen::MatrixXd df = pairwise_sq_dists(fs.factors);

  // units_at[s]: units observed at level x in period s; periods_at[i] likewise.
  std::vector<std::vector<int>> units_at(static_cast<std::size_t>(t));
  std::vector<std::vector<int>> periods_at(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    for (int s = 0; s < t; ++s) {
      if (m.mask(j, s)) {
        units_at[static_cast<std::size_t>(s)].push_back(j);
        periods_at[static_cast<std::size_t>(j)].push_back(s);
      }
    }
  }
  const double pool_mean = fallback_mean(ds, m);

  MatchedCounterfactual out;
  out.x = x;
  out.mode = MatchMode::TwoWay;
  out.rule = cfg.rule;
  out.y_tilde = y;
  out.n_it = Eigen::MatrixXi::Zero(n, t);
  int short_cells = 0;

  const double tau2 = cfg.rule.tau * cfg.rule.tau;
  const double ups2 = cfg.rule.upsilon * cfg.rule.upsilon;
  std::vector<Candidate> cands;
  for (int i = 0; i < n; ++i) {
    for (int s = 0; s < t; ++s) {
      if (m.mask(i, s)) {
        out.n_it(i, s) = 1;
        out.match_weights[{i, s}] = {{i, s, 1.0, 0.0}};
        continue;
      }
      cands.clear();
      // Pairs (j, ss) with X_{i,ss} = X_{j,s} = X_{j,ss} = x, j != i, ss != s.
      for (int j : units_at[static_cast<std::size_t>(s)]) {
        if (j == i) continue;
        const double dlj = dl(i, j);
        if (cfg.rule.kind == NeighborRule::Kind::Radius && dlj > tau2) continue;
        for (int ss : periods_at[static_cast<std::size_t>(i)]) {
          if (ss == s || !m.mask(j, ss)) continue;
          const double dfs = df(s, ss);
          if (cfg.rule.kind == NeighborRule::Kind::Radius && dfs > ups2) continue;
          cands.push_back({dlj + dfs, j, ss});
        }
      }
      if (cfg.rule.kind == NeighborRule::Kind::KNearest && !cands.empty()) {
        const int take = std::min<int>(cfg.rule.k, static_cast<int>(cands.size()));
        if (take < cfg.rule.k) ++short_cells;
        std::partial_sort(cands.begin(), cands.begin() + take, cands.end());
        cands.resize(static_cast<std::size_t>(take));
      }
      if (cands.empty()) {
        out.y_tilde(i, s) = pool_mean;
        out.fallback_cells.emplace_back(i, s);
        continue;
      }
      const double w = 1.0 / static_cast<double>(cands.size());
      double acc = 0.0;
      std::map<std::pair<int, int>, std::pair<double, double>> agg;  // weight, min dist
      auto add = [&agg](int cj, int cs, double dw, double dist) {
        auto [it2, fresh] = agg.emplace(std::pair<int, int>{cj, cs},
                                        std::pair<double, double>{0.0, dist});
        it2->second.first += dw;
        if (!fresh) it2->second.second = std::min(it2->second.second, dist);
      };
      for (const auto& c : cands) {
        acc += y(i, c.s) + y(c.j, s) - y(c.j, c.s);
        add(i, c.s, w, c.dist);
        add(c.j, s, w, c.dist);
        add(c.j, c.s, -w, c.dist);
      }
      auto& contribs = out.match_weights[{i, s}];
      for (const auto& [cell, wd] : agg) {
        contribs.push_back({cell.first, cell.second, wd.first, wd.second});
      }
      out.y_tilde(i, s) = acc * w;
      out.n_it(i, s) = static_cast<int>(cands.size());
    }
  }
  if (short_cells > 0) {
    out.warnings.push_back(std::to_string(short_cells) +
                           " cell(s) had fewer feasible pairs than k; used all available");
  }
  return out;
}

void write_match_audit_csv(const MatchedCounterfactual& mc, const PanelDataset& ds,
                           const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& [cell, contribs] : mc.match_weights) {
    for (const auto& c : contribs) {
      rows.push_back({ds.unit_labels()[static_cast<std::size_t>(cell.first)],
                      ds.period_labels()[static_cast<std::size_t>(cell.second)],
                      ds.unit_labels()[static_cast<std::size_t>(c.j)],
                      ds.period_labels()[static_cast<std::size_t>(c.s)],
                      csv::format_double(c.distance),
                      csv::format_double(c.weight),
                      csv::format_double(mc.y_tilde(cell.first, cell.second))});
    }
  }
  for (const auto& [i, s] : mc.fallback_cells) {
    rows.push_back({ds.unit_labels()[static_cast<std::size_t>(i)],
                    ds.period_labels()[static_cast<std::size_t>(s)], "", "", "", "fallback",
                    csv::format_double(mc.y_tilde(i, s))});
  }
  csv::write_file(path,
                  {"unit", "period", "match_unit", "match_period", "distance", "weight",
                   "y_tilde"},
                  rows);
}

}  // namespace panelmc
