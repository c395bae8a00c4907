#include "creditlab/reports.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "creditlab/csv.hpp"
#include "creditlab/rng.hpp"
#include "creditlab/scorecard.hpp"

namespace creditlab {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::uint64_t kTagPowerNoise = 0x504f574eULL;   // experiment noise stream

}  // namespace

std::vector<VintageRow> vintage_report(const World& w, Product p) {
  std::map<Period, VintageRow> by_month;
  for (const Application& a : w.apps) {
    if (a.account.product != p) continue;
    VintageRow& row = by_month[a.account.open_period];
    row.open_period = a.account.open_period;
    row.opened += 1;
    row.default_3 += a.defaulted(3) ? 1.0 : 0.0;
    row.default_6 += a.defaulted(6) ? 1.0 : 0.0;
    row.default_9 += a.defaulted(9) ? 1.0 : 0.0;
    row.default_12 += a.defaulted(12) ? 1.0 : 0.0;
  }
  std::vector<VintageRow> out;
  for (auto& [period, row] : by_month) {
    const double n = static_cast<double>(row.opened);
    row.default_3 /= n;
    row.default_6 /= n;
    row.default_9 /= n;
    row.default_12 /= n;
    out.push_back(row);
  }
  return out;
}

std::vector<StockRow> stock_report(const World& w) {
  const int span = months_between(w.cfg.start_period, w.cfg.end_period) + 1;
  std::vector<StockRow> rows(static_cast<std::size_t>(span));
  std::vector<std::vector<std::int64_t>> holders(static_cast<std::size_t>(span));
  for (int m = 0; m < span; ++m) rows[static_cast<std::size_t>(m)].period =
      w.cfg.start_period.plus_months(m);

  for (std::uint32_t i = 0; i < w.apps.size(); ++i) {
    const Application& a = w.apps[i];
    if (a.account.product == Product::Css) {
      const int m = months_between(w.cfg.start_period, a.account.open_period);
      if (m > 0) rows[static_cast<std::size_t>(m - 1)].css_apps_next += 1;
    }
    for (const MonthlySnapshot& s : w.snapshots_of(i)) {
      if (s.status != AccountStatus::A) continue;
      const int m = months_between(w.cfg.start_period, s.period);
      if (m < 0 || m >= span) continue;
      StockRow& row = rows[static_cast<std::size_t>(m)];
      (a.account.product == Product::Ins ? row.active_ins : row.active_css) += 1;
      holders[static_cast<std::size_t>(m)].push_back(a.account.customer_id);
    }
  }
  for (int m = 0; m < span; ++m) {
    auto& ids = holders[static_cast<std::size_t>(m)];
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    StockRow& row = rows[static_cast<std::size_t>(m)];
    row.active_customers = static_cast<std::int64_t>(ids.size());
    row.response_rate = row.active_customers
                            ? static_cast<double>(row.css_apps_next) /
                                  static_cast<double>(row.active_customers)
                            : 0.0;
  }
  return rows;
}

std::vector<PowerProfitRow> power_profit_experiment(const World& w,
                                                    std::span<const double> noise_levels,
                                                    std::uint64_t seed, const Pricing& pricing) {
  std::vector<double> latent;
  std::vector<LoanOutcome> outcomes;
  std::vector<int> bads;
  for (const Application& a : w.apps) {
    if (a.account.product != Product::Ins) continue;
    latent.push_back(a.latent_risk);
    outcomes.push_back(LoanOutcome{a.account.amount, a.account.n_installments, a.defaulted(12)});
    bads.push_back(a.defaulted(12) ? 1 : 0);
  }
  if (latent.size() < 2) throw DataError("power experiment needs at least two installment loans");

  double mean = 0.0;
  for (const double v : latent) mean += v;
  mean /= static_cast<double>(latent.size());
  double var = 0.0;
  for (const double v : latent) var += (v - mean) * (v - mean);
  var /= static_cast<double>(latent.size());
  if (var <= 0.0) throw DataError("power experiment: the risk index carries no spread");
  const double sd = std::sqrt(var);

  std::vector<PowerProfitRow> out;
  std::vector<double> risk(latent.size());
  for (std::size_t level = 0; level < noise_levels.size(); ++level) {
    const double lambda = noise_levels[level];
    if (lambda < 0.0 || lambda > 1.0)
      throw DomainError("noise level must lie in [0, 1]");
    for (std::size_t i = 0; i < latent.size(); ++i) {
      const double z = (latent[i] - mean) / sd;
      const double eps = rng::normal(rng::key(seed, kTagPowerNoise, level, i));
      risk[i] = (1.0 - lambda) * z + lambda * eps;
    }
    PowerProfitRow row;
    row.noise = lambda;
    row.gini = try_gini(risk, bads).value_or(0.0);
    const auto curve = profit_curve(risk, outcomes, pricing);
    const CurvePoint& best = best_cutoff(curve);
    row.best_profit = best.profit;
    row.best_acceptance = best.acceptance_rate;
    row.best_threshold = best.threshold;
    row.full_profit = curve.back().profit;
    out.push_back(row);
  }
  return out;
}

// ---- file emitters -----------------------------------------------------------------

void write_vintage_csv(std::span<const VintageRow> rows, Product p, const std::string& path) {
  CsvWriter csv(path, {"open_period", "product", "opened", "default_3", "default_6",
                       "default_9", "default_12"});
  for (const VintageRow& r : rows) {
    csv.field(r.open_period.yyyymm());
    csv.field(product_name(p));
    csv.field(r.opened);
    csv.field(r.default_3);
    csv.field(r.default_6);
    csv.field(r.default_9);
    csv.field(r.default_12);
    csv.end_row();
  }
  csv.close();
}

void write_stock_csv(std::span<const StockRow> rows, const std::string& path) {
  CsvWriter csv(path, {"period", "active_ins", "active_css", "active_customers",
                       "css_apps_next", "response_rate"});
  for (const StockRow& r : rows) {
    csv.field(r.period.yyyymm());
    csv.field(r.active_ins);
    csv.field(r.active_css);
    csv.field(r.active_customers);
    csv.field(r.css_apps_next);
    csv.field(r.response_rate);
    csv.end_row();
  }
  csv.close();
}

void write_power_profit_csv(std::span<const PowerProfitRow> rows, const std::string& path) {
  CsvWriter csv(path, {"noise", "gini", "best_profit", "best_acceptance", "best_threshold",
                       "full_profit"});
  for (const PowerProfitRow& r : rows) {
    csv.field(r.noise);
    csv.field(r.gini);
    csv.field(r.best_profit);
    csv.field(r.best_acceptance);
    csv.field(r.best_threshold);
    csv.field(r.full_profit);
    csv.end_row();
  }
  csv.close();
}

void write_profit_curve_csv(std::span<const CurvePoint> curve, const std::string& path) {
  CsvWriter csv(path, {"threshold", "accepted", "acceptance_rate", "income", "loss", "profit"});
  for (const CurvePoint& pt : curve) {
    csv.field(pt.threshold);
    csv.field(pt.accepted);
    csv.field(pt.acceptance_rate);
    csv.field(pt.income);
    csv.field(pt.loss);
    csv.field(pt.profit);
    csv.end_row();
  }
  csv.close();
}

void write_segment_grid_csv(std::span<const SegmentCell> cells, const std::string& path) {
  CsvWriter csv(path, {"pr_group", "pd_group", "count", "min_pd", "max_pd", "min_pr",
                       "max_pr", "global_profit"});
  for (const SegmentCell& c : cells) {
    csv.field(c.pr_group);
    csv.field(c.pd_group);
    csv.field(c.count);
    csv.field(c.min_pd);
    csv.field(c.max_pd);
    csv.field(c.min_pr);
    csv.field(c.max_pr);
    csv.field(c.global_profit);
    csv.end_row();
  }
  csv.close();
}

namespace {

ordered_json block_to_json(const ProductBlock& b) {
  ordered_json rows = ordered_json::array();
  for (const ReasonRow& r : b.rows) {
    rows.push_back(ordered_json{{"reason", r.reason},
                                {"count", r.count},
                                {"share", r.share},
                                {"amount", r.amount},
                                {"risk", r.risk},
                                {"profit", r.profit}});
  }
  return ordered_json{{"product", product_name(b.product)}, {"rows", std::move(rows)}};
}

ordered_json optional_to_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v;
}

}  // namespace

std::string strategy_report_to_json(const StrategyReport& r) {
  ordered_json j;
  j["strategy_id"] = r.strategy_id;
  j["from"] = r.from.yyyymm();
  j["to"] = r.to.yyyymm();
  j["ins"] = block_to_json(r.ins);
  j["css"] = block_to_json(r.css);
  ordered_json years = ordered_json::array();
  for (const YearKpi& y : r.years)
    years.push_back(ordered_json{
        {"year", y.year}, {"income", y.income}, {"loss", y.loss}, {"profit", y.profit}});
  j["years"] = std::move(years);
  ordered_json params = ordered_json::array();
  for (const ParamRow& p : r.params)
    params.push_back(ordered_json{{"parameter", p.parameter},
                                  {"accepted", optional_to_json(p.accepted)},
                                  {"all", optional_to_json(p.all)}});
  j["average_parameters"] = std::move(params);
  ordered_json ginis = ordered_json::array();
  for (const GiniRow& g : r.ginis)
    ginis.push_back(ordered_json{{"model", g.model},
                                 {"accepted", optional_to_json(g.accepted)},
                                 {"all", optional_to_json(g.all)}});
  j["gini"] = std::move(ginis);
  return j.dump(2) + "\n";
}

void save_strategy_report(const StrategyReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out.good()) throw DataError("cannot write report " + path);
  out << strategy_report_to_json(r);
}

void write_strategy_report_csv(const StrategyReport& r, const std::string& path) {
  // long format: every number is one row, so one header fits every block
  CsvWriter csv(path, {"block", "product", "label", "metric", "value"});
  auto put = [&](std::string_view block, std::string_view product, std::string_view label,
                 std::string_view metric, double value) {
    csv.field(block);
    csv.field(product);
    csv.field(label);
    csv.field(metric);
    csv.field(value);
    csv.end_row();
  };
  for (const ProductBlock* b : {&r.ins, &r.css}) {
    const char* product = product_name(b->product);
    for (const ReasonRow& row : b->rows) {
      put("decisions", product, row.reason, "count", static_cast<double>(row.count));
      put("decisions", product, row.reason, "share", row.share);
      put("decisions", product, row.reason, "amount", row.amount);
      put("decisions", product, row.reason, "risk", row.risk);
      put("decisions", product, row.reason, "profit", row.profit);
    }
  }
  for (const YearKpi& y : r.years) {
    const std::string year = std::to_string(y.year);
    put("years", "", year, "income", y.income);
    put("years", "", year, "loss", y.loss);
    put("years", "", year, "profit", y.profit);
  }
  for (const ParamRow& p : r.params) {
    if (p.accepted) put("average_parameters", "", p.parameter, "accepted", *p.accepted);
    if (p.all) put("average_parameters", "", p.parameter, "all", *p.all);
  }
  for (const GiniRow& g : r.ginis) {
    if (g.accepted) put("gini", "", g.model, "accepted", *g.accepted);
    if (g.all) put("gini", "", g.model, "all", *g.all);
  }
  csv.close();
}

std::string reject_inference_to_json(const RejectInferenceReport& r) {
  ordered_json j;
  j["expected_profit"] = r.expected_profit;
  j["realized_profit"] = r.realized_profit;
  j["gap"] = r.gap;
  j["relative_gap"] = r.relative_gap;
  j["expected"] = ordered_json::parse(strategy_report_to_json(r.expected));
  j["realized"] = ordered_json::parse(strategy_report_to_json(r.realized));
  return j.dump(2) + "\n";
}

}  // namespace creditlab
