#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "creditlab/engine.hpp"
#include "creditlab/finance.hpp"
#include "creditlab/simkernel.hpp"

namespace creditlab {

// ---- vintage report ----------------------------------------------------------

// default_k shares among accounts opened in one month. Months without
// originations produce no row.
struct VintageRow {
  Period open_period;
  std::int64_t opened = 0;
  double default_3 = 0.0, default_6 = 0.0, default_9 = 0.0, default_12 = 0.0;
};

std::vector<VintageRow> vintage_report(const World& w, Product p);

// ---- stock report --------------------------------------------------------------

// Monthly portfolio stock. The response rate relates next month's cash
// applications to this month's active customer base.
struct StockRow {
  Period period;
  std::int64_t active_ins = 0;        // status-A accounts this month
  std::int64_t active_css = 0;
  std::int64_t active_customers = 0;  // customers holding any status-A account
  std::int64_t css_apps_next = 0;     // cash applications opened next month
  double response_rate = 0.0;         // css_apps_next / active_customers
};

std::vector<StockRow> stock_report(const World& w);

// ---- controlled-power experiment -------------------------------------------------

// One row per noise level: a risk ranking of the installment book degraded by
// seeded noise, its Gini against default_12, and the profit-curve optimum.
struct PowerProfitRow {
  double noise = 0.0;            // 0 = ground-truth ranking, 1 = pure noise
  double gini = 0.0;
  double best_profit = 0.0;
  double best_acceptance = 0.0;
  double best_threshold = 0.0;
  double full_profit = 0.0;      // accept-everything endpoint
};

std::vector<PowerProfitRow> power_profit_experiment(const World& w,
                                                    std::span<const double> noise_levels,
                                                    std::uint64_t seed, const Pricing& pricing);

// ---- file emitters -----------------------------------------------------------------

void write_vintage_csv(std::span<const VintageRow> rows, Product p, const std::string& path);
void write_stock_csv(std::span<const StockRow> rows, const std::string& path);
void write_power_profit_csv(std::span<const PowerProfitRow> rows, const std::string& path);
void write_profit_curve_csv(std::span<const CurvePoint> curve, const std::string& path);
void write_segment_grid_csv(std::span<const SegmentCell> cells, const std::string& path);

// Blocks in table order: per-product decline rows, yearly KPIs, average
// parameters, Gini table. One CSV with a leading block column.
void write_strategy_report_csv(const StrategyReport& r, const std::string& path);
std::string strategy_report_to_json(const StrategyReport& r);
void save_strategy_report(const StrategyReport& r, const std::string& path);
std::string reject_inference_to_json(const RejectInferenceReport& r);

}  // namespace creditlab
