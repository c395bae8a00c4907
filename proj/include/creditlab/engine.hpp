#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "creditlab/abt.hpp"
#include "creditlab/finance.hpp"
#include "creditlab/rules.hpp"
#include "creditlab/scorecard.hpp"
#include "creditlab/simkernel.hpp"

namespace creditlab {

// ---- strategies ------------------------------------------------------------

struct StrategyRule {
  std::string reason;        // decline reason shown in reports; unique per product
  Product product = Product::Ins;
  RuleExpr rule;
};

struct Strategy {
  std::string id;
  std::string description;
  std::vector<StrategyRule> rules;   // listed order = attribution order

  std::vector<const StrategyRule*> rules_for(Product p) const;
};

// {"id", "description", "rules": [{"product", "reason", "rule"}, ...]}
Strategy strategy_from_json(const std::string& text);
std::string strategy_to_json(const Strategy& s);
Strategy load_strategy(const std::string& path);
void save_strategy(const Strategy& s, const std::string& path);

// Structural decline for cash applications from customers without a visible
// active account the month before: no account, no offer.
inline constexpr const char* kNotKnownCustomer = "Not known customer";
inline constexpr const char* kAcceptedLabel = "Accepted";
inline constexpr const char* kAllLabel = "All";

// ---- ground-truth outcome targets ------------------------------------------

// First cash application of the customer opened within (as_of, as_of+horizon].
const Application* future_cash_app(const World& w, std::int64_t customer_id, Period as_of,
                                   int horizon_months);
bool future_response_target(const World& w, std::int64_t customer_id, Period as_of,
                            int horizon_months);
// default_12 of that future cash loan; nullopt when the customer never took one.
std::optional<bool> future_cash_default_target(const World& w, std::int64_t customer_id,
                                               Period as_of, int horizon_months);

// ---- bank view ---------------------------------------------------------------

// What the bank knows: full histories of accepted accounts, nothing else.
class BankView {
 public:
  explicit BankView(const World& w);

  void accept(std::uint32_t app_index);
  bool accepted(std::uint32_t app_index) const {
    return accepted_[app_index] != 0;
  }
  // Accepted accounts of the customer, open order; spans point into the world.
  std::vector<VisibleAccount> history_of(std::int64_t customer_id) const;
  // Customer holds an accepted account with a status-A snapshot at p.
  bool customer_active_at(std::int64_t customer_id, Period p) const;
  const World& world() const { return *world_; }
  std::int64_t accepted_count() const { return n_accepted_; }

 private:
  const World* world_ = nullptr;
  std::vector<std::vector<std::uint32_t>> per_customer_;
  std::vector<char> accepted_;
  std::int64_t n_accepted_ = 0;
};

// ---- decisions and reports ---------------------------------------------------

struct ModelScores {
  std::optional<double> pd_ins, pd_css, cross_pd_css, pr_css;
};

ModelScores score_all(const ModelSuite& suite, const AbtRow& row);

struct AppDecision {
  std::uint32_t app_index = 0;
  bool accepted = false;
  std::string reason;              // decline reason or "Accepted"
  ModelScores scores;              // as seen at decision time
  bool missing_operand = false;    // some evaluated rule touched a missing value
};

struct ReasonRow {
  std::string reason;
  std::int64_t count = 0;
  double share = 0.0;      // of the product's applications
  double amount = 0.0;
  double risk = 0.0;       // ground-truth default_12 rate
  double profit = 0.0;     // ground-truth income - loss
};

struct ProductBlock {
  Product product = Product::Ins;
  std::vector<ReasonRow> rows;   // declines in attribution order, Accepted, All
};

struct YearKpi {
  int year = 0;
  double income = 0.0, loss = 0.0, profit = 0.0;
};

struct ParamRow {
  std::string parameter;
  std::optional<double> accepted, all;   // means over scoreable rows
};

struct GiniRow {
  std::string model;
  std::optional<double> accepted, all;   // nullopt = undefined (single class/empty)
};

struct StrategyReport {
  std::string strategy_id;
  Period from, to;
  ProductBlock ins, css;
  std::vector<YearKpi> years;        // accepted loans by open year, both products
  std::vector<ParamRow> params;      // mean PD / PR Css / Cross PD Css
  std::vector<GiniRow> ginis;        // per model, Accepted vs All
};

struct StrategyRun {
  BankView bank;
  std::vector<AppDecision> decisions;   // application order within [from, to]
  StrategyReport report;
};

// Months run in order; all applications of a month are evaluated against the
// bank state at the start of the month and accepted histories commit in
// application-id order afterwards.
StrategyRun run_strategy(const World& w, const ModelSuite& suite, const Strategy& s,
                         Period from, Period to);

// Gini per model on the decision-time scores, accepted subset vs everyone.
std::vector<GiniRow> model_power_report(const World& w, std::span<const AppDecision> decisions,
                                        Period from, Period to);

// ---- reject inference ----------------------------------------------------------

struct RejectInferenceReport {
  double expected_profit = 0.0;    // accepted profit when nothing is hidden
  double realized_profit = 0.0;    // accepted profit of the visibility-bound run
  double gap = 0.0;                // expected - realized
  double relative_gap = 0.0;       // gap / |expected|, 0 when expected == 0
  StrategyReport expected;         // full-information run report
  StrategyReport realized;
};

// The same strategy decided twice: once with every account visible and cash
// eligibility taken from the universe, once through the bank's keyhole.
RejectInferenceReport expected_vs_realized(const World& w, const ModelSuite& suite,
                                           const Strategy& s, Period from, Period to);

// ---- cut-off derivation ---------------------------------------------------------

struct CutoffDerivation {
  double css_cut = 0.0;     // profit-curve argmax on cash PD
  double t0 = 0.0;          // top of the last cleanly profitable instalment PD group
  double t1 = 0.0;          // bottom of the first hard-rejected PD group
  double pr_floor = 0.0;    // bottom of the first comfortably-responsive PR group
  std::vector<CurvePoint> css_curve;
  std::vector<SegmentCell> grid;
  Strategy strategy;        // the three rules spelled out with those numbers
};

// Full-information sweep: cash profit curve fixes the cash cut, then the
// PR x PD segment grid over instalment applications fixes the band rules.
// Future cash profit counts only when that loan passes the cash cut.
CutoffDerivation derive_cutoff_strategy(const World& w, const ModelSuite& suite,
                                        Period from, Period to, int groups = 5);

}  // namespace creditlab
