#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "creditlab/common.hpp"

namespace creditlab {

// Monthly annuity payment for principal A over n months at yearly rate apr.
// apr = 0 degenerates to straight principal amortization.
double annuity_payment(double amount, int n_installments, double apr);

// Interest share of a full annuity schedule: n*r*(1+r)^n/((1+r)^n - 1) - 1.
double annuity_interest_factor(int n_installments, double apr);

struct Pricing {
  double apr = 0.0;
  double provision = 0.0;  // upfront fee share of principal
  double lgd = 0.0;        // loss given default, share of principal
};

// A financed loan reduced to what the profit formulas need.
struct LoanOutcome {
  double amount = 0.0;
  int n_installments = 0;
  bool defaulted = false;
};

// Income on one account: provision only when defaulted, provision plus the
// full schedule interest otherwise.
double income(const LoanOutcome& loan, const Pricing& pricing);

// Loss on one account: lgd * amount when defaulted, else 0.
double loss(const LoanOutcome& loan, const Pricing& pricing);

double expected_loss(double pd, double lgd, double exposure);

struct PortfolioTotals {
  double income = 0.0;
  double loss = 0.0;
  double profit = 0.0;  // income - loss exactly
  std::int64_t count = 0;
};

PortfolioTotals portfolio_totals(std::span<const LoanOutcome> loans, const Pricing& pricing);

// One acceptance policy point: accept every loan whose risk value is <= threshold.
struct CurvePoint {
  double threshold = 0.0;       // calibrated probability cut (0 = accept none)
  std::int64_t accepted = 0;
  double acceptance_rate = 0.0;
  double income = 0.0;
  double loss = 0.0;
  double profit = 0.0;
};

// Profit at every distinct risk threshold, riskiest rejected first. Ties on
// the risk value are accepted or rejected together. First point accepts
// nothing, last point accepts everything.
std::vector<CurvePoint> profit_curve(std::span<const double> risk_values,
                                     std::span<const LoanOutcome> loans, const Pricing& pricing);

// The curve point with maximum profit; ties break toward higher acceptance.
const CurvePoint& best_cutoff(std::span<const CurvePoint> curve);

struct SegmentCell {
  int pr_group = 0;            // ascending response probability
  int pd_group = 0;            // ascending default probability
  std::int64_t count = 0;
  double min_pd = 0.0, max_pd = 0.0;
  double min_pr = 0.0, max_pr = 0.0;
  double global_profit = 0.0;  // current loan plus qualifying future cash
};

struct SegmentGridInput {
  double pd = 0.0;             // default probability of the current loan
  double pr = 0.0;             // future cash response probability
  double profit_now = 0.0;     // realized profit of the current loan
  double profit_future = 0.0;  // realized profit of future cash passing the cut
};

// Equal-frequency groups on both probabilities (mass points can collapse
// groups). Returns cells ordered by (pr_group, pd_group); empty cells kept.
std::vector<SegmentCell> segment_grid(std::span<const SegmentGridInput> rows, int groups);

// Ascending group edges used by segment_grid; exposed for threshold derivation.
std::vector<double> quantile_edges(std::span<const double> values, int groups);
int group_of(double value, std::span<const double> edges);

}  // namespace creditlab
