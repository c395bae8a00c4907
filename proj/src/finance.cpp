#include "creditlab/finance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace creditlab {

double annuity_payment(double amount, int n_installments, double apr) {
  if (amount <= 0.0 || n_installments <= 0) throw DomainError("annuity needs positive terms");
  const double r = apr / 12.0;
  if (r == 0.0) return amount / n_installments;
  const double f = std::pow(1.0 + r, n_installments);
  return amount * r * f / (f - 1.0);
}

double annuity_interest_factor(int n_installments, double apr) {
  if (n_installments <= 0) throw DomainError("annuity needs positive term");
  const double r = apr / 12.0;
  if (r == 0.0) return 0.0;
  const double f = std::pow(1.0 + r, n_installments);
  return n_installments * r * f / (f - 1.0) - 1.0;
}

double income(const LoanOutcome& loan, const Pricing& pricing) {
  if (loan.defaulted) return loan.amount * pricing.provision;
  return loan.amount * (annuity_interest_factor(loan.n_installments, pricing.apr) +
                        pricing.provision);
}

double loss(const LoanOutcome& loan, const Pricing& pricing) {
  return loan.defaulted ? pricing.lgd * loan.amount : 0.0;
}

double expected_loss(double pd, double lgd, double exposure) { return pd * lgd * exposure; }

PortfolioTotals portfolio_totals(std::span<const LoanOutcome> loans, const Pricing& pricing) {
  PortfolioTotals t;
  for (const LoanOutcome& loan : loans) {
    t.income += income(loan, pricing);
    t.loss += loss(loan, pricing);
  }
  t.profit = t.income - t.loss;
  t.count = static_cast<std::int64_t>(loans.size());
  return t;
}

std::vector<CurvePoint> profit_curve(std::span<const double> risk_values,
                                     std::span<const LoanOutcome> loans, const Pricing& pricing) {
  if (risk_values.size() != loans.size())
    throw DomainError("profit_curve inputs differ in length");
  const std::size_t n = loans.size();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return risk_values[a] < risk_values[b]; });

  std::vector<CurvePoint> curve;
  curve.push_back(CurvePoint{0.0, 0, 0.0, 0.0, 0.0, 0.0});  // accept nothing

  double inc = 0.0, lss = 0.0;
  std::int64_t count = 0;
  std::size_t i = 0;
  while (i < n) {
    const double v = risk_values[order[i]];
    // ties move together: fold the whole tie group into one threshold sample
    while (i < n && risk_values[order[i]] == v) {
      inc += income(loans[order[i]], pricing);
      lss += loss(loans[order[i]], pricing);
      ++count;
      ++i;
    }
    CurvePoint pt;
    pt.threshold = v;
    pt.accepted = count;
    pt.acceptance_rate = n ? static_cast<double>(count) / static_cast<double>(n) : 0.0;
    pt.income = inc;
    pt.loss = lss;
    pt.profit = inc - lss;
    curve.push_back(pt);
  }
  return curve;
}

const CurvePoint& best_cutoff(std::span<const CurvePoint> curve) {
  if (curve.empty()) throw DomainError("empty profit curve");
  std::size_t best = 0;
  for (std::size_t i = 1; i < curve.size(); ++i)
    if (curve[i].profit >= curve[best].profit) best = i;  // ties: higher acceptance
  return curve[best];
}

std::vector<double> quantile_edges(std::span<const double> values, int groups) {
  if (groups < 1) throw DomainError("quantile groups must be positive");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> edges;
  if (sorted.empty()) return edges;
  for (int g = 1; g < groups; ++g) {
    const std::size_t idx =
        std::min(sorted.size() - 1,
                 static_cast<std::size_t>(static_cast<double>(g) * sorted.size() / groups));
    const double e = sorted[idx];
    // mass points collapse; an edge at the minimum would orphan group zero
    if (e > sorted.front() && (edges.empty() || e > edges.back())) edges.push_back(e);
  }
  return edges;
}

int group_of(double value, std::span<const double> edges) {
  int g = 0;
  for (double e : edges) {
    if (value < e)
      return g;
    ++g;
  }
  return g;
}

std::vector<SegmentCell> segment_grid(std::span<const SegmentGridInput> rows, int groups) {
  if (rows.empty()) throw DomainError("segment_grid needs rows");
  std::vector<double> pds, prs;
  pds.reserve(rows.size());
  prs.reserve(rows.size());
  for (const auto& r : rows) {
    pds.push_back(r.pd);
    prs.push_back(r.pr);
  }
  const std::vector<double> pd_edges = quantile_edges(pds, groups);
  const std::vector<double> pr_edges = quantile_edges(prs, groups);
  const int npd = static_cast<int>(pd_edges.size()) + 1;
  const int npr = static_cast<int>(pr_edges.size()) + 1;

  std::vector<SegmentCell> cells(static_cast<std::size_t>(npd * npr));
  for (int ipr = 0; ipr < npr; ++ipr)
    for (int ipd = 0; ipd < npd; ++ipd) {
      SegmentCell& c = cells[static_cast<std::size_t>(ipr * npd + ipd)];
      c.pr_group = ipr;
      c.pd_group = ipd;
    }
  for (const auto& r : rows) {
    const int ipd = group_of(r.pd, pd_edges);
    const int ipr = group_of(r.pr, pr_edges);
    SegmentCell& c = cells[static_cast<std::size_t>(ipr * npd + ipd)];
    if (c.count == 0) {
      c.min_pd = c.max_pd = r.pd;
      c.min_pr = c.max_pr = r.pr;
    } else {
      c.min_pd = std::min(c.min_pd, r.pd);
      c.max_pd = std::max(c.max_pd, r.pd);
      c.min_pr = std::min(c.min_pr, r.pr);
      c.max_pr = std::max(c.max_pr, r.pr);
    }
    ++c.count;
    c.global_profit += r.profit_now + r.profit_future;
  }
  return cells;
}

}  // namespace creditlab
