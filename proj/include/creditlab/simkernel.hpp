#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "creditlab/common.hpp"

namespace creditlab {

enum class Product : std::uint8_t { Ins, Css };

inline const char* product_name(Product p) { return p == Product::Ins ? "ins" : "css"; }

// Account status. A = active, B = closed bad (180+ days past due),
// C = closed correctly (everything repaid).
enum class AccountStatus : char { A = 'A', B = 'B', C = 'C' };

inline constexpr int kDueStates = 8;   // due installments 0..7; 7 is absorbing
inline constexpr int kMaxDue = 7;
inline constexpr int kDaysPerDue = 30; // days_past_due = 30 * due_installments

// Row-stochastic matrix over due-installment states.
struct TransitionMatrix {
  std::array<std::array<double, kDueStates>, kDueStates> p{};

  void validate(double tol = 1e-9) const;

  // Banded family: from state d the account can cure completely (to 0), pay
  // one extra installment (to d-1), stay, or miss the new installment (d+1).
  static TransitionMatrix banded(double stay0, double cure_full, double cure_one, double stay);
};

// Smooth prosperity/crisis cycle. The multiplier is applied on the logit
// scale, so multiplier 1.0 is neutral.
struct MacroCycle {
  double amplitude = 0.0;
  int period_months = 96;
  double phase = 0.0;

  double logit_shift(int months_since_start) const;
  double multiplier(int months_since_start) const { return std::exp(logit_shift(months_since_start)); }
};

struct CategoricalSpec {
  std::vector<std::string> values;
  std::vector<double> probs;
  std::vector<double> quality;  // latent-quality contribution per value
};

struct LognormalSpec {
  double median = 0.0;
  double sigma = 0.0;
  double min = 0.0;
  double max = 0.0;

  double draw(std::uint64_t key) const;
};

struct BehaviorWeights {
  double max_due_prev = 0.45;   // due installments across accounts last month
  double max_due_last3 = 0.25;  // worst due over the last three months
  double extra_active = 0.30;   // each concurrent active account beyond one
  double stat_b = 0.80;         // each historical bad closure
  double burden = 1.10;         // (installment + spendings)/income above pivot
  double burden_pivot = 0.60;
  double newest = 0.25;         // the most recently opened active account
};

struct LatentParams {
  double sigma_quality = 0.55;  // idiosyncratic, unobservable part of quality
  double income_weight = 0.50;
  double income_pivot = 850.0;
  double age_weight = 0.012;
  double children_weight = 0.22;
};

struct PropensityParams {
  double past_css = 0.30;       // per prior cash loan (capped at 6)
  double active_css = 0.35;     // has an active cash loan now
  double risk = 0.18;           // cash hunger rises as quality falls
  double sigma_appetite = 1.35; // stable per-customer appetite spread
  int pr_horizon_months = 12;   // response-target observation horizon
};

struct ProductPricing {
  double apr = 0.0;
  double provision = 0.0;
  double lgd = 0.0;
};

struct Demographics {
  LognormalSpec income{850.0, 0.7, 200.0, 50000.0};
  double spendings_share_min = 0.28;
  double spendings_share_span = 0.50;
  double spendings_per_child = 90.0;
  double spendings_max_share = 0.95;
  int age_min = 18;
  int age_max = 75;
  std::vector<double> children_probs{0.42, 0.25, 0.22, 0.08, 0.03};
  CategoricalSpec job_code;
  CategoricalSpec marital_status;
  CategoricalSpec gender;
  CategoricalSpec branch;
  CategoricalSpec city;
  CategoricalSpec home_status;
  CategoricalSpec cars;
};

struct CalibrationBounds {
  double lo = -4.0;
  double hi = 4.0;
  int max_iterations = 20;
};

struct GenConfig {
  int n_customers = 0;
  Period start_period;
  Period end_period;
  std::uint64_t seed = 1;

  double response_rate_target = 0.05;
  double ins_hazard = 0.012;           // monthly spontaneous installment demand

  LognormalSpec ins_amount{5000.0, 0.5, 500.0, 40000.0};
  std::vector<int> ins_term_months{12, 24, 36, 48};
  std::vector<double> ins_term_weights{0.1, 0.2, 0.3, 0.4};
  double cash_amount = 5000.0;
  int cash_term = 24;

  TransitionMatrix base_matrix = TransitionMatrix::banded(0.80, 0.18, 0.27, 0.27);
  std::vector<double> bracket_cuts{-1.6, -0.8, 0.0, 0.8, 1.6};
  std::vector<double> bracket_shifts{-2.2, -1.2, -0.45, 0.25, 1.0, 1.9};
  double risk_shift = 0.0;
  MacroCycle macro{0.32, 96, 0.0};

  BehaviorWeights behavior;
  LatentParams latent;
  PropensityParams propensity;
  Demographics demo;

  ProductPricing pricing_ins{0.01, 0.0, 0.45};
  ProductPricing pricing_css{0.18, 0.0, 0.55};

  CalibrationBounds calibration;

  const ProductPricing& pricing(Product p) const {
    return p == Product::Ins ? pricing_ins : pricing_css;
  }

  void validate() const;  // throws ConfigError on inconsistencies
};

struct CustomerProfile {
  std::int64_t customer_id = 0;
  int age = 0;          // as of age_period; ages with the calendar
  Period age_period;    // month the age field refers to
  double income = 0.0;
  double spendings = 0.0;
  int children = 0;
  std::string gender, job_code, marital_status, branch, city, home_status, cars;
  double latent_quality = 0.0;  // drives delinquency; invisible to models
  double cash_appetite = 0.0;   // drives cash response; invisible to models
};

struct LoanAccount {
  std::int64_t account_id = 0;
  std::int64_t customer_id = 0;
  Product product = Product::Ins;
  Period open_period;
  double amount = 0.0;
  int n_installments = 0;
  double installment = 0.0;
};

struct MonthlySnapshot {
  std::int64_t account_id = 0;
  Period period;
  int due_installments = 0;
  int days_past_due = 0;
  int paid_installments = 0;
  int left_installments = 0;
  AccountStatus status = AccountStatus::A;
};

// One financed application: in the ground-truth universe every application is
// financed somewhere, so applications and accounts coincide.
struct Application {
  LoanAccount account;
  double latent_risk = 0.0;          // origination risk index (ground truth)
  std::array<bool, 4> default_k{};   // default_3, default_6, default_9, default_12
  bool defaulted(int k) const {
    switch (k) {
      case 3: return default_k[0];
      case 6: return default_k[1];
      case 9: return default_k[2];
      case 12: return default_k[3];
    }
    throw DomainError("default_k supports k in {3,6,9,12}");
  }
};

struct World {
  GenConfig cfg;
  std::vector<CustomerProfile> customers;      // customer_id = index + 1
  std::vector<Application> apps;               // sorted by account_id
  std::vector<MonthlySnapshot> snaps;          // grouped per app, months ascending
  std::vector<std::uint32_t> snap_offset;      // size apps.size() + 1
  std::vector<std::vector<std::uint32_t>> customer_apps;  // per customer, in open order

  std::span<const MonthlySnapshot> snapshots_of(std::size_t app_index) const {
    return {snaps.data() + snap_offset[app_index],
            snaps.data() + snap_offset[app_index + 1]};
  }
  const CustomerProfile& profile_of(const Application& a) const {
    return customers[static_cast<std::size_t>(a.account.customer_id) - 1];
  }
  std::size_t app_index_of(std::int64_t account_id) const;
};

// ---- kernel operations ----

// Applies bracket/macro/global shifts to the up-transition mass of each
// non-absorbing row on the logit scale, then renormalizes. Rows whose up-mass
// is 0 or 1 are returned unchanged; state 7 stays absorbing.
TransitionMatrix effective_matrix(const TransitionMatrix& base, int bracket, int months_since_start,
                                  const GenConfig& cfg);

// One month of account life. `u` is a uniform [0,1) draw. Precondition:
// snap.status == A. One new installment falls due while left > 0; the sampled
// state is clamped so paid/left/due stay consistent with n_installments.
MonthlySnapshot step_account(const MonthlySnapshot& snap, const TransitionMatrix& m, double u);

// Static history of the customer's other accounts, used when an account is
// simulated in isolation.
struct CustomerContext {
  const CustomerProfile* profile = nullptr;
  std::span<const MonthlySnapshot> other_snaps;   // any order; filtered by period
  std::span<const LoanAccount> other_accounts;
  const GenConfig* cfg = nullptr;
};

// Simulates one account from open_period until closure or cfg.end_period.
// The behavior bracket is recomputed every month from the other-account
// history plus the account's own snapshots so far (strictly before the month).
std::vector<MonthlySnapshot> simulate_account(const LoanAccount& acct, const CustomerContext& ctx);

// Behavior score pieces, exposed for tests and the generator.
struct HistoryFeatures {
  int max_due_prev = 0;
  int max_due_last3 = 0;
  int n_active_prev = 0;
  int n_stat_b = 0;
};
double customer_score(const CustomerProfile& profile, const HistoryFeatures& f, const GenConfig& cfg);
double account_burden(double installment, const CustomerProfile& profile);
int bracket_of(double score, const GenConfig& cfg);  // 0 = best

// Cash cross-sell spawning for one month. The intercept is solved so the mean
// response probability over eligible customers equals the target; each
// eligible customer then applies independently.
struct CashCandidate {
  std::int64_t customer_id = 0;
  double propensity_index = 0.0;
};
double solve_response_intercept(std::span<const double> indices, double target);
std::vector<std::int64_t> spawn_cash_applications(std::span<const CashCandidate> eligible,
                                                  Period period, const GenConfig& cfg);

// default_k flags from an account's snapshot trail (months on book 1-indexed).
std::array<bool, 4> default_targets(std::span<const MonthlySnapshot> snaps);

World generate_world(const GenConfig& cfg);

// Fully populated baseline configuration (demographic tables included);
// callers override scale, seed and economics as needed.
GenConfig default_gen_config();

struct CalibrationResult {
  GenConfig cfg;
  double achieved = 0.0;
  int iterations = 0;
  std::vector<std::pair<double, double>> trace;  // (risk_shift, default_12)
};

// Monotone bisection over cfg.risk_shift until the generated global
// default_12 rate lands in target ± tol. Throws DataError when the configured
// bounds do not bracket the target.
CalibrationResult calibrate_global_risk(const GenConfig& cfg, double target, double tol);

double global_default12_rate(const World& world);

}  // namespace creditlab
