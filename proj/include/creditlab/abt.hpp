#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "creditlab/common.hpp"
#include "creditlab/simkernel.hpp"

namespace creditlab {

// ---- schema -------------------------------------------------------------

inline constexpr int kAbtColumns = 204;
inline constexpr int kAbtCharFirst = 12;   // app_char_branch
inline constexpr int kAbtCharCount = 7;

enum class Stat : std::uint8_t { Max, Mean, Min };
enum class MissingMode : std::uint8_t { Ags, Agr };  // ags: gaps poison; agr: gaps skipped
enum class Measure : std::uint8_t { Days, Due };
enum class ProductClass : std::uint8_t { Css, Ins, All };

struct WindowSpec {
  Stat stat = Stat::Max;
  int window = 12;             // months, [as_of-window, as_of-1]
  MissingMode mode = MissingMode::Ags;
  Measure measure = Measure::Days;
  ProductClass product = ProductClass::All;

  std::string name() const;    // e.g. ags12_Max_CMaxA_Due
};

enum class ColumnKind : std::uint8_t { Id, Numeric, Categorical };

class AbtSchema {
 public:
  const std::vector<std::string>& names() const { return names_; }
  int index_of(std::string_view name) const;           // case-insensitive; -1 if absent
  ColumnKind kind(int col) const { return kinds_[static_cast<std::size_t>(col)]; }
  // Only meaningful for the windowed block (columns 60..203).
  const WindowSpec* window_spec(int col) const;
  const std::string& description(int col) const { return descriptions_[static_cast<std::size_t>(col)]; }

 private:
  friend const AbtSchema& abt_schema();
  AbtSchema();

  std::vector<std::string> names_;
  std::vector<std::string> descriptions_;
  std::vector<ColumnKind> kinds_;
  std::vector<WindowSpec> window_specs_;   // size 144, col - 60
  std::vector<std::pair<std::string, int>> lower_index_;  // sorted lowercase name -> col
};

const AbtSchema& abt_schema();

// Machine-readable column dictionary (JSON text, one entry per column).
std::string abt_data_dictionary();

// ---- row ----------------------------------------------------------------

// One application scored as of its decision month. Numeric cells use NaN for
// missing; ids and period are mirrored into num[] as exact doubles.
struct AbtRow {
  std::int64_t cid = 0;   // application (account) id
  std::int64_t aid = 0;   // customer id
  Period period;
  std::array<std::string, kAbtCharCount> chars{};   // columns 12..18
  std::vector<double> num = std::vector<double>(kAbtColumns, missing_value());

  double numeric(int col) const { return num[static_cast<std::size_t>(col)]; }
  const std::string& categorical(int col) const {
    return chars[static_cast<std::size_t>(col - kAbtCharFirst)];
  }
};

// ---- history views ------------------------------------------------------

// An account as some observer is allowed to see it. Snapshots are months
// ascending from open; the builder ignores everything at/after as_of.
struct VisibleAccount {
  std::int64_t account_id = 0;
  Product product = Product::Ins;
  Period open_period;
  double installment = 0.0;
  std::span<const MonthlySnapshot> snaps;
};

// Full-universe view of one customer's accounts (ground truth observer).
std::vector<VisibleAccount> universe_history(const World& w, std::int64_t customer_id);

// ---- operations ----------------------------------------------------------

// Worst value of the measure across the customer's accounts of the product
// class holding a snapshot in that month; missing if none.
double customer_month_max(std::span<const VisibleAccount> accounts, Period month,
                          ProductClass product, Measure measure);

// Monthly value series keyed by period; months outside the range are missing.
struct MonthlySeries {
  Period first;
  std::vector<double> values;

  double at(Period p) const {
    const int off = months_between(first, p);
    if (off < 0 || off >= static_cast<int>(values.size())) return missing_value();
    return values[static_cast<std::size_t>(off)];
  }
};

// Statistic over the spec.window months strictly before as_of. ags returns
// missing if any month in the window is missing; agr aggregates the
// non-missing months and is missing only when all are.
double window_aggregate(const MonthlySeries& series, const WindowSpec& spec, Period as_of);

// Builds all 204 fields from whatever history the observer may see. Only
// snapshots strictly before as_of contribute; the application's own account
// (opened at as_of) never does.
AbtRow build_abt_row(const Application& app, const CustomerProfile& cust,
                     std::span<const VisibleAccount> history, Period as_of);

// True iff due installments reach the horizon threshold (2 for k=3, else 3)
// within the first k months on book.
bool compute_default_target(std::span<const MonthlySnapshot> snaps, int horizon_k);

// ---- serialization -------------------------------------------------------

class CsvWriter;

// Label block appended after the 204 columns when requested.
struct AbtLabels {
  Product product = Product::Ins;
  std::array<bool, 4> default_k{};   // default_3/6/9/12
};

std::vector<std::string> abt_csv_header(bool with_labels);
void append_abt_csv_row(CsvWriter& out, const AbtRow& row, const AbtLabels* labels);

}  // namespace creditlab
