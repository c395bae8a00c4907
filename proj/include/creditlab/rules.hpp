#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "creditlab/abt.hpp"
#include "creditlab/common.hpp"

namespace creditlab {

// Decline-rule expression language. Grammar (keywords case-insensitive):
//
//   expr       := or_expr
//   or_expr    := and_expr ("or" and_expr)*
//   and_expr   := primary ("and" primary)*
//   primary    := "(" or_expr ")" | comparison
//   comparison := operand (cmpop operand)+          chains read pairwise
//   operand    := identifier | number
//   number     := digits [("." | ",") digits] ["%"]  percent divides by 100
//
// Identifiers name model probabilities or numeric columns of the scoring
// table and resolve case-insensitively at parse time.

enum class CmpOp : std::uint8_t { Lt, Le, Gt, Ge };

std::string_view cmp_symbol(CmpOp op);
bool cmp_holds(double lhs, CmpOp op, double rhs);

struct RuleNode {
  enum class Kind : std::uint8_t { Or, And, Compare };

  struct Operand {
    std::string identifier;   // empty for a literal
    double literal = 0.0;

    bool operator==(const Operand&) const = default;
  };

  Kind kind = Kind::Compare;
  std::vector<RuleNode> children;   // Or/And, at least two
  std::vector<Operand> operands;    // Compare, ops.size() + 1
  std::vector<CmpOp> ops;           // Compare, at least one

  bool operator==(const RuleNode&) const = default;
};

struct RuleExpr {
  RuleNode root;
  std::string text;                        // canonical form
  std::vector<std::string> identifiers;    // canonical spellings, first-use order

  bool operator==(const RuleExpr& o) const { return root == o.root; }
};

// The names a rule may mention: the four model probabilities plus every
// numeric column of the scoring table.
class RuleVocabulary {
 public:
  static const RuleVocabulary& standard();

  void add(std::string canonical);
  // canonical spelling for any case variant; nullopt when unknown
  std::optional<std::string> resolve(std::string_view name) const;

 private:
  std::vector<std::pair<std::string, std::string>> lower_to_canonical_;  // sorted
};

inline constexpr const char* kModelIdentifiers[4] = {"PD_Ins", "PD_Css", "Cross_PD_Css",
                                                     "PR_Css"};

// Throws ConfigError with a 1-based column position on syntax errors and on
// identifiers missing from the vocabulary.
RuleExpr parse_rule(std::string_view text);
RuleExpr parse_rule(std::string_view text, const RuleVocabulary& vocab);

std::string print_rule(const RuleNode& node);

struct RuleOutcome {
  bool fired = false;
  bool missing_operand = false;   // some comparison touched a missing value
};

// Value source for evaluation: model probabilities by canonical name plus the
// scoring-table row for column identifiers. A nullopt probability or a NaN
// cell is a missing value, not an error.
struct RuleEnv {
  const AbtRow* row = nullptr;
  std::vector<std::pair<std::string, std::optional<double>>> models;

  void set_model(std::string name, std::optional<double> p);
  // nullopt = bound but missing; DomainError when the name is bound nowhere
  std::optional<double> lookup(const std::string& identifier) const;
};

// Total: every comparison is evaluated (no short-circuit), so the missing
// flag reports every touched gap deterministically. A comparison with a
// missing side is false.
RuleOutcome evaluate_rule(const RuleExpr& expr, const RuleEnv& env);

}  // namespace creditlab
