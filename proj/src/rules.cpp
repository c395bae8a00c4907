#include "creditlab/rules.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace creditlab {

namespace {

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string_view cmp_symbol(CmpOp op) {
  switch (op) {
    case CmpOp::Lt: return "<";
    case CmpOp::Le: return "<=";
    case CmpOp::Gt: return ">";
    case CmpOp::Ge: return ">=";
  }
  throw DomainError("unknown comparison operator");
}

bool cmp_holds(double lhs, CmpOp op, double rhs) {
  switch (op) {
    case CmpOp::Lt: return lhs < rhs;
    case CmpOp::Le: return lhs <= rhs;
    case CmpOp::Gt: return lhs > rhs;
    case CmpOp::Ge: return lhs >= rhs;
  }
  throw DomainError("unknown comparison operator");
}

// ---- vocabulary -----------------------------------------------------------

void RuleVocabulary::add(std::string canonical) {
  std::pair<std::string, std::string> entry{to_lower(canonical), std::move(canonical)};
  const auto it = std::lower_bound(
      lower_to_canonical_.begin(), lower_to_canonical_.end(), entry,
      [](const auto& a, const auto& b) { return a.first < b.first; });
  if (it != lower_to_canonical_.end() && it->first == entry.first) return;
  lower_to_canonical_.insert(it, std::move(entry));
}

std::optional<std::string> RuleVocabulary::resolve(std::string_view name) const {
  const std::string key = to_lower(name);
  const auto it = std::lower_bound(
      lower_to_canonical_.begin(), lower_to_canonical_.end(), key,
      [](const auto& a, const std::string& b) { return a.first < b; });
  if (it == lower_to_canonical_.end() || it->first != key) return std::nullopt;
  return it->second;
}

const RuleVocabulary& RuleVocabulary::standard() {
  static const RuleVocabulary vocab = [] {
    RuleVocabulary v;
    for (const char* m : kModelIdentifiers) v.add(m);
    const AbtSchema& schema = abt_schema();
    for (int col = 0; col < kAbtColumns; ++col)
      if (schema.kind(col) == ColumnKind::Numeric)
        v.add(schema.names()[static_cast<std::size_t>(col)]);
    return v;
  }();
  return vocab;
}

// ---- lexer ----------------------------------------------------------------

namespace {

struct Token {
  enum class Type { Ident, Number, Cmp, And, Or, LParen, RParen, End };
  Type type = Type::End;
  std::size_t pos = 0;        // byte offset, 0-based
  std::string ident;
  double number = 0.0;
  CmpOp op = CmpOp::Lt;
};

[[noreturn]] void fail_at(std::size_t pos, const std::string& what) {
  throw ConfigError("rule syntax error at column " + std::to_string(pos + 1) + ": " + what);
}

std::vector<Token> lex(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      ++i;
      continue;
    }
    Token t;
    t.pos = i;
    if (c == '(') {
      t.type = Token::Type::LParen;
      ++i;
    } else if (c == ')') {
      t.type = Token::Type::RParen;
      ++i;
    } else if (c == '<' || c == '>') {
      t.type = Token::Type::Cmp;
      const bool eq = i + 1 < text.size() && text[i + 1] == '=';
      t.op = c == '<' ? (eq ? CmpOp::Le : CmpOp::Lt) : (eq ? CmpOp::Ge : CmpOp::Gt);
      i += eq ? 2 : 1;
    } else if (text.substr(i, 3) == "\xe2\x89\xa4") {   // ≤
      t.type = Token::Type::Cmp;
      t.op = CmpOp::Le;
      i += 3;
    } else if (text.substr(i, 3) == "\xe2\x89\xa5") {   // ≥
      t.type = Token::Type::Cmp;
      t.op = CmpOp::Ge;
      i += 3;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::string digits;
      while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])))
        digits += text[i++];
      if (i < text.size() && (text[i] == '.' || text[i] == ',')) {
        ++i;
        digits += '.';
        if (i >= text.size() || !std::isdigit(static_cast<unsigned char>(text[i])))
          fail_at(i, "digits must follow a decimal separator");
        while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])))
          digits += text[i++];
      }
      if (i < text.size() && text[i] == '%') {
        // "2,8%" means the decimal 0.028 exactly, so shift the point instead
        // of dividing (2.8 / 100 lands on a neighbouring double).
        ++i;
        const std::size_t dot = digits.find('.');
        std::string frac = dot == std::string::npos ? "" : digits.substr(dot + 1);
        digits = dot == std::string::npos ? digits : digits.substr(0, dot);
        digits += frac;
        digits += "e-";
        digits += std::to_string(frac.size() + 2);
      }
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
      if (ec != std::errc() || ptr != digits.data() + digits.size())
        fail_at(t.pos, "malformed number '" + digits + "'");
      t.type = Token::Type::Number;
      t.number = value;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string word;
      while (i < text.size() && (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_'))
        word += text[i++];
      const std::string lower = to_lower(word);
      if (lower == "and") {
        t.type = Token::Type::And;
      } else if (lower == "or") {
        t.type = Token::Type::Or;
      } else {
        t.type = Token::Type::Ident;
        t.ident = std::move(word);
      }
    } else {
      fail_at(i, std::string("unexpected character '") + c + "'");
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.type = Token::Type::End;
  end.pos = text.size();
  out.push_back(end);
  return out;
}

// ---- parser ---------------------------------------------------------------

class Parser {
 public:
  Parser(std::string_view text, const RuleVocabulary& vocab)
      : tokens_(lex(text)), vocab_(vocab) {}

  RuleExpr run() {
    RuleExpr expr;
    expr.root = parse_or();
    if (peek().type != Token::Type::End) fail_at(peek().pos, "unexpected trailing input");
    expr.identifiers = std::move(identifiers_);
    expr.text = print_rule(expr.root);
    return expr;
  }

 private:
  const Token& peek() const { return tokens_[cursor_]; }
  const Token& take() { return tokens_[cursor_++]; }

  RuleNode parse_or() {
    RuleNode node;
    node.kind = RuleNode::Kind::Or;
    node.children.push_back(parse_and());
    while (peek().type == Token::Type::Or) {
      take();
      node.children.push_back(parse_and());
    }
    if (node.children.size() == 1) return std::move(node.children.front());
    return node;
  }

  RuleNode parse_and() {
    RuleNode node;
    node.kind = RuleNode::Kind::And;
    node.children.push_back(parse_primary());
    while (peek().type == Token::Type::And) {
      take();
      node.children.push_back(parse_primary());
    }
    if (node.children.size() == 1) return std::move(node.children.front());
    return node;
  }

  RuleNode parse_primary() {
    if (peek().type == Token::Type::LParen) {
      const std::size_t open = take().pos;
      RuleNode inner = parse_or();
      if (peek().type != Token::Type::RParen)
        fail_at(peek().pos, "missing ')' for '(' at column " + std::to_string(open + 1));
      take();
      return inner;
    }
    return parse_comparison();
  }

  RuleNode parse_comparison() {
    RuleNode node;
    node.kind = RuleNode::Kind::Compare;
    node.operands.push_back(parse_operand());
    if (peek().type != Token::Type::Cmp)
      fail_at(peek().pos, "expected a comparison operator");
    while (peek().type == Token::Type::Cmp) {
      node.ops.push_back(take().op);
      node.operands.push_back(parse_operand());
    }
    return node;
  }

  RuleNode::Operand parse_operand() {
    const Token& t = take();
    RuleNode::Operand operand;
    if (t.type == Token::Type::Number) {
      operand.literal = t.number;
      return operand;
    }
    if (t.type != Token::Type::Ident)
      fail_at(t.pos, "expected an identifier or a number");
    std::optional<std::string> canonical = vocab_.resolve(t.ident);
    if (!canonical)
      fail_at(t.pos, "unknown identifier '" + t.ident + "'");
    if (std::find(identifiers_.begin(), identifiers_.end(), *canonical) == identifiers_.end())
      identifiers_.push_back(*canonical);
    operand.identifier = std::move(*canonical);
    return operand;
  }

  std::vector<Token> tokens_;
  std::size_t cursor_ = 0;
  const RuleVocabulary& vocab_;
  std::vector<std::string> identifiers_;
};

std::string print_number(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw DomainError("number too long to print");
  return std::string(buf, ptr);
}

void print_node(const RuleNode& node, std::string& out) {
  switch (node.kind) {
    case RuleNode::Kind::Compare:
      for (std::size_t i = 0; i < node.operands.size(); ++i) {
        if (i) {
          out += ' ';
          out += cmp_symbol(node.ops[i - 1]);
          out += ' ';
        }
        const RuleNode::Operand& operand = node.operands[i];
        if (operand.identifier.empty()) out += print_number(operand.literal);
        else out += operand.identifier;
      }
      return;
    case RuleNode::Kind::And:
      for (std::size_t i = 0; i < node.children.size(); ++i) {
        if (i) out += " and ";
        const bool needs_parens = node.children[i].kind == RuleNode::Kind::Or;
        if (needs_parens) out += '(';
        print_node(node.children[i], out);
        if (needs_parens) out += ')';
      }
      return;
    case RuleNode::Kind::Or:
      for (std::size_t i = 0; i < node.children.size(); ++i) {
        if (i) out += " or ";
        print_node(node.children[i], out);
      }
      return;
  }
  throw DomainError("unknown rule node kind");
}

}  // namespace

RuleExpr parse_rule(std::string_view text) { return parse_rule(text, RuleVocabulary::standard()); }

RuleExpr parse_rule(std::string_view text, const RuleVocabulary& vocab) {
  return Parser(text, vocab).run();
}

std::string print_rule(const RuleNode& node) {
  std::string out;
  print_node(node, out);
  return out;
}

// ---- evaluation -----------------------------------------------------------

void RuleEnv::set_model(std::string name, std::optional<double> p) {
  for (auto& [existing, value] : models)
    if (existing == name) {
      value = p;
      return;
    }
  models.emplace_back(std::move(name), p);
}

std::optional<double> RuleEnv::lookup(const std::string& identifier) const {
  for (const auto& [name, value] : models)
    if (name == identifier) return value;
  const int col = abt_schema().index_of(identifier);
  if (col >= 0 && abt_schema().kind(col) == ColumnKind::Numeric && row != nullptr) {
    const double v = row->numeric(col);
    if (is_missing(v)) return std::nullopt;
    return v;
  }
  throw DomainError("rule identifier '" + identifier + "' is bound to no value");
}

namespace {

bool eval_node(const RuleNode& node, const RuleEnv& env, bool& missing) {
  switch (node.kind) {
    case RuleNode::Kind::Compare: {
      std::vector<std::optional<double>> values;
      values.reserve(node.operands.size());
      for (const RuleNode::Operand& operand : node.operands)
        values.push_back(operand.identifier.empty() ? std::optional<double>(operand.literal)
                                                    : env.lookup(operand.identifier));
      bool holds = true;
      for (std::size_t i = 0; i < node.ops.size(); ++i) {
        if (!values[i] || !values[i + 1]) {
          missing = true;
          holds = false;
        } else if (!cmp_holds(*values[i], node.ops[i], *values[i + 1])) {
          holds = false;
        }
      }
      return holds;
    }
    case RuleNode::Kind::And: {
      bool all = true;
      for (const RuleNode& child : node.children) all &= eval_node(child, env, missing);
      return all;
    }
    case RuleNode::Kind::Or: {
      bool any = false;
      for (const RuleNode& child : node.children) any |= eval_node(child, env, missing);
      return any;
    }
  }
  throw DomainError("unknown rule node kind");
}

}  // namespace

RuleOutcome evaluate_rule(const RuleExpr& expr, const RuleEnv& env) {
  RuleOutcome outcome;
  outcome.fired = eval_node(expr.root, env, outcome.missing_operand);
  return outcome;
}

}  // namespace creditlab
