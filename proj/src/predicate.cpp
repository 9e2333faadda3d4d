#include <algorithm>
#include <cctype>
#include <charconv>

#include "roomforge/error.hpp"
#include "roomforge/quality_filter.hpp"

namespace roomforge::quality {

namespace {

enum class Tok { ident, number, string, op, lparen, rparen, lbracket, rbracket, comma, end };

struct Token {
  Tok kind = Tok::end;
  std::string text;
  double number = 0.0;
  std::size_t pos = 0;
};

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; }

std::vector<Token> lex(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    Token t;
    t.pos = i;
    if (is_ident_start(c)) {
      std::size_t j = i;
      while (j < s.size() && is_ident_char(s[j])) ++j;
      t.kind = Tok::ident;
      t.text = std::string(s.substr(i, j - i));
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') {
      const char* first = s.data() + i + (c == '+' ? 1 : 0);
      auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), t.number);
      if (ec != std::errc() || ptr == first) throw ParseError("malformed number", i);
      t.kind = Tok::number;
      t.text = std::string(s.substr(i, static_cast<std::size_t>(ptr - (s.data() + i))));
      i = static_cast<std::size_t>(ptr - s.data());
    } else if (c == '"' || c == '\'') {
      const char quote = c;
      std::size_t j = i + 1;
      std::string value;
      while (j < s.size() && s[j] != quote) {
        if (s[j] == '\\' && j + 1 < s.size()) ++j;
        value.push_back(s[j]);
        ++j;
      }
      if (j >= s.size()) throw ParseError("unterminated string", i);
      t.kind = Tok::string;
      t.text = std::move(value);
      i = j + 1;
    } else if (c == '=' || c == '!' || c == '<' || c == '>') {
      std::string op(1, c);
      if (i + 1 < s.size() && s[i + 1] == '=') op.push_back('=');
      if (op == "=" || op == "!") throw ParseError("expected '" + op + "='", i);
      t.kind = Tok::op;
      t.text = op;
      i += op.size();
    } else {
      switch (c) {
        case '(':
          t.kind = Tok::lparen;
          break;
        case ')':
          t.kind = Tok::rparen;
          break;
        case '[':
          t.kind = Tok::lbracket;
          break;
        case ']':
          t.kind = Tok::rbracket;
          break;
        case ',':
          t.kind = Tok::comma;
          break;
        default:
          throw ParseError(std::string("unexpected character '") + c + "'", i);
      }
      t.text = std::string(1, c);
      ++i;
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.kind = Tok::end;
  end.pos = s.size();
  out.push_back(end);
  return out;
}

bool is_keyword(const std::string& word) {
  return word == "and" || word == "or" || word == "not" || word == "in" || word == "true" || word == "false";
}

CompareOp to_op(const std::string& text) {
  if (text == "==") return CompareOp::eq;
  if (text == "!=") return CompareOp::ne;
  if (text == "<") return CompareOp::lt;
  if (text == "<=") return CompareOp::le;
  if (text == ">") return CompareOp::gt;
  return CompareOp::ge;
}

class Parser {
 public:
  Parser(std::string_view text, const LabelSchema& schema) : tokens_(lex(text)), schema_(schema) {}

  Predicate parse() {
    Predicate p = parse_or();
    if (peek().kind != Tok::end) throw ParseError("unexpected '" + peek().text + "'", peek().pos);
    return p;
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }
  const Token& take() { return tokens_[pos_++]; }
  bool at_word(std::string_view word) const { return peek().kind == Tok::ident && peek().text == word; }

  Predicate parse_or() {
    Predicate first = parse_and();
    if (!at_word("or")) return first;
    Predicate node;
    node.kind = Predicate::Kind::any_of;
    node.children.push_back(std::move(first));
    while (at_word("or")) {
      take();
      node.children.push_back(parse_and());
    }
    return node;
  }

  Predicate parse_and() {
    Predicate first = parse_unary();
    if (!at_word("and")) return first;
    Predicate node;
    node.kind = Predicate::Kind::all_of;
    node.children.push_back(std::move(first));
    while (at_word("and")) {
      take();
      node.children.push_back(parse_unary());
    }
    return node;
  }

  Predicate parse_unary() {
    if (at_word("not")) {
      take();
      Predicate node;
      node.kind = Predicate::Kind::negate;
      node.children.push_back(parse_unary());
      return node;
    }
    if (peek().kind == Tok::lparen) {
      take();
      Predicate inner = parse_or();
      if (peek().kind != Tok::rparen) throw ParseError("expected ')'", peek().pos);
      take();
      return inner;
    }
    return parse_comparison();
  }

  Predicate parse_comparison() {
    const Token& key_tok = take();
    if (key_tok.kind != Tok::ident || is_keyword(key_tok.text)) {
      throw ParseError("expected label key", key_tok.pos);
    }
    const LabelSpec* spec = schema_.find(key_tok.text);
    if (spec == nullptr) throw ValidationError("unknown label key \"" + key_tok.text + "\"");

    Predicate node;
    node.key = key_tok.text;
    if (peek().kind == Tok::op) {
      const Token& op_tok = take();
      node.kind = Predicate::Kind::compare;
      node.op = to_op(op_tok.text);
      node.operands.push_back(parse_literal(*spec));
      if (spec->kind != LabelKind::number && node.op != CompareOp::eq && node.op != CompareOp::ne) {
        throw ValidationError("operator " + op_tok.text + " is not defined for " +
                              std::string(to_string(spec->kind)) + " label " + spec->key);
      }
      return node;
    }
    if (at_word("in")) {
      take();
      if (peek().kind != Tok::lbracket) throw ParseError("expected '['", peek().pos);
      take();
      node.kind = Predicate::Kind::member;
      node.operands.push_back(parse_literal(*spec));
      while (peek().kind == Tok::comma) {
        take();
        node.operands.push_back(parse_literal(*spec));
      }
      if (peek().kind != Tok::rbracket) throw ParseError("expected ']'", peek().pos);
      take();
      return node;
    }
    if (spec->kind != LabelKind::boolean) {
      throw ParseError("expected comparison after non-boolean key " + spec->key, peek().pos);
    }
    node.kind = Predicate::Kind::compare;
    node.op = CompareOp::eq;
    node.operands.emplace_back(true);
    return node;
  }

  LabelValue parse_literal(const LabelSpec& spec) {
    const Token& t = take();
    auto mismatch = [&](std::string_view got) {
      return ValidationError("type mismatch: " + spec.key + " is " + std::string(to_string(spec.kind)) +
                             ", compared with " + std::string(got) + " at offset " + std::to_string(t.pos));
    };
    switch (t.kind) {
      case Tok::number:
        if (spec.kind != LabelKind::number) throw mismatch("number");
        return t.number;
      case Tok::string:
        if (spec.kind != LabelKind::category) throw mismatch("string");
        return check_category(spec, t.text);
      case Tok::ident:
        if (t.text == "true" || t.text == "false") {
          if (spec.kind != LabelKind::boolean) throw mismatch("bool");
          return t.text == "true";
        }
        if (!is_keyword(t.text) && t.text.find('.') == std::string::npos) {
          if (spec.kind != LabelKind::category) throw mismatch("string");
          return check_category(spec, t.text);
        }
        break;
      default:
        break;
    }
    throw ParseError("expected literal", t.pos);
  }

  static LabelValue check_category(const LabelSpec& spec, const std::string& value) {
    if (std::find(spec.values.begin(), spec.values.end(), value) == spec.values.end()) {
      throw ValidationError("\"" + value + "\" is not a category of " + spec.key);
    }
    return value;
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  const LabelSchema& schema_;
};

const LabelValue& lookup(const QualityLabelSet& labels, const std::string& key) {
  auto it = labels.find(key);
  if (it == labels.end()) throw ValidationError("missing label \"" + key + "\"");
  return it->second;
}

bool compare(const LabelValue& lhs, CompareOp op, const LabelValue& rhs) {
  if (lhs.index() != rhs.index()) throw ValidationError("label value kind does not match rule operand");
  if (const double* a = std::get_if<double>(&lhs)) {
    const double b = std::get<double>(rhs);
    switch (op) {
      case CompareOp::eq:
        return *a == b;
      case CompareOp::ne:
        return *a != b;
      case CompareOp::lt:
        return *a < b;
      case CompareOp::le:
        return *a <= b;
      case CompareOp::gt:
        return *a > b;
      case CompareOp::ge:
        return *a >= b;
    }
  }
  const bool equal = lhs == rhs;
  return op == CompareOp::ne ? !equal : equal;
}

}  // namespace

Predicate parse_predicate(std::string_view expr, const LabelSchema& schema) { return Parser(expr, schema).parse(); }

bool Predicate::evaluate(const QualityLabelSet& labels) const {
  switch (kind) {
    case Kind::compare:
      return compare(lookup(labels, key), op, operands.front());
    case Kind::member: {
      const LabelValue& value = lookup(labels, key);
      for (const auto& candidate : operands) {
        if (compare(value, CompareOp::eq, candidate)) return true;
      }
      return false;
    }
    case Kind::negate:
      return !children.front().evaluate(labels);
    case Kind::all_of: {
      // Evaluate every child so a missing key is always reported.
      bool all = true;
      for (const auto& child : children) all = child.evaluate(labels) && all;
      return all;
    }
    case Kind::any_of: {
      bool any = false;
      for (const auto& child : children) any = child.evaluate(labels) || any;
      return any;
    }
  }
  return false;
}

void Predicate::collect_keys(std::set<std::string>& out) const {
  if (!key.empty()) out.insert(key);
  for (const auto& child : children) child.collect_keys(out);
}

std::size_t Predicate::depth() const {
  std::size_t deepest = 0;
  for (const auto& child : children) deepest = std::max(deepest, child.depth());
  return deepest + 1;
}

}  // namespace roomforge::quality
