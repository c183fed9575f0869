#include "censorsim/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

namespace censorsim {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

namespace {

enum class Op {
  kConst,
  kVar,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kPow,
  kNeg,
  kSigmoid,
  kLogit,
  kStep,
  kAbs,
  kExp,
  kLog,
  kSqrt,
  kMin,
  kMax,
};

}  // namespace

struct Expr::Node {
  Op op;
  double value = 0.0;
  std::string name;
  std::shared_ptr<const Node> a, b;
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

NodePtr make(Op op, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<Expr::Node>();
  n->op = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

class Parser {
 public:
  explicit Parser(const std::string& text) : s_(text) {}

  NodePtr parse() {
    auto e = expr();
    skip_ws();
    if (pos_ != s_.size())
      throw ExprError("unexpected trailing input at position " +
                      std::to_string(pos_) + " in '" + s_ + "'");
    return e;
  }

 private:
  NodePtr expr() {
    auto lhs = term();
    for (;;) {
      skip_ws();
      if (match('+')) {
        lhs = make(Op::kAdd, lhs, term());
      } else if (match('-')) {
        lhs = make(Op::kSub, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    auto lhs = unary();
    for (;;) {
      skip_ws();
      if (match('*')) {
        lhs = make(Op::kMul, lhs, unary());
      } else if (match('/')) {
        lhs = make(Op::kDiv, lhs, unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr unary() {
    skip_ws();
    if (match('-')) return make(Op::kNeg, unary());
    if (match('+')) return unary();
    return power();
  }

  NodePtr power() {
    auto base = primary();
    skip_ws();
    if (match('^')) return make(Op::kPow, base, unary());
    return base;
  }

  NodePtr primary() {
    skip_ws();
    if (pos_ >= s_.size()) throw ExprError("unexpected end of expression: '" + s_ + "'");
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return ident();
    if (match('(')) {
      auto e = expr();
      expect(')');
      return e;
    }
    throw ExprError(std::string("unexpected character '") + c + "' in '" + s_ + "'");
  }

  NodePtr number() {
    const char* start = s_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(start, &end);
    if (end == start) throw ExprError("bad numeric literal in '" + s_ + "'");
    pos_ += static_cast<std::size_t>(end - start);
    auto n = std::make_shared<Expr::Node>();
    n->op = Op::kConst;
    n->value = v;
    return n;
  }

  NodePtr ident() {
    std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
      ++pos_;
    std::string name = s_.substr(start, pos_ - start);
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == '(') {
      ++pos_;
      auto a = expr();
      NodePtr b;
      skip_ws();
      if (match(',')) b = expr();
      expect(')');
      Op op;
      if (name == "sigmoid") op = Op::kSigmoid;
      else if (name == "logit") op = Op::kLogit;
      else if (name == "step") op = Op::kStep;
      else if (name == "abs") op = Op::kAbs;
      else if (name == "exp") op = Op::kExp;
      else if (name == "log") op = Op::kLog;
      else if (name == "sqrt") op = Op::kSqrt;
      else if (name == "min") op = Op::kMin;
      else if (name == "max") op = Op::kMax;
      else throw ExprError("unknown function '" + name + "'");
      const bool binary = (op == Op::kMin || op == Op::kMax);
      if (binary != static_cast<bool>(b))
        throw ExprError("wrong arity for function '" + name + "'");
      return make(op, a, b);
    }
    auto n = std::make_shared<Expr::Node>();
    n->op = Op::kVar;
    n->name = std::move(name);
    return n;
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool match(char c) {
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    skip_ws();
    if (!match(c))
      throw ExprError(std::string("expected '") + c + "' in '" + s_ + "'");
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

double eval_node(const Expr::Node& n, const EvalContext& ctx) {
  switch (n.op) {
    case Op::kConst: return n.value;
    case Op::kVar: return ctx.lookup(n.name);
    case Op::kAdd: return eval_node(*n.a, ctx) + eval_node(*n.b, ctx);
    case Op::kSub: return eval_node(*n.a, ctx) - eval_node(*n.b, ctx);
    case Op::kMul: return eval_node(*n.a, ctx) * eval_node(*n.b, ctx);
    case Op::kDiv: return eval_node(*n.a, ctx) / eval_node(*n.b, ctx);
    case Op::kPow: return std::pow(eval_node(*n.a, ctx), eval_node(*n.b, ctx));
    case Op::kNeg: return -eval_node(*n.a, ctx);
    case Op::kSigmoid: return sigmoid(eval_node(*n.a, ctx));
    case Op::kLogit: return logit(eval_node(*n.a, ctx));
    case Op::kStep: return eval_node(*n.a, ctx) > 0.0 ? 1.0 : 0.0;
    case Op::kAbs: return std::fabs(eval_node(*n.a, ctx));
    case Op::kExp: return std::exp(eval_node(*n.a, ctx));
    case Op::kLog: return std::log(eval_node(*n.a, ctx));
    case Op::kSqrt: return std::sqrt(eval_node(*n.a, ctx));
    case Op::kMin: return std::min(eval_node(*n.a, ctx), eval_node(*n.b, ctx));
    case Op::kMax: return std::max(eval_node(*n.a, ctx), eval_node(*n.b, ctx));
  }
  throw ExprError("corrupt expression node");
}

void collect_vars(const Expr::Node& n, std::vector<std::string>& out) {
  if (n.op == Op::kVar) {
    if (std::find(out.begin(), out.end(), n.name) == out.end()) out.push_back(n.name);
  }
  if (n.a) collect_vars(*n.a, out);
  if (n.b) collect_vars(*n.b, out);
}

}  // namespace

Expr Expr::parse(const std::string& text) {
  Expr e;
  e.root_ = Parser(text).parse();
  e.text_ = text;
  collect_vars(*e.root_, e.vars_);
  return e;
}

double Expr::eval(const EvalContext& ctx) const {
  if (!root_) throw ExprError("evaluating empty expression");
  return eval_node(*root_, ctx);
}

}  // namespace censorsim
