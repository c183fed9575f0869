#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace censorsim {

class ExprError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Variable lookup used during expression evaluation.
class EvalContext {
 public:
  virtual ~EvalContext() = default;
  // Throws ExprError if the variable is unknown.
  virtual double lookup(const std::string& name) const = 0;
};

// Arithmetic expressions over named variables, used by DGP node
// definitions (means, probabilities, deterministic transforms).
//
// Grammar: + - * / ^, unary minus, parentheses, numeric literals,
// identifiers, and the functions sigmoid, logit, step (1 if x>0 else 0),
// abs, exp, log, sqrt, min, max.
class Expr {
 public:
  Expr() = default;
  static Expr parse(const std::string& text);

  double eval(const EvalContext& ctx) const;
  // Free variables, in first-appearance order.
  const std::vector<std::string>& variables() const { return vars_; }
  const std::string& text() const { return text_; }
  bool empty() const { return root_ == nullptr; }

  struct Node;

 private:
  std::shared_ptr<const Node> root_;
  std::string text_;
  std::vector<std::string> vars_;
};

double sigmoid(double x);
double logit(double p);

}  // namespace censorsim
