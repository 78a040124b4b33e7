#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "slcrit/jet.hpp"

namespace slcrit {

using Jet = Jet2<double>;

class ParseError : public std::runtime_error {
 public:
  enum class Kind { Syntax, UnknownIdentifier, NonIntegerExponent };

  ParseError(Kind kind, std::size_t position, const std::string& what);

  Kind kind() const noexcept { return kind_; }
  std::size_t position() const noexcept { return position_; }

 private:
  Kind kind_;
  std::size_t position_;
};

/// Raised when an expression is evaluated outside its domain. `node()` holds
/// the text of the offending sub-expression.
class DomainError : public std::domain_error {
 public:
  DomainError(std::string node, const std::string& what);
  const std::string& node() const noexcept { return node_; }

 private:
  std::string node_;
};

class AnalysisError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A nonlinearity f: R -> R given as an expression in the variable x.
///
/// The expression tree is stored in postfix order, so evaluation is a single
/// pass over `nodes()` with a value stack. Objects are immutable after
/// parsing and safe to share between threads.
class Nonlinearity {
 public:
  enum class Op { Const, Var, Neg, Add, Sub, Mul, Div, Pow, Sin, Cos, Exp, Tanh, Log };

  struct Node {
    Op op;
    double constant = 0.0;  // Const
    unsigned exponent = 0;  // Pow
  };

  /// Parses `text` per the grammar
  ///   expr   := term (('+'|'-') term)*
  ///   term   := factor (('*'|'/') factor)*
  ///   factor := unary ('^' nonneg-integer)?
  ///   unary  := '-' unary | base
  ///   base   := number | 'x' | func '(' expr ')' | '(' expr ')'
  /// with func one of sin, cos, exp, tanh, log.
  static Nonlinearity parse(std::string_view text);

  /// (f, f', f'') at x. Throws DomainError for log of a non-positive
  /// argument or division by zero.
  Jet eval_jet2(double x) const;

  double value(double x) const { return eval_jet2(x).value; }

  /// Fully parenthesised text that parses back to an equivalent tree.
  std::string to_string() const;

  const std::string& source() const noexcept { return source_; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }

 private:
  Nonlinearity() = default;
  friend class ExpressionParser;

  std::string source_;
  std::vector<Node> nodes_;
  std::vector<std::string> node_text_;
  std::size_t max_depth_ = 0;
};

struct Abscissa {
  double x;
  double f2;  // f''(x)
};

struct AbscissaSet {
  int m;
  std::vector<Abscissa> roots;
};

/// Classification of f over a finite scan window.
struct TamenessReport {
  std::vector<int> sigma;
  std::vector<AbscissaSet> abscissas;  // one entry per member of sigma
  bool appropriate = false;
  std::string appropriate_reason;
  bool tame = false;
  std::string tame_reason;
  double x_lo = 0.0;
  double x_hi = 0.0;

  const AbscissaSet* abscissas_for(int m) const;
  bool contains(int m) const;
};

struct AnalyzeOptions {
  int scan_points = 10000;
  double interior_eps = 1e-6;     // half-width of the interior-of-image bracket
  double flat_f2 = 1e-12;         // |f''| below this counts as a flat sample
  int flat_run = 3;               // this many flat samples in a row fail (a)
  double tame_f2 = 1e-8;          // |f''(x_m)| must exceed this
  double touch_tol = 1e-6;        // tangential contact of f' with -m^2
};

TamenessReport analyze(const Nonlinearity& f, double x_lo, double x_hi, int m_max,
                       const AnalyzeOptions& options = {});

/// Abscissa x_m with f'(x_m) = -m^2 of smallest |x_m|; ties prefer larger
/// |f''(x_m)|, then the smaller x_m.
double critical_abscissa(const Nonlinearity& f, int m, const TamenessReport& report,
                         double tame_f2 = 1e-8);

}  // namespace slcrit
