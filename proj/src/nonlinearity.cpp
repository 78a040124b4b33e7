#include "slcrit/nonlinearity.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace slcrit {

ParseError::ParseError(Kind kind, std::size_t position, const std::string& what)
    : std::runtime_error(what), kind_(kind), position_(position) {}

DomainError::DomainError(std::string node, const std::string& what)
    : std::domain_error(what), node_(std::move(node)) {}

namespace {

std::string format_constant(double c) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", c);
  std::string s(buf);
  if (c < 0) return "(-" + s.substr(1) + ")";
  return s;
}

const char* function_name(Nonlinearity::Op op) {
  switch (op) {
    case Nonlinearity::Op::Sin: return "sin";
    case Nonlinearity::Op::Cos: return "cos";
    case Nonlinearity::Op::Exp: return "exp";
    case Nonlinearity::Op::Tanh: return "tanh";
    case Nonlinearity::Op::Log: return "log";
    default: return "";
  }
}

}  // namespace

class ExpressionParser {
 public:
  explicit ExpressionParser(std::string_view text) : text_(text) {}

  Nonlinearity run() {
    Nonlinearity f;
    f.source_ = std::string(text_);
    out_ = &f;
    expr();
    skip_ws();
    if (pos_ != text_.size()) fail_syntax("unexpected character '" + std::string(1, text_[pos_]) + "'");

    // Sub-expression texts and stack depth, used for domain error messages
    // and sizing the evaluation stack.
    std::vector<std::string> stack;
    std::size_t depth = 0;
    f.node_text_.reserve(f.nodes_.size());
    for (const auto& node : f.nodes_) {
      using Op = Nonlinearity::Op;
      std::string s;
      switch (node.op) {
        case Op::Const: s = format_constant(node.constant); break;
        case Op::Var: s = "x"; break;
        case Op::Neg: s = "(-" + stack.back() + ")"; stack.pop_back(); break;
        case Op::Pow:
          s = "(" + stack.back() + ")^" + std::to_string(node.exponent);
          stack.pop_back();
          break;
        case Op::Sin: case Op::Cos: case Op::Exp: case Op::Tanh: case Op::Log:
          s = std::string(function_name(node.op)) + "(" + stack.back() + ")";
          stack.pop_back();
          break;
        default: {
          const std::string rhs = stack.back();
          stack.pop_back();
          const std::string lhs = stack.back();
          stack.pop_back();
          const char sym = node.op == Op::Add ? '+' : node.op == Op::Sub ? '-' : node.op == Op::Mul ? '*' : '/';
          s = "(" + lhs + " " + sym + " " + rhs + ")";
        }
      }
      stack.push_back(s);
      f.node_text_.push_back(std::move(s));
      depth = std::max(depth, stack.size());
    }
    f.max_depth_ = depth;
    return f;
  }

 private:
  using Op = Nonlinearity::Op;

  [[noreturn]] void fail(ParseError::Kind kind, std::size_t at, const std::string& msg) {
    throw ParseError(kind, at, "position " + std::to_string(at) + ": " + msg);
  }
  [[noreturn]] void fail_syntax(const std::string& msg) { fail(ParseError::Kind::Syntax, pos_, msg); }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  // Accepts ASCII '-' and U+2212 MINUS SIGN.
  bool eat_minus() {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == '-') {
      ++pos_;
      return true;
    }
    if (text_.substr(pos_, 3) == "\xE2\x88\x92") {
      pos_ += 3;
      return true;
    }
    return false;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void emit(Op op) { out_->nodes_.push_back({op}); }

  void expr() {
    term();
    for (;;) {
      if (eat('+')) {
        term();
        emit(Op::Add);
      } else if (eat_minus()) {
        term();
        emit(Op::Sub);
      } else {
        return;
      }
    }
  }

  void term() {
    factor();
    for (;;) {
      if (eat('*')) {
        factor();
        emit(Op::Mul);
      } else if (eat('/')) {
        factor();
        emit(Op::Div);
      } else {
        return;
      }
    }
  }

  void factor() {
    unary();
    if (!eat('^')) return;
    skip_ws();
    const std::size_t start = pos_;
    if (pos_ >= text_.size()) fail_syntax("expected exponent");
    const char c = text_[pos_];
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      if (c == '-' || c == '.' || c == '(' || c == '+' || std::isalpha(static_cast<unsigned char>(c)) ||
          text_.substr(pos_, 3) == "\xE2\x88\x92")
        fail(ParseError::Kind::NonIntegerExponent, start, "exponent must be a nonnegative integer literal");
      fail_syntax("expected exponent");
    }
    unsigned long k = 0;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      k = k * 10 + static_cast<unsigned long>(text_[pos_] - '0');
      if (k > 1000000ul) fail(ParseError::Kind::NonIntegerExponent, start, "exponent too large");
      ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == 'E'))
      fail(ParseError::Kind::NonIntegerExponent, start, "exponent must be a nonnegative integer literal");
    out_->nodes_.push_back({Op::Pow, 0.0, static_cast<unsigned>(k)});
  }

  void unary() {
    if (eat_minus()) {
      unary();
      emit(Op::Neg);
      return;
    }
    base();
  }

  void base() {
    skip_ws();
    if (pos_ >= text_.size()) fail_syntax("unexpected end of input");
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      number();
      return;
    }
    if (c == '(') {
      ++pos_;
      expr();
      if (!eat(')')) fail_syntax("expected ')'");
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
        ++pos_;
      const std::string_view id = text_.substr(start, pos_ - start);
      if (id == "x") {
        emit(Op::Var);
        return;
      }
      Op op;
      if (id == "sin") op = Op::Sin;
      else if (id == "cos") op = Op::Cos;
      else if (id == "exp") op = Op::Exp;
      else if (id == "tanh") op = Op::Tanh;
      else if (id == "log") op = Op::Log;
      else fail(ParseError::Kind::UnknownIdentifier, start, "unknown identifier '" + std::string(id) + "'");
      if (!eat('(')) fail_syntax("expected '(' after " + std::string(id));
      expr();
      if (!eat(')')) fail_syntax("expected ')'");
      emit(op);
      return;
    }
    fail_syntax("unexpected character '" + std::string(1, c) + "'");
  }

  void number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t k = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        ++pos_;
        ++k;
      }
      return k;
    };
    std::size_t mantissa = digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      mantissa += digits();
    }
    if (mantissa == 0) fail(ParseError::Kind::Syntax, start, "malformed number");
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      const std::size_t save = pos_;
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (digits() == 0) pos_ = save;  // not an exponent; leave 'e' for the caller
    }
    const std::string lit(text_.substr(start, pos_ - start));
    out_->nodes_.push_back({Op::Const, std::strtod(lit.c_str(), nullptr), 0});
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  Nonlinearity* out_ = nullptr;
};

Nonlinearity Nonlinearity::parse(std::string_view text) { return ExpressionParser(text).run(); }

namespace {

template <typename Stack>
Jet run_tape(const std::vector<Nonlinearity::Node>& nodes, const std::vector<std::string>& text,
             double x, Stack& st) {
  using Op = Nonlinearity::Op;
  std::size_t top = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& node = nodes[i];
    switch (node.op) {
      case Op::Const: st[top++] = Jet::constant(node.constant); break;
      case Op::Var: st[top++] = Jet::variable(x); break;
      case Op::Neg: st[top - 1] = -st[top - 1]; break;
      case Op::Add: --top; st[top - 1] = st[top - 1] + st[top]; break;
      case Op::Sub: --top; st[top - 1] = st[top - 1] - st[top]; break;
      case Op::Mul: --top; st[top - 1] = st[top - 1] * st[top]; break;
      case Op::Div:
        --top;
        if (st[top].value == 0.0)
          throw DomainError(text[i], "division by zero in " + text[i] + " at x = " + std::to_string(x));
        st[top - 1] = st[top - 1] / st[top];
        break;
      case Op::Pow: st[top - 1] = pow(st[top - 1], node.exponent); break;
      case Op::Sin: st[top - 1] = sin(st[top - 1]); break;
      case Op::Cos: st[top - 1] = cos(st[top - 1]); break;
      case Op::Exp: st[top - 1] = exp(st[top - 1]); break;
      case Op::Tanh: st[top - 1] = tanh(st[top - 1]); break;
      case Op::Log:
        if (!(st[top - 1].value > 0.0))
          throw DomainError(text[i], "log of non-positive argument in " + text[i] + " at x = " + std::to_string(x));
        st[top - 1] = log(st[top - 1]);
        break;
    }
  }
  return st[0];
}

}  // namespace

Jet Nonlinearity::eval_jet2(double x) const {
  if (max_depth_ <= 32) {
    std::array<Jet, 32> st;
    return run_tape(nodes_, node_text_, x, st);
  }
  std::vector<Jet> st(max_depth_);
  return run_tape(nodes_, node_text_, x, st);
}

std::string Nonlinearity::to_string() const { return node_text_.empty() ? std::string() : node_text_.back(); }

const AbscissaSet* TamenessReport::abscissas_for(int m) const {
  for (const auto& a : abscissas)
    if (a.m == m) return &a;
  return nullptr;
}

bool TamenessReport::contains(int m) const { return std::find(sigma.begin(), sigma.end(), m) != sigma.end(); }

namespace {

double refine_root(const Nonlinearity& f, double target, double a, double b) {
  auto g = [&](double x) { return f.eval_jet2(x).d1 - target; };
  double ga = g(a);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (a + b);
    if (mid <= a || mid >= b) break;
    const double gm = g(mid);
    if (gm == 0.0) return mid;
    if ((gm < 0) == (ga < 0)) {
      a = mid;
      ga = gm;
    } else {
      b = mid;
    }
  }
  return std::abs(g(a)) <= std::abs(g(b)) ? a : b;
}

bool is_minus_square(double v) {
  if (!(v < 0.0)) return false;
  const double r = std::sqrt(-v);
  const double k = std::round(r);
  return k >= 1.0 && std::abs(v + k * k) <= 1e-12 * std::max(1.0, k * k);
}

}  // namespace

TamenessReport analyze(const Nonlinearity& f, double x_lo, double x_hi, int m_max, const AnalyzeOptions& opt) {
  if (!(x_lo < x_hi) || !std::isfinite(x_lo) || !std::isfinite(x_hi))
    throw AnalysisError("empty scan window [" + std::to_string(x_lo) + ", " + std::to_string(x_hi) + "]");
  if (m_max < 1) throw AnalysisError("m_max must be at least 1");

  TamenessReport report;
  report.x_lo = x_lo;
  report.x_hi = x_hi;

  const int N = opt.scan_points;
  std::vector<double> xs(N), d1(N), d2(N);
  for (int i = 0; i < N; ++i) {
    xs[i] = i == N - 1 ? x_hi : x_lo + (x_hi - x_lo) * i / (N - 1);
    const Jet j = f.eval_jet2(xs[i]);
    d1[i] = j.d1;
    d2[i] = j.d2;
  }
  const auto [min_it, max_it] = std::minmax_element(d1.begin(), d1.end());
  const double d1_min = *min_it, d1_max = *max_it;

  // Appropriateness: f''(0) != 0, or (a) isolated roots of f'' at scan
  // resolution and (b) f'(0) not of the form -m^2.
  const Jet at0 = f.eval_jet2(0.0);
  bool flat_ok = true;
  double flat_at = 0.0;
  for (int i = 0, run = 0; i < N; ++i) {
    run = std::abs(d2[i]) < opt.flat_f2 ? run + 1 : 0;
    if (run >= opt.flat_run) {
      flat_ok = false;
      flat_at = xs[i];
      break;
    }
  }
  const bool b_ok = !is_minus_square(at0.d1);
  if (at0.d2 != 0.0) {
    report.appropriate = true;
    report.appropriate_reason = "f''(0) != 0";
  } else {
    report.appropriate = flat_ok && b_ok;
    std::ostringstream why;
    why << "f''(0) = 0;";
    if (flat_ok)
      why << " roots of f'' isolated at scan resolution;";
    else
      why << " f'' vanishes on consecutive scan points near x = " << flat_at << " (roots not isolated);";
    if (b_ok)
      why << " f'(0) = " << at0.d1 << " is not of the form -m^2";
    else
      why << " f'(0) = " << at0.d1 << " is of the form -m^2";
    report.appropriate_reason = why.str();
  }

  std::string tame_problem;
  for (int m = 1; m <= m_max; ++m) {
    const double target = -double(m) * m;
    std::vector<double> g(N);
    for (int i = 0; i < N; ++i) g[i] = d1[i] - target;

    // Tangential contact: a local minimum of |g| close to zero with no sign
    // change. These points are missed by bisection and are never tame.
    for (int i = 1; i + 1 < N && tame_problem.empty(); ++i) {
      const bool same_sign = (g[i - 1] > 0 && g[i] > 0 && g[i + 1] > 0) || (g[i - 1] < 0 && g[i] < 0 && g[i + 1] < 0);
      if (same_sign && std::abs(g[i]) <= std::abs(g[i - 1]) && std::abs(g[i]) <= std::abs(g[i + 1]) &&
          std::abs(g[i]) < opt.touch_tol) {
        std::ostringstream why;
        why << "f' touches -" << m * m << " tangentially near x = " << xs[i];
        tame_problem = why.str();
      }
    }

    if (!(d1_min < target - opt.interior_eps && d1_max > target + opt.interior_eps)) continue;
    report.sigma.push_back(m);
    AbscissaSet set{m, {}};
    for (int i = 0; i < N; ++i) {
      if (g[i] == 0.0) {
        set.roots.push_back({xs[i], d2[i]});
      } else if (i + 1 < N && g[i + 1] != 0.0 && (g[i] < 0) != (g[i + 1] < 0)) {
        const double x = refine_root(f, target, xs[i], xs[i + 1]);
        set.roots.push_back({x, f.eval_jet2(x).d2});
      }
    }
    for (const auto& r : set.roots) {
      if (std::abs(r.f2) <= opt.tame_f2 && tame_problem.empty()) {
        std::ostringstream why;
        why << "f''(x) = " << r.f2 << " at x = " << r.x << " where f'(x) = -" << m * m;
        tame_problem = why.str();
      }
    }
    report.abscissas.push_back(std::move(set));
  }

  if (!report.appropriate) {
    report.tame = false;
    report.tame_reason = "not appropriate";
  } else if (!tame_problem.empty()) {
    report.tame = false;
    report.tame_reason = tame_problem;
  } else {
    report.tame = true;
    report.tame_reason = report.sigma.empty() ? "vacuous: f' never reaches -m^2 for m <= " + std::to_string(m_max)
                                              : "f'' != 0 at every abscissa";
  }
  return report;
}

double critical_abscissa(const Nonlinearity& f, int m, const TamenessReport& report, double tame_f2) {
  const AbscissaSet* set = report.abscissas_for(m);
  if (!set || set->roots.empty())
    throw AnalysisError("no abscissa with f'(x) = -" + std::to_string(m * m) + " in the scan window");
  const Abscissa* best = nullptr;
  for (const auto& r : set->roots) {
    if (std::abs(r.f2) <= tame_f2) continue;
    if (!best) {
      best = &r;
      continue;
    }
    const double da = std::abs(r.x), db = std::abs(best->x);
    constexpr double tie = 1e-9;
    if (da < db - tie) {
      best = &r;
    } else if (std::abs(da - db) <= tie) {
      const double fa = std::abs(r.f2), fb = std::abs(best->f2);
      if (fa > fb * (1 + tie) || (std::abs(fa - fb) <= tie * fb && r.x < best->x)) best = &r;
    }
  }
  if (!best) throw AnalysisError("every abscissa for m = " + std::to_string(m) + " has f''(x_m) = 0");
  const double residual = std::abs(f.eval_jet2(best->x).d1 + double(m) * m);
  if (!(residual < 1e-10))
    throw AnalysisError("abscissa for m = " + std::to_string(m) + " only resolved to |f'+m^2| = " +
                        std::to_string(residual));
  return best->x;
}

}  // namespace slcrit
