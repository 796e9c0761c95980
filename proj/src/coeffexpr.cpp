#include "pergo/coeffexpr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>

namespace pergo::coeffexpr {

ParseError::ParseError(const std::string& message, std::size_t offset)
  : std::runtime_error("syntax error at offset " + std::to_string(offset) +
                       ": " + message)
  , offset_(offset)
{
}

EvalError::EvalError(const std::string& message, std::string subexpression)
  : std::runtime_error(message + " in '" + subexpression + "'")
  , sub_(std::move(subexpression))
{
}

namespace {

using Op = Expr::Op;
using Node = Expr::Node;

constexpr int max_depth = 256;

enum class Tok
{
  number,
  ident,
  plus,
  minus,
  star,
  slash,
  caret,
  lparen,
  rparen,
  comma,
  end
};

struct Token
{
  Tok kind;
  std::size_t offset;
  std::string_view text;
  double number = 0.0;
};

bool
is_ident_start(char c)
{
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

bool
is_digit(char c)
{
  return c >= '0' && c <= '9';
}

class Lexer
{
public:
  explicit Lexer(std::string_view s)
    : s_(s)
  {
  }

  Token next()
  {
    while (pos_ < s_.size() &&
           (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\n' ||
            s_[pos_] == '\r'))
      ++pos_;
    const std::size_t start = pos_;
    if (pos_ >= s_.size())
      return { Tok::end, start, {} };
    const char c = s_[pos_];
    if (is_digit(c) || (c == '.' && pos_ + 1 < s_.size() && is_digit(s_[pos_ + 1])))
      return number(start);
    if (is_ident_start(c)) {
      while (pos_ < s_.size() && (is_ident_start(s_[pos_]) || is_digit(s_[pos_])))
        ++pos_;
      return { Tok::ident, start, s_.substr(start, pos_ - start) };
    }
    ++pos_;
    switch (c) {
      case '+': return { Tok::plus, start, s_.substr(start, 1) };
      case '-': return { Tok::minus, start, s_.substr(start, 1) };
      case '*': return { Tok::star, start, s_.substr(start, 1) };
      case '/': return { Tok::slash, start, s_.substr(start, 1) };
      case '^': return { Tok::caret, start, s_.substr(start, 1) };
      case '(': return { Tok::lparen, start, s_.substr(start, 1) };
      case ')': return { Tok::rparen, start, s_.substr(start, 1) };
      case ',': return { Tok::comma, start, s_.substr(start, 1) };
      default: break;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", start);
  }

private:
  Token number(std::size_t start)
  {
    while (pos_ < s_.size() && is_digit(s_[pos_]))
      ++pos_;
    if (pos_ < s_.size() && s_[pos_] == '.') {
      ++pos_;
      while (pos_ < s_.size() && is_digit(s_[pos_]))
        ++pos_;
    }
    // exponent only when digits follow, so "2e" lexes as 2 then e
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < s_.size() && (s_[p] == '+' || s_[p] == '-'))
        ++p;
      if (p < s_.size() && is_digit(s_[p])) {
        pos_ = p;
        while (pos_ < s_.size() && is_digit(s_[pos_]))
          ++pos_;
      }
    }
    const std::string_view text = s_.substr(start, pos_ - start);
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size() ||
        !std::isfinite(v))
      throw ParseError("invalid number '" + std::string(text) + "'", start);
    return { Tok::number, start, text, v };
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

struct FunctionInfo
{
  std::string_view name;
  Op op;
  int arity;
};

constexpr FunctionInfo functions[] = {
  { "sin", Op::sin, 1 },   { "cos", Op::cos, 1 },   { "exp", Op::exp, 1 },
  { "log", Op::log, 1 },   { "sqrt", Op::sqrt, 1 }, { "abs", Op::abs, 1 },
  { "tanh", Op::tanh, 1 }, { "min", Op::min, 2 },   { "max", Op::max, 2 },
};

std::optional<FunctionInfo>
find_function(std::string_view name)
{
  for (const auto& f : functions)
    if (f.name == name)
      return f;
  return std::nullopt;
}

std::string_view
function_name(Op op)
{
  for (const auto& f : functions)
    if (f.op == op)
      return f.name;
  return "?";
}

bool
is_reserved(std::string_view name, std::size_t d)
{
  if (name == "t" || name == "pi" || name == "e" || find_function(name))
    return true;
  if (name.size() > 1 && name[0] == 'x') {
    std::size_t k = 0;
    const auto r = std::from_chars(name.data() + 1, name.data() + name.size(), k);
    if (r.ec == std::errc() && r.ptr == name.data() + name.size() && k >= 1 &&
        k <= d)
      return true;
  }
  return false;
}

class Parser
{
public:
  Parser(std::string_view text, std::size_t d, const std::vector<std::string>& params)
    : lexer_(text)
    , d_(d)
    , params_(params)
  {
    advance();
  }

  std::vector<Node> run()
  {
    root_ = parse_binary(0, 0);
    if (tok_.kind != Tok::end)
      throw ParseError("unexpected '" + std::string(tok_.text) + "'", tok_.offset);
    return std::move(nodes_);
  }

  int root() const { return root_; }

private:
  void advance() { tok_ = lexer_.next(); }

  [[noreturn]] void unexpected(const char* expected)
  {
    if (tok_.kind == Tok::end)
      throw ParseError(std::string("unexpected end of input, expected ") + expected,
                       tok_.offset);
    throw ParseError("unexpected '" + std::string(tok_.text) + "', expected " +
                       expected,
                     tok_.offset);
  }

  int push(Node n)
  {
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size()) - 1;
  }

  static int left_power(Tok k)
  {
    switch (k) {
      case Tok::plus:
      case Tok::minus: return 10;
      case Tok::star:
      case Tok::slash: return 20;
      case Tok::caret: return 40;
      default: return -1;
    }
  }

  // Pratt loop: left-associative operators continue while their power is
  // strictly above min_power; '^' is right-associative and continues at equality.
  int parse_binary(int min_power, int depth)
  {
    if (depth > max_depth)
      throw ParseError("expression nested too deeply", tok_.offset);
    int lhs = parse_prefix(depth);
    for (;;) {
      const Tok k = tok_.kind;
      const int power = left_power(k);
      if (power < 0)
        break;
      const bool right_assoc = k == Tok::caret;
      if (right_assoc ? power < min_power : power <= min_power)
        break;
      advance();
      const int rhs = parse_binary(power, depth + 1);
      Op op = Op::add;
      switch (k) {
        case Tok::plus: op = Op::add; break;
        case Tok::minus: op = Op::sub; break;
        case Tok::star: op = Op::mul; break;
        case Tok::slash: op = Op::div; break;
        default: op = Op::pow; break;
      }
      lhs = push({ op, 0.0, 0, lhs, rhs });
    }
    return lhs;
  }

  int parse_prefix(int depth)
  {
    if (depth > max_depth)
      throw ParseError("expression nested too deeply", tok_.offset);
    switch (tok_.kind) {
      case Tok::minus: {
        advance();
        // unary minus binds looser than '^': -2^2 == -(2^2)
        const int operand = parse_binary(30, depth + 1);
        return push({ Op::neg, 0.0, 0, operand, -1 });
      }
      case Tok::number: {
        const double v = tok_.number;
        advance();
        return push({ Op::literal, v });
      }
      case Tok::lparen: {
        advance();
        const int inner = parse_binary(0, depth + 1);
        if (tok_.kind != Tok::rparen)
          unexpected("')'");
        advance();
        return inner;
      }
      case Tok::ident: return parse_identifier(depth);
      default: unexpected("a number, identifier or '('");
    }
  }

  int parse_identifier(int depth)
  {
    const Token id = tok_;
    advance();
    if (tok_.kind == Tok::lparen) {
      const auto fn = find_function(id.text);
      if (!fn)
        throw ParseError("unknown function '" + std::string(id.text) + "'", id.offset);
      advance();
      std::vector<int> args;
      if (tok_.kind != Tok::rparen) {
        args.push_back(parse_binary(0, depth + 1));
        while (tok_.kind == Tok::comma) {
          advance();
          args.push_back(parse_binary(0, depth + 1));
        }
      }
      if (tok_.kind != Tok::rparen)
        unexpected("')' or ','");
      if (static_cast<int>(args.size()) != fn->arity)
        throw ParseError("function '" + std::string(fn->name) + "' takes " +
                           std::to_string(fn->arity) + " argument(s), got " +
                           std::to_string(args.size()),
                         id.offset);
      advance();
      return push({ fn->op, 0.0, 0, args[0], fn->arity == 2 ? args[1] : -1 });
    }

    const std::string_view name = id.text;
    if (name == "t")
      return push({ Op::slot, 0.0, 0 });
    if (name == "pi")
      return push({ Op::literal, std::numbers::pi });
    if (name == "e")
      return push({ Op::literal, std::numbers::e });
    if (name.size() > 1 && name[0] == 'x') {
      std::size_t k = 0;
      const auto r = std::from_chars(name.data() + 1, name.data() + name.size(), k);
      if (r.ec == std::errc() && r.ptr == name.data() + name.size()) {
        if (k < 1 || k > d_)
          throw ParseError("state variable '" + std::string(name) +
                             "' outside dimension " + std::to_string(d_),
                           id.offset);
        return push({ Op::slot, 0.0, k });
      }
    }
    for (std::size_t p = 0; p < params_.size(); ++p)
      if (params_[p] == name)
        return push({ Op::slot, 0.0, 1 + d_ + p });
    if (find_function(name))
      throw ParseError("function '" + std::string(name) + "' needs arguments",
                       id.offset);
    throw ParseError("unknown identifier '" + std::string(name) + "'", id.offset);
  }

  Lexer lexer_;
  Token tok_{ Tok::end, 0, {} };
  std::size_t d_;
  const std::vector<std::string>& params_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

void
append_number(std::string& out, double v)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  if (v < 0) {
    out += "(";
    out += buf;
    out += ")";
  } else {
    out += buf;
  }
}

} // namespace

Expr
parse(std::string_view text, std::size_t d, const std::vector<std::string>& params)
{
  if (d == 0)
    throw std::invalid_argument("expression dimension must be at least 1");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].empty() || !is_ident_start(params[i][0]))
      throw std::invalid_argument("invalid parameter name '" + params[i] + "'");
    if (is_reserved(params[i], d))
      throw std::invalid_argument("parameter name '" + params[i] + "' is reserved");
    for (std::size_t j = 0; j < i; ++j)
      if (params[i] == params[j])
        throw std::invalid_argument("duplicate parameter '" + params[i] + "'");
  }
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos)
    throw ParseError("empty expression", 0);

  Parser parser(text, d, params);
  std::vector<Node> nodes = parser.run();
  Expr e;
  e.root_ = parser.root();
  e.nodes_ = std::make_shared<const std::vector<Node>>(std::move(nodes));
  e.params_ = std::make_shared<const std::vector<std::string>>(params);
  e.d_ = d;
  return e;
}

Expr
Expr::from_nodes(std::vector<Node> nodes, std::size_t d, std::vector<std::string> params)
{
  if (nodes.empty())
    throw std::invalid_argument("empty node arena");
  Expr e;
  e.root_ = static_cast<int>(nodes.size()) - 1;
  e.nodes_ = std::make_shared<const std::vector<Node>>(std::move(nodes));
  e.params_ = std::make_shared<const std::vector<std::string>>(std::move(params));
  e.d_ = d;
  return e;
}

double
Expr::eval(std::span<const double> slots) const
{
  if (!nodes_)
    throw std::logic_error("evaluating an empty expression");
  if (slots.size() < slot_count())
    throw std::invalid_argument("expression needs " + std::to_string(slot_count()) +
                                " slots, got " + std::to_string(slots.size()));
  return eval_node(root_, slots);
}

double
Expr::eval(const Environment& env) const
{
  std::vector<double> slots(slot_count(), 0.0);
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (!uses_slot(s))
      continue;
    const std::string name = slot_name(s);
    const auto it = env.find(name);
    if (it == env.end())
      throw EvalError("unbound identifier '" + name + "'", print());
    slots[s] = it->second;
  }
  return eval(slots);
}

double
eval(const Expr& e, const Environment& env)
{
  return e.eval(env);
}

double
Expr::eval_node(int index, std::span<const double> slots) const
{
  const Node& n = (*nodes_)[static_cast<std::size_t>(index)];
  switch (n.op) {
    case Op::literal: return n.value;
    case Op::slot: return slots[n.slot];
    case Op::neg: return -eval_node(n.lhs, slots);
    case Op::add: return eval_node(n.lhs, slots) + eval_node(n.rhs, slots);
    case Op::sub: return eval_node(n.lhs, slots) - eval_node(n.rhs, slots);
    case Op::mul: return eval_node(n.lhs, slots) * eval_node(n.rhs, slots);
    case Op::div: return eval_node(n.lhs, slots) / eval_node(n.rhs, slots);
    case Op::pow: return std::pow(eval_node(n.lhs, slots), eval_node(n.rhs, slots));
    case Op::sin: return std::sin(eval_node(n.lhs, slots));
    case Op::cos: return std::cos(eval_node(n.lhs, slots));
    case Op::exp: return std::exp(eval_node(n.lhs, slots));
    case Op::tanh: return std::tanh(eval_node(n.lhs, slots));
    case Op::abs: return std::fabs(eval_node(n.lhs, slots));
    case Op::log: {
      const double v = eval_node(n.lhs, slots);
      if (!(v > 0.0)) {
        std::string sub;
        print_node(index, sub);
        throw EvalError("log of non-positive argument " + std::to_string(v), sub);
      }
      return std::log(v);
    }
    case Op::sqrt: {
      const double v = eval_node(n.lhs, slots);
      if (v < 0.0 || std::isnan(v)) {
        std::string sub;
        print_node(index, sub);
        throw EvalError("sqrt of negative argument " + std::to_string(v), sub);
      }
      return std::sqrt(v);
    }
    case Op::min: return std::min(eval_node(n.lhs, slots), eval_node(n.rhs, slots));
    case Op::max: return std::max(eval_node(n.lhs, slots), eval_node(n.rhs, slots));
  }
  return NAN;
}

std::string
Expr::slot_name(std::size_t slot) const
{
  if (slot == 0)
    return "t";
  if (slot <= d_)
    return "x" + std::to_string(slot);
  return (*params_)[slot - 1 - d_];
}

bool
Expr::uses_slot(std::size_t slot) const
{
  if (!nodes_)
    return false;
  return std::any_of(nodes_->begin(), nodes_->end(), [slot](const Node& n) {
    return n.op == Op::slot && n.slot == slot;
  });
}

bool
Expr::uses_state() const
{
  if (!nodes_)
    return false;
  return std::any_of(nodes_->begin(), nodes_->end(), [this](const Node& n) {
    return n.op == Op::slot && n.slot >= 1 && n.slot <= d_;
  });
}

std::string
Expr::print() const
{
  std::string out;
  if (nodes_)
    print_node(root_, out);
  return out;
}

void
Expr::print_node(int index, std::string& out) const
{
  const Node& n = (*nodes_)[static_cast<std::size_t>(index)];
  auto binary = [&](const char* op) {
    out += "(";
    print_node(n.lhs, out);
    out += op;
    print_node(n.rhs, out);
    out += ")";
  };
  switch (n.op) {
    case Op::literal: append_number(out, n.value); return;
    case Op::slot: out += slot_name(n.slot); return;
    case Op::neg:
      out += "(-";
      print_node(n.lhs, out);
      out += ")";
      return;
    case Op::add: binary(" + "); return;
    case Op::sub: binary(" - "); return;
    case Op::mul: binary(" * "); return;
    case Op::div: binary(" / "); return;
    case Op::pow: binary(" ^ "); return;
    case Op::min:
    case Op::max:
      out += function_name(n.op);
      out += "(";
      print_node(n.lhs, out);
      out += ", ";
      print_node(n.rhs, out);
      out += ")";
      return;
    default:
      out += function_name(n.op);
      out += "(";
      print_node(n.lhs, out);
      out += ")";
      return;
  }
}

// --- derivative bounds -------------------------------------------------------

double
DerivativeBound::sup() const
{
  double m = 0.0;
  for (double v : by_order)
    m = std::max(m, v);
  return m;
}

std::vector<double>
space_partials(const ScalarField& f,
               double t,
               std::span<const double> x,
               int max_order,
               double h)
{
  if (max_order < 1 || max_order > 2)
    throw std::invalid_argument("max_order must be 1 or 2");
  if (!(h > 0.0))
    throw std::invalid_argument("finite-difference step must be positive");
  const std::size_t d = x.size();
  std::vector<double> p(x.begin(), x.end());
  std::vector<double> out;
  out.reserve(d + d * (d + 1) / 2);

  auto at = [&](std::size_t i, double di, std::size_t j, double dj) {
    p[i] += di;
    p[j] += dj;
    const double v = f(t, p);
    p[i] = x[i];
    p[j] = x[j];
    return v;
  };

  const double f0 = f(t, x);
  for (std::size_t i = 0; i < d; ++i)
    out.push_back((at(i, h, i, 0.0) - at(i, -h, i, 0.0)) / (2.0 * h));
  if (max_order == 2) {
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) {
        if (i == j) {
          out.push_back((at(i, h, i, 0.0) - 2.0 * f0 + at(i, -h, i, 0.0)) / (h * h));
        } else {
          out.push_back((at(i, h, j, h) - at(i, h, j, -h) - at(i, -h, j, h) +
                         at(i, -h, j, -h)) /
                        (4.0 * h * h));
        }
      }
  }
  return out;
}

DerivativeBound
finite_difference_bound(const ScalarField& f,
                        std::size_t d,
                        Region region,
                        int max_order,
                        std::size_t grid_n,
                        double h,
                        bool time_dependent)
{
  if (grid_n < 3)
    throw std::invalid_argument("grid_n must be at least 3");
  if (!(region.half_width > 0.0) || !(region.period > 0.0))
    throw std::invalid_argument("region must have positive extent");
  double points = std::pow(static_cast<double>(grid_n), static_cast<double>(d));
  if (time_dependent)
    points *= static_cast<double>(grid_n);
  if (points > 5e7)
    throw std::invalid_argument("derivative grid too large for dimension " +
                                std::to_string(d));

  DerivativeBound bound;
  bound.by_order.assign(static_cast<std::size_t>(max_order), 0.0);
  bound.argmax.assign(d + 1, 0.0);
  double best = -1.0;

  const std::size_t n_time = time_dependent ? grid_n : 1;
  std::vector<std::size_t> idx(d, 0);
  std::vector<double> x(d);
  for (std::size_t it = 0; it < n_time; ++it) {
    const double t = time_dependent
                       ? region.period * static_cast<double>(it) / static_cast<double>(grid_n)
                       : 0.0;
    std::fill(idx.begin(), idx.end(), 0);
    for (;;) {
      for (std::size_t k = 0; k < d; ++k)
        x[k] = -region.half_width + 2.0 * region.half_width * static_cast<double>(idx[k]) /
                                      static_cast<double>(grid_n - 1);
      const auto partials = space_partials(f, t, x, max_order, h);
      for (std::size_t k = 0; k < partials.size(); ++k) {
        const std::size_t order = k < d ? 0 : 1;
        const double v = std::fabs(partials[k]);
        if (!std::isfinite(v))
          continue;
        bound.by_order[order] = std::max(bound.by_order[order], v);
        if (v > best) {
          best = v;
          bound.argmax[0] = t;
          std::copy(x.begin(), x.end(), bound.argmax.begin() + 1);
        }
      }
      std::size_t k = 0;
      while (k < d && ++idx[k] == grid_n)
        idx[k++] = 0;
      if (k == d)
        break;
    }
  }
  return bound;
}

DerivativeBound
estimate_derivative_bound(const Expr& e,
                          Region region,
                          int max_order,
                          std::size_t grid_n,
                          double h,
                          std::span<const double> param_values)
{
  if (param_values.size() != e.parameters().size())
    throw std::invalid_argument("expected " + std::to_string(e.parameters().size()) +
                                " parameter values");
  const std::size_t d = e.dimension();
  std::vector<double> slots(e.slot_count());
  std::copy(param_values.begin(), param_values.end(), slots.begin() + 1 + static_cast<std::ptrdiff_t>(d));
  ScalarField f = [&](double t, std::span<const double> x) {
    std::vector<double> s = slots;
    s[0] = t;
    std::copy(x.begin(), x.end(), s.begin() + 1);
    return e.eval(s);
  };
  return finite_difference_bound(f, d, region, max_order, grid_n, h, e.uses_time());
}

} // namespace pergo::coeffexpr
