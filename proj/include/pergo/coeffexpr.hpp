#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pergo::coeffexpr {

/// Syntax error, unknown identifier or arity mismatch, located by byte offset.
class ParseError : public std::runtime_error
{
public:
  ParseError(const std::string& message, std::size_t offset);
  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

/// Domain error (log of non-positive, sqrt of negative) or unbound name.
class EvalError : public std::runtime_error
{
public:
  EvalError(const std::string& message, std::string subexpression);
  const std::string& subexpression() const noexcept { return sub_; }

private:
  std::string sub_;
};

using Environment = std::map<std::string, double>;

/// Immutable arithmetic expression over t, x1..xd and named parameters.
///
/// Identifiers are resolved at parse time to slots: slot 0 is t, slots
/// 1..d are x1..xd and the parameters follow in declaration order. The
/// slot form of eval() is the hot path used inside simulation loops.
class Expr
{
public:
  enum class Op : unsigned char
  {
    literal,
    slot,
    neg,
    add,
    sub,
    mul,
    div,
    pow,
    sin,
    cos,
    exp,
    log,
    sqrt,
    abs,
    tanh,
    min,
    max
  };

  struct Node
  {
    Op op;
    double value = 0.0;  // literal
    std::size_t slot = 0;
    int lhs = -1;
    int rhs = -1;
  };

  Expr() = default;

  double eval(std::span<const double> slots) const;
  double eval(const Environment& env) const;

  //! Fully parenthesized form; parse(print()) evaluates bit-identically.
  std::string print() const;

  std::size_t dimension() const noexcept { return d_; }
  const std::vector<std::string>& parameters() const noexcept
  {
    return *params_;
  }
  std::size_t slot_count() const noexcept { return 1 + d_ + params_->size(); }
  bool uses_slot(std::size_t slot) const;
  bool uses_time() const { return uses_slot(0); }
  bool uses_state() const;
  bool empty() const noexcept { return !nodes_; }

  //! Builds an expression directly from a node arena (root is the last node).
  static Expr from_nodes(std::vector<Node> nodes,
                         std::size_t d,
                         std::vector<std::string> params);

  const std::vector<Node>& nodes() const { return *nodes_; }

private:
  friend Expr parse(std::string_view, std::size_t, const std::vector<std::string>&);

  double eval_node(int index, std::span<const double> slots) const;
  void print_node(int index, std::string& out) const;
  std::string slot_name(std::size_t slot) const;

  std::shared_ptr<const std::vector<Node>> nodes_;
  std::shared_ptr<const std::vector<std::string>> params_;
  std::size_t d_ = 0;
  int root_ = -1;
};

/// Precedence: ^ (right-assoc) > unary minus > * / > + - (left-assoc).
/// Functions: sin cos exp log sqrt abs tanh (1 argument), min max (2).
/// Constants: pi, e.
Expr parse(std::string_view text, std::size_t d, const std::vector<std::string>& params = {});

double eval(const Expr& e, const Environment& env);

// --- finite-difference derivative bounds ------------------------------------

using ScalarField = std::function<double(double t, std::span<const double> x)>;

/// Box [-half_width, half_width]^d x [0, period].
struct Region
{
  double half_width;
  double period;
};

struct DerivativeBound
{
  /// by_order[k] is the grid maximum of |D^alpha f| over |alpha| = k + 1.
  std::vector<double> by_order;
  /// Grid point (t, x...) where the overall maximum was attained.
  std::vector<double> argmax;

  double sup() const;
};

/// Central finite-difference partials of f in x at (t, x), orders 1..max_order
/// (max_order <= 2). First-order entries come first (d of them), then the
/// second-order ones in (i <= j) order.
std::vector<double> space_partials(const ScalarField& f,
                                   double t,
                                   std::span<const double> x,
                                   int max_order,
                                   double h);

/// Grid maximum of all space partials up to max_order. This samples the
/// region, so it is a lower bound for the true supremum.
DerivativeBound finite_difference_bound(const ScalarField& f,
                                        std::size_t d,
                                        Region region,
                                        int max_order,
                                        std::size_t grid_n,
                                        double h,
                                        bool time_dependent);

/// Parameters of e are bound, in declaration order, to param_values.
DerivativeBound estimate_derivative_bound(const Expr& e,
                                          Region region,
                                          int max_order,
                                          std::size_t grid_n,
                                          double h,
                                          std::span<const double> param_values = {});

} // namespace pergo::coeffexpr
