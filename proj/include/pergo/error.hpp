#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace pergo {

/// Raised when a numerical coefficient evaluates to a non-finite value.
class EvaluationError : public std::runtime_error
{
public:
  EvaluationError(const std::string& what, double t, std::vector<double> x)
    : std::runtime_error(what)
    , t_(t)
    , x_(std::move(x))
  {
  }

  double time() const noexcept { return t_; }
  const std::vector<double>& state() const noexcept { return x_; }

private:
  double t_;
  std::vector<double> x_;
};

/// Quadrature or root-finding failed to reach the requested accuracy.
class NumericalError : public std::runtime_error
{
public:
  NumericalError(const std::string& what, double achieved)
    : std::runtime_error(what)
    , achieved_(achieved)
  {
  }

  double achieved_tolerance() const noexcept { return achieved_; }

private:
  double achieved_;
};

/// A model parameter is missing or out of range.
class ValidationError : public std::invalid_argument
{
public:
  ValidationError(std::string parameter, const std::string& what)
    : std::invalid_argument(what)
    , parameter_(std::move(parameter))
  {
  }

  const std::string& parameter() const noexcept { return parameter_; }

private:
  std::string parameter_;
};

/// The requested model falls outside what the simulators support.
class UnsupportedModel : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

} // namespace pergo
