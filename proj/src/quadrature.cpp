#include "pergo/quadrature.hpp"
#include "pergo/error.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <queue>
#include <string>

namespace pergo::quad {

namespace {

struct Panel
{
  double a, b, value, error;
  bool operator<(const Panel& other) const { return error < other.error; }
};

Panel
evaluate_panel(const std::function<double(double)>& f, double a, double b)
{
  using Rule = boost::math::quadrature::gauss_kronrod<double, 15>;
  double err = 0.0;
  // max_depth 0: a single Kronrod panel with |K15 - G7| as the error
  const double v = Rule::integrate(f, a, b, 0, 0.0, &err);
  if (!std::isfinite(v))
    throw NumericalError("integrand is not finite on [" + std::to_string(a) +
                           ", " + std::to_string(b) + "]",
                         INFINITY);
  return { a, b, v, err };
}

} // namespace

Result
integrate(const std::function<double(double)>& f,
          double a,
          double b,
          double abs_tol,
          std::span<const double> breakpoints,
          std::size_t max_panels)
{
  if (a == b)
    return { 0.0, 0.0 };
  double sign = 1.0;
  if (b < a) {
    std::swap(a, b);
    sign = -1.0;
  }

  std::vector<double> cuts{ a };
  for (double p : breakpoints)
    if (p > a && p < b)
      cuts.push_back(p);
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::priority_queue<Panel> panels;
  double total_err = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    Panel p = evaluate_panel(f, cuts[i], cuts[i + 1]);
    total_err += p.error;
    panels.push(p);
  }

  while (total_err > abs_tol) {
    if (panels.size() >= max_panels)
      throw NumericalError("adaptive quadrature did not converge: error " +
                             std::to_string(total_err) + " > " +
                             std::to_string(abs_tol),
                           total_err);
    Panel worst = panels.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b))
      throw NumericalError("adaptive quadrature exhausted interval resolution",
                           total_err);
    panels.pop();
    Panel left = evaluate_panel(f, worst.a, mid);
    Panel right = evaluate_panel(f, mid, worst.b);
    total_err += left.error + right.error - worst.error;
    panels.push(left);
    panels.push(right);
  }

  // deterministic summation order: by left endpoint
  std::vector<Panel> all;
  all.reserve(panels.size());
  double err = 0.0;
  while (!panels.empty()) {
    all.push_back(panels.top());
    err += panels.top().error;
    panels.pop();
  }
  std::sort(all.begin(), all.end(), [](const Panel& x, const Panel& y) {
    return x.a < y.a;
  });
  double sum = 0.0;
  for (const auto& p : all)
    sum += p.value;
  return { sign * sum, err };
}

const GaussHermite&
gauss_hermite(std::size_t n)
{
  static std::mutex mutex;
  static std::map<std::size_t, GaussHermite> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end())
    return it->second;

  // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t k = 1; k < n; ++k) {
    jacobi(k, k - 1) = std::sqrt(static_cast<double>(k));
    jacobi(k - 1, k) = jacobi(k, k - 1);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  GaussHermite rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    rule.nodes[k] = solver.eigenvalues()(k);
    const double v0 = solver.eigenvectors()(0, k);
    rule.weights[k] = v0 * v0;
    total += rule.weights[k];
  }
  for (double& w : rule.weights)
    w /= total;
  return cache.emplace(n, std::move(rule)).first->second;
}

} // namespace pergo::quad
