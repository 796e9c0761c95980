#include "pergo/report.hpp"

#include <cmath>

namespace pergo {

Json
number(double v)
{
  if (v == 0.0)
    return Json(0.0);
  return std::isfinite(v) ? Json(v) : Json(nullptr);
}

namespace {

Json
vector_json(const std::vector<double>& v)
{
  Json out = Json::array();
  for (double x : v)
    out.push_back(number(x));
  return out;
}

} // namespace

Json
to_json(const Witness& w)
{
  return Json{ { "s", number(w.s) }, { "x", vector_json(w.x) }, { "value", number(w.value) } };
}

Json
to_json(const RadialScan& s)
{
  return Json{ { "pass", s.pass },
               { "epsilon", number(s.epsilon) },
               { "radius", number(s.radius) },
               { "max_outside", to_json(s.max_outside) },
               { "grid_margin", number(s.grid_margin) },
               { "radial_step", number(s.radial_step) },
               { "n_points", s.n_points } };
}

Json
to_json(const Theorem11Report& r)
{
  Json j;
  j["model"] = r.model;
  j["d"] = r.d;
  j["m"] = r.m;
  j["period"] = number(r.period);
  j["m_at_least_d"] = r.m_at_least_d;
  j["c0"] = number(r.C0);
  j["c0_estimated"] = r.C0_estimated;
  if (r.C0_estimate)
    j["c0_estimate"] = Json{ { "value", number(r.C0_estimate->value) },
                             { "argmax", vector_json(r.C0_estimate->argmax) },
                             { "max_order", r.C0_estimate->max_order },
                             { "half_width", number(r.C0_estimate->half_width) } };
  j["epsilon"] = number(r.tilde_K.scan.epsilon);
  j["radius"] = number(r.tilde_K.scan.radius);
  j["r_tilde"] = number(r.tilde_K.r_tilde);
  j["c_sup"] = number(r.tilde_K.c_sup);
  j["c_margin"] = number(r.tilde_K.scan.grid_margin);
  j["c2"] = number(r.C2);
  j["r_minimal"] = number(r.R);
  j["log_r_minimal"] = number(r.log_R);
  j["r_minimal_bisection"] = number(r.R_bisection);
  j["lambda_min"] = number(r.nondegeneracy.lambda_min);
  j["nondegeneracy_radius"] = number(r.nondegeneracy.radius);
  j["nondegeneracy_grid_step"] = number(r.nondegeneracy.grid_step);
  j["verdicts"] = Json{ { "lyapunov", r.verdict_lyapunov },
                        { "minimal_r", r.verdict_minimal_R },
                        { "nondegeneracy", r.verdict_nondegeneracy },
                        { "overall", r.overall } };
  j["overall"] = r.overall;
  j["witnesses"] = Json{ { "lyapunov_max_outside", to_json(r.tilde_K.scan.max_outside) },
                         { "c_sup", to_json(r.tilde_K.c_witness) },
                         { "lambda_min_argmin", vector_json(r.nondegeneracy.argmin) } };
  j["scan"] = to_json(r.tilde_K.scan);
  j["certification"] = "certified-on-grid";
  j["notes"] = r.notes;
  return j;
}

Json
to_json(const LevyConditionReport& r)
{
  Json g = Json::array();
  for (const auto& [eps, v] : r.g_values)
    g.push_back(Json{ { "epsilon", number(eps) }, { "g", number(v) } });
  return Json{ { "finite_first_tail_moment", r.cond11 },
               { "tail_moment", number(r.tail_moment) },
               { "small_jump_growth", r.cond12 },
               { "small_jump_rule", r.cond12_rule },
               { "g_values", g },
               { "verdicts", Json{ { "tail_moment", r.cond11 }, { "small_jump_growth", r.cond12 } } } };
}

Json
to_json(const AronsonReport& r)
{
  return Json{ { "lambda_min", number(r.lambda_min) },
               { "sup_b", number(r.sup_b) },
               { "sup_a", number(r.sup_a) },
               { "sup_first_derivative", number(r.sup_derivative) },
               { "box", number(r.box) },
               { "cap", number(r.cap) },
               { "verdicts",
                 Json{ { "ellipticity", r.ellipticity },
                       { "bounded_coefficients", r.bounded_coefficients },
                       { "bounded_first_derivatives", r.bounded_first_derivatives } } },
               { "witnesses",
                 Json{ { "ellipticity", to_json(r.ellipticity_witness) },
                       { "bounded_coefficients", to_json(r.bounded_witness) },
                       { "first_derivatives", to_json(r.derivative_witness) } } } };
}

Json
to_json(const VeretennikovReport& r)
{
  return Json{ { "M", number(r.M) },
               { "r", number(r.r) },
               { "lambda_minus", number(r.lambda_minus) },
               { "lambda_plus", number(r.lambda_plus) },
               { "lambda_tilde", number(r.Lambda_tilde) },
               { "sup_xb_outside", number(r.sup_xb_outside) },
               { "implied_max", number(r.implied_max) },
               { "verdicts",
                 Json{ { "drift", r.drift_condition },
                       { "spectral", r.spectral_condition },
                       { "implied_inequality", r.implied_inequality },
                       { "overall", r.pass } } },
               { "witnesses", Json{ { "drift", to_json(r.drift_witness) } } } };
}

Json
to_json(const Degenerate2DReport& r)
{
  return Json{ { "inf_sigma", number(r.inf_sigma) },
               { "inf_db2_dx1", number(r.inf_db2_dx1) },
               { "lyapunov_scan", to_json(r.condition_ii) },
               { "verdicts",
                 Json{ { "condition_i", r.condition_i }, { "condition_ii", r.condition_ii.pass }, { "overall", r.pass } } },
               { "witnesses",
                 Json{ { "sigma", to_json(r.sigma_witness) }, { "db2_dx1", to_json(r.derivative_witness) } } } };
}

Json
to_json(const TestResult& r)
{
  Json extras = Json::object();
  for (const auto& [k, v] : r.extras)
    extras[k] = number(v);
  return Json{ { "name", r.name },
               { "statistic", number(r.statistic) },
               { "threshold", number(r.threshold) },
               { "n", r.n },
               { "pass", r.pass },
               { "inconclusive", r.inconclusive },
               { "description", r.description },
               { "extras", extras } };
}

} // namespace pergo
