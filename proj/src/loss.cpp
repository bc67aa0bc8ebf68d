#include "cure/loss.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cure/errors.hpp"

namespace cure {

void LossSpec::validate() const {
  if (!(std::isfinite(a) && std::isfinite(b) && std::isfinite(lambda))) {
    throw ValidationError("loss: knots and lambda must be finite");
  }
  if (!(a >= 2.0 && b >= 2.0 * a)) {
    std::ostringstream msg;
    msg << "loss: knots must satisfy b >= 2a >= 4 (got a=" << a << ", b=" << b << ")";
    throw ValidationError(msg.str());
  }
  if (lambda < 0.0) {
    throw ValidationError("loss: lambda must be nonnegative");
  }
}

double eval_h(double x) {
  const double s = x * x - 1.0;
  return 0.25 * s * s;
}

double eval_h_d1(double x) { return x * x * x - x; }
double eval_h_d2(double x) { return 3.0 * x * x - 1.0; }
double eval_h_d3(double x) { return 6.0 * x; }

namespace {

double sign_of(double x) { return x < 0.0 ? -1.0 : 1.0; }

// Linear slope beyond b, equal to sup |f'|.
double outer_slope(const LossSpec& s) {
  return eval_h_d1(s.a) + 0.5 * (s.b - s.a) * eval_h_d2(s.a);
}

double middle_value(double u, const LossSpec& s) {
  // u = |x| - a
  const double h2 = eval_h_d2(s.a);
  return eval_h(s.a) + eval_h_d1(s.a) * u + 0.5 * h2 * u * u -
         h2 / (6.0 * (s.b - s.a)) * u * u * u;
}

double middle_slope(double u, const LossSpec& s) {
  const double h2 = eval_h_d2(s.a);
  return eval_h_d1(s.a) + h2 * u - h2 / (2.0 * (s.b - s.a)) * u * u;
}

}  // namespace

double eval_f(double x, const LossSpec& spec) {
  const double ax = std::abs(x);
  if (ax <= spec.a) return eval_h(x);
  if (ax <= spec.b) return middle_value(ax - spec.a, spec);
  return middle_value(spec.b - spec.a, spec) + outer_slope(spec) * (ax - spec.b);
}

double eval_f_d1(double x, const LossSpec& spec) {
  const double ax = std::abs(x);
  if (ax <= spec.a) return eval_h_d1(x);
  if (ax <= spec.b) return sign_of(x) * middle_slope(ax - spec.a, spec);
  return sign_of(x) * outer_slope(spec);
}

double eval_f_d2(double x, const LossSpec& spec) {
  const double ax = std::abs(x);
  if (ax <= spec.a) return eval_h_d2(x);
  if (ax <= spec.b) return eval_h_d2(spec.a) * (1.0 - (ax - spec.a) / (spec.b - spec.a));
  return 0.0;
}

double eval_f_d3(double x, const LossSpec& spec) {
  const double ax = std::abs(x);
  if (ax <= spec.a) return eval_h_d3(x);
  if (ax <= spec.b) return -sign_of(x) * eval_h_d2(spec.a) / (spec.b - spec.a);
  return 0.0;
}

LossValueSlope eval_f_and_d1(double x, const LossSpec& spec) {
  const double ax = std::abs(x);
  if (ax <= spec.a) {
    const double s = x * x - 1.0;
    return {0.25 * s * s, x * s};
  }
  if (ax <= spec.b) {
    const double u = ax - spec.a;
    return {middle_value(u, spec), sign_of(x) * middle_slope(u, spec)};
  }
  const double slope = outer_slope(spec);
  return {middle_value(spec.b - spec.a, spec) + slope * (ax - spec.b), sign_of(x) * slope};
}

DerivBounds derivative_bounds(const LossSpec& spec) {
  const double h2 = eval_h_d2(spec.a);
  return {outer_slope(spec), h2, std::max(eval_h_d3(spec.a), h2 / (spec.b - spec.a))};
}

}  // namespace cure
