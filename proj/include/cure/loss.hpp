#pragma once

namespace cure {

/// Knots and penalty weight of the clipped quartic loss.
///
/// Inside [-a, a] the loss is the double well h(x) = (x^2 - 1)^2 / 4. On
/// a < |x| <= b it follows a cubic that matches h, h' and h'' at a and whose
/// second derivative decays linearly to zero at b. Beyond b it grows linearly.
struct LossSpec {
  double a = 2.0;
  double b = 4.0;
  double lambda = 1.0;

  /// Throws ValidationError unless b >= 2a >= 4 and lambda >= 0.
  void validate() const;
};

/// Suprema of |f'|, |f''| and |f'''| (the latter off the knots).
struct DerivBounds {
  double F1 = 0.0;
  double F2 = 0.0;
  double F3 = 0.0;
};

double eval_h(double x);
double eval_h_d1(double x);
double eval_h_d2(double x);
double eval_h_d3(double x);

double eval_f(double x, const LossSpec& spec);
double eval_f_d1(double x, const LossSpec& spec);
double eval_f_d2(double x, const LossSpec& spec);

// f''' is undefined at the knots; there the limit from the side of smaller |x|
// is returned. Callers that need subgradient semantics must avoid exact knots.
double eval_f_d3(double x, const LossSpec& spec);

/// f and f' in one pass, for the objective's inner loop.
struct LossValueSlope {
  double value;
  double slope;
};
LossValueSlope eval_f_and_d1(double x, const LossSpec& spec);

DerivBounds derivative_bounds(const LossSpec& spec);

}  // namespace cure
