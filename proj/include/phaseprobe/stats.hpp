#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace phaseprobe::stats {

// Five-number-style summary used for the beeswarm figure.
// Quartiles use inclusive linear interpolation (value at position
// q*(n-1) of the sorted sample); whiskers are the most extreme data
// points within 1.5*IQR of the quartiles (Tukey fences).
struct SampleStats {
  std::size_t n = 0;
  double mean = 0;
  double sd = 0;  // sample standard deviation, n-1 denominator
  double median = 0;
  double q1 = 0;
  double q3 = 0;
  double iqr = 0;
  double whisker_low = 0;
  double whisker_high = 0;
};

SampleStats describe(std::span<const double> values);  // throws EmptySample

enum class Direction { absolute, greater, less };

// How the tail probability maps degrees of freedom:
//   spreadsheet - df rounded to the nearest integer before the tail
//                 lookup, matching common spreadsheet t-test output;
//   continuous  - unrounded Welch-Satterthwaite df.
// The df field of WelchResult always carries the unrounded value.
enum class DfMode { spreadsheet, continuous };

struct WelchResult {
  double t = 0;
  double df = 0;
  double p = 0;
  Direction direction = Direction::absolute;
  bool computable = false;  // false only when both samples have zero variance
};

// One-tailed Welch t-test. direction=absolute reports P(T > |t|);
// greater/less report the signed upper/lower tail.
// Throws SampleTooSmall unless both samples have n >= 2.
WelchResult welch_one_tailed(std::span<const double> a, std::span<const double> b,
                             Direction direction = Direction::absolute,
                             DfMode df_mode = DfMode::spreadsheet);

// P(T > t) for Student's t with df > 0 (non-integer allowed), via the
// regularized incomplete beta function. Absolute error <= 1e-10.
// Throws InvalidDf for df <= 0.
double student_t_upper_tail(double t, double df);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double regularized_incomplete_beta(double a, double b, double x);

std::string_view to_string(Direction d);
Direction direction_from_string(std::string_view s);  // throws Error
std::string_view to_string(DfMode m);
DfMode df_mode_from_string(std::string_view s);  // throws Error

}  // namespace phaseprobe::stats
