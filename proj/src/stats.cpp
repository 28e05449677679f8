#include "phaseprobe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "phaseprobe/errors.hpp"

namespace phaseprobe::stats {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double mean_of(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Two-pass sample variance (n-1 denominator); stable under shifts.
double sample_variance(std::span<const double> v, double mean) {
  double s = 0;
  for (double x : v) {
    const double d = x - mean;
    s += d * d;
  }
  return s / static_cast<double>(v.size() - 1);
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double pos = q * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= n) return sorted[n - 1];
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

// Continued fraction for the incomplete beta (modified Lentz).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-16;
  constexpr double kFpMin = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

SampleStats describe(std::span<const double> values) {
  if (values.empty()) throw EmptySample("describe: empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());

  SampleStats s;
  s.n = values.size();
  s.mean = mean_of(values);
  s.sd = values.size() > 1 ? std::sqrt(sample_variance(values, s.mean)) : 0.0;
  s.median = quantile_sorted(sorted, 0.5);
  s.q1 = quantile_sorted(sorted, 0.25);
  s.q3 = quantile_sorted(sorted, 0.75);
  s.iqr = s.q3 - s.q1;

  const double fence_low = s.q1 - 1.5 * s.iqr;
  const double fence_high = s.q3 + 1.5 * s.iqr;
  s.whisker_low = sorted.back();
  for (double x : sorted) {
    if (x >= fence_low) {
      s.whisker_low = x;
      break;
    }
  }
  s.whisker_high = sorted.front();
  for (auto it = sorted.rbegin(); it != sorted.rend(); ++it) {
    if (*it <= fence_high) {
      s.whisker_high = *it;
      break;
    }
  }
  return s;
}

WelchResult welch_one_tailed(std::span<const double> a, std::span<const double> b,
                             Direction direction, DfMode df_mode) {
  if (a.size() < 2 || b.size() < 2) {
    throw SampleTooSmall("welch_one_tailed: both samples need n >= 2 (got " +
                         std::to_string(a.size()) + " and " + std::to_string(b.size()) + ")");
  }
  WelchResult r;
  r.direction = direction;

  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  const double va = sample_variance(a, ma);
  const double vb = sample_variance(b, mb);

  if (va == 0.0 && vb == 0.0) {
    // No within-sample variability on either side: the statistic is 0/0.
    r.computable = false;
    r.t = kNan;
    r.df = kNan;
    r.p = kNan;
    return r;
  }

  const double sea = va / na;
  const double seb = vb / nb;
  const double se2 = sea + seb;
  r.t = (ma - mb) / std::sqrt(se2);
  r.df = se2 * se2 / (sea * sea / (na - 1.0) + seb * seb / (nb - 1.0));

  const double df_used = df_mode == DfMode::spreadsheet ? std::round(r.df) : r.df;
  switch (direction) {
    case Direction::absolute: r.p = student_t_upper_tail(std::fabs(r.t), df_used); break;
    case Direction::greater: r.p = student_t_upper_tail(r.t, df_used); break;
    case Direction::less: r.p = student_t_upper_tail(-r.t, df_used); break;
  }
  r.computable = true;
  return r;
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log(1.0 - x);
  const double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return bt * betacf(a, b, x) / a;
  }
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

double student_t_upper_tail(double t, double df) {
  if (!(df > 0.0)) throw InvalidDf("student_t_upper_tail: df must be > 0");
  const double x = df / (df + t * t);
  const double half_two_sided = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x);
  return t >= 0.0 ? half_two_sided : 1.0 - half_two_sided;
}

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::absolute: return "absolute";
    case Direction::greater: return "greater";
    case Direction::less: return "less";
  }
  return "absolute";
}

Direction direction_from_string(std::string_view s) {
  if (s == "absolute") return Direction::absolute;
  if (s == "greater") return Direction::greater;
  if (s == "less") return Direction::less;
  throw Error("unknown direction: " + std::string(s));
}

std::string_view to_string(DfMode m) {
  return m == DfMode::spreadsheet ? "spreadsheet" : "continuous";
}

DfMode df_mode_from_string(std::string_view s) {
  if (s == "spreadsheet") return DfMode::spreadsheet;
  if (s == "continuous") return DfMode::continuous;
  throw Error("unknown df mode: " + std::string(s));
}

}  // namespace phaseprobe::stats
