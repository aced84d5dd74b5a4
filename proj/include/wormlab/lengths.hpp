#pragma once

// Worm length distributions: construction/normalization, exact windowed
// moments and tail masses, and inverse-transform sampling. Two layers:
//
//  * a double-precision layer working with ordinary endpoints (direct
//    compensated summation, plus integral bracketing past the table), and
//  * a log-endpoint layer for the scale certifier, where window endpoints
//    grow doubly exponentially and only ln(endpoint) is representable.
//
// Sums over non-integer limits follow the ceil/floor convention
// sum_{l=a}^{b} f(l) = sum_{l=ceil(a)}^{floor(b)} f(l).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "wormlab/rng.hpp"

namespace wormlab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Bracket {
  double lo = 0, hi = 0;
  double mid() const { return 0.5 * (lo + hi); }
  double halfwidth() const { return 0.5 * (hi - lo); }
};

enum class LengthKind { LogLogEps, PowerLaw, Geometric, Dirac, Table };

struct LengthSpec {
  LengthKind kind = LengthKind::Dirac;
  double epsilon = 0.5;      // LogLogEps
  std::uint64_t ell0 = 16;   // LogLogEps, PowerLaw support start
  double beta = 2.5;         // PowerLaw exponent
  double mean_t = 1.0;       // Geometric mean
  std::uint64_t t = 1;       // Dirac atom
  std::vector<double> table; // Table: mass at lengths 1..n
  std::uint64_t cap = 0;     // truncation cap, 0 = none

  static LengthSpec dirac(std::uint64_t t) {
    LengthSpec s; s.kind = LengthKind::Dirac; s.t = t; return s;
  }
  static LengthSpec geometric(double mean) {
    LengthSpec s; s.kind = LengthKind::Geometric; s.mean_t = mean; return s;
  }
  static LengthSpec loglog(double eps, std::uint64_t ell0 = 16) {
    LengthSpec s; s.kind = LengthKind::LogLogEps; s.epsilon = eps; s.ell0 = ell0; return s;
  }
  static LengthSpec power_law(double beta, std::uint64_t ell0 = 1) {
    LengthSpec s; s.kind = LengthKind::PowerLaw; s.beta = beta; s.ell0 = ell0; return s;
  }
  static LengthSpec from_table(std::vector<double> masses, std::uint64_t cap = 0) {
    LengthSpec s; s.kind = LengthKind::Table; s.table = std::move(masses); s.cap = cap; return s;
  }
};

namespace detail {

// adaptive Simpson, deterministic
template <class F>
double simpson_rec(const F& f, double a, double b, double fa, double fm, double fb,
                   double whole, double tol, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15 * tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

template <class F>
double integrate(const F& f, double a, double b, double tol = 1e-12) {
  if (!(b > a)) return 0.0;
  double fa = f(a), fb = f(b), m = 0.5 * (a + b), fm = f(m);
  double whole = (b - a) / 6.0 * (fa + 4 * fm + fb);
  double scale = std::max({std::abs(whole), std::abs(fa) * (b - a), 1e-300});
  return simpson_rec(f, a, b, fa, fm, fb, whole, tol * scale, 48);
}

struct Kahan {
  double s = 0, c = 0;
  void add(double v) {
    double y = v - c;
    double t = s + y;
    c = (t - s) - y;
    s = t;
  }
};

}  // namespace detail

class LengthDistribution {
 public:
  static constexpr std::uint64_t kDefaultTableCap = 1u << 20;
  static constexpr std::uint64_t kDirectSumCap = 1u << 22;

  explicit LengthDistribution(const LengthSpec& spec) : spec_(spec) {
    validate();
    normalize();
    build_sampling_table();
    locate_monotone_threshold();
  }

  const LengthSpec& spec() const { return spec_; }
  double normalization() const { return c_; }
  std::uint64_t truncation_cap() const { return spec_.cap; }
  double truncated_mass() const { return truncated_mass_; }
  // threshold past which x^2 m(x) is decreasing (heavy-tail families)
  std::uint64_t monotone_threshold() const { return ell_star_; }

  double pmf(std::uint64_t ell) const {
    if (ell == 0) return 0.0;
    switch (spec_.kind) {
      case LengthKind::Dirac:
        return ell == spec_.t ? 1.0 : 0.0;
      case LengthKind::Geometric: {
        double p = 1.0 / spec_.mean_t;
        return p * std::exp(static_cast<double>(ell - 1) * std::log1p(-p));
      }
      case LengthKind::Table:
        return ell <= spec_.table.size() ? spec_.table[ell - 1] / table_total_ : 0.0;
      case LengthKind::LogLogEps:
      case LengthKind::PowerLaw:
        if (ell < spec_.ell0) return 0.0;
        return c_ * base(static_cast<double>(ell));
    }
    return 0.0;
  }

  // --- exact layer -------------------------------------------------------

  // Sum of l^k m(l) over l in [ceil(a), floor(b)], k in {0,1,2}; empty
  // windows (ceil(a) > floor(b)) give 0.
  double moment_window(int k, double a, double b) const {
    if (k < 0 || k > 2) throw std::invalid_argument("moment_window: k must be 0,1,2");
    if (!(a > 0)) throw std::invalid_argument("moment_window: a must be > 0");
    std::uint64_t s = static_cast<std::uint64_t>(std::ceil(a));
    if (b >= 9.2e18) return moment_window_tail(k, s);
    if (b < a) return 0.0;
    std::uint64_t t = static_cast<std::uint64_t>(std::floor(b));
    if (s > t) return 0.0;
    return window_sum(k, s, t);
  }

  // Sum of m(l) over l >= ceil(a).
  double tail_mass(double a) const {
    if (!(a > 0)) throw std::invalid_argument("tail_mass: a must be > 0");
    return moment_window_tail(0, static_cast<std::uint64_t>(std::ceil(a)));
  }

  bool has_finite_moment(int k) const {
    switch (spec_.kind) {
      case LengthKind::Dirac:
      case LengthKind::Geometric:
      case LengthKind::Table:
        return true;
      case LengthKind::PowerLaw:
        return spec_.beta > k + 1;
      case LengthKind::LogLogEps:
        return k < 2 || spec_.epsilon < -1;
    }
    return true;
  }

  // --- log-endpoint layer (scale certifier) ------------------------------

  // Bracket of sum_{l=a}^{b} l^2 m(l) with a = e^{ln_a}, b = e^{ln_b}.
  // Values above ~1e290 are clamped (they only ever get compared against
  // thresholds far below the clamp).
  Bracket moment2_window_log(double ln_a, double ln_b) const {
    if (ln_b < ln_a) return {0, 0};
    const double ln_direct = std::log(2.0e7);
    // endpoint rounding from exp(ln .) is absorbed into the bracket
    const double nudge = 1e-11;
    if (ln_b <= ln_direct) {
      double lo = moment_window(2, std::exp(ln_a) * (1 + nudge), std::exp(ln_b) * (1 - nudge));
      double hi = moment_window(2, std::exp(ln_a) * (1 - nudge), std::exp(ln_b) * (1 + nudge));
      return {lo, hi};
    }
    if (ln_a <= ln_direct) {
      double head_lo = moment_window(2, std::exp(ln_a) * (1 + nudge), 2.0e7);
      double head_hi = moment_window(2, std::exp(ln_a) * (1 - nudge), 2.0e7);
      Bracket t = moment2_window_log_analytic(std::log(2.0e7 + 1), ln_b);
      return {head_lo + t.lo, head_hi + t.hi};
    }
    return moment2_window_log_analytic(ln_a, ln_b);
  }

  // Bracket of ln sum_{l>=a} m(l) with a = e^{ln_a}; {-inf,-inf} if zero.
  Bracket log_tail_mass(double ln_a) const {
    const double ln_direct = std::log(2.0e7);
    if (ln_a <= ln_direct) {
      double lo = tail_mass(std::exp(ln_a) * (1 + 1e-11));
      double hi = tail_mass(std::exp(ln_a) * (1 - 1e-11));
      if (hi <= 0) return {-kInf, -kInf};
      return {lo > 0 ? std::log(lo) : -kInf, std::log(hi)};
    }
    switch (spec_.kind) {
      case LengthKind::Dirac:
      case LengthKind::Table:
        return {-kInf, -kInf};
      case LengthKind::Geometric: {
        if (ln_a > 700) return {-kInf, -kInf};
        double a = std::exp(ln_a);
        double lt = (std::ceil(a) - 1.0) * std::log1p(-1.0 / spec_.mean_t);
        return {lt, lt};
      }
      case LengthKind::PowerLaw: {
        // integral bracket of sum c l^-beta
        double lnI = std::log(c_ / (spec_.beta - 1)) + (1 - spec_.beta) * ln_a;
        double lnf = std::log(c_) - spec_.beta * ln_a;  // first term
        double hi = lnI + std::log1p(std::exp(lnf - lnI));
        return {lnI, hi};
      }
      case LengthKind::LogLogEps: {
        // ln integral = -2 ln a + ln J0(u), u = ln a
        double u = ln_a;
        double lnJ = std::log(detail::integrate(
            [&](double t) {
              return std::exp(-2.0 * t) * std::pow(std::log(u + t), spec_.epsilon) / (u + t);
            },
            0.0, 40.0));
        double lnI = std::log(c_) - 2.0 * u + lnJ;
        double lnf = std::log(c_) + log_base(u);  // pointwise term m(a)
        double hi = lnI + std::log1p(std::exp(lnf - lnI));
        return {lnI, hi};
      }
    }
    return {-kInf, -kInf};
  }

  // --- sampling -----------------------------------------------------------

  // One draw with P(l) = m(l) conditioned on l <= cap (cap = table limit for
  // heavy-tailed families when none was given).
  std::uint64_t sample(RngStream& rng) const {
    switch (spec_.kind) {
      case LengthKind::Dirac:
        return spec_.t;
      case LengthKind::Geometric: {
        double q = std::log1p(-1.0 / spec_.mean_t);
        double u = rng.uniform_pos();
        if (spec_.cap > 0) {
          double mass = -std::expm1(static_cast<double>(spec_.cap) * q);
          u *= mass;
        }
        double ell = std::floor(std::log1p(-u) / q) + 1.0;
        std::uint64_t out = ell < 1 ? 1 : static_cast<std::uint64_t>(ell);
        if (spec_.cap > 0 && out > spec_.cap) out = spec_.cap;
        return out;
      }
      default: {
        double u = rng.uniform() * (1.0 - truncated_mass_);
        std::size_t lo = 0, hi = cdf_.size();
        while (lo < hi) {
          std::size_t mid = (lo + hi) / 2;
          if (cdf_[mid] <= u) lo = mid + 1;
          else hi = mid;
        }
        return first_support_ + static_cast<std::uint64_t>(lo);
      }
    }
  }

  std::uint64_t effective_cap() const {
    if (spec_.kind == LengthKind::Dirac) return spec_.t;
    if (spec_.kind == LengthKind::Geometric) return spec_.cap;
    return first_support_ + cdf_.size() - 1;
  }

 private:
  void validate() const {
    switch (spec_.kind) {
      case LengthKind::Dirac:
        if (spec_.t < 1) throw std::invalid_argument("Dirac: T must be >= 1");
        if (spec_.cap > 0 && spec_.cap < spec_.t)
          throw std::invalid_argument("Dirac: cap below the atom");
        break;
      case LengthKind::Geometric:
        if (!(spec_.mean_t >= 1.0)) throw std::invalid_argument("Geometric: meanT must be >= 1");
        break;
      case LengthKind::LogLogEps:
        if (spec_.ell0 < 16)
          throw std::invalid_argument("LogLogEps: ell0 must be >= 16 (> e^e)");
        break;
      case LengthKind::PowerLaw:
        if (!(spec_.beta > 1.0))
          throw std::invalid_argument("PowerLaw: beta must exceed 1 (non-normalizable)");
        if (spec_.ell0 < 1) throw std::invalid_argument("PowerLaw: ell0 must be >= 1");
        break;
      case LengthKind::Table: {
        if (spec_.table.empty()) throw std::invalid_argument("Table: empty mass list");
        double tot = 0;
        for (double m : spec_.table) {
          if (m < 0) throw std::invalid_argument("Table: negative mass");
          tot += m;
        }
        if (tot <= 0) throw std::invalid_argument("Table: zero total mass");
        break;
      }
    }
  }

  static double powk(std::uint64_t ell, int k) {
    double x = static_cast<double>(ell);
    return k == 0 ? 1.0 : k == 1 ? x : x * x;
  }

  // unnormalized density of the heavy-tailed families
  double base(double x) const {
    if (spec_.kind == LengthKind::PowerLaw) return std::pow(x, -spec_.beta);
    double lx = std::log(x);
    return std::pow(std::log(lx), spec_.epsilon) / (x * x * x * lx);
  }
  // ln base with u = ln x as the argument (valid for huge x)
  double log_base(double u) const {
    if (spec_.kind == LengthKind::PowerLaw) return -spec_.beta * u;
    return spec_.epsilon * std::log(std::log(u)) - 3.0 * u - std::log(u);
  }

  // integral of x^k * base(x) over [a,b] (finite moderate endpoints)
  double base_integral(int k, double a, double b) const {
    if (!(b > a)) return 0;
    if (spec_.kind == LengthKind::PowerLaw) {
      double e = k - spec_.beta + 1;
      if (std::abs(e) < 1e-14) return std::log(b / a);
      if (b >= kInf) return e < 0 ? -std::pow(a, e) / e : kInf;
      return (std::pow(b, e) - std::pow(a, e)) / e;
    }
    double ua = std::log(a);
    double ub = b >= kInf ? kInf : std::log(b);
    if (k == 2) {
      if (ub >= kInf) return spec_.epsilon < -1
          ? -std::pow(std::log(ua), 1 + spec_.epsilon) / (1 + spec_.epsilon)
          : kInf;
      return (std::pow(std::log(ub), 1 + spec_.epsilon) -
              std::pow(std::log(ua), 1 + spec_.epsilon)) / (1 + spec_.epsilon);
    }
    double decay = 2.0 - k;
    double hi = std::min(ub, ua + 90.0 / decay);
    double scale = std::exp(-decay * ua);
    if (scale == 0.0) return 0.0;
    return scale * detail::integrate(
        [&](double u) {
          return std::exp(-decay * (u - ua)) * std::pow(std::log(u), spec_.epsilon) / u;
        },
        ua, hi);
  }

  void normalize() {
    truncated_mass_ = 0;
    switch (spec_.kind) {
      case LengthKind::Dirac:
      case LengthKind::Geometric:
        c_ = 1.0;
        return;
      case LengthKind::Table: {
        table_total_ = 0;
        for (double m : spec_.table) table_total_ += m;
        c_ = 1.0;
        return;
      }
      default:
        break;
    }
    // direct sum + integral tail bracket until the tail is < 1e-12 relative
    std::uint64_t a = spec_.ell0;
    std::uint64_t cut = std::max<std::uint64_t>(a * 64, 1u << 21);
    detail::Kahan sum;
    for (std::uint64_t ell = a; ell <= cut; ++ell) sum.add(base(static_cast<double>(ell)));
    double tail_lo = base_integral(0, static_cast<double>(cut + 1), kInf);
    double tail_hi = tail_lo + base(static_cast<double>(cut + 1));
    double z = sum.s + 0.5 * (tail_lo + tail_hi);
    if (!(z > 0)) throw std::invalid_argument("length spec not normalizable");
    c_ = 1.0 / z;
  }

  void build_sampling_table() {
    if (spec_.kind == LengthKind::Dirac || spec_.kind == LengthKind::Geometric) return;
    std::uint64_t limit;
    if (spec_.kind == LengthKind::Table) {
      limit = spec_.table.size();
      if (spec_.cap > 0) limit = std::min<std::uint64_t>(limit, spec_.cap);
      first_support_ = 1;
    } else {
      limit = spec_.cap > 0 ? spec_.cap : kDefaultTableCap;
      first_support_ = spec_.ell0;
      if (limit < first_support_)
        throw std::invalid_argument("truncation cap below the support start");
    }
    cdf_.clear();
    cdf_.reserve(static_cast<std::size_t>(limit - first_support_ + 1));
    detail::Kahan cum;
    for (std::uint64_t ell = first_support_; ell <= limit; ++ell) {
      cum.add(pmf(ell));
      cdf_.push_back(cum.s);
    }
    truncated_mass_ = std::max(0.0, 1.0 - cum.s);
    if (spec_.kind == LengthKind::Table) truncated_mass_ = std::max(0.0, 1.0 - cum.s);
  }

  void locate_monotone_threshold() {
    ell_star_ = 1;
    if (spec_.kind != LengthKind::LogLogEps && spec_.kind != LengthKind::PowerLaw) return;
    ell_star_ = spec_.ell0;
    auto f2 = [&](std::uint64_t ell) {
      double x = static_cast<double>(ell);
      return x * x * base(x);
    };
    // scan until x^2 base(x) is decreasing over a doubling window
    while (ell_star_ < (1ULL << 40)) {
      bool ok = true;
      std::uint64_t probe = ell_star_;
      for (int i = 0; i < 64 && ok; ++i) {
        std::uint64_t next = probe + std::max<std::uint64_t>(1, probe / 16);
        if (f2(next) > f2(probe)) ok = false;
        probe = next;
      }
      if (ok) return;
      ell_star_ *= 2;
    }
  }

  double window_sum(int k, std::uint64_t s, std::uint64_t t) const {
    switch (spec_.kind) {
      case LengthKind::Dirac: {
        if (s <= spec_.t && spec_.t <= t) return std::pow(static_cast<double>(spec_.t), k);
        return 0.0;
      }
      case LengthKind::Geometric:
        return geometric_tail_moment(k, s) - geometric_tail_moment(k, t + 1);
      case LengthKind::Table: {
        detail::Kahan sum;
        std::uint64_t hi = std::min<std::uint64_t>(t, spec_.table.size());
        for (std::uint64_t ell = s; ell <= hi; ++ell)
          sum.add(std::pow(static_cast<double>(ell), k) * pmf(ell));
        return sum.s;
      }
      default: {
        std::uint64_t lo = std::max(s, spec_.ell0);
        if (lo > t) return 0.0;
        if (t - lo <= kDirectSumCap) {
          detail::Kahan sum;
          for (std::uint64_t ell = lo; ell <= t; ++ell) sum.add(powk(ell, k) * base(static_cast<double>(ell)));
          return c_ * sum.s;
        }
        // head + integral bracket midpoint for gigantic windows
        std::uint64_t head_end = lo + kDirectSumCap;
        detail::Kahan sum;
        for (std::uint64_t ell = lo; ell <= head_end; ++ell)
          sum.add(powk(ell, k) * base(static_cast<double>(ell)));
        double rest_lo = base_integral(k, static_cast<double>(head_end + 1), static_cast<double>(t) + 1.0);
        double rest_hi = base_integral(k, static_cast<double>(head_end + 1), static_cast<double>(t)) +
                         powk(head_end + 1, k) * base(static_cast<double>(head_end + 1));
        return c_ * (sum.s + 0.5 * (rest_lo + rest_hi));
      }
    }
  }

  double moment_window_tail(int k, std::uint64_t s) const {
    switch (spec_.kind) {
      case LengthKind::Dirac:
        return s <= spec_.t ? std::pow(static_cast<double>(spec_.t), k) : 0.0;
      case LengthKind::Geometric:
        return geometric_tail_moment(k, s);
      case LengthKind::Table: {
        detail::Kahan sum;
        for (std::uint64_t ell = s; ell <= spec_.table.size(); ++ell)
          sum.add(std::pow(static_cast<double>(ell), k) * pmf(ell));
        return sum.s;
      }
      default: {
        if (k == 2 && !has_finite_moment(2)) return kInf;
        std::uint64_t lo = std::max(s, spec_.ell0);
        std::uint64_t cut = std::max<std::uint64_t>(std::max<std::uint64_t>(2 * lo, spec_.ell0 * 64),
                                                    1u << 21);
        cut = std::min<std::uint64_t>(cut, lo + kDirectSumCap);
        detail::Kahan sum;
        for (std::uint64_t ell = lo; ell <= cut; ++ell)
          sum.add(powk(ell, k) * base(static_cast<double>(ell)));
        double rest_lo = base_integral(k, static_cast<double>(cut + 1), kInf);
        double rest_hi = rest_lo + powk(cut + 1, k) * base(static_cast<double>(cut + 1));
        return c_ * (sum.s + 0.5 * (rest_lo + rest_hi));
      }
    }
  }

  // sum_{l >= s} l^k m(l) for the geometric law, closed form
  double geometric_tail_moment(int k, std::uint64_t s) const {
    double p = 1.0 / spec_.mean_t;
    double q = 1 - p;
    if (s < 1) s = 1;
    double sd = static_cast<double>(s);
    double qpow = std::exp((sd - 1.0) * std::log1p(-p));
    switch (k) {
      case 0:
        return qpow;
      case 1:
        return qpow * (sd + q / p);
      default:
        return qpow * (sd * sd + q * (2 * sd + 1) / p + 2 * q * q / (p * p));
    }
  }

  Bracket moment2_window_log_analytic(double ln_a, double ln_b) const {
    switch (spec_.kind) {
      case LengthKind::Dirac: {
        double lt = std::log(static_cast<double>(spec_.t));
        if (ln_a <= lt && lt <= ln_b) {
          double v = static_cast<double>(spec_.t) * static_cast<double>(spec_.t);
          return {v, v};
        }
        return {0, 0};
      }
      case LengthKind::Geometric: {
        if (ln_a > 700) return {0, 0};
        double a = std::exp(ln_a);
        double b = ln_b > 700 ? kInf : std::exp(ln_b);
        double v = geometric_tail_moment(2, static_cast<std::uint64_t>(std::ceil(a)));
        if (b < kInf) v -= geometric_tail_moment(2, static_cast<std::uint64_t>(std::floor(b)) + 1);
        return {v, v};
      }
      case LengthKind::Table:
        return {0, 0};
      case LengthKind::PowerLaw: {
        double e = 3.0 - spec_.beta;
        double I;
        if (std::abs(e) < 1e-14) I = ln_b - ln_a;
        else {
          double hi_term = e * ln_b, lo_term = e * ln_a;
          if (hi_term > 650 || lo_term > 650) return {1e290, 1e290};
          I = (std::exp(hi_term) - std::exp(lo_term)) / e;
        }
        double f_lo = std::exp(2.0 * ln_a + log_base(ln_a));
        return {c_ * I, c_ * (I + f_lo)};
      }
      case LengthKind::LogLogEps: {
        double e = 1.0 + spec_.epsilon;
        double I = (std::pow(std::log(ln_b), e) - std::pow(std::log(ln_a), e)) / e;
        double f_lo = std::exp(2.0 * ln_a + log_base(ln_a));  // underflows to 0 for huge ln_a
        if (I < 0) I = 0;
        return {c_ * I, c_ * (I + f_lo)};
      }
    }
    return {0, 0};
  }

  LengthSpec spec_;
  double c_ = 1.0;
  double table_total_ = 1.0;
  double truncated_mass_ = 0.0;
  std::uint64_t first_support_ = 1;
  std::uint64_t ell_star_ = 1;
  std::vector<double> cdf_;
};

}  // namespace wormlab
