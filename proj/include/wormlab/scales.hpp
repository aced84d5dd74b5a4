#pragma once

// Deterministic certifier and generator for good sequences of scales. A
// sequence R_0 < ... < R_{N+1} of positive integers is certified against
// four conditions: the initial-scale bound, the per-step second-moment
// window bound, the psi growth bound, and the shooting bound at the top
// scale. Scales grow doubly exponentially, so every scale is carried as
// ln(R); values that fit in 63 bits also keep an exact integer, and the
// certificate records which arithmetic regime each condition used.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wormlab/lengths.hpp"

namespace wormlab {

struct ScaleParams {
  double R_star0 = 50;   // minimal initial scale
  double gamma0 = 0.25;  // initial capacity-to-length ratio
  double delta_low = 9600;  // window lower multiplier (> 1)
  double delta_up = 0.25;   // window upper multiplier (< 1)
  double alpha_low = 1.0;   // required window mass * v
  double psi = 0.5;         // growth bound constant
  double s = 0.125;         // shooting constant
  double lambda = 1025;     // length cut multiplier (2*beta + 1 for beta = 512)
  double v = 1.0;           // intensity

  void validate() const {
    for (double x : {R_star0, gamma0, delta_low, delta_up, alpha_low, psi, s, lambda, v})
      if (!(x > 0)) throw std::invalid_argument("ScaleParams: all parameters must be > 0");
    if (!(delta_low > 1) || !(delta_up < 1))
      throw std::invalid_argument("ScaleParams: need delta_low > 1 and delta_up < 1");
  }
};

struct ScaleValue {
  double log_e = 0;                   // ln R
  std::optional<std::uint64_t> exact; // R when representable

  static ScaleValue from_log(double lr) {
    ScaleValue v;
    v.log_e = lr;
    if (lr < 43.0) {  // < 2^63 comfortably
      double r = std::round(std::exp(lr));
      if (r < 1) r = 1;
      v.exact = static_cast<std::uint64_t>(r);
      v.log_e = std::log(r);
    }
    return v;
  }
  static ScaleValue from_int(std::uint64_t r) {
    ScaleValue v;
    v.exact = r;
    v.log_e = std::log(static_cast<double>(r));
    return v;
  }
};

struct ConditionReport {
  std::string name;
  int index = -1;       // n for the per-n conditions
  bool pass = false;
  double lhs = 0, rhs = 0;   // compared values (log-space where noted)
  double margin = 0;         // lhs - rhs in the comparison space
  std::string regime;        // "exact", "hybrid", "log"
};

struct ScaleCertificate {
  std::vector<ConditionReport> conditions;
  bool all_pass = true;
  void add(ConditionReport c) {
    all_pass = all_pass && c.pass;
    conditions.push_back(std::move(c));
  }
};

struct ScaleSequence {
  std::vector<ScaleValue> R;  // R_0 .. R_{N+1}
  int N = 0;                  // R.size() == N + 2
  double delta = 0;           // generator metadata
  int n0 = 0;
  ScaleCertificate certificate;
  bool overflow_truncated = false;
};

// ---------------------------------------------------------------------------
// Certifier
// ---------------------------------------------------------------------------

inline ScaleCertificate check_good_sequence(const std::vector<ScaleValue>& seq,
                                            const ScaleParams& params,
                                            const LengthDistribution& dist, int d) {
  params.validate();
  if (seq.size() < 2) throw std::invalid_argument("check_good_sequence: need length >= 2");
  for (std::size_t i = 1; i < seq.size(); ++i)
    if (!(seq[i].log_e > seq[i - 1].log_e))
      throw std::invalid_argument("check_good_sequence: sequence must be strictly increasing");

  ScaleCertificate cert;
  int N = static_cast<int>(seq.size()) - 2;

  // condition 1: R_0 >= R*_0
  {
    ConditionReport c;
    c.name = "initial-scale";
    c.lhs = seq[0].log_e;
    c.rhs = std::log(params.R_star0);
    c.pass = c.lhs >= c.rhs;
    c.margin = c.lhs - c.rhs;
    c.regime = "log";
    cert.add(std::move(c));
  }

  // condition 2 per n: v * sum_{dl R_n^2}^{du R_{n+1}^2} l^2 m(l) >= alpha_low
  for (int n = 0; n <= N; ++n) {
    ConditionReport c;
    c.name = "moment-window";
    c.index = n;
    double ln_a = std::log(params.delta_low) + 2.0 * seq[static_cast<std::size_t>(n)].log_e;
    double ln_b = std::log(params.delta_up) + 2.0 * seq[static_cast<std::size_t>(n) + 1].log_e;
    if (ln_b < ln_a) {
      c.lhs = 0;
      c.rhs = params.alpha_low;
      c.pass = false;
      c.margin = -params.alpha_low;
      c.regime = "empty-window";
      cert.add(std::move(c));
      continue;
    }
    Bracket w2 = dist.moment2_window_log(ln_a, ln_b);
    c.lhs = params.v * w2.lo;  // conservative: certify with the lower bound
    c.rhs = params.alpha_low;
    c.pass = c.lhs >= c.rhs;
    c.margin = c.lhs - c.rhs;
    c.regime = ln_b <= std::log(2.0e7) ? "exact"
               : ln_a <= std::log(2.0e7) ? "hybrid"
                                         : "log";
    cert.add(std::move(c));
  }

  // condition 3 per n: 2^n gamma0 <= psi R_n^{d-4}  (compared in logs)
  for (int n = 0; n <= N; ++n) {
    ConditionReport c;
    c.name = "psi-growth";
    c.index = n;
    c.lhs = n * std::log(2.0) + std::log(params.gamma0);
    c.rhs = std::log(params.psi) + (d - 4) * seq[static_cast<std::size_t>(n)].log_e;
    c.pass = c.lhs <= c.rhs;
    c.margin = c.rhs - c.lhs;
    c.regime = "log";
    cert.add(std::move(c));
  }

  // condition 4: 2^{N+1} gamma0 s v R_{N+1}^4 tail(lambda R_{N+1}^2) >= 2
  {
    ConditionReport c;
    c.name = "shooting";
    double lnR = seq.back().log_e;
    double ln_cut = std::log(params.lambda) + 2.0 * lnR;
    Bracket lt = dist.log_tail_mass(ln_cut);
    double ln_lhs = (N + 1) * std::log(2.0) + std::log(params.gamma0) + std::log(params.s) +
                    std::log(params.v) + 4.0 * lnR + lt.lo;
    c.lhs = ln_lhs;
    c.rhs = std::log(2.0);
    c.pass = std::isfinite(ln_lhs) && c.lhs >= c.rhs;
    c.margin = c.lhs - c.rhs;
    c.regime = ln_cut <= std::log(2.0e7) ? "exact" : "log";
    cert.add(std::move(c));
  }
  return cert;
}

// ---------------------------------------------------------------------------
// Generator on the exp(exp(n^{1/(1+delta)})) grid
// ---------------------------------------------------------------------------

inline double expexp_log_scale(int n, double delta) {
  if (n == 0) return std::exp(0.0);  // ln R~_0 = e^0 = 1
  return std::exp(std::pow(static_cast<double>(n), 1.0 / (1.0 + delta)));
}

struct GeneratorSearch {
  int n0_max = 64;
  int N_max = 40;
};

// First (n0, N) in lexicographic order whose shifted sequence passes; nullopt
// when the whole search range fails.
inline std::optional<ScaleSequence> generate_candidate_sequence(
    const LengthDistribution& dist, const ScaleParams& params, int d, double delta,
    const GeneratorSearch& search = {}) {
  params.validate();
  if (!(delta > 0)) throw std::invalid_argument("generate_candidate_sequence: delta must be > 0");
  bool overflow_seen = false;
  for (int n0 = 0; n0 <= search.n0_max; ++n0) {
    for (int N = 1; N <= search.N_max; ++N) {
      std::vector<ScaleValue> seq;
      bool bad = false;
      for (int k = 0; k <= N + 1; ++k) {
        double lr = expexp_log_scale(n0 + k, delta);
        if (!std::isfinite(lr) || lr > 1e300) {
          bad = true;
          overflow_seen = true;
          break;
        }
        ScaleValue v = ScaleValue::from_log(lr);
        if (!seq.empty() && !(v.log_e > seq.back().log_e)) {
          bad = true;  // rounding collapsed two small scales
          break;
        }
        seq.push_back(v);
      }
      if (bad) continue;
      ScaleCertificate cert = check_good_sequence(seq, params, dist, d);
      if (cert.all_pass) {
        ScaleSequence out;
        out.R = std::move(seq);
        out.N = N;
        out.delta = delta;
        out.n0 = n0;
        out.certificate = std::move(cert);
        out.overflow_truncated = overflow_seen;
        return out;
      }
    }
  }
  return std::nullopt;
}

}  // namespace wormlab
