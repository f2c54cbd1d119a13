#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dmsim/error.hpp"

namespace dmsim {

/// The motility law phi. The prototype is phi(xi) = xi^alpha on [0, inf);
/// custom laws carry their own value and analytic first/second derivatives.
struct MotilitySpec {
  enum class Form { prototype, custom };

  Form form = Form::prototype;
  std::string name = "prototype";
  double alpha = 1.0;
  double xi0 = 1.0;  ///< right end of the window where the hypotheses are checked
  std::function<double(double)> phi;
  std::function<double(double)> dphi;
  std::function<double(double)> d2phi;

  static MotilitySpec prototype(double alpha, double xi0 = 1.0) {
    MotilitySpec s;
    s.alpha = alpha;
    s.xi0 = xi0;
    s.check();
    return s;
  }

  static MotilitySpec custom(std::string name, double alpha, double xi0, std::function<double(double)> phi,
                             std::function<double(double)> dphi, std::function<double(double)> d2phi) {
    MotilitySpec s;
    s.form = Form::custom;
    s.name = std::move(name);
    s.alpha = alpha;
    s.xi0 = xi0;
    s.phi = std::move(phi);
    s.dphi = std::move(dphi);
    s.d2phi = std::move(d2phi);
    s.check();
    return s;
  }

  void check() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("motility: alpha must be positive");
    if (!(xi0 > 0.0) || !std::isfinite(xi0)) throw DomainError("motility: xi0 must be positive");
    if (form == Form::custom && (!phi || !dphi || !d2phi))
      throw ContractError("motility: custom form needs phi, phi' and phi''");
  }
};

inline double eval_phi(const MotilitySpec& s, double xi) {
  if (!(xi >= 0.0)) throw DomainError("eval_phi: argument must be nonnegative");
  if (s.form == MotilitySpec::Form::custom) return s.phi(xi);
  return xi == 0.0 ? 0.0 : std::pow(xi, s.alpha);
}

inline double eval_phi_prime(const MotilitySpec& s, double xi) {
  if (!(xi > 0.0)) throw DomainError("eval_phi_prime: argument must be positive");
  if (s.form == MotilitySpec::Form::custom) return s.dphi(xi);
  return s.alpha * std::pow(xi, s.alpha - 1.0);
}

inline double eval_phi_second(const MotilitySpec& s, double xi) {
  if (!(xi > 0.0)) throw DomainError("eval_phi_second: argument must be positive");
  if (s.form == MotilitySpec::Form::custom) return s.d2phi(xi);
  return s.alpha * (s.alpha - 1.0) * std::pow(xi, s.alpha - 2.0);
}

/// phi_eps = phi + eps. eps = 0 denotes the unregularized law itself.
struct RegularizedMotility {
  MotilitySpec base;
  double eps = 0.0;

  RegularizedMotility() = default;
  RegularizedMotility(MotilitySpec b, double e) : base(std::move(b)), eps(e) {
    if (!(eps >= 0.0) || !(eps <= 1.0)) throw DomainError("regularization eps must lie in [0,1]");
  }

  double value(double xi) const { return eval_phi(base, xi) + eps; }
  double derivative(double xi) const { return eval_phi_prime(base, xi); }
  double second(double xi) const { return eval_phi_second(base, xi); }
};

inline double eval_phi_eps(const MotilitySpec& s, double eps, double xi) { return eval_phi(s, xi) + eps; }

/// Named laws accepted by run configurations.
///  - "prototype":          xi^alpha
///  - "power_plus_square":  xi^alpha + xi^2
///  - "saturating":         (xi/(1+xi) + xi^3)^alpha; (phi^(1/alpha))'' <= 0 only for xi below ~0.196
inline MotilitySpec make_motility(const std::string& form, double alpha, double xi0) {
  if (form == "prototype") return MotilitySpec::prototype(alpha, xi0);
  if (form == "power_plus_square") {
    return MotilitySpec::custom(
        form, alpha, xi0, [alpha](double x) { return (x == 0.0 ? 0.0 : std::pow(x, alpha)) + x * x; },
        [alpha](double x) { return alpha * std::pow(x, alpha - 1.0) + 2.0 * x; },
        [alpha](double x) { return alpha * (alpha - 1.0) * std::pow(x, alpha - 2.0) + 2.0; });
  }
  if (form == "saturating") {
    auto g = [](double x) { return x / (1.0 + x) + x * x * x; };
    auto g1 = [](double x) { return 1.0 / ((1.0 + x) * (1.0 + x)) + 3.0 * x * x; };
    auto g2 = [](double x) { return -2.0 / ((1.0 + x) * (1.0 + x) * (1.0 + x)) + 6.0 * x; };
    return MotilitySpec::custom(
        form, alpha, xi0, [=](double x) { return x == 0.0 ? 0.0 : std::pow(g(x), alpha); },
        [=](double x) { return alpha * std::pow(g(x), alpha - 1.0) * g1(x); },
        [=](double x) {
          const double gx = g(x);
          return alpha * (alpha - 1.0) * std::pow(gx, alpha - 2.0) * g1(x) * g1(x) +
                 alpha * std::pow(gx, alpha - 1.0) * g2(x);
        });
  }
  throw ConfigError("unknown motility form '" + form + "' (prototype, power_plus_square, saturating)");
}

enum class Verdict { pass, fail, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

struct HypothesisCheck {
  std::string name;
  std::string statement;
  Verdict verdict = Verdict::pass;
  double witness_xi = 0.0;
  double witness_value = 0.0;
  std::string note;
};

struct HypothesisReport {
  std::vector<HypothesisCheck> checks;
  std::string sampling;

  bool all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.verdict == Verdict::pass; });
  }
  bool any_fail() const {
    return std::any_of(checks.begin(), checks.end(), [](const auto& c) { return c.verdict == Verdict::fail; });
  }
  const HypothesisCheck& get(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return c;
    throw ContractError("no hypothesis check named " + name);
  }
};

namespace detail {

constexpr int kHypothesisDepth = 40;  // samples xi0 * 2^-j, j = 0..40
constexpr int kDriftWindow = 8;
constexpr double kDriftThreshold = 1e-3;

// True when the last `kDriftWindow` values move strictly in direction `sign`
// with a relative change above the threshold.
inline bool drifting(const std::vector<double>& r, int sign) {
  const int n = static_cast<int>(r.size());
  if (n < kDriftWindow) return false;
  for (int k = n - kDriftWindow + 1; k < n; ++k)
    if (!(sign * (r[k] - r[k - 1]) > 0.0)) return false;
  const double first = r[n - kDriftWindow];
  const double last = r[n - 1];
  return std::abs(last - first) > kDriftThreshold * std::max(std::abs(first), 1e-300);
}

}  // namespace detail

/// Sampling-based evidence for the structural hypotheses on phi near 0:
/// regularity/positivity, phi(xi)/xi^alpha bounded below, |phi'(xi)|/xi^(alpha-1)
/// bounded above, and concavity of phi^(1/alpha) on (0, xi0).
inline HypothesisReport validate_hypotheses(const MotilitySpec& s) {
  HypothesisReport rep;
  rep.sampling = "xi = xi0 * 2^-j, j = 0.." + std::to_string(detail::kHypothesisDepth) +
                 ", xi0 = " + std::to_string(s.xi0);
  std::vector<double> xs;
  for (int j = 0; j <= detail::kHypothesisDepth; ++j) xs.push_back(std::ldexp(s.xi0, -j));

  {  // phi(0) = 0, phi > 0 on samples
    HypothesisCheck c{"regularity", "phi(0) = 0 and phi(xi) > 0 for xi > 0", Verdict::pass, 0.0, 0.0, ""};
    const double p0 = eval_phi(s, 0.0);
    if (p0 != 0.0) {
      c.verdict = Verdict::fail;
      c.witness_xi = 0.0;
      c.witness_value = p0;
      c.note = "phi(0) is not zero";
    } else {
      for (double x : xs) {
        const double p = eval_phi(s, x);
        if (!(p > 0.0) || !std::isfinite(p)) {
          c.verdict = Verdict::fail;
          c.witness_xi = x;
          c.witness_value = p;
          c.note = "phi not positive";
          break;
        }
      }
    }
    rep.checks.push_back(c);
  }

  {  // liminf phi/xi^alpha > 0
    HypothesisCheck c{"lower_power_bound", "liminf_{xi->0} phi(xi)/xi^alpha > 0", Verdict::pass, 0.0,
                      std::numeric_limits<double>::infinity(), ""};
    std::vector<double> ratios;
    for (double x : xs) {
      const double r = eval_phi(s, x) / std::pow(x, s.alpha);
      ratios.push_back(r);
      if (!std::isfinite(r) || !(r > 0.0)) {
        c.verdict = Verdict::fail;
        c.witness_xi = x;
        c.witness_value = r;
        c.note = "ratio not positive";
        break;
      }
      if (r < c.witness_value) {
        c.witness_value = r;
        c.witness_xi = x;
      }
    }
    if (c.verdict == Verdict::pass && detail::drifting(ratios, -1)) {
      c.verdict = Verdict::inconclusive;
      c.note = "ratio still decreasing at the smallest samples";
    }
    rep.checks.push_back(c);
  }

  {  // limsup |phi'|/xi^(alpha-1) < inf
    HypothesisCheck c{"derivative_bound", "limsup_{xi->0} |phi'(xi)|/xi^(alpha-1) < inf", Verdict::pass, 0.0, 0.0, ""};
    std::vector<double> ratios;
    for (double x : xs) {
      const double r = std::abs(eval_phi_prime(s, x)) / std::pow(x, s.alpha - 1.0);
      ratios.push_back(r);
      if (!std::isfinite(r)) {
        c.verdict = Verdict::fail;
        c.witness_xi = x;
        c.witness_value = r;
        c.note = "ratio not finite";
        break;
      }
      if (r > c.witness_value) {
        c.witness_value = r;
        c.witness_xi = x;
      }
    }
    if (c.verdict == Verdict::pass && detail::drifting(ratios, +1)) {
      c.verdict = Verdict::inconclusive;
      c.note = "ratio still increasing at the smallest samples";
    }
    rep.checks.push_back(c);
  }

  {  // (phi^(1/alpha))'' <= 0 on (0, xi0), central differences with step 1e-6 xi
    HypothesisCheck c{"root_concavity", "(phi^(1/alpha))''(xi) <= 0 on (0, xi0)", Verdict::pass, 0.0,
                      -std::numeric_limits<double>::infinity(), ""};
    const double inv_alpha = 1.0 / s.alpha;
    auto g = [&](double x) { return std::pow(eval_phi(s, x), inv_alpha); };
    for (int j = 1; j <= detail::kHypothesisDepth; ++j) {
      const double x = xs[j];
      const double d = 1e-6 * x;
      const double gp = g(x + d), g0 = g(x), gm = g(x - d);
      const double second = (gp - 2.0 * g0 + gm) / (d * d);
      // rounding of the three evaluations, amplified by 1/d^2
      const double roundoff = 64.0 * std::numeric_limits<double>::epsilon() *
                              (std::abs(gp) + 2.0 * std::abs(g0) + std::abs(gm)) / (d * d);
      const double excess = second - (1e-8 + roundoff);
      if (second > c.witness_value) {
        c.witness_value = second;
        c.witness_xi = x;
      }
      if (excess > 0.0) {
        c.verdict = Verdict::fail;
        c.witness_xi = x;
        c.witness_value = second;
        c.note = "positive second derivative of phi^(1/alpha)";
        break;
      }
    }
    rep.checks.push_back(c);
  }
  return rep;
}

/// Flux integrability exponent for alpha in (0,1): 2/(2-alpha) below 1/2, 4/3 above.
inline double p_exponent(double alpha) {
  if (!(alpha > 0.0) || !(alpha < 1.0)) throw DomainError("p_exponent: alpha must lie in (0,1)");
  return alpha < 0.5 ? 2.0 / (2.0 - alpha) : 4.0 / 3.0;
}

/// Exponent used for the flux channel: p_exponent for alpha < 1, 4/3 otherwise.
inline double flux_exponent(double alpha) { return alpha < 1.0 ? p_exponent(alpha) : 4.0 / 3.0; }

/// Left side of the cross-diffusion coefficient bound, before multiplying by xi:
///   {a f f' + (a-1) f'}^2 / (2 f) + a f'^2 + a f''   with f = phi_eps.
inline double cross_diffusion_coefficient(const RegularizedMotility& m, double a, double xi) {
  const double f = m.value(xi);
  const double f1 = m.derivative(xi);
  const double f2 = m.second(xi);
  const double brace = a * f * f1 + (a - 1.0) * f1;
  return brace * brace / (2.0 * f) + a * f1 * f1 + a * f2;
}

/// The bracket whose sign controls the coefficient bound near xi = 0:
///   a^2 f^2 + 2a(a-1) f + (a-1)^2 + 2a f - 2(1-alpha) a / alpha.
inline double cross_diffusion_bracket(double alpha, double a, double f) {
  return a * a * f * f + 2.0 * a * (a - 1.0) * f + (a - 1.0) * (a - 1.0) + 2.0 * a * f -
         2.0 * (1.0 - alpha) * a / alpha;
}

struct InequalityReport {
  double a = 0.0;
  double xi_star = 0.0;
  std::vector<double> eps_range;
  std::vector<double> level_sup;  ///< sup of xi * coefficient per refinement level
  std::vector<double> level_argmax;
  double c_emp = 0.0;        ///< empirical constant (finest level)
  bool stabilized = false;   ///< sup changed by < 1% relative between consecutive levels
  double xi1 = 0.0;          ///< largest sample with bracket <= 0 on (0, xi1] at eps = 0
  double eps_star = 0.0;     ///< largest dyadic eps keeping the bracket <= 0 on (0, xi1]
};

/// Empirical supremum of xi * coefficient over xi in (0, xi_star] and the
/// given eps values (eps = 0 is the unregularized limit member).
/// Level l samples xi_star * 2^(-k / (s 2^l)) for k up to 40 * 2^l octaves,
/// s = samples_per_octave, so each level contains the previous one.
inline InequalityReport verify_cross_diffusion_bound(const MotilitySpec& spec, double xi_star,
                                                     const std::vector<double>& eps_range,
                                                     int samples_per_octave = 16,
                                                     std::optional<double> a_override = std::nullopt,
                                                     int levels = 3) {
  if (!(spec.alpha > 0.0) || !(spec.alpha < 1.0))
    throw DomainError("cross-diffusion bound requires alpha in (0,1)");
  if (!(xi_star > 0.0)) throw DomainError("xi_star must be positive");
  if (samples_per_octave < 1 || levels < 1) throw ContractError("sampling parameters must be positive");
  if (eps_range.empty()) throw ContractError("eps_range must not be empty");
  InequalityReport rep;
  rep.a = a_override.value_or(1.0 / spec.alpha);
  rep.xi_star = xi_star;
  rep.eps_range = eps_range;
  std::vector<RegularizedMotility> laws;
  for (double e : eps_range) laws.emplace_back(spec, e);

  for (int l = 0; l < levels; ++l) {
    const long per_octave = static_cast<long>(samples_per_octave) << l;
    const long count = (40L << l) * per_octave;
    double sup = -std::numeric_limits<double>::infinity(), arg = xi_star;
    for (long k = 0; k <= count; ++k) {
      const double xi = xi_star * std::exp2(-static_cast<double>(k) / per_octave);
      for (const auto& law : laws) {
        const double val = xi * cross_diffusion_coefficient(law, rep.a, xi);
        if (val > sup) {
          sup = val;
          arg = xi;
        }
      }
    }
    rep.level_sup.push_back(sup);
    rep.level_argmax.push_back(arg);
  }
  rep.c_emp = rep.level_sup.back();
  rep.stabilized = std::isfinite(rep.c_emp);
  for (std::size_t l = 1; l < rep.level_sup.size(); ++l) {
    const double prev = rep.level_sup[l - 1], cur = rep.level_sup[l];
    if (!(std::abs(cur - prev) <= 1e-2 * std::max(std::abs(prev), 1e-12))) rep.stabilized = false;
  }

  // Evidence for the small-xi window on the base sampling.
  const long per_octave = samples_per_octave;
  const long count = 40L * per_octave;
  std::vector<double> xs;
  for (long k = count; k >= 0; --k) xs.push_back(xi_star * std::exp2(-static_cast<double>(k) / per_octave));
  for (double xi : xs) {
    if (cross_diffusion_bracket(spec.alpha, rep.a, eval_phi(spec, xi)) <= 0.0)
      rep.xi1 = xi;
    else
      break;
  }
  if (rep.xi1 > 0.0) {
    for (int j = 1; j <= 60; ++j) {
      const double e = std::ldexp(1.0, -j);
      bool ok = true;
      for (double xi : xs) {
        if (xi > rep.xi1) break;
        if (cross_diffusion_bracket(spec.alpha, rep.a, eval_phi(spec, xi) + e) > 0.0) {
          ok = false;
          break;
        }
      }
      if (ok) {
        rep.eps_star = e;
        break;
      }
    }
  }
  return rep;
}

}  // namespace dmsim
