#include "propinf/theory.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "propinf/common.hpp"

namespace propinf::theory {

namespace {

constexpr double kSqrt2 = 1.4142135623730950488016887;
constexpr double kInvSqrt2Pi = 0.3989422804014326779399461;

// Rational minimax approximation of erf/erfc after W. J. Cody,
// "Rational Chebyshev approximation for the error function" (the SPECFUN
// CALERF coefficients). Three regions; absolute error < 1e-15 in double.
// Pinned here so downstream alpha/beta values do not depend on libm.
double calerf(double x, bool complementary) {
  static const double a[5] = {3.16112374387056560e0, 1.13864154151050156e2,
                              3.77485237685302021e2, 3.20937758913846947e3,
                              1.85777706184603153e-1};
  static const double b[4] = {2.36012909523441209e1, 2.44024637934444173e2,
                              1.28261652607737228e3, 2.84423683343917062e3};
  static const double c[9] = {5.64188496988670089e-1, 8.88314979438837594e0,
                              6.61191906371416295e1,  2.98635138197400131e2,
                              8.81952221241769090e2,  1.71204761263407058e3,
                              2.05107837782607147e3,  1.23033935479799725e3,
                              2.15311535474403846e-8};
  static const double d[8] = {1.57449261107098347e1, 1.17693950891312499e2,
                              5.37181101862009858e2, 1.62138957456669019e3,
                              3.29079923573345963e3, 4.36261909014324716e3,
                              3.43936767414372164e3, 1.23033935480374942e3};
  static const double p[6] = {3.05326634961232344e-1, 3.60344899949804439e-1,
                              1.25781726111229246e-1, 1.60837851487422766e-2,
                              6.58749161529837803e-4, 1.63153871373020978e-2};
  static const double q[5] = {2.56852019228982242e0, 1.87295284992346047e0,
                              5.27905102951428412e-1, 6.05183413124413191e-2,
                              2.33520497626869185e-3};

  double y = std::fabs(x);
  double result;
  if (y <= 0.46875) {
    double z = y * y;
    double xnum = a[4] * z;
    double xden = z;
    for (int i = 0; i < 3; ++i) {
      xnum = (xnum + a[i]) * z;
      xden = (xden + b[i]) * z;
    }
    double erf_val = x * (xnum + a[3]) / (xden + b[3]);
    return complementary ? 1.0 - erf_val : erf_val;
  }
  if (y <= 4.0) {
    double xnum = c[8] * y;
    double xden = y;
    for (int i = 0; i < 7; ++i) {
      xnum = (xnum + c[i]) * y;
      xden = (xden + d[i]) * y;
    }
    result = (xnum + c[7]) / (xden + d[7]);
  } else {
    double z = 1.0 / (y * y);
    double xnum = p[5] * z;
    double xden = z;
    for (int i = 0; i < 4; ++i) {
      xnum = (xnum + p[i]) * z;
      xden = (xden + q[i]) * z;
    }
    constexpr double kInvSqrtPi = 5.6418958354775628695e-1;
    result = z * (xnum + p[4]) / (xden + q[4]);
    result = (kInvSqrtPi - result) / y;
  }
  // erfc(y) = exp(-y^2) * result, computed with the split y = hi + lo to keep
  // exp accurate for large arguments.
  double ysq = std::floor(y * 16.0) / 16.0;
  double del = (y - ysq) * (y + ysq);
  result = std::exp(-ysq * ysq) * std::exp(-del) * result;
  if (x < 0.0) result = 2.0 - result;
  return complementary ? result : 1.0 - result;
}

}  // namespace

double erf_pinned(double x) { return calerf(x, false); }
double erfc_pinned(double x) { return calerf(x, true); }

double normal_cdf(double z) { return 0.5 * erfc_pinned(-z / kSqrt2); }

double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

double mixture_factor(double p, double t, double pi_v) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("poison rate must be in [0,1)");
  if (t <= 0.0 || t > 1.0) throw std::invalid_argument("property fraction must be in (0,1]");
  if (pi_v <= 0.0 || pi_v > 1.0) throw std::invalid_argument("pi_v must be in (0,1]");
  return p / (pi_v * (1.0 - p) * t);
}

double poisoned_logit(double p, double t, double pi_v, double phi) {
  double c = mixture_factor(p, t, pi_v);
  if (c == 0.0) return phi;
  // log(c + e^phi (1+c)) evaluated as logaddexp for stability at large |phi|.
  return log_add_exp(std::log(c), phi + std::log1p(c));
}

PoisonedMoments poisoned_moments(const TheoryParams& params) {
  if (params.sigma <= 0.0) throw std::invalid_argument("sigma must be positive");
  double c = mixture_factor(params.p, params.t, params.pi_v);
  double s2 = params.sigma * params.sigma;
  double mean_lognorm = std::exp(params.mu + 0.5 * s2);
  double var_lognorm = std::expm1(s2) * std::exp(2.0 * params.mu + s2);
  PoisonedMoments m;
  m.M = c + mean_lognorm * (1.0 + c);
  m.V = var_lognorm * (1.0 + c) * (1.0 + c);
  if (params.p == 0.0) {
    // Log-normal round trip is the identity; return it exactly.
    m.mu_tilde = params.mu;
    m.sigma_tilde_sq = s2;
    return m;
  }
  double ratio = m.V / (m.M * m.M);
  m.sigma_tilde_sq = std::log1p(ratio);
  m.mu_tilde = std::log(m.M) - 0.5 * m.sigma_tilde_sq;
  return m;
}

ThresholdResult optimal_threshold(const GaussianPair& pair) {
  const double mu0 = pair.mu0, s0 = pair.sigma0, mu1 = pair.mu1, s1 = pair.sigma1;
  if (s0 <= 0.0 || s1 <= 0.0) throw std::invalid_argument("sigmas must be positive");

  auto errors_at = [&](double T) {
    double alpha = 0.5 * erfc_pinned((T - mu0) / (s0 * kSqrt2));  // Pr[X0 > T]
    double beta = normal_cdf((T - mu1) / s1);                     // Pr[X1 < T]
    return std::pair<double, double>(alpha, beta);
  };

  ThresholdResult res;
  if (std::fabs(s0 - s1) <= 1e-9 * std::max(s0, s1)) {
    if (mu1 <= mu0) throw std::invalid_argument("indistinguishable worlds");
    res.T = 0.5 * (mu0 + mu1);
    res.mode = ThresholdMode::equal_sigma;
    std::tie(res.alpha, res.beta) = errors_at(res.T);
    return res;
  }
  if (mu1 < mu0) throw std::invalid_argument("optimal_threshold requires mu1 > mu0");

  // Stationary points of J(T) = Pr[X0 > T] + Pr[X1 < T]:
  //   (s1^2 - s0^2) T^2 - 2 (mu0 s1^2 - mu1 s0^2) T
  //     + mu0^2 s1^2 - mu1^2 s0^2 + 2 s0^2 s1^2 log(s0/s1) = 0
  // whose roots are
  //   T = [ (mu0 s1^2 - mu1 s0^2)
  //         +- s0 s1 sqrt((mu1-mu0)^2 + 2 (s0^2 - s1^2) log(s0/s1)) ]
  //       / (s1^2 - s0^2).
  // The discriminant is nonnegative: (s0^2 - s1^2) and log(s0/s1) share sign.
  double den = s1 * s1 - s0 * s0;
  double lin = mu0 * s1 * s1 - mu1 * s0 * s0;
  double disc = (mu1 - mu0) * (mu1 - mu0) + 2.0 * (s0 * s0 - s1 * s1) * std::log(s0 / s1);
  double root = s0 * s1 * std::sqrt(std::max(disc, 0.0));

  double t_plus = (lin + root) / den;
  double t_minus = (lin - root) / den;
  auto [a_plus, b_plus] = errors_at(t_plus);
  auto [a_minus, b_minus] = errors_at(t_minus);
  if (a_plus + b_plus <= a_minus + b_minus) {
    res.T = t_plus;
    res.alpha = a_plus;
    res.beta = b_plus;
  } else {
    res.T = t_minus;
    res.alpha = a_minus;
    res.beta = b_minus;
  }
  res.mode = ThresholdMode::general;
  return res;
}

namespace {

double chernoff_branch(double err, double log_inv_eps) {
  double d = 1.0 - 2.0 * err;
  return 2.0 * (2.0 * err + 1.0) * log_inv_eps / (d * d);
}

}  // namespace

int64_t required_queries(double alpha, double beta, double epsilon) {
  if (alpha < 0.0 || alpha >= 0.5 || beta < 0.0 || beta >= 0.5)
    throw std::invalid_argument("test not better than coin flip");
  if (epsilon <= 0.0 || epsilon >= 1.0)
    throw std::invalid_argument("epsilon must be in (0,1)");
  double log_inv_eps = std::log(1.0 / epsilon);
  double qa = chernoff_branch(alpha, log_inv_eps);
  double qb = chernoff_branch(beta, log_inv_eps);
  // Cross-check against the proof form q = (2+d) log(1/eps) / (d^2 e),
  // d = 1/(2e) - 1, which must agree algebraically.
  for (double e : {alpha, beta}) {
    if (e <= 0.0) continue;
    double d = 1.0 / (2.0 * e) - 1.0;
    double proof_form = (2.0 + d) * log_inv_eps / (d * d * e);
    double main_form = chernoff_branch(e, log_inv_eps);
    if (std::fabs(proof_form - main_form) > 1e-9 * std::max(proof_form, main_form))
      throw std::logic_error("Chernoff budget forms disagree");
  }
  return static_cast<int64_t>(std::ceil(std::max(qa, qb)));
}

double select_poison_rate_by_variance(double t0, double t1, double pi_v, double mu,
                                      double sigma, double var_threshold, double p_max,
                                      double step) {
  if (var_threshold <= 0.0) throw std::invalid_argument("var_threshold must be positive");
  if (step <= 0.0 || p_max <= 0.0 || p_max >= 1.0)
    throw std::invalid_argument("invalid grid parameters");
  auto variance_ok = [&](double p) {
    for (double t : {t0, t1}) {
      if (t <= 0.0) continue;  // zero-mass world: no constraint
      TheoryParams params{p, t, pi_v, mu, sigma};
      if (poisoned_moments(params).sigma_tilde_sq > var_threshold) return false;
    }
    return true;
  };
  int64_t n_steps = static_cast<int64_t>(std::llround(p_max / step));
  for (int64_t k = 1; k <= n_steps; ++k) {
    double p = static_cast<double>(k) * step;
    if (variance_ok(p)) return p;
  }
  TheoryParams at_max{p_max, t1 > 0.0 ? t1 : t0, pi_v, mu, sigma};
  double v = poisoned_moments(at_max).sigma_tilde_sq;
  throw std::runtime_error(
      "variance threshold unattainable within p_max (sigma_tilde_sq at p_max = " +
      std::to_string(v) + ")");
}

namespace {

double mu_tilde_at(double p, double t, double pi_v, double mu, double sigma) {
  return poisoned_moments({p, t, pi_v, mu, sigma}).mu_tilde;
}

// Unique root of mu~(p; t) = 0 in (0, 1); mu~ is strictly increasing in p.
double bisect_rate(double t, double pi_v, double mu, double sigma) {
  double lo = 0.0, hi = 0.5;
  while (mu_tilde_at(hi, t, pi_v, mu, sigma) < 0.0) {
    hi = 0.5 * (1.0 + hi);
    if (hi > 1.0 - 1e-12)
      throw std::runtime_error("label-only rate: mean never crosses zero below p=1");
  }
  while (hi - lo > 1e-8) {
    double mid = 0.5 * (lo + hi);
    if (mu_tilde_at(mid, t, pi_v, mu, sigma) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

LabelOnlyRate label_only_rate(double t0, double t1, double pi_v, double mu, double sigma) {
  if (!(t1 > t0) || t0 <= 0.0) throw std::invalid_argument("requires t1 > t0 > 0");
  LabelOnlyRate r;
  if (mu_tilde_at(0.0, t0, pi_v, mu, sigma) > 0.0) {
    r.p_lo = 0.0;
    r.lo_already_positive = true;
  } else {
    r.p_lo = bisect_rate(t0, pi_v, mu, sigma);
  }
  if (mu_tilde_at(0.0, t1, pi_v, mu, sigma) > 0.0)
    throw std::runtime_error("label-only rate: empty feasible interval (clean mean of the larger world already positive)");
  r.p_hi = bisect_rate(t1, pi_v, mu, sigma);
  if (!r.lo_already_positive && r.p_lo >= r.p_hi)
    throw std::runtime_error("label-only rate: empty feasible interval");
  r.p_star = std::sqrt(r.p_lo * r.p_hi);
  return r;
}

std::string theory_curves_csv(double t0, double t1, double pi_v, double mu, double sigma,
                              const std::vector<double>& p_values) {
  std::ostringstream out;
  out.precision(12);
  out << "p,t,mu_tilde,sigma_tilde_sq\n";
  for (double p : p_values) {
    for (double t : {t0, t1}) {
      if (t <= 0.0) continue;
      PoisonedMoments m = poisoned_moments({p, t, pi_v, mu, sigma});
      out << p << "," << t << "," << m.mu_tilde << "," << m.sigma_tilde_sq << "\n";
    }
  }
  return out.str();
}

}  // namespace propinf::theory
