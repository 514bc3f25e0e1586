#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace propinf::theory {

// Symbols of the poisoned-logit analysis in one record.
//   p     poison rate in [0, 1)
//   t     property fraction in (0, 1]
//   pi_v  victim-label share among property points, in (0, 1]
//   mu    clean-logit mean
//   sigma clean-logit standard deviation, > 0
struct TheoryParams {
  double p = 0.0;
  double t = 0.0;
  double pi_v = 1.0;
  double mu = 0.0;
  double sigma = 1.0;
};

struct GaussianPair {
  double mu0 = 0.0, sigma0 = 1.0;
  double mu1 = 0.0, sigma1 = 1.0;
};

enum class ThresholdMode { general, equal_sigma };

struct ThresholdResult {
  double T = 0.0;
  double alpha = 0.0;  // Pr[X0 > T]
  double beta = 0.0;   // Pr[X1 < T]
  ThresholdMode mode = ThresholdMode::general;
};

struct PoisonedMoments {
  double M = 0.0;             // mean of exp(poisoned logit)
  double V = 0.0;             // variance of exp(poisoned logit)
  double mu_tilde = 0.0;      // mean of the poisoned logit
  double sigma_tilde_sq = 0.0;  // variance of the poisoned logit
};

struct LabelOnlyRate {
  double p_lo = 0.0;   // smallest rate flipping the small-world logit mean positive
  double p_hi = 0.0;   // rate at which the large world flips too
  double p_star = 0.0; // geometric mean of the two
  bool lo_already_positive = false;  // clean small-world mean was already > 0
};

// Gaussian cdf/pdf built on a pinned rational erf approximation (abs error
// well under 1e-12) so alpha/beta are bit-reproducible across platforms.
double erf_pinned(double x);
double erfc_pinned(double x);
double normal_cdf(double z);
double normal_pdf(double z);

// The recurring mixture factor c = p / (pi_v * (1-p) * t).
double mixture_factor(double p, double t, double pi_v);

// Poisoned logit of a point whose clean logit is phi:
//   log[ c + e^phi * (1 + c) ].
// Strictly increasing in p and in phi; identity at p = 0.
double poisoned_logit(double p, double t, double pi_v, double phi);

// Mean/variance of the poisoned logit when the clean logit is N(mu, sigma^2):
//   M = c + e^{mu + sigma^2/2} (1+c)
//   V = (e^{sigma^2} - 1) e^{2 mu + sigma^2} (1+c)^2
//   mu~ = log M - log sqrt(V/M^2 + 1),  sigma~^2 = log(V/M^2 + 1)
PoisonedMoments poisoned_moments(const TheoryParams& params);

// Threshold minimizing J = Pr[X0 > T] + Pr[X1 < T] for mu1 > mu0.
// Near-equal sigmas fall back to the midpoint (mu0 + mu1) / 2; otherwise the
// two stationary points of J are evaluated and the smaller J wins.
ThresholdResult optimal_threshold(const GaussianPair& pair);

// Chernoff query budget: ceil of
//   max[ 2(2a+1)log(1/eps)/(1-2a)^2 , 2(2b+1)log(1/eps)/(1-2b)^2 ].
// Internally cross-checked against the proof form (2+d)log(1/eps)/(d^2 a),
// d = 1/(2a) - 1, which is the same expression rearranged.
int64_t required_queries(double alpha, double beta, double epsilon);

// Smallest p on the grid {step, 2*step, ..., p_max} whose theoretical
// poisoned-logit variance is <= var_threshold for every positive t given.
// t = 0 contributes no constraint (the formula has t in a denominator; the
// zero-mass world has no clean property logits to model).
double select_poison_rate_by_variance(double t0, double t1, double pi_v, double mu,
                                      double sigma, double var_threshold = 0.15,
                                      double p_max = 0.25, double step = 0.001);

// Label-only rate selection: p_lo solves mu~(p; t0) = 0, p_hi solves
// mu~(p; t1) = 0 (bisection to 1e-8; mu~ is strictly increasing in p so the
// roots are unique), p_star = sqrt(p_lo * p_hi).
LabelOnlyRate label_only_rate(double t0, double t1, double pi_v, double mu, double sigma);

// CSV curves (p vs mu~, sigma~^2 for both worlds) for plotting.
// Columns: p,t,mu_tilde,sigma_tilde_sq
std::string theory_curves_csv(double t0, double t1, double pi_v, double mu, double sigma,
                              const std::vector<double>& p_values);

}  // namespace propinf::theory
