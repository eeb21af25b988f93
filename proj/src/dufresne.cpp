#include "coupling/dufresne.hpp"

#include "coupling/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace coupling {

namespace {

constexpr int kGammaMaxIter = 500;
constexpr double kGammaEps = 1e-14;
constexpr double kFpMin = std::numeric_limits<double>::min() / kGammaEps;

// Lower regularized gamma P(a, x) by power series, for x < a + 1.
double lower_gamma_series(double a, double x) {
  double ap = a;
  double term = 1.0 / a;
  double sum = term;
  for (int i = 0; i < kGammaMaxIter; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kGammaEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper regularized gamma Q(a, x) by Lentz continued fraction, for x >= a + 1.
double upper_gamma_cf(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kFpMin;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kGammaMaxIter; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = b + an / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kGammaEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double upper_regularized_gamma(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0)) {
    throw std::invalid_argument("incomplete gamma: require a > 0 and x >= 0");
  }
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - lower_gamma_series(a, x);
  return upper_gamma_cf(a, x);
}

// ---- Limiting laws ----

InvGammaSpec dufresne_distribution(const DufresneSpec& spec) {
  if (!(spec.a > 0.0)) {
    throw std::invalid_argument("exponential functional law: a must be positive");
  }
  if (!(spec.b > 0.0)) {
    throw std::invalid_argument("exponential functional law: b must be positive");
  }
  const double asq = a_squared(spec);
  return InvGammaSpec{2.0 * spec.b / asq, 2.0 / asq};
}

TheoremLimit theorem_limit_reflection_sync(double alpha_sq) {
  if (!(alpha_sq > 1.0 && alpha_sq < 2.0)) {
    throw std::domain_error(
        "reflection-synchronous limit: alpha^2 must lie strictly in (1, 2)");
  }
  TheoremLimit out;
  out.spec.a = 2.0 * std::sqrt(2.0 + alpha_sq);
  out.spec.b = 2.0 - alpha_sq;
  out.spec.a_sq = 4.0 * (2.0 + alpha_sq);
  const double index = 2.0 * out.spec.b / out.spec.a_sq;
  out.stated = InvGammaSpec{index, 2.0 / (2.0 + alpha_sq)};
  out.composed = InvGammaSpec{index, 1.0 / (8.0 * (2.0 + alpha_sq))};
  return out;
}

DufresneSpec limit_params_rotation(double alpha_sq, double beta) {
  if (!(beta >= 0.0)) {
    throw std::domain_error("rotation limit: beta must be nonnegative");
  }
  if (!(alpha_sq >= beta + 1.0)) {
    throw std::domain_error("rotation limit: alpha^2 must be at least beta + 1");
  }
  if (!(alpha_sq < 2.0 * beta + 2.0)) {
    throw std::domain_error("rotation limit: alpha^2 must be below 2 beta + 2");
  }
  const double b = 2.0 * beta + 2.0 - alpha_sq;
  const double asq = 4.0 * (2.0 - 2.0 * beta + alpha_sq + 0.5 * beta * beta);
  if (!(asq > 0.0)) {
    throw std::domain_error("rotation limit: diffusion coefficient must be positive");
  }
  return DufresneSpec{std::sqrt(asq), b, asq};
}

// ---- Inverse Gamma ----

double inv_gamma_cdf(const InvGammaSpec& spec, double x) {
  if (!(spec.index > 0.0) || !(spec.scale > 0.0)) {
    throw std::invalid_argument("inverse gamma: index and scale must be positive");
  }
  if (!(x > 0.0)) return 0.0;
  if (std::isinf(x)) return 1.0;
  return upper_regularized_gamma(spec.index, spec.scale / x);
}

double inv_gamma_sample(const InvGammaSpec& spec, std::mt19937_64& rng) {
  if (!(spec.index > 0.0) || !(spec.scale > 0.0)) {
    throw std::invalid_argument("inverse gamma: index and scale must be positive");
  }
  std::gamma_distribution<double> gamma(spec.index, 1.0);
  const double g = gamma(rng);
  return spec.scale / g;  // g == 0 underflow maps to +inf, which is honest
}

// ---- Monte Carlo oracle for the exponential functional ----

double mc_exponential_functional(const DufresneSpec& spec, double dt,
                                 std::mt19937_64& rng) {
  if (!(spec.b > 0.0)) {
    throw std::invalid_argument("exponential functional: b must be positive");
  }
  if (!(dt > 0.0)) {
    throw std::invalid_argument("exponential functional: dt must be positive");
  }
  if (spec.a == 0.0) return 1.0 / spec.b;  // integral is deterministic

  const ZigguratNormal& zig = ziggurat();
  const double sdt = std::sqrt(dt);
  const double drift = -spec.b * dt;
  double log_factor = 0.0;  // G = a B_t - b t
  double total = 0.0;
  for (std::uint64_t step = 0; step < 2000000000ULL; ++step) {
    const double weight = std::exp(log_factor);
    total += weight * dt;
    if (weight <= 1e-6 * spec.b * total) break;
    log_factor += drift + spec.a * sdt * zig(rng);
    if (!std::isfinite(total)) return std::numeric_limits<double>::infinity();
  }
  return total;
}

// ---- Kolmogorov-Smirnov ----

KsResult ks_statistic(std::vector<double> samples,
                      const std::function<double(double)>& cdf) {
  const std::size_t n = samples.size();
  if (n < 20) {
    throw std::invalid_argument("ks statistic: need at least 20 samples");
  }
  std::sort(samples.begin(), samples.end());
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = cdf(samples[i]);
    if (!(f >= 0.0 && f <= 1.0)) {
      throw std::invalid_argument("ks statistic: cdf returned a value outside [0, 1]");
    }
    d = std::max(d, f - static_cast<double>(i) / static_cast<double>(n));
    d = std::max(d, static_cast<double>(i + 1) / static_cast<double>(n) - f);
  }
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  double p = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = 2.0 * std::exp(-2.0 * lambda * lambda * j * j);
    p += (j % 2 == 1) ? term : -term;
  }
  p = std::min(1.0, std::max(0.0, p));
  return KsResult{d, p};
}

// ---- Hill tail index ----

TailIndexEstimate tail_index_estimate(const std::vector<double>& samples,
                                      double k_fraction) {
  if (!(k_fraction > 0.0 && k_fraction <= 0.5)) {
    throw std::invalid_argument("tail index: k_fraction must lie in (0, 0.5]");
  }
  std::vector<double> finite;
  finite.reserve(samples.size());
  for (double s : samples) {
    if (!std::isfinite(s)) continue;  // +inf sentinels carry no tail shape
    if (!(s > 0.0)) {
      throw std::invalid_argument("tail index: samples must be positive");
    }
    finite.push_back(s);
  }
  const std::size_t n = finite.size();
  const int k = static_cast<int>(k_fraction * static_cast<double>(n));
  if (k < 2 || static_cast<std::size_t>(k) >= n) {
    throw std::invalid_argument("tail index: too few samples for the requested fraction");
  }
  std::sort(finite.begin(), finite.end());
  const double log_ref = std::log(finite[n - k - 1]);
  double denom = 0.0;
  for (std::size_t i = n - k; i < n; ++i) {
    denom += std::log(finite[i]) - log_ref;
  }
  if (!(denom > 0.0)) {
    throw std::invalid_argument("tail index: degenerate upper order statistics");
  }
  const double kappa = static_cast<double>(k) / denom;
  return TailIndexEstimate{kappa, kappa / std::sqrt(static_cast<double>(k)), k};
}

}  // namespace coupling
