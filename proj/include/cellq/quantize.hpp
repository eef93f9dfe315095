#pragma once

// Quantized ("ceiling") service time distributions.
//
// Y = ceil(X) for a continuous positive service time X measured in cell
// times.  Closed-form moments are available for exponential, two-stage
// hyperexponential and two-stage Erlang X; everything else goes through the
// numerical quantizer (CDF differences on the integer grid).

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace cellq {

struct Exponential {
  double rate;  // mu
};

struct Hyperexp2 {
  double weight1, weight2;  // alpha1, alpha2; must sum to 1
  double rate1, rate2;
};

struct Erlang2 {
  double rate;  // common rate of both stages
};

struct GammaDist {
  double shape;  // alpha
  double scale;  // beta
};

using ContinuousDist = std::variant<Exponential, Hyperexp2, Erlang2, GammaDist>;

struct QuantizedMoments {
  double mean;      // E(Y), cell times; always >= 1
  double variance;  // Var(Y), cell times^2
};

// P(Y = k) for k = 1..probs.size(); mass beyond the truncation point is
// reported separately.  sum(probs) + tail_mass == 1 within 1e-12.
struct QuantizedPmf {
  std::vector<double> probs;
  double tail_mass = 0.0;

  double prob(std::size_t k) const {  // k is 1-based
    return (k >= 1 && k <= probs.size()) ? probs[k - 1] : 0.0;
  }
};

struct truncation_error : std::runtime_error {
  double achieved_tail;
  truncation_error(const std::string& what, double tail)
      : std::runtime_error(what), achieved_tail(tail) {}
};

namespace detail {

inline void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Regularized lower incomplete gamma P(a, x), series for x < a+1 and
// Lentz continued fraction otherwise.
inline double regularized_gamma_p(double a, double x) {
  require(a > 0.0 && x >= 0.0, "regularized_gamma_p: need a > 0, x >= 0");
  if (x == 0.0) return 0.0;
  const double log_pre = a * std::log(x) - x - std::lgamma(a);
  const int max_iter = 2000;
  const double eps = 1e-16;
  if (x < a + 1.0) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < max_iter; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::fabs(del) < std::fabs(sum) * eps)
        return sum * std::exp(log_pre);
    }
    throw std::runtime_error("regularized_gamma_p: series failed to converge");
  }
  // Continued fraction for Q(a, x); P = 1 - Q.
  const double fpmin = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / fpmin;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= max_iter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = b + an / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) return 1.0 - std::exp(log_pre) * h;
  }
  throw std::runtime_error("regularized_gamma_p: continued fraction failed");
}

// Adaptive Simpson quadrature, used as a fallback CDF route when the
// incomplete-gamma recurrences do not converge.
inline double adaptive_simpson(const std::function<double(double)>& f, double a,
                               double b, double fa, double fm, double fb,
                               double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::fabs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, tol * 0.5, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, tol * 0.5, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a,
                        double b, double tol) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 40);
}

inline double gamma_pdf(const GammaDist& g, double t) {
  if (t <= 0.0) return 0.0;
  return std::exp((g.shape - 1.0) * std::log(t) - t / g.scale -
                  g.shape * std::log(g.scale) - std::lgamma(g.shape));
}

}  // namespace detail

inline void validate(const ContinuousDist& dist) {
  std::visit(
      [](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Exponential>) {
          detail::require(d.rate > 0.0, "Exponential: rate must be positive");
        } else if constexpr (std::is_same_v<T, Hyperexp2>) {
          detail::require(d.rate1 > 0.0 && d.rate2 > 0.0,
                          "Hyperexp2: rates must be positive");
          detail::require(d.weight1 >= 0.0 && d.weight2 >= 0.0,
                          "Hyperexp2: weights must be non-negative");
          detail::require(std::fabs(d.weight1 + d.weight2 - 1.0) <= 1e-12,
                          "Hyperexp2: weights must sum to 1");
        } else if constexpr (std::is_same_v<T, Erlang2>) {
          detail::require(d.rate > 0.0, "Erlang2: rate must be positive");
        } else if constexpr (std::is_same_v<T, GammaDist>) {
          detail::require(d.shape > 0.0 && d.scale > 0.0,
                          "Gamma: shape and scale must be positive");
        }
      },
      dist);
}

inline double dist_mean(const ContinuousDist& dist) {
  validate(dist);
  return std::visit(
      [](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Exponential>) {
          return 1.0 / d.rate;
        } else if constexpr (std::is_same_v<T, Hyperexp2>) {
          return d.weight1 / d.rate1 + d.weight2 / d.rate2;
        } else if constexpr (std::is_same_v<T, Erlang2>) {
          return 2.0 / d.rate;
        } else {
          return d.shape * d.scale;
        }
      },
      dist);
}

inline double dist_variance(const ContinuousDist& dist) {
  validate(dist);
  return std::visit(
      [](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Exponential>) {
          return 1.0 / (d.rate * d.rate);
        } else if constexpr (std::is_same_v<T, Hyperexp2>) {
          const double m = d.weight1 / d.rate1 + d.weight2 / d.rate2;
          const double m2 = 2.0 * d.weight1 / (d.rate1 * d.rate1) +
                            2.0 * d.weight2 / (d.rate2 * d.rate2);
          return m2 - m * m;
        } else if constexpr (std::is_same_v<T, Erlang2>) {
          return 2.0 / (d.rate * d.rate);
        } else {
          return d.shape * d.scale * d.scale;
        }
      },
      dist);
}

inline double dist_cdf(const ContinuousDist& dist, double t) {
  validate(dist);
  if (t <= 0.0) return 0.0;
  return std::visit(
      [t](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Exponential>) {
          return -std::expm1(-d.rate * t);
        } else if constexpr (std::is_same_v<T, Hyperexp2>) {
          return -d.weight1 * std::expm1(-d.rate1 * t) -
                 d.weight2 * std::expm1(-d.rate2 * t);
        } else if constexpr (std::is_same_v<T, Erlang2>) {
          const double x = d.rate * t;
          return 1.0 - (1.0 + x) * std::exp(-x);
        } else {
          try {
            return detail::regularized_gamma_p(d.shape, t / d.scale);
          } catch (const std::runtime_error&) {
            const GammaDist g = d;
            return detail::integrate(
                [&g](double u) { return detail::gamma_pdf(g, u); }, 0.0, t,
                1e-12);
          }
        }
      },
      dist);
}

// --- closed-form moments of Y = ceil(X) ------------------------------------

inline QuantizedMoments ceil_exponential_moments(double mu) {
  detail::require(mu > 0.0, "ceil_exponential_moments: rate must be positive");
  const double q = std::exp(-mu);
  const double p = 1.0 - q;
  return {1.0 / p, q / (p * p)};
}

inline QuantizedMoments ceil_hyperexp2_moments(double w1, double w2, double mu1,
                                               double mu2) {
  validate(Hyperexp2{w1, w2, mu1, mu2});
  const double p1 = 1.0 - std::exp(-mu1);
  const double p2 = 1.0 - std::exp(-mu2);
  const double mean = w1 / p1 + w2 / p2;
  const double m2 = w1 * (2.0 - p1) / (p1 * p1) + w2 * (2.0 - p2) / (p2 * p2);
  return {mean, m2 - mean * mean};
}

inline QuantizedMoments ceil_erlang2_moments(double mu) {
  detail::require(mu > 0.0, "ceil_erlang2_moments: rate must be positive");
  const double q = std::exp(-mu);
  const double p = 1.0 - q;
  const double mean = ((mu - 1.0) * q + 1.0) / (p * p);
  const double var =
      ((mu + 1.0) * q - (mu - 1.0) * q * q * q - (mu * mu + 2.0) * q * q) /
      (p * p * p * p);
  return {mean, var};
}

// Moment generating function m(t) = E[e^{tY}] for Y = ceil(Erlang2(mu)).
// The geometric series behind it converges only for t < mu.
inline double erlang2_ceiling_mgf(double mu, double t) {
  detail::require(mu > 0.0, "erlang2_ceiling_mgf: rate must be positive");
  if (t >= mu)
    throw std::domain_error("erlang2_ceiling_mgf: diverges for t >= mu");
  const double x = std::exp(t - mu);
  const double emu = std::exp(mu);
  const double one_minus_x = 1.0 - x;
  return mu * (emu - 1.0) * x / (one_minus_x * one_minus_x) -
         (mu * emu - emu + 1.0) * x / one_minus_x;
}

// Smooth-distribution heuristic: E(Y) = E(X) + 1/2, Var(Y) = Var(X) - 1/12.
inline QuantizedMoments heuristic_moments(double mean_x, double var_x) {
  detail::require(mean_x > 0.0, "heuristic_moments: mean must be positive");
  if (var_x < 1.0 / 12.0)
    throw std::domain_error(
        "heuristic_moments: variance below 1/12, heuristic not applicable");
  return {mean_x + 0.5, var_x - 1.0 / 12.0};
}

// --- numerical quantization -------------------------------------------------

// probs[k] = F(k) - F(k-1), extended until the CDF tail drops below
// tail_epsilon.  Support grows by doubling, capped at 2^20 points.
inline QuantizedPmf quantize_general(const std::function<double(double)>& cdf,
                                     double tail_epsilon) {
  detail::require(tail_epsilon > 0.0 && tail_epsilon < 1.0,
                  "quantize_general: tail_epsilon must be in (0,1)");
  const std::size_t cap = std::size_t{1} << 20;
  std::size_t n = 16;
  while (1.0 - cdf(static_cast<double>(n)) >= tail_epsilon) {
    if (n >= cap)
      throw truncation_error(
          "quantize_general: tail tolerance unreachable within 2^20 points",
          1.0 - cdf(static_cast<double>(n)));
    n *= 2;
  }
  // Shrink back to the first point actually meeting the tolerance.
  std::size_t lo = 1, hi = n;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (1.0 - cdf(static_cast<double>(mid)) < tail_epsilon)
      hi = mid;
    else
      lo = mid + 1;
  }
  n = std::max<std::size_t>(lo, 1);

  QuantizedPmf pmf;
  pmf.probs.resize(n);
  double prev = cdf(0.0);
  for (std::size_t k = 1; k <= n; ++k) {
    const double cur = cdf(static_cast<double>(k));
    pmf.probs[k - 1] = std::max(cur - prev, 0.0);
    prev = cur;
  }
  pmf.tail_mass = std::max(1.0 - prev, 0.0);
  return pmf;
}

inline QuantizedPmf quantize_general(const ContinuousDist& dist,
                                     double tail_epsilon) {
  validate(dist);
  return quantize_general([&dist](double t) { return dist_cdf(dist, t); },
                          tail_epsilon);
}

inline QuantizedMoments pmf_moments(const QuantizedPmf& pmf) {
  double mean = 0.0;
  for (std::size_t k = 1; k <= pmf.probs.size(); ++k)
    mean += static_cast<double>(k) * pmf.probs[k - 1];
  double var = 0.0;
  for (std::size_t k = 1; k <= pmf.probs.size(); ++k) {
    const double d = static_cast<double>(k) - mean;
    var += d * d * pmf.probs[k - 1];
  }
  return {mean, var};
}

// Two-moment Gamma fit: alpha = (m/s)^2, beta = m/alpha.
inline GammaDist gamma_fit(double sample_mean, double sample_stddev) {
  detail::require(sample_mean > 0.0 && sample_stddev > 0.0,
                  "gamma_fit: mean and stddev must be positive");
  const double shape =
      (sample_mean / sample_stddev) * (sample_mean / sample_stddev);
  return {shape, sample_mean / shape};
}

}  // namespace cellq
