#pragma once

// M/G/1 analysis with quantized (ceiling) service times: Pollaczek-Khinchine
// mean queue length, the M/M^D/1 closed form, the queue-length transform g(z)
// and the speed-up needed to compensate segmentation overhead.

#include <cmath>
#include <limits>
#include <stdexcept>

#include "cellq/quantize.hpp"

namespace cellq {

struct instability_error : std::domain_error {
  using std::domain_error::domain_error;
};

struct QueueModelParams {
  double lambda;                    // arrival rate, packets per cell time
  QuantizedMoments service;         // moments of Y = ceil(X)
  double quantized_load() const { return lambda * service.mean; }
};

// Mean customers in the system from the P-K formula with quantized service
// moments.  rho' = lambda * E(Y) must be below 1.
inline double pk_mean_customers(double lambda, const QuantizedMoments& m) {
  detail::require(lambda > 0.0, "pk_mean_customers: lambda must be positive");
  detail::require(m.mean >= 1.0, "pk_mean_customers: quantized mean below 1");
  const double rho = lambda * m.mean;
  if (rho >= 1.0)
    throw instability_error("pk_mean_customers: quantized load >= 1");
  return rho + rho * rho * (1.0 + m.variance / (m.mean * m.mean)) /
                   (2.0 * (1.0 - rho));
}

// M/M^D/1 (equivalently M/Geo/1) mean customers; mu is the rate of the
// underlying exponential service time.
inline double mm1q_mean_customers(double lambda, double mu) {
  detail::require(lambda > 0.0 && mu > 0.0,
                  "mm1q_mean_customers: rates must be positive");
  const double p = -std::expm1(-mu);  // 1 - e^{-mu}
  if (lambda >= p)
    throw instability_error("mm1q_mean_customers: lambda >= 1 - e^{-mu}");
  return lambda * (2.0 - lambda) / (2.0 * (p - lambda));
}

// Laplace transform of the quantized exponential service time evaluated at
// (1-z)*lambda; equals the geometric pmf sum  sum_k e^{-(1-z) lambda k} P(Y=k).
inline double laplace_W_mm1q(double lambda, double mu, double z) {
  detail::require(lambda > 0.0 && mu > 0.0,
                  "laplace_W_mm1q: rates must be positive");
  const double s = (1.0 - z) * lambda;
  const double denom = -std::expm1(-(s + mu));  // 1 - e^{-s-mu}
  if (std::fabs(denom) < 1e-15)
    throw std::domain_error("laplace_W_mm1q: evaluation at a pole");
  return -std::expm1(-mu) * std::exp(-s) / denom;
}

// P-K transform g(z) of the M/M^D/1 queue length distribution.  Evaluated in
// a cancellation-free form; the removable singularity at z = 1 is handled
// analytically (g(1) = 1).
inline double pk_transform_mm1q(double lambda, double mu, double z) {
  detail::require(lambda > 0.0 && mu > 0.0,
                  "pk_transform_mm1q: rates must be positive");
  const double p = -std::expm1(-mu);
  if (lambda >= p)
    throw instability_error("pk_transform_mm1q: quantized load >= 1");
  const double w = 1.0 - z;
  if (w == 0.0) return 1.0;
  const double emu = std::exp(mu);
  // denominator e^{mu-s} - (1-z) e^{-s} - z e^{mu}, rewritten as
  // e^{mu} (e^{-lambda w} - 1) + w (e^{mu} - e^{-lambda w}).
  const double a = std::expm1(-lambda * w);
  const double b = std::expm1(mu) - a;
  const double den = emu * a + w * b;
  if (std::fabs(den) < 1e-300)
    throw std::domain_error("pk_transform_mm1q: evaluation at a pole");
  const double num = w * std::exp(-lambda * w) * ((1.0 - lambda) * emu - 1.0);
  return num / den;
}

// Mean queue length from g'(1) in closed form.
inline double mean_from_transform(double lambda, double mu) {
  detail::require(lambda > 0.0 && mu > 0.0,
                  "mean_from_transform: rates must be positive");
  if (lambda >= -std::expm1(-mu))
    throw instability_error("mean_from_transform: quantized load >= 1");
  const double emu = std::exp(mu);
  return lambda * (lambda - 2.0) * emu / (2.0 - 2.0 * (1.0 - lambda) * emu);
}

// Speed-up needed so carried load equals offered load:
// sigma = mu / (1 - e^{-mu}) with mu = S / L.
inline double required_speedup(double packet_bytes, double cell_bytes) {
  detail::require(packet_bytes > 0.0 && cell_bytes > 0.0,
                  "required_speedup: sizes must be positive");
  const double mu = cell_bytes / packet_bytes;
  return mu / -std::expm1(-mu);
}

struct SegmentationScenario {
  double mean_packet_bytes;  // L
  double cell_bytes;         // S
  double utilization;        // offered link load, (0, 1]
};

struct ScenarioResult {
  double lambda;            // packets per cell time
  double mu;                // service rate of the underlying exponential
  double rho_quantized;     // lambda * E(Y)
  double mean_queue_length; // NaN when unstable
  double required_speedup;
  bool stable;
};

// One data point of the M/M^D/1 segmentation model for given (L, S, rho).
inline ScenarioResult segmentation_scenario_analysis(
    const SegmentationScenario& s) {
  detail::require(s.mean_packet_bytes > 0.0 && s.cell_bytes > 0.0,
                  "scenario: sizes must be positive");
  detail::require(s.utilization > 0.0 && s.utilization <= 1.0,
                  "scenario: utilization must be in (0,1]");
  const double ts = s.mean_packet_bytes / s.cell_bytes;
  const double mu = 1.0 / ts;
  const double lambda = s.utilization / ts;
  const double rho_q = lambda / -std::expm1(-mu);
  ScenarioResult r;
  r.lambda = lambda;
  r.mu = mu;
  r.rho_quantized = rho_q;
  r.required_speedup = required_speedup(s.mean_packet_bytes, s.cell_bytes);
  r.stable = rho_q < 1.0;
  r.mean_queue_length =
      r.stable ? mm1q_mean_customers(lambda, mu)
               : std::numeric_limits<double>::quiet_NaN();
  return r;
}

}  // namespace cellq
