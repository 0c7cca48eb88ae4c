#include "vedge/channel.hpp"

#include <cmath>

namespace vedge::channel {

void validate(const BsChannel& ch) {
  if (!(ch.bandwidth_hz > 0.0)) throw DomainError("bandwidth_hz must be positive");
  if (!(ch.noise_power > 0.0)) throw DomainError("noise_power must be positive");
  if (ch.tx_power < 0.0 || ch.gain < 0.0) throw DomainError("power and gain must be non-negative");
  for (const auto& u : ch.interferers) {
    if (u.tx_power < 0.0 || u.gain < 0.0) {
      throw DomainError("interferer power and gain must be non-negative");
    }
  }
}

void validate(const ApChannel& ch) {
  if (!(ch.collision_prob >= 0.0 && ch.collision_prob < 0.5)) {
    throw DomainError("collision_prob must lie in [0, 0.5)");
  }
  if (ch.w_min < 1) throw DomainError("w_min must be >= 1");
  if (ch.max_backoff < 0) throw DomainError("max_backoff must be >= 0");
  if (ch.contenders < 1) throw DomainError("contenders must be >= 1");
  if (!(ch.payload > 0.0)) throw DomainError("payload must be positive");
  if (ch.busy_success < 0.0 || ch.busy_collision < 0.0) {
    throw DomainError("busy times must be non-negative");
  }
}

double bs_uplink_rate(const BsChannel& ch, bool as_printed) {
  validate(ch);
  double interference = 0.0;
  for (const auto& u : ch.interferers) interference += u.tx_power * u.gain;
  const double signal = ch.tx_power * ch.gain;
  const double denom = ch.noise_power + interference;
  if (as_printed) {
    return std::max(0.0, ch.bandwidth_hz * std::log2((1.0 + signal) / denom));
  }
  return ch.bandwidth_hz * std::log2(1.0 + signal / denom);
}

double ap_transmit_prob(int w_min, int max_backoff, double collision_prob) {
  if (!(collision_prob >= 0.0 && collision_prob < 0.5)) {
    throw DomainError("collision_prob must lie in [0, 0.5)");
  }
  if (w_min < 1) throw DomainError("w_min must be >= 1");
  if (max_backoff < 0) throw DomainError("max_backoff must be >= 0");
  const double pc = collision_prob;
  const double w = static_cast<double>(w_min);
  const double num = 2.0 * (1.0 - 2.0 * pc);
  const double den =
      (1.0 - 2.0 * pc) * (w + 1.0) + pc * w * (1.0 - std::pow(2.0 * pc, max_backoff));
  return num / den;
}

double ap_rate(const ApChannel& ch) {
  validate(ch);
  const double pt = ap_transmit_prob(ch.w_min, ch.max_backoff, ch.collision_prob);
  const double h = static_cast<double>(ch.contenders);
  if (pt >= 1.0 && ch.contenders > 1) {
    throw DomainError("saturated channel: transmit probability 1 with several contenders");
  }
  const double idle = 1.0 - pt;
  // (1 - p_t)^(1 - h) is 1 when h == 1, including p_t == 1.
  const double idle_pow = ch.contenders == 1 ? 1.0 : std::pow(idle, 1.0 - h);
  const double bracket = idle_pow - (1.0 - pt - h * pt);
  const double den = idle * (1.0 + ch.busy_success) + bracket * pt;
  const double rate = h * pt * ch.payload / den;
  if (!std::isfinite(rate) || rate <= 0.0) {
    throw DomainError("WLAN rate is not positive and finite for these parameters");
  }
  return rate;
}

}  // namespace vedge::channel
