#ifndef VEDGE_CHANNEL_HPP_
#define VEDGE_CHANNEL_HPP_

#include <stdexcept>
#include <string>
#include <vector>

namespace vedge::channel {

// Input outside the domain on which a rate formula is defined.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct Interferer {
  double tx_power = 0.0;  // W
  double gain = 0.0;

  bool operator==(const Interferer&) const = default;
};

// Cellular uplink from the vehicle to a base station.
struct BsChannel {
  double bandwidth_hz = 1.0;
  double tx_power = 1.0;  // W
  double gain = 1.0;
  double noise_power = 1.0;  // W
  std::vector<Interferer> interferers;

  bool operator==(const BsChannel&) const = default;
};

// WLAN contention parameters shared by AP attachments and vehicle-to-vehicle
// links. `busy_collision` is carried for completeness; the rate expression
// does not use it.
struct ApChannel {
  int w_min = 31;          // minimum contention window, slots
  int max_backoff = 5;     // backoff stages
  double collision_prob = 0.0;
  double busy_success = 0.0;    // s
  double busy_collision = 0.0;  // s
  double payload = 1.0;         // bits
  int contenders = 1;

  bool operator==(const ApChannel&) const = default;
};

// Shannon rate w*log2(1 + S/(N + I)). With `as_printed` the literal
// variant w*log2((1 + S)/(N + I)) is returned instead, clamped at zero.
double bs_uplink_rate(const BsChannel& ch, bool as_printed = false);

// Probability a contending station transmits in a slot.
double ap_transmit_prob(int w_min, int max_backoff, double collision_prob);

// Saturation data rate of a WLAN attachment with `contenders` stations.
double ap_rate(const ApChannel& ch);

void validate(const BsChannel& ch);
void validate(const ApChannel& ch);

}  // namespace vedge::channel

#endif  // VEDGE_CHANNEL_HPP_
