#pragma once

#include "pgee/datagen.hpp"
#include "pgee/fit.hpp"

namespace bench {

// A simulated dataset: N clusters of 4 visits, 20% events, exchangeable rho = 0.2.
inline pgee::LongitudinalDataset dataset(std::size_t N, std::uint64_t rep = 0) {
  pgee::Scenario s;
  s.N = N;
  s.event_rate = 0.2;
  const double b0 = pgee::calibrate_intercept(s);
  return *pgee::generate_replicate(s, b0, 0, rep).data;
}

}  // namespace bench
