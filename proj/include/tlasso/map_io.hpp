#pragma once

#include <cstdint>
#include <string>

#include "tlasso/transport_admm.hpp"

namespace tlasso {

// Written alongside a fitted map; not needed to apply it.
struct TrainingMetadata {
  int n_train = 0;
  std::uint64_t seed = 0;
  double rho = 0.0;
};

// Versioned JSON envelope: basis descriptor (dim, order, family, rate, index
// list), row-major coefficients, lambda, sigma2, fit report summary and
// training metadata. Doubles round-trip exactly.
std::string map_to_json(const TransportMap& map, const TrainingMetadata& meta = {});
TransportMap map_from_json(const std::string& text, TrainingMetadata* meta = nullptr);

void save_map(const std::string& path, const TransportMap& map,
              const TrainingMetadata& meta = {});
TransportMap load_map(const std::string& path, TrainingMetadata* meta = nullptr);

}  // namespace tlasso
