#pragma once

// Single table of run defaults shared by the library and the command line.

#include "fullstab/stabharness.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fullstab {

struct DefaultEntry {
  std::string flag;
  double value;
  std::string description;
};

/// Every tunable flag with its module default.
inline std::vector<DefaultEntry> default_table() {
  const CertifyOptions c;
  return {
      {"--eta", c.eta, "graph-ball radius for GUSOSC and the CRCQ probe"},
      {"--rho-v", c.rho_v, "localization radius in v"},
      {"--rho-p", c.rho_p, "localization radius in p"},
      {"--samples", static_cast<double>(c.samples), "GUSOSC graph samples"},
      {"--seed", static_cast<double>(c.seed), "random seed"},
      {"--tol-pd", c.tol_pd, "positive-definiteness threshold"},
      {"--tol-act", c.tol_act, "active-constraint tolerance"},
      {"--crcq-samples", static_cast<double>(c.crcq_samples), "CRCQ probe samples"},
      {"--grid-v", static_cast<double>(c.grid_v), "grid nodes per v axis"},
      {"--grid-p", static_cast<double>(c.grid_p), "grid nodes per p axis"},
      {"--random-points", static_cast<double>(c.random_points), "random localization points"},
  };
}

}  // namespace fullstab
