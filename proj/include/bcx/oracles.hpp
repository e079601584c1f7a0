#pragma once

#include <cstdint>
#include <string>

#include "bcx/array_io.hpp"

namespace bcx {

// Outcome of one numerical oracle: the measured value, the bound it is held
// to and per-case detail for the report.
struct OracleResult {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool passed = false;
    json details = json::object();
};

json to_json(const OracleResult& r);

// max over `count` random Dirichlet problems on the disk of
// ||u - (w + psi)|| / ||u|| with psi the harmonic extension.
OracleResult superposition_oracle(std::uint64_t seed, int count = 16);

// max over `count` random (psi1, psi2, lambda) of the deviation of
// w(lambda psi1 + (1 - lambda) psi2) from the same blend of w(psi1), w(psi2).
OracleResult affinity_oracle(std::uint64_t seed, int count = 16);

// Manufactured sin(pi x) sin(pi y) on the square at 17/33/65 nodes per side;
// value is the smallest observed L2 order.
OracleResult convergence_oracle();

// Harmonic extension of x and x^2 - y^2 on both geometries; value is the
// worst relative L2 error at the finest mesh.
OracleResult harmonic_oracle();

// End-to-end gradient check of learned extender + core + loss in float64 on a
// 30-node mesh, plus the individual primitives.
OracleResult gradcheck_oracle(std::uint64_t seed);

}  // namespace bcx
