#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "bcx/boundary.hpp"
#include "bcx/geometry.hpp"

namespace bcx {

using ScalarField = std::vector<double>;

struct CsrMatrix {
    std::size_t rows = 0;
    std::vector<std::int64_t> row_offsets;
    std::vector<std::int32_t> columns;
    std::vector<double> values;

    // y = A x
    void multiply(std::span<const double> x, std::span<double> y) const;
    double at(std::size_t row, std::size_t col) const;
    double max_asymmetry() const;
};

// Assembled system before elimination of the constrained (Dirichlet) nodes.
struct SparseSystem {
    CsrMatrix matrix;
    std::vector<double> rhs;
    std::vector<std::int32_t> constrained;
    std::vector<double> prescribed;
};

// P1 discretization of -lap u = f with per-node Dirichlet/Neumann/Robin data on
// the boundary loop. Boundary integrals use the trapezoidal rule per edge.
SparseSystem assemble_poisson(const Mesh& mesh, std::span<const double> f, const RawBoundarySpec& spec);

struct CgOptions {
    double tol = 1e-10;
    int max_iter = 20000;
};

struct CgResult {
    ScalarField solution;
    int iterations = 0;
    double relative_residual = 0.0;
};

// Jacobi-preconditioned conjugate gradients on the free nodes; constrained
// entries are copied from the prescribed values. Throws SolverError.
CgResult solve_cg_detailed(const SparseSystem& system, const CgOptions& options = {});
ScalarField solve_cg(const SparseSystem& system, double tol = 1e-10, int max_iter = 20000);

ScalarField solve_poisson(const Mesh& mesh, std::span<const double> f, const RawBoundarySpec& spec,
                          const CgOptions& options = {});

ScalarField harmonic_extension(const Mesh& mesh, std::span<const double> boundary_values,
                               const CgOptions& options = {});

// Solves for w with homogenized boundary data so that u = w + psi; psi must
// match gamma_D on Dirichlet nodes.
ScalarField solve_auxiliary(const Mesh& mesh, std::span<const double> f, const RawBoundarySpec& spec,
                            std::span<const double> psi, const CgOptions& options = {});

double superposition_check(const Mesh& mesh, std::span<const double> f, const RawBoundarySpec& spec,
                           std::span<const double> psi, const CgOptions& options = {});

double affinity_check(const Mesh& mesh, std::span<const double> f, const RawBoundarySpec& spec,
                      std::span<const double> psi1, std::span<const double> psi2, double lambda,
                      const CgOptions& options = {});

// Consistent-mass L2 norm of a nodal P1 field.
double l2_norm(const Mesh& mesh, std::span<const double> field);

// L2 distance between the P1 interpolant of `field` and `exact`, by a
// degree-5 triangle quadrature.
double l2_error(const Mesh& mesh, std::span<const double> field, const std::function<double(Point)>& exact);
double l2_norm(const Mesh& mesh, const std::function<double(Point)>& exact);

}  // namespace bcx
